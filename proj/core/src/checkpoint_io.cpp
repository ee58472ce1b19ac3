#include "esgforge/checkpoint_io.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include <unistd.h>

#include <nlohmann/json.hpp>

namespace esgforge {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kMaxHeaderBytes = 256ull * 1024 * 1024;

std::uint64_t read_le_u64(const std::byte* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | std::to_integer<std::uint64_t>(p[i]);
    return v;
}

void write_le_u64(std::uint64_t v, char out[8]) {
    for (int i = 0; i < 8; ++i) {
        out[i] = static_cast<char>(v & 0xff);
        v >>= 8;
    }
}

}  // namespace

NamedTensorMap load_checkpoint(const std::string& path) {
    auto file = MappedFile::open(path);
    const auto bytes = file->bytes();

    if (bytes.size() < 8) {
        throw CheckpointError(path, bytes.size(), "file too small for 8-byte header length");
    }
    const std::uint64_t header_len = read_le_u64(bytes.data());
    if (header_len > kMaxHeaderBytes) {
        throw CheckpointError(path, 0, "header length " + std::to_string(header_len) +
                                           " exceeds sanity limit");
    }
    if (8 + header_len > bytes.size()) {
        throw CheckpointError(path, bytes.size(),
                              "truncated: header declares " + std::to_string(header_len) +
                                  " bytes, file holds " + std::to_string(bytes.size() - 8) +
                                  " past offset 8");
    }

    const char* hbegin = reinterpret_cast<const char*>(bytes.data() + 8);
    ordered_json header = ordered_json::parse(hbegin, hbegin + header_len, nullptr, false);
    if (header.is_discarded() || !header.is_object()) {
        throw CheckpointError(path, 8, "malformed JSON header");
    }

    const std::uint64_t data_size = bytes.size() - 8 - header_len;
    std::vector<TensorSpec> specs;
    std::vector<std::pair<std::string, std::string>> metadata;

    for (auto it = header.begin(); it != header.end(); ++it) {
        if (it.key() == "__metadata__") {
            if (!it.value().is_object()) {
                throw CheckpointError(path, 8, "__metadata__ is not an object");
            }
            for (auto mit = it.value().begin(); mit != it.value().end(); ++mit) {
                if (!mit.value().is_string()) {
                    throw CheckpointError(path, 8, "__metadata__ value for '" + mit.key() +
                                                       "' is not a string");
                }
                metadata.emplace_back(mit.key(), mit.value().get<std::string>());
            }
            continue;
        }
        const auto& entry = it.value();
        if (!entry.is_object() || !entry.contains("dtype") || !entry.contains("shape") ||
            !entry.contains("data_offsets")) {
            throw CheckpointError(path, 8, "tensor entry '" + it.key() + "' malformed");
        }
        TensorSpec s;
        s.name = it.key();
        if (!entry["dtype"].is_string() ||
            !parse_dtype(entry["dtype"].get<std::string>(), s.dtype)) {
            throw CheckpointError(path, 8, "tensor '" + s.name + "': unknown dtype " +
                                               entry["dtype"].dump());
        }
        if (!entry["shape"].is_array()) {
            throw CheckpointError(path, 8, "tensor '" + s.name + "': shape is not an array");
        }
        for (const auto& d : entry["shape"]) {
            if (!d.is_number_unsigned()) {
                throw CheckpointError(path, 8,
                                      "tensor '" + s.name + "': negative or non-integer dim");
            }
            s.shape.push_back(d.get<std::uint64_t>());
        }
        const auto& off = entry["data_offsets"];
        if (!off.is_array() || off.size() != 2 || !off[0].is_number_unsigned() ||
            !off[1].is_number_unsigned()) {
            throw CheckpointError(path, 8, "tensor '" + s.name + "': bad data_offsets");
        }
        s.begin = off[0].get<std::uint64_t>();
        s.end = off[1].get<std::uint64_t>();
        if (s.end < s.begin || s.end > data_size) {
            throw CheckpointError(path, 8 + header_len + s.begin,
                                  "tensor '" + s.name + "': range [" + std::to_string(s.begin) +
                                      "," + std::to_string(s.end) + ") outside data block of " +
                                      std::to_string(data_size) + " bytes");
        }
        const std::uint64_t expected = s.element_count() * dtype_width(s.dtype);
        if (s.byte_size() != expected) {
            throw CheckpointError(path, 8 + header_len + s.begin,
                                  "tensor '" + s.name + "': range holds " +
                                      std::to_string(s.byte_size()) + " bytes, shape needs " +
                                      std::to_string(expected));
        }
        specs.push_back(std::move(s));
    }

    // Overlap check over the declared ranges.
    std::vector<const TensorSpec*> order;
    order.reserve(specs.size());
    for (const auto& s : specs) order.push_back(&s);
    std::sort(order.begin(), order.end(),
              [](const TensorSpec* a, const TensorSpec* b) { return a->begin < b->begin; });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (order[i]->begin < order[i - 1]->end) {
            throw CheckpointError(path, 8 + header_len + order[i]->begin,
                                  "tensors '" + order[i - 1]->name + "' and '" +
                                      order[i]->name + "' overlap in the data block");
        }
    }

    return NamedTensorMap::from_mapping(std::move(specs), std::move(file),
                                        8 + static_cast<std::size_t>(header_len),
                                        std::move(metadata));
}

void save_checkpoint(const NamedTensorMap& map, const std::string& path) {
    // Refuse invariant violations before touching the filesystem.
    for (const auto& s : map.specs()) {
        const std::uint64_t expected = s.element_count() * dtype_width(s.dtype);
        if (s.byte_size() != expected) {
            throw Error("tensor '" + s.name + "': spec range inconsistent with shape");
        }
    }

    ordered_json header = ordered_json::object();
    if (!map.metadata().empty()) {
        ordered_json md = ordered_json::object();
        for (const auto& [k, v] : map.metadata()) md[k] = v;
        header["__metadata__"] = std::move(md);
    }
    std::uint64_t offset = 0;
    for (const auto& s : map.specs()) {
        ordered_json entry;
        entry["dtype"] = std::string(dtype_name(s.dtype));
        entry["shape"] = s.shape;
        entry["data_offsets"] = {offset, offset + s.byte_size()};
        header[s.name] = std::move(entry);
        offset += s.byte_size();
    }

    std::string header_text = header.dump();
    while (header_text.size() % 8 != 0) header_text.push_back(' ');  // align data block

    const fs::path target(path);
    const fs::path tmp =
        target.parent_path() /
        (target.filename().string() + ".tmp." + std::to_string(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        char lenbuf[8];
        write_le_u64(header_text.size(), lenbuf);
        out.write(lenbuf, 8);
        out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
        for (const auto& s : map.specs()) {
            const auto b = map.tensor_bytes(s);
            out.write(reinterpret_cast<const char*>(b.data()),
                      static_cast<std::streamsize>(b.size()));
        }
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error("rename to " + path + " failed: " + ec.message());
    }
}

struct CheckpointStreamWriter::Impl {
    fs::path target;
    fs::path tmp;
    std::ofstream out;
    std::vector<TensorSpec> specs;
    std::size_t next = 0;
    bool finished = false;
};

CheckpointStreamWriter::CheckpointStreamWriter(
    const std::string& path, std::vector<TensorSpec> specs,
    std::vector<std::pair<std::string, std::string>> metadata)
    : impl_(std::make_unique<Impl>()) {
    impl_->target = fs::path(path);
    impl_->tmp = impl_->target.parent_path() /
                 (impl_->target.filename().string() + ".tmp." + std::to_string(::getpid()));
    impl_->specs = std::move(specs);

    ordered_json header = ordered_json::object();
    if (!metadata.empty()) {
        ordered_json md = ordered_json::object();
        for (const auto& [k, v] : metadata) md[k] = v;
        header["__metadata__"] = std::move(md);
    }
    std::uint64_t offset = 0;
    for (auto& s : impl_->specs) {
        const std::uint64_t sz = s.element_count() * dtype_width(s.dtype);
        s.begin = offset;
        s.end = offset + sz;
        ordered_json entry;
        entry["dtype"] = std::string(dtype_name(s.dtype));
        entry["shape"] = s.shape;
        entry["data_offsets"] = {s.begin, s.end};
        header[s.name] = std::move(entry);
        offset += sz;
    }
    if (header.size() != impl_->specs.size() + (metadata.empty() ? 0u : 1u)) {
        throw Error("duplicate tensor name in stream writer specs");
    }

    std::string header_text = header.dump();
    while (header_text.size() % 8 != 0) header_text.push_back(' ');

    impl_->out.open(impl_->tmp, std::ios::binary | std::ios::trunc);
    if (!impl_->out) throw Error("cannot open " + impl_->tmp.string() + " for writing");
    char lenbuf[8];
    write_le_u64(header_text.size(), lenbuf);
    impl_->out.write(lenbuf, 8);
    impl_->out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
}

CheckpointStreamWriter::~CheckpointStreamWriter() {
    if (impl_ && !impl_->finished) {
        impl_->out.close();
        std::error_code ec;
        fs::remove(impl_->tmp, ec);
    }
}

void CheckpointStreamWriter::write_tensor(std::span<const std::byte> bytes) {
    if (impl_->next >= impl_->specs.size()) throw Error("stream writer: extra tensor payload");
    const auto& s = impl_->specs[impl_->next];
    if (bytes.size() != s.byte_size()) {
        throw Error("stream writer: tensor '" + s.name + "' expects " +
                    std::to_string(s.byte_size()) + " bytes, got " +
                    std::to_string(bytes.size()));
    }
    impl_->out.write(reinterpret_cast<const char*>(bytes.data()),
                     static_cast<std::streamsize>(bytes.size()));
    if (!impl_->out) throw Error("write failed for " + impl_->tmp.string());
    ++impl_->next;
}

void CheckpointStreamWriter::finish() {
    if (impl_->next != impl_->specs.size()) {
        throw Error("stream writer: " + std::to_string(impl_->specs.size() - impl_->next) +
                    " tensors not yet written");
    }
    impl_->out.flush();
    impl_->out.close();
    if (!impl_->out && impl_->specs.size() > 0) throw Error("flush failed");
    std::error_code ec;
    fs::rename(impl_->tmp, impl_->target, ec);
    if (ec) {
        fs::remove(impl_->tmp, ec);
        throw Error("rename to " + impl_->target.string() + " failed: " + ec.message());
    }
    impl_->finished = true;
}

}  // namespace esgforge
