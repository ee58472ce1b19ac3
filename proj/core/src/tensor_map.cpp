#include "esgforge/tensor_map.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

namespace esgforge {

std::shared_ptr<const MappedFile> MappedFile::open(const std::string& path) {
    auto mf = std::shared_ptr<MappedFile>(new MappedFile());
    int fd = ::open(path.c_str(), O_RDONLY);
    if (fd < 0) throw Error("cannot open " + path);
    struct stat st{};
    if (::fstat(fd, &st) != 0) {
        ::close(fd);
        throw Error("cannot stat " + path);
    }
    mf->size_ = static_cast<std::size_t>(st.st_size);
    if (mf->size_ > 0) {
        void* p = ::mmap(nullptr, mf->size_, PROT_READ, MAP_PRIVATE, fd, 0);
        if (p != MAP_FAILED) {
            mf->data_ = static_cast<const std::byte*>(p);
            mf->mapped_ = true;
        } else {
            mf->fallback_.resize(mf->size_);
            std::size_t off = 0;
            while (off < mf->size_) {
                ssize_t n = ::pread(fd, mf->fallback_.data() + off, mf->size_ - off,
                                    static_cast<off_t>(off));
                if (n <= 0) {
                    ::close(fd);
                    throw Error("short read on " + path);
                }
                off += static_cast<std::size_t>(n);
            }
            mf->data_ = mf->fallback_.data();
        }
    }
    ::close(fd);
    return mf;
}

MappedFile::~MappedFile() {
    if (mapped_ && data_ != nullptr) {
        ::munmap(const_cast<std::byte*>(data_), size_);
    }
}

void NamedTensorMap::add_tensor(std::string name, DType dtype,
                                std::vector<std::uint64_t> shape,
                                std::span<const std::byte> bytes) {
    if (file_) throw Error("cannot append tensors to a file-backed map");
    if (index_.count(name)) throw Error("duplicate tensor name: " + name);

    TensorSpec s;
    s.name = std::move(name);
    s.dtype = dtype;
    s.shape = std::move(shape);
    const std::uint64_t expected = s.element_count() * dtype_width(dtype);
    if (bytes.size() != expected) {
        throw Error("tensor " + s.name + ": got " + std::to_string(bytes.size()) +
                    " bytes, shape requires " + std::to_string(expected));
    }
    s.begin = owned_.size();
    s.end = s.begin + expected;
    owned_.insert(owned_.end(), bytes.begin(), bytes.end());
    data_size_ = owned_.size();
    index_.emplace(s.name, specs_.size());
    specs_.push_back(std::move(s));
}

void NamedTensorMap::add_tensor_f32(std::string name, std::vector<std::uint64_t> shape,
                                    std::span<const float> values, DType dtype) {
    std::vector<std::byte> raw(values.size() * dtype_width(dtype));
    narrow_from_f32(dtype, values.data(), values.size(), raw.data());
    add_tensor(std::move(name), dtype, std::move(shape), raw);
}

NamedTensorMap NamedTensorMap::from_mapping(
    std::vector<TensorSpec> specs, std::shared_ptr<const MappedFile> file,
    std::size_t data_block_offset,
    std::vector<std::pair<std::string, std::string>> metadata) {
    NamedTensorMap m;
    m.specs_ = std::move(specs);
    m.file_ = std::move(file);
    m.file_offset_ = data_block_offset;
    m.metadata_ = std::move(metadata);
    m.data_size_ = m.file_->bytes().size() - data_block_offset;
    for (std::size_t i = 0; i < m.specs_.size(); ++i) {
        if (!m.index_.emplace(m.specs_[i].name, i).second) {
            throw Error("duplicate tensor name: " + m.specs_[i].name);
        }
    }
    return m;
}

std::span<const std::byte> NamedTensorMap::block() const noexcept {
    if (file_) return file_->bytes().subspan(file_offset_);
    return {owned_.data(), owned_.size()};
}

bool NamedTensorMap::contains(std::string_view name) const {
    return index_.find(std::string(name)) != index_.end();
}

const TensorSpec& NamedTensorMap::spec(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw Error("no such tensor: " + std::string(name));
    return specs_[it->second];
}

std::span<const std::byte> NamedTensorMap::tensor_bytes(const TensorSpec& s) const {
    return block().subspan(s.begin, s.byte_size());
}

std::vector<float> NamedTensorMap::tensor_f32(const TensorSpec& s) const {
    std::vector<float> out(s.element_count());
    widen_to_f32(s.dtype, tensor_bytes(s).data(), out.size(), out.data());
    return out;
}

std::vector<float> NamedTensorMap::tensor_f32(std::string_view name) const {
    return tensor_f32(spec(name));
}

const std::string* NamedTensorMap::metadata_value(std::string_view key) const {
    for (const auto& [k, v] : metadata_) {
        if (k == key) return &v;
    }
    return nullptr;
}

bool NamedTensorMap::equals(const NamedTensorMap& other) const {
    if (specs_.size() != other.specs_.size()) return false;
    if (metadata_ != other.metadata_) return false;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        const auto& a = specs_[i];
        const auto& b = other.specs_[i];
        if (a.name != b.name || a.dtype != b.dtype || a.shape != b.shape) return false;
        const auto ab = tensor_bytes(a);
        const auto bb = other.tensor_bytes(b);
        if (ab.size() != bb.size()) return false;
        if (std::memcmp(ab.data(), bb.data(), ab.size()) != 0) return false;
    }
    return true;
}

bool AlignmentReport::elementwise_compatible() const noexcept {
    if (!only_in_a.empty() || !only_in_b.empty()) return false;
    for (const auto& m : mismatched) {
        if (m.shape_differs) return false;
    }
    return true;
}

std::string AlignmentReport::to_string() const {
    std::ostringstream os;
    for (const auto& n : only_in_a) os << "only in a: " << n << '\n';
    for (const auto& n : only_in_b) os << "only in b: " << n << '\n';
    for (const auto& m : mismatched) os << "mismatch: " << m.name << " (" << m.detail << ")\n";
    return os.str();
}

namespace {
std::string shape_str(const std::vector<std::uint64_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(s[i]);
    }
    return out + "]";
}
}  // namespace

AlignmentReport validate_alignment(const NamedTensorMap& a, const NamedTensorMap& b) {
    AlignmentReport rep;
    for (const auto& sa : a.specs()) {
        if (!b.contains(sa.name)) {
            rep.only_in_a.push_back(sa.name);
            continue;
        }
        const auto& sb = b.spec(sa.name);
        AlignmentReport::Mismatch m;
        m.name = sa.name;
        if (sa.shape != sb.shape) {
            m.shape_differs = true;
            m.detail += "shape " + shape_str(sa.shape) + " vs " + shape_str(sb.shape);
        }
        if (sa.dtype != sb.dtype) {
            if (!m.detail.empty()) m.detail += "; ";
            m.dtype_differs = true;
            m.detail += std::string("dtype ") + std::string(dtype_name(sa.dtype)) + " vs " +
                        std::string(dtype_name(sb.dtype));
        }
        if (m.shape_differs || m.dtype_differs) rep.mismatched.push_back(std::move(m));
    }
    for (const auto& sb : b.specs()) {
        if (!a.contains(sb.name)) rep.only_in_b.push_back(sb.name);
    }
    return rep;
}

}  // namespace esgforge
