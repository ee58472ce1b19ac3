#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "esgforge/dtype.hpp"

namespace esgforge {

/// Read-only mapping (or buffered copy, when mmap is unavailable) of a file.
class MappedFile {
public:
    static std::shared_ptr<const MappedFile> open(const std::string& path);
    ~MappedFile();

    MappedFile(const MappedFile&) = delete;
    MappedFile& operator=(const MappedFile&) = delete;

    std::span<const std::byte> bytes() const noexcept { return {data_, size_}; }

private:
    MappedFile() = default;
    const std::byte* data_ = nullptr;
    std::size_t size_ = 0;
    bool mapped_ = false;
    std::vector<std::byte> fallback_;
};

struct TensorSpec {
    std::string name;
    DType dtype = DType::F32;
    std::vector<std::uint64_t> shape;
    // Half-open byte range into the data block, in storage units.
    std::uint64_t begin = 0;
    std::uint64_t end = 0;

    std::uint64_t element_count() const noexcept {
        std::uint64_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }
    std::uint64_t byte_size() const noexcept { return end - begin; }

    bool operator==(const TensorSpec&) const = default;
};

/// Ordered collection of named tensors over one contiguous data block: the
/// in-memory form of a model checkpoint. Instances are immutable once built
/// (all weight arithmetic produces new maps) and safe to share across threads.
class NamedTensorMap {
public:
    NamedTensorMap() = default;

    /// Appends a tensor with raw storage bytes (builder form; owns the data).
    void add_tensor(std::string name, DType dtype, std::vector<std::uint64_t> shape,
                    std::span<const std::byte> bytes);

    /// Appends a tensor from f32 values, narrowing to `dtype` storage.
    void add_tensor_f32(std::string name, std::vector<std::uint64_t> shape,
                        std::span<const float> values, DType dtype = DType::F32);

    /// Adopts externally parsed specs over a mapped data block (loader form).
    static NamedTensorMap from_mapping(std::vector<TensorSpec> specs,
                                       std::shared_ptr<const MappedFile> file,
                                       std::size_t data_block_offset,
                                       std::vector<std::pair<std::string, std::string>> metadata);

    std::size_t size() const noexcept { return specs_.size(); }
    bool empty() const noexcept { return specs_.empty(); }
    const std::vector<TensorSpec>& specs() const noexcept { return specs_; }

    bool contains(std::string_view name) const;
    const TensorSpec& spec(std::string_view name) const;
    const TensorSpec& spec_at(std::size_t i) const { return specs_.at(i); }

    std::span<const std::byte> tensor_bytes(const TensorSpec& s) const;
    std::span<const std::byte> tensor_bytes(std::string_view name) const {
        return tensor_bytes(spec(name));
    }

    /// Widened f32 copy of one tensor.
    std::vector<float> tensor_f32(std::string_view name) const;
    std::vector<float> tensor_f32(const TensorSpec& s) const;

    const std::vector<std::pair<std::string, std::string>>& metadata() const noexcept {
        return metadata_;
    }
    void set_metadata(std::vector<std::pair<std::string, std::string>> md) {
        metadata_ = std::move(md);
    }
    const std::string* metadata_value(std::string_view key) const;

    std::uint64_t data_block_size() const noexcept { return data_size_; }

    /// Spec-, metadata- and byte-level equality.
    bool equals(const NamedTensorMap& other) const;

private:
    std::span<const std::byte> block() const noexcept;

    std::vector<TensorSpec> specs_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::pair<std::string, std::string>> metadata_;
    std::uint64_t data_size_ = 0;

    // Exactly one of these backs the data block.
    std::vector<std::byte> owned_;
    std::shared_ptr<const MappedFile> file_;
    std::size_t file_offset_ = 0;
};

/// Findings from comparing two maps' key sets, shapes and dtypes.
struct AlignmentReport {
    struct Mismatch {
        std::string name;
        std::string detail;  // human-readable shape/dtype difference
        bool shape_differs = false;
        bool dtype_differs = false;
    };
    std::vector<std::string> only_in_a;
    std::vector<std::string> only_in_b;
    std::vector<Mismatch> mismatched;

    bool empty() const noexcept {
        return only_in_a.empty() && only_in_b.empty() && mismatched.empty();
    }
    /// True when elementwise arithmetic is possible: key sets and shapes agree.
    /// dtype differences do not block arithmetic (widening rule).
    bool elementwise_compatible() const noexcept;
    std::string to_string() const;
};

AlignmentReport validate_alignment(const NamedTensorMap& a, const NamedTensorMap& b);

}  // namespace esgforge
