#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "esgforge/tensor_map.hpp"

namespace esgforge {

/// Low-rank update for one targeted base matrix W (d x k):
///   W' = W + (alpha / r) * B A,  A: r x k,  B: d x r,  r <= min(d, k).
/// Factors are kept widened to f32; matrices are row-major.
struct LoraTarget {
    std::vector<float> a;  // r x k
    std::vector<float> b;  // d x r
    std::uint64_t rank = 0;
    std::uint64_t d = 0;
    std::uint64_t k = 0;
    float alpha = 0.f;  // defaults to rank, which reproduces the unscaled B*A update
};

class LoraAdapter {
public:
    /// Parses an adapter container: tensors named `<target>.lora_A` (r x k)
    /// and `<target>.lora_B` (d x r), with optional `lora_alpha` in
    /// `__metadata__` (applied to every target; defaults to each target's rank).
    static LoraAdapter from_map(const NamedTensorMap& map);

    void add_target(std::string base_name, LoraTarget t);

    bool empty() const noexcept { return targets_.empty(); }
    std::size_t size() const noexcept { return targets_.size(); }
    const std::vector<std::pair<std::string, LoraTarget>>& targets() const noexcept {
        return targets_;
    }
    const LoraTarget* find(std::string_view base_name) const;

    /// Serializes back to the adapter container layout.
    NamedTensorMap to_map() const;

private:
    std::vector<std::pair<std::string, LoraTarget>> targets_;
};

/// Merges the adapter into the base weights. Targeted tensors are widened to
/// f32, updated, and narrowed back to the base storage dtype; untargeted
/// tensors are byte-identical to the input. Throws on unknown target names or
/// (d, k) mismatches.
NamedTensorMap merge_lora(const NamedTensorMap& base, const LoraAdapter& adapter);

/// Same merge, written tensor-by-tensor in storage order so peak memory stays
/// at the largest single tensor. Atomic on completion.
void merge_lora_streamed(const NamedTensorMap& base, const LoraAdapter& adapter,
                         const std::string& out_path);

}  // namespace esgforge
