#pragma once

#include <string>

#include "esgforge/tensor_map.hpp"

namespace esgforge {

// Checkpoint container format, bit-exact:
//   [0, 8)    little-endian u64 header length N
//   [8, 8+N)  JSON object: tensor name -> {"dtype", "shape", "data_offsets"},
//             plus an optional "__metadata__" string-to-string table that is
//             preserved verbatim across load/save
//   [8+N, .)  raw little-endian data block; data_offsets index into it
//
// dtype is one of "F32", "F16", "BF16". Quantized dtypes and sharded
// multi-file checkpoints are out of scope.

/// Parses a container file. The data block is memory-mapped, so loading an
/// 8 GB checkpoint does not materialize it. Throws CheckpointError (with the
/// offending byte offset) on truncation, malformed headers, overlapping
/// ranges or unknown dtypes.
NamedTensorMap load_checkpoint(const std::string& path);

/// Writes `map` so that load_checkpoint reproduces it byte-for-byte
/// (same spec order, same metadata, same tensor bytes; offsets are re-packed
/// contiguously). The write is atomic: temp file in the target directory,
/// then rename. Invariant violations are refused before any write.
void save_checkpoint(const NamedTensorMap& map, const std::string& path);

/// Incremental writer for checkpoint-sized outputs: the header is fixed from
/// the declared specs up front, then tensor payloads are streamed one at a
/// time in declaration order. finish() makes the file visible atomically.
class CheckpointStreamWriter {
public:
    CheckpointStreamWriter(const std::string& path, std::vector<TensorSpec> specs,
                           std::vector<std::pair<std::string, std::string>> metadata);
    ~CheckpointStreamWriter();

    CheckpointStreamWriter(const CheckpointStreamWriter&) = delete;
    CheckpointStreamWriter& operator=(const CheckpointStreamWriter&) = delete;

    /// Appends the payload for the next declared tensor; size must match.
    void write_tensor(std::span<const std::byte> bytes);
    void finish();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace esgforge
