#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace esgforge {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Checkpoint container parse/validation failure, carrying the file and the
/// byte offset the problem was detected at.
class CheckpointError : public Error {
public:
    CheckpointError(std::string path, std::uint64_t byte_offset, const std::string& what)
        : Error(path + " @ byte " + std::to_string(byte_offset) + ": " + what),
          path_(std::move(path)),
          byte_offset_(byte_offset) {}

    const std::string& path() const noexcept { return path_; }
    std::uint64_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::string path_;
    std::uint64_t byte_offset_;
};

/// Tensor key sets / shapes do not line up for elementwise arithmetic.
class AlignmentError : public Error {
public:
    explicit AlignmentError(const std::string& what) : Error(what) {}
};

/// Bad user-supplied configuration or CLI arguments.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Remote backend (generation or embedding) failure after retry budget.
class BackendError : public Error {
public:
    explicit BackendError(const std::string& what) : Error(what) {}
};

}  // namespace esgforge
