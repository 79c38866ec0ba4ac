#pragma once

#include <stdexcept>
#include <string>

namespace qtrain {

/// Invalid shapes, option combinations, or parameter-count mismatches.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A value outside its documented domain (bad index, coordinate out of range).
class DomainError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Unreadable or malformed dataset files.
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Checkpoint version, checksum, or truncation problems.
class CheckpointError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Training aborted because the loss or a parameter became non-finite or exploded.
class DivergenceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace qtrain
