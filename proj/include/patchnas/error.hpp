#pragma once

#include <stdexcept>
#include <string>

namespace patchnas {

// Invalid architecture configs, unknown metric names, bad CLI arguments.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// A feature source could not deliver tensors, or delivered the wrong ones.
class BackendError : public std::runtime_error {
 public:
  explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent on-disk data (manifests, masks, trial logs).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace patchnas
