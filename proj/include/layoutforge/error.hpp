#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace layoutforge {

/// Invalid input. `field` names the offending key path when one applies
/// (e.g. "sketch", "train.epochs", "components[3].w").
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message, std::string field = {})
      : std::runtime_error(message), field_(std::move(field)) {}

  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Configuration problems (CLI exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Dataset / input-file problems (CLI exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace layoutforge
