#pragma once

#include <stdexcept>
#include <string>

namespace aqis {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model or protocol parameters.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Iteration caps, quadrature refinement or integrator gates that failed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Vector/matrix shapes or basis tags that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A requested state cannot be built (e.g. it would cross the critical energy).
class StateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace aqis
