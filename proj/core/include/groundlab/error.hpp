#pragma once

#include <stdexcept>
#include <string>

namespace groundlab {

/// Base class for every error raised by the library. `kind()` is a stable,
/// machine-readable category used by the CLI when it reports failures as JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct SchemaError : Error {
  explicit SchemaError(const std::string& m) : Error("schema", m) {}
};

struct IntegrityError : Error {
  explicit IntegrityError(const std::string& m) : Error("integrity", m) {}
};

struct GenerationError : Error {
  explicit GenerationError(const std::string& m) : Error("generation", m) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& m) : Error("shape", m) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error("numeric", m) {}
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& m) : Error("invalid_argument", m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io", m) {}
};

}  // namespace groundlab
