#pragma once

#include <stdexcept>
#include <string>

namespace acl {

enum class Err {
  ZeroVector,
  EmptyInput,
  DegenerateBatch,
  LabelOutOfRange,
  TooFewSamples,
  LengthMismatch,
  LabelMismatch,
  DimMismatch,
  StaleTrace,
  BadMagic,
  VersionMismatch,
  TruncatedFile,
  ShapeMismatch,
  TooShort,
  ConfigError,
  DataError,
  NumericFailure,
};

class AclError : public std::runtime_error {
 public:
  AclError(Err kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Err kind() const { return kind_; }

 private:
  Err kind_;
};

[[noreturn]] inline void raise(Err kind, const std::string& msg) { throw AclError(kind, msg); }

}  // namespace acl
