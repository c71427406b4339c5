#pragma once

#include <stdexcept>
#include <string>

namespace relstab {

// Bad configuration: incompatible layer chain, invalid spec values, unknown
// explainer names. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad caller-supplied data: label out of range, shape mismatch, empty set.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Broken internal contract (tape produced by a different parameter set, a
// solver that should never fail).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Filesystem and file-format failures. The CLI maps this to exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FormatFault {
  kBadMagic,          // "not a checkpoint" / not a P5 PGM
  kVersionMismatch,
  kTruncated,
  kMalformedHeader,
  kUnsupportedDepth,  // PGM maxval other than 65535
};

// A file was opened but its contents violate the expected binary format.
class FormatError : public IoError {
 public:
  FormatError(FormatFault fault, const std::string& what)
      : IoError(what), fault_(fault) {}
  FormatFault fault() const { return fault_; }

 private:
  FormatFault fault_;
};

}  // namespace relstab
