#pragma once

#include <stdexcept>
#include <string>

namespace emofuse {

// Error taxonomy. The CLI maps these onto process exit codes, everything
// else just propagates them.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file (bad line, bad token, bad binary magic).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally valid input violating a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Tensor / matrix dimensions incompatible with the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Bad run configuration (unknown variant, missing field, unresolvable path).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A required upstream artifact (manifest, checkpoint, embedding) is absent.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

// Fusion asked for a modality the utterance does not provide.
class MissingModalityError : public Error {
 public:
  using Error::Error;
};

// Training diverged or aborted (NaN loss and friends).
class TrainingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace emofuse
