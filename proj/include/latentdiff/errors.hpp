#pragma once

#include <stdexcept>
#include <string>

namespace latentdiff {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// A NaN/Inf showed up where a finite value is required.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage was asked to run before the artifact it consumes exists.
class PrerequisiteError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage failed; the message names the stage and the cause.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause, bool missing_prerequisite)
      : Error("stage '" + stage + "' failed: " + cause),
        stage_(std::move(stage)),
        missing_prerequisite_(missing_prerequisite) {}

  const std::string& stage() const { return stage_; }
  bool missing_prerequisite() const { return missing_prerequisite_; }

 private:
  std::string stage_;
  bool missing_prerequisite_ = false;
};

}  // namespace latentdiff
