#pragma once

#include <stdexcept>
#include <string>

namespace tryw {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable or malformed input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Inputs whose shapes or sizes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Geometric configuration that admits no unique solution (e.g. collinear points).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Invalid noise schedule or non-finite denoiser output during sampling.
class SamplingError : public Error {
 public:
  using Error::Error;
};

// Job configuration rejected before any stage runs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Failure while talking to an external denoiser process.
class TransportError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage failed; carries the stage tag.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace tryw
