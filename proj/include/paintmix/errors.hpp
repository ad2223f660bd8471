#pragma once

#include <stdexcept>
#include <string>

namespace paintmix {

// Base for every error the library raises. The CLI maps the concrete
// subclasses onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed user input: hex codes, config/job files, flag values.
class ParseError : public Error {
 public:
  using Error::Error;
};

// File system and image codec failures. The message always carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

// Shapes that do not line up (image vs mask, latent vs patch size, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Overlapping region masks and other composition contract violations.
class CompositionError : public Error {
 public:
  using Error::Error;
};

// A solver produced a non-finite latent.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int step) : Error(what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

// Attention tape does not fit the denoiser or the step being injected.
class TapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace paintmix
