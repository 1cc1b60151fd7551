#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace edsh {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand dimensions do not line up.
struct ShapeError : Error {
  using Error::Error;
};

// A value-level precondition was violated (bad fraction, empty input, ...).
struct ArgumentError : Error {
  using Error::Error;
};

// The operating system refused a file operation (open/read/write).
struct IoError : Error {
  using Error::Error;
};

// A binary file is malformed; offset is the byte position where the
// problem was detected.
struct FormatError : Error {
  std::size_t offset;
  FormatError(const std::string& msg, std::size_t byte_offset)
      : Error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
};

// A factorization hit a non-positive pivot.
struct SingularError : Error {
  std::size_t pivot_index;
  SingularError(const std::string& msg, std::size_t pivot)
      : Error(msg + " (pivot " + std::to_string(pivot) + ")"),
        pivot_index(pivot) {}
};

// Synthetic data generation could not satisfy its separation constraints.
struct GenerationError : Error {
  using Error::Error;
};

// Training produced a non-finite objective.
struct TrainingError : Error {
  std::size_t iteration;
  TrainingError(const std::string& msg, std::size_t iter)
      : Error(msg + " (iteration " + std::to_string(iter) + ")"),
        iteration(iter) {}
};

// A matrix handed to the bit packer had an entry other than +1/-1.
struct EncodingError : Error {
  std::size_t row, col;
  EncodingError(const std::string& msg, std::size_t r, std::size_t c)
      : Error(msg + " at (" + std::to_string(r) + ", " + std::to_string(c) + ")"),
        row(r),
        col(c) {}
};

}  // namespace edsh
