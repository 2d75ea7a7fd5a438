#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace whittaker {

// Base of every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input: inconsistent grids, wrong sizes, out-of-range parameters.
struct ValidationError : Error {
  using Error::Error;
};

// A simulated value left the representable range even with drift clamping.
struct NonFiniteError : Error {
  NonFiniteError(std::size_t step_, std::size_t index_)
      : Error("non-finite value at step " + std::to_string(step_) + ", particle " +
              std::to_string(index_)),
        step(step_),
        index(index_) {}

  std::size_t step;
  std::size_t index;
};

// A closed-form bound was requested outside the region where it is defined.
struct DomainError : Error {
  using Error::Error;
};

// No driver reproduces the requested path under the reflection map.
struct InfeasibleError : Error {
  using Error::Error;
};

struct EmptySampleError : Error {
  using Error::Error;
};

// Fewer than two usable points in a regression.
struct DegenerateFitError : Error {
  using Error::Error;
};

}  // namespace whittaker
