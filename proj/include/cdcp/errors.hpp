#pragma once

#include <stdexcept>
#include <string>

namespace cdcp {

// Invalid argument values (sizes, capacities, rates).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A plan that references customers outside the instance or is malformed.
struct StructuralError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// An operation's documented precondition does not hold.
struct PreconditionError : std::logic_error {
  using std::logic_error::logic_error;
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// backward() on a graph that was already released.
struct LifecycleError : std::logic_error {
  using std::logic_error::logic_error;
};

// Every candidate of some softmax row is masked out.
struct DegenerateMaskError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A replayed rollout diverged from the recorded actions.
struct DeterminismError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A checkpoint written by an incompatible format version.
struct VersionError : FormatError {
  using FormatError::FormatError;
};

// Inputs that belong to different problem sizes.
struct SizeMismatchError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace cdcp
