#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace towerlimits {

struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InsufficientDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct QuadratureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Orbit failed to re-enter the inducing set within the iterate cap.
struct NonreturnError : std::runtime_error {
  std::uint64_t steps_taken;
  explicit NonreturnError(std::uint64_t steps)
      : std::runtime_error("orbit did not return within " + std::to_string(steps) + " iterates"),
        steps_taken(steps) {}
};

// Free flight exceeded the supplied time cap (infinite-horizon geometry).
struct HorizonEscapeError : std::runtime_error {
  double elapsed;
  explicit HorizonEscapeError(double t)
      : std::runtime_error("free flight exceeded cap after t=" + std::to_string(t)), elapsed(t) {}
};

// Partial sums of the transfer-operator series grew past the divergence guard.
struct NoGapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace towerlimits
