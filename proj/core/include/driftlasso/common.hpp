#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace driftlasso {

inline constexpr const char* kVersion = "0.1.0";

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented precondition was violated by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// A run configuration is malformed or inconsistent. Maps to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A numeric procedure produced non-finite values or failed to make sense
// of its inputs. Maps to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// The Euler scheme left the finite range; carries the offending step index
// (counted from the start of the simulation, burn-in included).
class SimulationDiverged : public NumericalError {
 public:
  SimulationDiverged(std::size_t step, const std::string& what)
      : NumericalError(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw ContractViolation(what);
}

// Neumaier-compensated accumulator. Keeps long Riemann sums accurate enough
// for the 1e-10 identity checks with up to ~1e7 terms.
class KahanSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace driftlasso
