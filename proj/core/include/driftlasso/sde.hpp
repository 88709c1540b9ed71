#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "driftlasso/models.hpp"

namespace driftlasso {

struct SimConfig {
  double T = 20.0;
  int steps_per_unit = 100;  // uniform grid, delta = 1/steps_per_unit
  std::uint64_t seed = 0;
  double burn_in = 10.0;  // time units simulated and discarded before t=0

  // State at the start of the burn-in segment; origin when absent.
  std::optional<Vector> x0;

  // Retain Brownian increments. The theorem oracles need them; opt out only
  // to save the N*d doubles.
  bool keep_dw = true;

  // Linear-pull families b(x) = A x only: draw X_0 exactly from the
  // invariant law N(0, S) with A S + S A' = I, skipping burn-in.
  bool stationary_start = false;

  // A state component beyond this magnitude raises SimulationDiverged.
  double divergence_bound = 1e8;

  // Test hook: invoked once per step (burn-in included, global step index)
  // with the freshly drawn increment, which it may overwrite.
  std::function<void(std::size_t, Vector&)> noise_hook;
};

struct ObservedPath {
  Vector times;   // N+1 entries, uniform spacing
  Matrix states;  // (N+1) x d
  Matrix dw;      // N x d when retained, 0 x 0 otherwise

  // Generating parameter, set by simulate(). Oracles that compare against
  // the truth read it from here; imported paths leave it empty.
  std::optional<Vector> theta_true;

  int dim() const { return static_cast<int>(states.cols()); }
  int n_increments() const { return static_cast<int>(states.rows()) - 1; }
  bool has_dw() const { return dw.rows() > 0; }
  double delta() const;
  // Window length; subpaths keep the original clock, so this is
  // times(last) - times(first).
  double horizon() const;
};

// Euler-Maruyama path of dX = -b_theta(X) dt + dW on the uniform grid.
// Deterministic given (model, theta, cfg). The stored increments are
// recomputed as (X_{i+1} - X_i) + b_theta(X_i)*delta, in exactly that
// evaluation order, so the reconstruction identity is bit-exact.
ObservedPath simulate(const DriftModel& model, const Vector& theta, const SimConfig& cfg);

// Restriction of the path to [a, b] in the original clock. Endpoints are
// rounded to the nearest grid point; an empty window after rounding is a
// contract violation.
ObservedPath subpath(const ObservedPath& path, double a, double b);

// Stationary covariance of dX = -A X dt + dW: solves A S + S A' = I.
// Throws NumericalError when the solution is not positive definite, which
// is the practical test of A having spectrum in the right half-plane.
Matrix ou_stationary_covariance(const Matrix& A);

// Variance of the path average (1/T) int_0^T X_t dt for a stationary scalar
// linear pull with rate a: (a*T - 1 + exp(-a*T)) / (a^3 T^2).
double ou_time_average_variance(double a, double T);

// CSV with header t,x1,...,xd[,dw1,...,dwd]; one row per grid point, dW
// cells empty on the last row. Values printed with %.17g so a round trip
// reproduces every double exactly.
void write_path_csv(const ObservedPath& path, const std::string& file);
ObservedPath read_path_csv(const std::string& file);

}  // namespace driftlasso
