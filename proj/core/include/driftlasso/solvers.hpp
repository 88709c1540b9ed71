#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "driftlasso/likelihood.hpp"

namespace driftlasso {

struct SolverConfig {
  int max_iter = 10000;
  // Stop when the composite objective's relative change drops below tol AND
  // the stationarity residual is below tol * scale, scale = 1 + |F(init)|.
  double tol = 1e-8;
  double step_init = 1.0;
  double step_shrink = 0.5;           // in (0,1)
  double sufficient_decrease = 1e-4;  // accept F(cand) <= F(y) - c*||cand-y||^2/step
  bool acceleration = true;           // momentum, restarted on objective increase
  // Extra randomized starts around theta_init for non-convex landscapes;
  // the best final objective wins, ties to the earliest start.
  int multi_start = 1;
  std::uint64_t multi_start_seed = 0;
  double multi_start_radius = 1.0;

  void validate() const;
};

struct SolverResult {
  Vector theta_hat;
  std::vector<double> objective_trace;  // composite objective, entry 0 at init
  int iterations = 0;
  bool converged = false;
  // sup-norm violation of the subdifferential condition at theta_hat:
  // |grad_j + t_j sign(theta_j)| on the support, max(|grad_j| - t_j, 0) off.
  double stationarity_residual = std::numeric_limits<double>::infinity();
  double objective = std::numeric_limits<double>::infinity();
  double scale = 1.0;  // 1 + |objective at the initial point|
};

// sign(v) * max(|v| - t, 0); the proximal map of t*|.|. A non-finite t
// pins the output to zero (used for frozen coordinates).
double soft_threshold(double v, double t);

// Unpenalized minimization of L_T by backtracking (proximal) gradient
// descent. Non-convergence is reported via the flag, never thrown.
SolverResult fit_mle(const LikelihoodEvaluator& ev, const SolverConfig& cfg,
                     const Vector& theta_init);

// argmin L_T(theta) + lambda ||theta||_1 by proximal gradient with
// backtracking; returns a stationary point (global only for convex
// families). lambda = 0 reduces to fit_mle.
SolverResult fit_lasso(const LikelihoodEvaluator& ev, double lambda, const SolverConfig& cfg,
                       const Vector& theta_init);

// Weighted-l1 variant: per-coordinate threshold lambda / |pilot_j|^alpha.
// Coordinates with pilot_j = 0 are frozen at zero. Starts from the pilot.
SolverResult fit_adaptive_lasso(const LikelihoodEvaluator& ev, double lambda, double alpha,
                                const Vector& theta_pilot, const SolverConfig& cfg);

// ||grad L_T(0)||_inf: the smallest penalty for which 0 is stationary.
double lambda_max(const LikelihoodEvaluator& ev);

// Descending log-spaced grid from lam_max over the given number of decades.
// A nonpositive lam_max degenerates to the single point 0.
std::vector<double> default_lambda_grid(double lam_max, int count = 30, double decades = 3.0);

struct CvRow {
  double lambda = 0.0;
  double validation_loss = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
};

struct CvResult {
  double lambda0 = 0.0;
  std::vector<CvRow> table;  // descending lambda, one row per distinct value
  Vector theta_at_lambda0;   // training-window fit behind lambda0; warm-start
                             // for a full-window refit
};

// Fits along the descending grid on the training window [0, train_fraction]
// of the path (warm-started), scores each fit by the unpenalized likelihood
// on [validation_start_fraction, 1], and returns the minimizer. Ties go to
// the larger lambda, i.e. the sparser model. Fractions are of the window
// length, anchored at the path's own clock.
CvResult cross_validate_lambda(const ObservedPath& path, const DriftModel& model,
                               const std::vector<double>& lambda_grid, const SolverConfig& cfg,
                               double train_fraction = 0.8,
                               double validation_start_fraction = 0.9);

}  // namespace driftlasso
