#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "driftlasso/likelihood.hpp"

namespace driftlasso {

// The cone C(s, c): vectors whose l1 mass concentrates on their s
// largest-magnitude coordinates up to the slack factor (1+c).
struct ConeSpec {
  int s = 1;
  double c = 0.0;
};

// True iff ||x||_1 <= (1+c) ||x restricted to I_s(x)||_1, where I_s(x)
// holds the s largest-magnitude coordinates, ties to the lowest index.
// x = 0 is outside the cone's domain and a contract violation.
bool cone_membership(const Vector& x, const ConeSpec& spec);

struct CheckResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

// Prediction-error consequence of penalized minimization:
//   ||b_hat - b_true||_T^2 <= ||b_comp - b_true||_T^2
//                           + 2 G(comp, hat) + 2 lambda (||comp||_1 - ||hat||_1),
// checked within tol * (1 + |lhs| + |rhs|). An exact minimizer satisfies it
// identically, so a failure points at the solver or the discretization.
// Needs a generated path (retained dW and theta_true).
CheckResult basic_inequality_check(const LikelihoodEvaluator& ev, const Vector& theta_hat,
                                   const Vector& theta, double lambda, double tol = 1e-9);

// Scalar inputs of the bound calculators. The entropy and diameter numbers
// (Delta1, Delta2, gamma_43, gamma_2) and the concentration constant C are
// user inputs; computing them is out of scope by design. c0 < 0 or
// eps0 < 0 select the defaults 3 + 4/gamma and eps.
struct BoundInputs {
  double s0 = 1;
  double p = 1;
  double T = 1;
  double lambda = 0.0;
  double gamma = 2.0;
  double k = 1.0;
  double l_min = 1.0;
  double eps = 0.05;
  double C = 1.0;
  double L = 16.0 + std::pow(2.0, 23.0 / 4.0);
  double Delta1 = 1.0;
  double Delta2 = 1.0;
  double gamma_43 = 0.0;
  double gamma_2 = 0.0;
  double c0 = -1.0;
  double eps0 = -1.0;
  double M_inf = 1.0;
};

// Sparse-competitor bound with slack gamma:
//   lhs = ||b_hat - b_true||_T^2,
//   rhs = (1+gamma) ||b_comp - b_true||_T^2 + 4 (gamma+2)^2 s0 lambda^2 / (gamma k^2).
// holds is a per-trial event; drivers report its frequency against 1 - 2 eps.
CheckResult oracle_inequality_check(const LikelihoodEvaluator& ev, const Vector& theta_hat,
                                    const Vector& theta, const BoundInputs& in);

struct ErrorBounds {
  // Generic-k forms.
  double l2_sq = 0.0;  //  4 (g+2)^2 s0 lambda^2 / (g k^4)
  double l1 = 0.0;     //  8 (g+1)(g+2) s0 lambda / (g^{3/2} k^2)
  double l0 = 0.0;     // 16 M_inf (g+1)(g+2) s0 / (g^{3/2} k^2)
  // Variants with k = l_min / 2 substituted.
  double cor_l2_sq = 0.0;  // 64 (g+2)^2 s0 lambda^2 / (g l_min^4)
  double cor_l1 = 0.0;     // 32 (g+1)(g+2) s0 lambda / (g^{3/2} l_min^2)
  double cor_l0 = 0.0;     // 64 M_inf (g+1)(g+2) s0 / (g^{3/2} l_min^2)
};
ErrorBounds error_bound_calculators(const BoundInputs& in);

struct RateConstants {
  double lambda1 = 0.0;
  double T1 = 0.0;      // exp(log_T1); +inf when it overflows double
  double log_T1 = 0.0;  // always finite; the T1 formula can be astronomically large
};
// Direct arithmetic transcription of the penalty-level and horizon
// thresholds:
//   lambda1 = 4 L Delta1 max( sqrt((log(2Lp) + log(2/eps)) / (2T)),
//                             (((2C)^{1/3}/6) (log(2Lp) + log(2/eps)) / T)^{3/4} )
//             + 4 L gamma_43 / sqrt(T),
//   T1 = (2592 (c0+2)^4 L^2 C / l_min^2)
//        * (Delta2 sqrt(log(21^{2 s0} min(p^{2 s0}, (e p / (2 s0))^{2 s0}))
//                       + log(L / eps0)) + gamma_2)^2.
RateConstants lambda1_T1_calculators(const BoundInputs& in);

// Data-driven upper estimate of the restricted-eigenvalue constant:
// the minimum of ||b_theta - b_vartheta||_T / ||theta - vartheta||_2 over
// sampled pairs whose difference lies in C(spec.s, spec.c) by construction
// (random s-sparse dominant part plus an l1-budgeted tail). An upper
// estimate of the true infimum; monotone nonincreasing in n_directions.
double re_constant_estimate(const ObservedPath& path, const DriftModel& model,
                            const ConeSpec& spec, int n_directions, std::uint64_t rng_seed,
                            double theta_box = 1.0);

struct ConcentrationRow {
  double mu = 0.0;
  double mgf_hat = 0.0;       // (1/n) sum exp(mu S_trial), log-domain aggregation
  double mgf_se = 0.0;        // Monte Carlo standard error of mgf_hat
  double bound_calibrated = 0.0;  // exp(C_cal mu^2 lip^2 / T)
  double bound_user = 0.0;        // exp(C_user mu^2 lip^2 / T); NaN when no C given
  double tail_freq = 0.0;     // empirical P(S > mu)
};

struct ConcentrationReport {
  std::vector<ConcentrationRow> rows;
  // Smallest constant making exp(C mu^2 lip^2 / T) dominate the empirical
  // MGF at every grid point: max_mu T log(mgf_hat) / (mu^2 lip^2).
  double calibrated_C = 0.0;
  // Tail-shape fit exp(-T mu^2 / (a1 + a2 mu)) over interior quantiles of
  // the sample; recorded, never asserted. NaN when too few usable points.
  double a1 = 0.0;
  double a2 = 0.0;
  std::vector<double> sample;  // per-trial path averages S, trial order
};

// Monte Carlo study of the path average S = (1/T) sum (f(X_i) - f_mean) delta
// against the sub-Gaussian bound. Trials are keyed by (sim.seed, trial), so
// results are independent of scheduling. f_mean is the caller's value of
// E f(X) under the invariant law.
ConcentrationReport concentration_mc(const DriftModel& model, const Vector& theta,
                                     const std::function<double(const Vector&)>& f, double f_lip,
                                     double f_mean, const SimConfig& sim, int n_trials,
                                     const std::vector<double>& mu_grid,
                                     double user_C = std::numeric_limits<double>::quiet_NaN());

struct SupportMetrics {
  double l1_err = 0.0;
  double l2_err = 0.0;
  // Empty estimated support has precision 1 by convention; empty true
  // support has recall 1. f1 is 0 when precision + recall is 0.
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int size_hat = 0;
};
SupportMetrics support_metrics(const Vector& theta_hat, const Vector& theta0,
                               double zero_tol = 1e-8);

// Grid lower bound of the mixed-term magnitude
// max_{theta, vartheta in grid} ||(1/T) sum (d b_theta/d theta)' b_vartheta delta||_inf.
double m_infinity_estimate(const ObservedPath& path, const DriftModel& model,
                           const std::vector<Vector>& theta_grid);

}  // namespace driftlasso
