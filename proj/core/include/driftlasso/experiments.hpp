#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "driftlasso/solvers.hpp"
#include "driftlasso/theory.hpp"

namespace driftlasso {

// Exit-code convention shared by the command drivers and the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNumericalError = 3;
inline constexpr int kExitCheckBelowThreshold = 4;

enum class Family {
  OrnsteinUhlenbeck,      // b(x) = A x, theta = vect(A), p = d^2
  GeneralLinearDiagonal,  // b(x) = diag(theta) x, p = d
  LangevinCosine,         // b = grad of ||x||^2/2 + sum theta_j cos(x_j), p = d
  SineQuadratic,          // b_i = sum_j h(x_j, A_ij), theta = vect(A), p = d^2
};

const char* family_name(Family f);
Family family_from_name(const std::string& name);

struct ModelSpec {
  Family family = Family::OrnsteinUhlenbeck;
  int d = 1;
  std::optional<Vector> theta;  // generating parameter when fixed by config
};

std::unique_ptr<DriftModel> make_model(const ModelSpec& spec);

struct LambdaGridSpec {
  double max = -1.0;  // <= 0: auto, ||grad L_T(0)||_inf on the training window
  double min = -1.0;  // <= 0: auto, max / 10^3
  int count = 30;     // log-spaced, descending
};
std::vector<double> build_lambda_grid(const LambdaGridSpec& spec, double auto_max);

struct ExperimentSpec {
  std::string name;
  int trials = 1;
  std::string output_dir = "out";
  int threads = 1;
  double sparsity = 0.35;       // nonzero fraction of theta0 (vect families)
  double zero_tol = 1e-8;       // support threshold for the metrics
  double train_fraction = 0.8;  // cross-validation windows
  double validation_start = 0.9;
  double lambda = -1.0;  // < 0: cross-validated per trial
  std::string estimator = "lasso";
  double adaptive_alpha = 1.0;
  int s0 = 3;  // support size for generated linear-family parameters
  std::vector<double> T_values = {25.0, 50.0, 100.0, 200.0, 400.0};
  std::vector<double> mu_grid = {0.5, 1.0, 2.0};
  int observable_index = 0;  // concentration observable f(x) = x[index]
  double f_lip = 1.0;
  double f_mean = 0.0;
  int n_directions = 50;          // restricted-eigenvalue sampling
  double stability_margin = 0.05;  // smallest real eigenvalue the generator accepts
  double magnitude_lo = 0.5;
  double magnitude_hi = 2.0;
  int max_generator_tries = 500;
  double min_basic_frequency = 1.0;   // exit-4 gate, certified trials
  double min_oracle_frequency = 0.0;  // exit-4 gate, all trials
  std::string input_path;  // fit/cv on an imported path CSV instead of simulating
};

struct RunConfig {
  ModelSpec model;
  SimConfig sim;
  SolverConfig solver;
  // Budget for the cross-validation sweep. Inherits every field from solver
  // unless the config's optional "cv_solver" block overrides it; the sweep
  // only ranks validation losses, so it tolerates a looser tol than the
  // final refit.
  SolverConfig cv_solver;
  LambdaGridSpec grid;
  ExperimentSpec exp;
  BoundInputs bounds;

  // Key-sorted JSON with every default materialized; written next to all
  // outputs. The hash excludes output_dir and threads, which do not affect
  // any numbers.
  std::string resolved_json;
  std::string config_hash;
};

// Strict parser: unknown keys anywhere are a ConfigError naming the key.
RunConfig parse_run_config_file(const std::string& file);
RunConfig parse_run_config_text(const std::string& text);

// Rebuilds resolved_json and config_hash after fields were overridden (the
// CLI's --seed / --out-dir / --trials / --threads edits).
void refresh_resolved(RunConfig& cfg);

// Sparse drift matrix for the vect-parameter families: every (or, when the
// budget is smaller than d, a random subset of) diagonal cell gets a
// positive magnitude, remaining nonzeros land on uniform off-diagonal cells
// with either sign, all magnitudes uniform in [lo, hi]. Draws are rejected
// until the smallest real part of the spectrum reaches `margin`; after
// max_tries the best draw seen is returned with margin_met = false.
struct GeneratedMatrix {
  Matrix A;
  int tries = 0;
  double margin = 0.0;  // smallest real part of the spectrum of the result
  bool margin_met = false;
};
GeneratedMatrix generate_sparse_stable_matrix(int d, double sparsity, double lo, double hi,
                                              double margin, int max_tries, std::uint64_t seed);

std::uint64_t fnv1a64(const std::string& bytes);
std::string format_g17(double v);

// Runs body(0..trials-1) on up to `threads` workers. Bodies must write only
// to their own trial's slot; aggregation stays order-independent. The first
// exception is rethrown after all workers join.
void parallel_for_trials(int trials, int threads, const std::function<void(int)>& body);

// Support-recovery experiment on the sine family: per trial, generate a
// sparse stable A0, simulate, cross-validate lambda, fit both estimators,
// and score them against the truth.
struct Figure1Trial {
  int trial = 0;
  std::uint64_t seed = 0;
  bool ok = false;            // false: simulation diverged, metrics are NaN
  std::string note;           // failure description when not ok
  double lambda0 = 0.0;
  int gen_tries = 0;
  double spectral_margin = 0.0;
  bool margin_met = false;
  SupportMetrics mle;
  SupportMetrics lasso;
  bool mle_converged = false;
  bool lasso_converged = false;
  Matrix A_true, A_mle, A_lasso;  // empty when not ok
};
struct Figure1Result {
  std::vector<Figure1Trial> trials;
};
Figure1Result run_figure1(const RunConfig& cfg);

// Error-vs-horizon sweep on a linear family with a generated s0-sparse
// parameter per trial; regresses log mean l2 error on log T.
struct ScalingRow {
  double T = 0.0;
  int trial = 0;
  bool ok = false;
  double lambda0 = 0.0;
  double lasso_l2 = 0.0;
  double lasso_l1 = 0.0;
  int lasso_size = 0;
  bool lasso_converged = false;
  double mle_l2 = 0.0;
};
struct ScalingPoint {
  double T = 0.0;
  int used = 0;  // rows that fit successfully
  double lasso_mean_l2 = 0.0;
  double lasso_se_l2 = 0.0;
  double mle_mean_l2 = 0.0;
};
struct ScalingResult {
  std::vector<ScalingRow> rows;
  std::vector<ScalingPoint> points;
  double slope = 0.0;  // d log(mean l2) / d log T, lasso
  double slope_se = 0.0;
  double intercept = 0.0;
  double mle_slope = 0.0;
};
ScalingResult run_scaling_study(const RunConfig& cfg);

// Monte Carlo oracles: basic and sparse-competitor inequalities per trial
// plus the concentration table.
struct VerifyTrial {
  int trial = 0;
  double lambda = 0.0;
  double k_used = 0.0;     // restricted-eigenvalue constant fed to the bound
  bool certified = false;  // solver converged with its stationarity certificate
  CheckResult basic;
  CheckResult oracle;
};
struct VerifyResult {
  std::vector<VerifyTrial> trials;
  int certified_count = 0;
  double basic_frequency = 0.0;   // holds-fraction over certified trials
  double oracle_frequency = 0.0;  // holds-fraction over all trials
  double oracle_reference = 0.0;  // 1 - 2 eps, from the bound inputs
  ConcentrationReport concentration;
};
VerifyResult run_verify(const RunConfig& cfg);

// File-writing command drivers behind the CLI. Each writes CSV outputs plus
// resolved_config.json under exp.output_dir and returns an exit code; they
// throw ConfigError / NumericalError like the library they wrap.
int cmd_simulate(const RunConfig& cfg, std::ostream& log);
int cmd_fit(const RunConfig& cfg, std::ostream& log);
int cmd_cv(const RunConfig& cfg, std::ostream& log);
int cmd_figure1(const RunConfig& cfg, std::ostream& log);
int cmd_scaling_study(const RunConfig& cfg, std::ostream& log);
int cmd_verify(const RunConfig& cfg, std::ostream& log);

}  // namespace driftlasso
