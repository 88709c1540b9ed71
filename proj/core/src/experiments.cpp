#include "driftlasso/experiments.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "driftlasso/rng.hpp"
#include "json.hpp"

namespace driftlasso {

using njson = nlohmann::json;

namespace {

// Stream tags keep the per-trial RNG lanes (parameter draw, path noise,
// direction sampling, ...) decorrelated from each other.
constexpr std::uint64_t kStreamGenerator = 0x67656e;
constexpr std::uint64_t kStreamSimulate = 0x73696d;
constexpr std::uint64_t kStreamReConstant = 0x72656b;
constexpr std::uint64_t kStreamVerify = 0x766679;
constexpr std::uint64_t kStreamConcentration = 0x636f6e;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void fail_cfg(const std::string& msg) { throw ConfigError(msg); }

const njson* find_key(const njson& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

void check_keys(const njson& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) fail_cfg(where + ": unknown key \"" + it.key() + "\"");
  }
}

const njson* get_block(const njson& root, const char* key) {
  const njson* b = find_key(root, key);
  if (b != nullptr && !b->is_object()) fail_cfg(std::string(key) + ": expected an object");
  return b;
}

double num_value(const njson& v, const std::string& at) {
  if (!v.is_number()) fail_cfg(at + ": expected a number");
  return v.get<double>();
}

void read_num(const njson& obj, const std::string& where, const char* key, double& out) {
  if (const njson* v = find_key(obj, key)) out = num_value(*v, where + "." + key);
}

void read_int(const njson& obj, const std::string& where, const char* key, int& out) {
  const njson* v = find_key(obj, key);
  if (v == nullptr) return;
  const std::string at = where + "." + key;
  if (v->is_number_integer() || v->is_number_unsigned()) {
    const long long n = v->get<long long>();
    if (n > 2147483647LL || n < -2147483648LL) fail_cfg(at + ": out of range");
    out = static_cast<int>(n);
  } else if (v->is_number_float()) {
    const double d = v->get<double>();
    if (d != std::floor(d) || std::abs(d) > 2147483647.0) fail_cfg(at + ": expected an integer");
    out = static_cast<int>(d);
  } else {
    fail_cfg(at + ": expected an integer");
  }
}

void read_u64(const njson& obj, const std::string& where, const char* key, std::uint64_t& out) {
  const njson* v = find_key(obj, key);
  if (v == nullptr) return;
  const std::string at = where + "." + key;
  if (v->is_number_unsigned()) {
    out = v->get<std::uint64_t>();
  } else if (v->is_number_integer() && v->get<long long>() >= 0) {
    out = static_cast<std::uint64_t>(v->get<long long>());
  } else {
    fail_cfg(at + ": expected a nonnegative integer");
  }
}

void read_bool(const njson& obj, const std::string& where, const char* key, bool& out) {
  const njson* v = find_key(obj, key);
  if (v == nullptr) return;
  if (!v->is_boolean()) fail_cfg(where + "." + key + ": expected a boolean");
  out = v->get<bool>();
}

void read_str(const njson& obj, const std::string& where, const char* key, std::string& out) {
  const njson* v = find_key(obj, key);
  if (v == nullptr) return;
  if (!v->is_string()) fail_cfg(where + "." + key + ": expected a string");
  out = v->get<std::string>();
}

std::vector<double> num_array(const njson& v, const std::string& at) {
  if (!v.is_array()) fail_cfg(at + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number()) fail_cfg(at + ": expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

void read_num_list(const njson& obj, const std::string& where, const char* key,
                   std::vector<double>& out) {
  if (const njson* v = find_key(obj, key)) out = num_array(*v, where + "." + key);
}

// "auto" (sentinel -1) or a positive number.
void read_auto_num(const njson& obj, const std::string& where, const char* key, double& out) {
  const njson* v = find_key(obj, key);
  if (v == nullptr) return;
  const std::string at = where + "." + key;
  if (v->is_string()) {
    if (v->get<std::string>() != "auto") fail_cfg(at + ": expected a number or \"auto\"");
    out = -1.0;
  } else {
    out = num_value(*v, at);
    if (!(out > 0.0)) fail_cfg(at + ": must be positive");
  }
}

Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = v[i];
  return out;
}

std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

void parse_model(const njson* b, ModelSpec& m) {
  if (b == nullptr) fail_cfg("config: the model block is required");
  check_keys(*b, "model", {"family", "d", "theta"});
  if (find_key(*b, "family") == nullptr) fail_cfg("model.family is required");
  std::string fam;
  read_str(*b, "model", "family", fam);
  m.family = family_from_name(fam);
  if (find_key(*b, "d") == nullptr) fail_cfg("model.d is required");
  read_int(*b, "model", "d", m.d);
  if (m.d < 1) fail_cfg("model.d: must be at least 1");
  if (const njson* t = find_key(*b, "theta")) m.theta = to_vector(num_array(*t, "model.theta"));
}

void parse_sim(const njson* b, int d, SimConfig& s) {
  if (b == nullptr) return;
  check_keys(*b, "sim",
             {"T", "steps_per_unit", "seed", "burn_in", "x0", "keep_dw", "stationary_start",
              "divergence_bound"});
  read_num(*b, "sim", "T", s.T);
  read_int(*b, "sim", "steps_per_unit", s.steps_per_unit);
  read_u64(*b, "sim", "seed", s.seed);
  read_num(*b, "sim", "burn_in", s.burn_in);
  if (const njson* x = find_key(*b, "x0")) {
    const std::vector<double> v = num_array(*x, "sim.x0");
    if (static_cast<int>(v.size()) != d)
      fail_cfg("sim.x0: expected " + std::to_string(d) + " entries");
    s.x0 = to_vector(v);
  }
  read_bool(*b, "sim", "keep_dw", s.keep_dw);
  read_bool(*b, "sim", "stationary_start", s.stationary_start);
  read_num(*b, "sim", "divergence_bound", s.divergence_bound);
  if (!(s.T > 0.0)) fail_cfg("sim.T: must be positive");
  if (s.steps_per_unit < 1) fail_cfg("sim.steps_per_unit: must be at least 1");
  if (!(s.burn_in >= 0.0)) fail_cfg("sim.burn_in: must be nonnegative");
  if (!(s.divergence_bound > 0.0)) fail_cfg("sim.divergence_bound: must be positive");
}

void parse_solver(const njson* b, const char* block, SolverConfig& s) {
  if (b == nullptr) return;
  check_keys(*b, block,
             {"max_iter", "tol", "step_init", "step_shrink", "sufficient_decrease", "acceleration",
              "multi_start", "multi_start_seed", "multi_start_radius"});
  read_int(*b, block, "max_iter", s.max_iter);
  read_num(*b, block, "tol", s.tol);
  read_num(*b, block, "step_init", s.step_init);
  read_num(*b, block, "step_shrink", s.step_shrink);
  read_num(*b, block, "sufficient_decrease", s.sufficient_decrease);
  read_bool(*b, block, "acceleration", s.acceleration);
  read_int(*b, block, "multi_start", s.multi_start);
  read_u64(*b, block, "multi_start_seed", s.multi_start_seed);
  read_num(*b, block, "multi_start_radius", s.multi_start_radius);
  try {
    s.validate();
  } catch (const Error& e) {
    fail_cfg(std::string(block) + ": " + e.what());
  }
}

void parse_grid(const njson* b, LambdaGridSpec& g) {
  if (b == nullptr) return;
  check_keys(*b, "lambda_grid", {"max", "min", "count"});
  read_auto_num(*b, "lambda_grid", "max", g.max);
  read_auto_num(*b, "lambda_grid", "min", g.min);
  read_int(*b, "lambda_grid", "count", g.count);
  if (g.count < 1) fail_cfg("lambda_grid.count: must be at least 1");
  if (g.max > 0.0 && g.min > 0.0 && g.min > g.max) fail_cfg("lambda_grid: min exceeds max");
}

void parse_experiment(const njson* b, ExperimentSpec& e) {
  if (b == nullptr) return;
  check_keys(*b, "experiment",
             {"name",
              "trials",
              "output_dir",
              "threads",
              "sparsity",
              "zero_tol",
              "train_fraction",
              "validation_start",
              "lambda",
              "estimator",
              "adaptive_alpha",
              "s0",
              "T_values",
              "mu_grid",
              "observable_index",
              "f_lip",
              "f_mean",
              "n_directions",
              "stability_margin",
              "magnitude_range",
              "max_generator_tries",
              "min_basic_frequency",
              "min_oracle_frequency",
              "input_path"});
  read_str(*b, "experiment", "name", e.name);
  read_int(*b, "experiment", "trials", e.trials);
  read_str(*b, "experiment", "output_dir", e.output_dir);
  read_int(*b, "experiment", "threads", e.threads);
  read_num(*b, "experiment", "sparsity", e.sparsity);
  read_num(*b, "experiment", "zero_tol", e.zero_tol);
  read_num(*b, "experiment", "train_fraction", e.train_fraction);
  read_num(*b, "experiment", "validation_start", e.validation_start);
  if (const njson* v = find_key(*b, "lambda")) {
    if (v->is_string()) {
      if (v->get<std::string>() != "cv")
        fail_cfg("experiment.lambda: expected a nonnegative number or \"cv\"");
      e.lambda = -1.0;
    } else {
      e.lambda = num_value(*v, "experiment.lambda");
      if (e.lambda < 0.0) fail_cfg("experiment.lambda: must be nonnegative");
    }
  }
  read_str(*b, "experiment", "estimator", e.estimator);
  read_num(*b, "experiment", "adaptive_alpha", e.adaptive_alpha);
  read_int(*b, "experiment", "s0", e.s0);
  read_num_list(*b, "experiment", "T_values", e.T_values);
  read_num_list(*b, "experiment", "mu_grid", e.mu_grid);
  read_int(*b, "experiment", "observable_index", e.observable_index);
  read_num(*b, "experiment", "f_lip", e.f_lip);
  read_num(*b, "experiment", "f_mean", e.f_mean);
  read_int(*b, "experiment", "n_directions", e.n_directions);
  read_num(*b, "experiment", "stability_margin", e.stability_margin);
  if (const njson* v = find_key(*b, "magnitude_range")) {
    const std::vector<double> r = num_array(*v, "experiment.magnitude_range");
    if (r.size() != 2) fail_cfg("experiment.magnitude_range: expected [lo, hi]");
    e.magnitude_lo = r[0];
    e.magnitude_hi = r[1];
  }
  read_int(*b, "experiment", "max_generator_tries", e.max_generator_tries);
  read_num(*b, "experiment", "min_basic_frequency", e.min_basic_frequency);
  read_num(*b, "experiment", "min_oracle_frequency", e.min_oracle_frequency);
  read_str(*b, "experiment", "input_path", e.input_path);

  if (e.trials < 1) fail_cfg("experiment.trials: must be at least 1");
  if (e.threads < 1) fail_cfg("experiment.threads: must be at least 1");
  if (!(e.sparsity >= 0.0 && e.sparsity <= 1.0))
    fail_cfg("experiment.sparsity: must lie in [0, 1]");
  if (!(e.zero_tol >= 0.0)) fail_cfg("experiment.zero_tol: must be nonnegative");
  if (!(e.train_fraction > 0.0 && e.train_fraction < 1.0))
    fail_cfg("experiment.train_fraction: must lie in (0, 1)");
  if (!(e.validation_start >= e.train_fraction && e.validation_start < 1.0))
    fail_cfg("experiment.validation_start: must lie in [train_fraction, 1)");
  if (e.estimator != "mle" && e.estimator != "lasso" && e.estimator != "adaptive")
    fail_cfg("experiment.estimator: want mle, lasso, or adaptive");
  if (!(e.adaptive_alpha > 0.0)) fail_cfg("experiment.adaptive_alpha: must be positive");
  if (e.s0 < 1) fail_cfg("experiment.s0: must be at least 1");
  if (e.T_values.empty()) fail_cfg("experiment.T_values: must be nonempty");
  for (const double t : e.T_values)
    if (!(t > 0.0)) fail_cfg("experiment.T_values: entries must be positive");
  if (e.mu_grid.empty()) fail_cfg("experiment.mu_grid: must be nonempty");
  for (const double m : e.mu_grid)
    if (!(m > 0.0)) fail_cfg("experiment.mu_grid: entries must be positive");
  if (e.observable_index < 0) fail_cfg("experiment.observable_index: must be nonnegative");
  if (!(e.f_lip > 0.0)) fail_cfg("experiment.f_lip: must be positive");
  if (e.n_directions < 1) fail_cfg("experiment.n_directions: must be at least 1");
  if (!(e.stability_margin >= 0.0)) fail_cfg("experiment.stability_margin: must be nonnegative");
  if (!(e.magnitude_lo > 0.0 && e.magnitude_lo <= e.magnitude_hi))
    fail_cfg("experiment.magnitude_range: want 0 < lo <= hi");
  if (e.max_generator_tries < 1) fail_cfg("experiment.max_generator_tries: must be at least 1");
  if (!(e.min_basic_frequency >= 0.0 && e.min_basic_frequency <= 1.0))
    fail_cfg("experiment.min_basic_frequency: must lie in [0, 1]");
  if (!(e.min_oracle_frequency >= 0.0 && e.min_oracle_frequency <= 1.0))
    fail_cfg("experiment.min_oracle_frequency: must lie in [0, 1]");
}

void parse_bounds(const njson* b, BoundInputs& in) {
  if (b == nullptr) return;
  check_keys(*b, "bounds",
             {"gamma", "k", "eps", "C", "L", "Delta1", "Delta2", "gamma_43", "gamma_2", "c0",
              "eps0", "M_inf"});
  read_num(*b, "bounds", "gamma", in.gamma);
  read_num(*b, "bounds", "k", in.k);
  read_num(*b, "bounds", "eps", in.eps);
  read_num(*b, "bounds", "C", in.C);
  read_num(*b, "bounds", "L", in.L);
  read_num(*b, "bounds", "Delta1", in.Delta1);
  read_num(*b, "bounds", "Delta2", in.Delta2);
  read_num(*b, "bounds", "gamma_43", in.gamma_43);
  read_num(*b, "bounds", "gamma_2", in.gamma_2);
  read_auto_num(*b, "bounds", "c0", in.c0);
  read_auto_num(*b, "bounds", "eps0", in.eps0);
  read_num(*b, "bounds", "M_inf", in.M_inf);
  if (!(in.gamma > 0.0)) fail_cfg("bounds.gamma: must be positive");
  if (in.k < 0.0) fail_cfg("bounds.k: must be >= 0 (0 means estimate from the path)");
  if (!(in.eps > 0.0 && in.eps < 0.5)) fail_cfg("bounds.eps: must lie in (0, 0.5)");
  if (!(in.C > 0.0)) fail_cfg("bounds.C: must be positive");
  if (!(in.L > 0.0)) fail_cfg("bounds.L: must be positive");
  if (!(in.Delta1 >= 0.0)) fail_cfg("bounds.Delta1: must be nonnegative");
  if (!(in.Delta2 >= 0.0)) fail_cfg("bounds.Delta2: must be nonnegative");
  if (!(in.gamma_43 >= 0.0)) fail_cfg("bounds.gamma_43: must be nonnegative");
  if (!(in.gamma_2 >= 0.0)) fail_cfg("bounds.gamma_2: must be nonnegative");
  if (!(in.M_inf >= 0.0)) fail_cfg("bounds.M_inf: must be nonnegative");
  // read_auto_num already enforces positivity for explicit numbers; eps0
  // additionally has to be a probability
  if (in.eps0 > 0.0 && !(in.eps0 < 1.0))
    fail_cfg("bounds.eps0: must lie in (0, 1) when given");
}

njson resolved_tree(const RunConfig& cfg) {
  njson j;
  {
    njson m;
    m["family"] = family_name(cfg.model.family);
    m["d"] = cfg.model.d;
    if (cfg.model.theta) m["theta"] = to_std(*cfg.model.theta);
    j["model"] = std::move(m);
  }
  {
    njson s;
    s["T"] = cfg.sim.T;
    s["steps_per_unit"] = cfg.sim.steps_per_unit;
    s["seed"] = cfg.sim.seed;
    s["burn_in"] = cfg.sim.burn_in;
    if (cfg.sim.x0) s["x0"] = to_std(*cfg.sim.x0);
    s["keep_dw"] = cfg.sim.keep_dw;
    s["stationary_start"] = cfg.sim.stationary_start;
    s["divergence_bound"] = cfg.sim.divergence_bound;
    j["sim"] = std::move(s);
  }
  const auto solver_tree = [](const SolverConfig& sc) {
    njson s;
    s["max_iter"] = sc.max_iter;
    s["tol"] = sc.tol;
    s["step_init"] = sc.step_init;
    s["step_shrink"] = sc.step_shrink;
    s["sufficient_decrease"] = sc.sufficient_decrease;
    s["acceleration"] = sc.acceleration;
    s["multi_start"] = sc.multi_start;
    s["multi_start_seed"] = sc.multi_start_seed;
    s["multi_start_radius"] = sc.multi_start_radius;
    return s;
  };
  j["solver"] = solver_tree(cfg.solver);
  j["cv_solver"] = solver_tree(cfg.cv_solver);
  {
    njson g;
    if (cfg.grid.max > 0.0) g["max"] = cfg.grid.max;
    else g["max"] = "auto";
    if (cfg.grid.min > 0.0) g["min"] = cfg.grid.min;
    else g["min"] = "auto";
    g["count"] = cfg.grid.count;
    j["lambda_grid"] = std::move(g);
  }
  {
    njson e;
    e["name"] = cfg.exp.name;
    e["trials"] = cfg.exp.trials;
    e["output_dir"] = cfg.exp.output_dir;
    e["threads"] = cfg.exp.threads;
    e["sparsity"] = cfg.exp.sparsity;
    e["zero_tol"] = cfg.exp.zero_tol;
    e["train_fraction"] = cfg.exp.train_fraction;
    e["validation_start"] = cfg.exp.validation_start;
    if (cfg.exp.lambda < 0.0) e["lambda"] = "cv";
    else e["lambda"] = cfg.exp.lambda;
    e["estimator"] = cfg.exp.estimator;
    e["adaptive_alpha"] = cfg.exp.adaptive_alpha;
    e["s0"] = cfg.exp.s0;
    e["T_values"] = cfg.exp.T_values;
    e["mu_grid"] = cfg.exp.mu_grid;
    e["observable_index"] = cfg.exp.observable_index;
    e["f_lip"] = cfg.exp.f_lip;
    e["f_mean"] = cfg.exp.f_mean;
    e["n_directions"] = cfg.exp.n_directions;
    e["stability_margin"] = cfg.exp.stability_margin;
    e["magnitude_range"] = std::vector<double>{cfg.exp.magnitude_lo, cfg.exp.magnitude_hi};
    e["max_generator_tries"] = cfg.exp.max_generator_tries;
    e["min_basic_frequency"] = cfg.exp.min_basic_frequency;
    e["min_oracle_frequency"] = cfg.exp.min_oracle_frequency;
    e["input_path"] = cfg.exp.input_path;
    j["experiment"] = std::move(e);
  }
  {
    njson b;
    b["gamma"] = cfg.bounds.gamma;
    b["k"] = cfg.bounds.k;
    b["eps"] = cfg.bounds.eps;
    b["C"] = cfg.bounds.C;
    b["L"] = cfg.bounds.L;
    b["Delta1"] = cfg.bounds.Delta1;
    b["Delta2"] = cfg.bounds.Delta2;
    b["gamma_43"] = cfg.bounds.gamma_43;
    b["gamma_2"] = cfg.bounds.gamma_2;
    if (cfg.bounds.c0 > 0.0) b["c0"] = cfg.bounds.c0;
    else b["c0"] = "auto";
    if (cfg.bounds.eps0 > 0.0) b["eps0"] = cfg.bounds.eps0;
    else b["eps0"] = "auto";
    b["M_inf"] = cfg.bounds.M_inf;
    j["bounds"] = std::move(b);
  }
  return j;
}

void finalize_config(RunConfig& cfg) {
  const njson j = resolved_tree(cfg);
  njson h = j;
  // Where results land and how many workers compute them do not change any
  // number, so they stay out of the hash.
  h["experiment"].erase("output_dir");
  h["experiment"].erase("threads");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(h.dump())));
  cfg.config_hash = buf;
  cfg.resolved_json = j.dump(2);
  cfg.resolved_json.push_back('\n');
}

void fy_prefix(std::vector<int>& v, int k, std::mt19937_64& rng) {
  const int n = static_cast<int>(v.size());
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n - i)));
    std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
  }
}

std::vector<int> diagonal_slots(const DriftModel& model) {
  const int d = model.dim();
  const int p = model.param_dim();
  std::vector<int> slots(static_cast<std::size_t>(d));
  if (p == d) {
    std::iota(slots.begin(), slots.end(), 0);
  } else if (p == d * d) {
    for (int c = 0; c < d; ++c) slots[static_cast<std::size_t>(c)] = c * d + c;
  } else {
    throw ConfigError("generated sparse parameters need p = d or p = d^2");
  }
  return slots;
}

// s0 positive rates on randomly chosen diagonal slots; every supported
// coordinate pulls toward the origin, the rest diffuse freely.
Vector sparse_positive_theta(const DriftModel& model, std::vector<int> slots, int s0, double lo,
                             double hi, std::uint64_t seed) {
  auto rng = make_rng(seed);
  fy_prefix(slots, s0, rng);
  Vector theta = Vector::Zero(model.param_dim());
  for (int r = 0; r < s0; ++r) theta[slots[static_cast<std::size_t>(r)]] = uniform_real(rng, lo, hi);
  return theta;
}

double train_window_lambda_max(const ObservedPath& path, const DriftModel& model,
                               double train_fraction) {
  const double t0 = path.times[0];
  const ObservedPath train = subpath(path, t0, t0 + train_fraction * path.horizon());
  const LikelihoodEvaluator ev(model, train, /*build_cache=*/false);
  return lambda_max(ev);
}

// Fixed penalty from the config, or the cross-validated one.
// When the penalty is cross-validated, the training-window fit behind the
// winning lambda comes along as a warm start for the full-window refit.
struct LambdaChoice {
  double lambda0 = 0.0;
  Vector warm;  // empty when the penalty was fixed by config
};

LambdaChoice select_lambda(const RunConfig& cfg, const ObservedPath& path,
                           const DriftModel& model) {
  if (cfg.exp.lambda >= 0.0) return {cfg.exp.lambda, Vector()};
  double automax = 0.0;
  if (!(cfg.grid.max > 0.0)) automax = train_window_lambda_max(path, model, cfg.exp.train_fraction);
  const std::vector<double> grid = build_lambda_grid(cfg.grid, automax);
  CvResult cv = cross_validate_lambda(path, model, grid, cfg.cv_solver, cfg.exp.train_fraction,
                                      cfg.exp.validation_start);
  return {cv.lambda0, std::move(cv.theta_at_lambda0)};
}

struct MeanSe {
  double mean = kNaN;
  double se = kNaN;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe out;
  const std::size_t n = v.size();
  if (n == 0) return out;
  double s = 0.0;
  for (const double x : v) s += x;
  out.mean = s / static_cast<double>(n);
  if (n >= 2) {
    double ss = 0.0;
    for (const double x : v) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
  }
  return out;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct LineFit {
  double slope = kNaN;
  double intercept = kNaN;
  double slope_se = kNaN;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit out;
  const std::size_t n = x.size();
  if (n < 2) return out;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) return out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  if (n > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - (out.intercept + out.slope * x[i]);
      ssr += r * r;
    }
    out.slope_se = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  }
  return out;
}

void ensure_outdir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
}

std::string joinp(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void write_text(const std::string& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + file + " for writing");
  out << text;
  out.flush();
  if (!out) throw ConfigError("failed writing " + file);
}

void write_resolved(const RunConfig& cfg) {
  write_text(joinp(cfg.exp.output_dir, "resolved_config.json"), cfg.resolved_json);
}

void write_matrix_csv(const Matrix& A, const std::string& file) {
  std::string buf;
  for (int i = 0; i < A.rows(); ++i) {
    for (int j = 0; j < A.cols(); ++j) {
      if (j > 0) buf += ',';
      buf += format_g17(A(i, j));
    }
    buf += '\n';
  }
  write_text(file, buf);
}

std::string fmt_bool(bool b) { return b ? "1" : "0"; }

std::string sanitize_cell(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

ObservedPath load_or_simulate(const RunConfig& cfg, const DriftModel& model) {
  if (!cfg.exp.input_path.empty()) {
    ObservedPath path = read_path_csv(cfg.exp.input_path);
    if (path.dim() != model.dim())
      throw ConfigError("input path has d = " + std::to_string(path.dim()) +
                        ", model wants d = " + std::to_string(model.dim()));
    return path;
  }
  if (!cfg.model.theta) throw ConfigError("need experiment.input_path or model.theta");
  return simulate(model, *cfg.model.theta, cfg.sim);
}

}  // namespace

const char* family_name(Family f) {
  switch (f) {
    case Family::OrnsteinUhlenbeck:
      return "ornstein_uhlenbeck";
    case Family::GeneralLinearDiagonal:
      return "general_linear_diagonal";
    case Family::LangevinCosine:
      return "langevin_cosine";
    case Family::SineQuadratic:
      return "sine_quadratic";
  }
  throw ContractViolation("family_name: unknown family");
}

Family family_from_name(const std::string& name) {
  if (name == "ornstein_uhlenbeck") return Family::OrnsteinUhlenbeck;
  if (name == "general_linear_diagonal") return Family::GeneralLinearDiagonal;
  if (name == "langevin_cosine") return Family::LangevinCosine;
  if (name == "sine_quadratic") return Family::SineQuadratic;
  throw ConfigError("model.family: unknown family \"" + name +
                    "\" (want ornstein_uhlenbeck, general_linear_diagonal, langevin_cosine, or "
                    "sine_quadratic)");
}

std::unique_ptr<DriftModel> make_model(const ModelSpec& spec) {
  require(spec.d >= 1, "model: d must be positive");
  switch (spec.family) {
    case Family::OrnsteinUhlenbeck:
      return std::make_unique<OrnsteinUhlenbeck>(spec.d);
    case Family::GeneralLinearDiagonal:
      return std::make_unique<GeneralLinear>(make_diagonal_linear(spec.d));
    case Family::LangevinCosine:
      return std::make_unique<LangevinGradient>(make_cosine_langevin(spec.d));
    case Family::SineQuadratic:
      return std::make_unique<SineQuadratic>(spec.d);
  }
  throw ContractViolation("make_model: unknown family");
}

std::vector<double> build_lambda_grid(const LambdaGridSpec& spec, double auto_max) {
  const double mx = spec.max > 0.0 ? spec.max : auto_max;
  // A nonpositive ceiling means the gradient at zero already vanishes; only
  // the null penalty is meaningful.
  if (!(mx > 0.0)) return {0.0};
  const double mn = spec.min > 0.0 ? spec.min : mx * 1e-3;
  require(mn <= mx, "lambda grid: min exceeds max");
  if (spec.count == 1) return {mx};
  std::vector<double> grid(static_cast<std::size_t>(spec.count));
  const double lmx = std::log(mx);
  const double lmn = std::log(mn);
  for (int i = 0; i < spec.count; ++i)
    grid[static_cast<std::size_t>(i)] =
        std::exp(lmx + (lmn - lmx) * static_cast<double>(i) / (spec.count - 1));
  grid.front() = mx;
  grid.back() = mn;
  return grid;
}

RunConfig parse_run_config_text(const std::string& text) {
  njson root;
  try {
    root = njson::parse(text);
  } catch (const njson::parse_error& e) {
    fail_cfg(std::string("config: ") + e.what());
  }
  if (!root.is_object()) fail_cfg("config: expected a JSON object");
  check_keys(root, "config",
             {"model", "sim", "solver", "cv_solver", "lambda_grid", "experiment", "bounds"});

  RunConfig cfg;
  cfg.exp.name = "run";
  parse_model(get_block(root, "model"), cfg.model);
  parse_sim(get_block(root, "sim"), cfg.model.d, cfg.sim);
  parse_solver(get_block(root, "solver"), "solver", cfg.solver);
  cfg.cv_solver = cfg.solver;
  parse_solver(get_block(root, "cv_solver"), "cv_solver", cfg.cv_solver);
  parse_grid(get_block(root, "lambda_grid"), cfg.grid);
  parse_experiment(get_block(root, "experiment"), cfg.exp);
  parse_bounds(get_block(root, "bounds"), cfg.bounds);

  const auto model = make_model(cfg.model);
  if (cfg.model.theta && cfg.model.theta->size() != model->param_dim())
    fail_cfg("model.theta: expected " + std::to_string(model->param_dim()) + " entries");
  if (cfg.exp.observable_index >= cfg.model.d)
    fail_cfg("experiment.observable_index: out of range for d = " + std::to_string(cfg.model.d));

  finalize_config(cfg);
  return cfg;
}

RunConfig parse_run_config_file(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail_cfg("config: cannot read " + file);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config_text(ss.str());
}

void refresh_resolved(RunConfig& cfg) { finalize_config(cfg); }

GeneratedMatrix generate_sparse_stable_matrix(int d, double sparsity, double lo, double hi,
                                              double margin, int max_tries, std::uint64_t seed) {
  require(d >= 1, "generator: d must be positive");
  require(sparsity >= 0.0 && sparsity <= 1.0, "generator: sparsity must lie in [0, 1]");
  require(lo > 0.0 && lo <= hi, "generator: want 0 < lo <= hi");
  require(max_tries >= 1, "generator: max_tries must be positive");

  const long long cells = static_cast<long long>(d) * d;
  long long nnz = std::llround(sparsity * static_cast<double>(cells));
  nnz = std::clamp(nnz, 1LL, cells);
  const int diag_count = static_cast<int>(std::min<long long>(d, nnz));
  const int off_count = static_cast<int>(nnz - diag_count);

  auto rng = make_rng(seed);
  std::vector<int> diag_slots(static_cast<std::size_t>(d));
  std::iota(diag_slots.begin(), diag_slots.end(), 0);
  std::vector<int> off_cells;
  off_cells.reserve(static_cast<std::size_t>(cells - d));
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i)
      if (i != j) off_cells.push_back(j * d + i);

  GeneratedMatrix best;
  best.margin = -std::numeric_limits<double>::infinity();
  for (int attempt = 1; attempt <= max_tries; ++attempt) {
    fy_prefix(diag_slots, diag_count, rng);
    fy_prefix(off_cells, off_count, rng);
    Matrix A = Matrix::Zero(d, d);
    for (int r = 0; r < diag_count; ++r) {
      const int c = diag_slots[static_cast<std::size_t>(r)];
      A(c, c) = uniform_real(rng, lo, hi);
    }
    for (int r = 0; r < off_count; ++r) {
      const int cell = off_cells[static_cast<std::size_t>(r)];
      double v = uniform_real(rng, lo, hi);
      if ((rng() & 1ULL) != 0) v = -v;
      A(cell % d, cell / d) = v;
    }
    double m = 0.0;
    if (d == 1) {
      m = A(0, 0);
    } else {
      const Eigen::EigenSolver<Matrix> eig(A, /*computeEigenvectors=*/false);
      m = eig.eigenvalues().real().minCoeff();
    }
    if (m > best.margin) {
      best.A = A;
      best.margin = m;
    }
    best.tries = attempt;
    if (m >= margin) {
      best.A = A;
      best.margin = m;
      best.margin_met = true;
      break;
    }
  }
  return best;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // offset basis
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;  // prime
  }
  return h;
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void parallel_for_trials(int trials, int threads, const std::function<void(int)>& body) {
  require(trials >= 0, "parallel_for_trials: negative trial count");
  if (trials == 0) return;
  const int workers = std::max(1, std::min(threads, trials));
  if (workers == 1) {
    for (int i = 0; i < trials; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex mu;
  std::exception_ptr first;
  const auto run = [&] {
    for (;;) {
      const int i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= trials) return;
      try {
        body(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

Figure1Result run_figure1(const RunConfig& cfg) {
  const int d = cfg.model.d;
  const auto model = make_model(cfg.model);
  if (model->param_dim() != d * d)
    throw ConfigError(
        "figure1: needs a matrix-parameter family (ornstein_uhlenbeck or sine_quadratic)");
  const int p = model->param_dim();

  Figure1Result out;
  out.trials.resize(static_cast<std::size_t>(cfg.exp.trials));
  parallel_for_trials(cfg.exp.trials, cfg.exp.threads, [&](int t) {
    Figure1Trial row;
    row.trial = t;
    const std::uint64_t base = stream_seed(cfg.sim.seed, static_cast<std::uint64_t>(t));
    row.seed = base;
    const GeneratedMatrix gen = generate_sparse_stable_matrix(
        d, cfg.exp.sparsity, cfg.exp.magnitude_lo, cfg.exp.magnitude_hi, cfg.exp.stability_margin,
        cfg.exp.max_generator_tries, stream_seed(base, kStreamGenerator));
    row.gen_tries = gen.tries;
    row.spectral_margin = gen.margin;
    row.margin_met = gen.margin_met;
    row.A_true = gen.A;
    const Vector theta0 = vec_param(gen.A);
    SimConfig sim = cfg.sim;
    sim.seed = stream_seed(base, kStreamSimulate);
    try {
      const ObservedPath path = simulate(*model, theta0, sim);
      const LambdaChoice choice = select_lambda(cfg, path, *model);
      row.lambda0 = choice.lambda0;
      const LikelihoodEvaluator ev(*model, path);
      const Vector zero = Vector::Zero(p);
      const SolverResult mle = fit_mle(ev, cfg.solver, zero);
      const SolverResult lasso =
          fit_lasso(ev, row.lambda0, cfg.solver, choice.warm.size() ? choice.warm : zero);
      row.mle = support_metrics(mle.theta_hat, theta0, cfg.exp.zero_tol);
      row.lasso = support_metrics(lasso.theta_hat, theta0, cfg.exp.zero_tol);
      row.mle_converged = mle.converged;
      row.lasso_converged = lasso.converged;
      row.A_mle = unvec_param(mle.theta_hat, d);
      row.A_lasso = unvec_param(lasso.theta_hat, d);
      row.ok = true;
    } catch (const NumericalError& e) {
      row.ok = false;
      row.note = e.what();
    }
    out.trials[static_cast<std::size_t>(t)] = std::move(row);
  });
  return out;
}

ScalingResult run_scaling_study(const RunConfig& cfg) {
  const auto model = make_model(cfg.model);
  if (!model->linear_in_theta())
    throw ConfigError("scaling-study: needs a family linear in the parameter");
  const std::vector<int> slots = diagonal_slots(*model);
  if (cfg.exp.s0 > static_cast<int>(slots.size()))
    throw ConfigError("experiment.s0: exceeds the number of diagonal parameter slots");
  const int p = model->param_dim();
  const int n_T = static_cast<int>(cfg.exp.T_values.size());
  const int per = cfg.exp.trials;

  ScalingResult out;
  out.rows.resize(static_cast<std::size_t>(n_T) * static_cast<std::size_t>(per));
  parallel_for_trials(n_T * per, cfg.exp.threads, [&](int flat) {
    const int ti = flat / per;
    const int tr = flat % per;
    ScalingRow row;
    row.T = cfg.exp.T_values[static_cast<std::size_t>(ti)];
    row.trial = tr;
    const std::uint64_t base = stream_seed(cfg.sim.seed, static_cast<std::uint64_t>(flat));
    const Vector theta0 =
        sparse_positive_theta(*model, slots, cfg.exp.s0, cfg.exp.magnitude_lo, cfg.exp.magnitude_hi,
                              stream_seed(base, kStreamGenerator));
    SimConfig sim = cfg.sim;
    sim.T = row.T;
    sim.seed = stream_seed(base, kStreamSimulate);
    try {
      const ObservedPath path = simulate(*model, theta0, sim);
      const LambdaChoice choice = select_lambda(cfg, path, *model);
      row.lambda0 = choice.lambda0;
      const LikelihoodEvaluator ev(*model, path);
      const Vector zero = Vector::Zero(p);
      const SolverResult lasso =
          fit_lasso(ev, row.lambda0, cfg.solver, choice.warm.size() ? choice.warm : zero);
      const SolverResult mle = fit_mle(ev, cfg.solver, zero);
      const SupportMetrics sm = support_metrics(lasso.theta_hat, theta0, cfg.exp.zero_tol);
      row.lasso_l2 = sm.l2_err;
      row.lasso_l1 = sm.l1_err;
      row.lasso_size = sm.size_hat;
      row.lasso_converged = lasso.converged;
      row.mle_l2 = (mle.theta_hat - theta0).norm();
      row.ok = true;
    } catch (const NumericalError&) {
      row.ok = false;
    }
    out.rows[static_cast<std::size_t>(flat)] = row;
  });

  out.points.resize(static_cast<std::size_t>(n_T));
  for (int ti = 0; ti < n_T; ++ti) {
    std::vector<double> l2;
    std::vector<double> ml2;
    for (int tr = 0; tr < per; ++tr) {
      const ScalingRow& r = out.rows[static_cast<std::size_t>(ti * per + tr)];
      if (!r.ok) continue;
      l2.push_back(r.lasso_l2);
      ml2.push_back(r.mle_l2);
    }
    ScalingPoint& pt = out.points[static_cast<std::size_t>(ti)];
    pt.T = cfg.exp.T_values[static_cast<std::size_t>(ti)];
    pt.used = static_cast<int>(l2.size());
    const MeanSe ms = mean_se(l2);
    pt.lasso_mean_l2 = ms.mean;
    pt.lasso_se_l2 = ms.se;
    pt.mle_mean_l2 = mean_se(ml2).mean;
  }

  std::vector<double> xs, ys, xm, ym;
  for (const ScalingPoint& pt : out.points) {
    if (pt.used > 0 && pt.lasso_mean_l2 > 0.0) {
      xs.push_back(std::log(pt.T));
      ys.push_back(std::log(pt.lasso_mean_l2));
    }
    if (pt.used > 0 && pt.mle_mean_l2 > 0.0) {
      xm.push_back(std::log(pt.T));
      ym.push_back(std::log(pt.mle_mean_l2));
    }
  }
  if (xs.size() < 2)
    throw NumericalError("scaling-study: fewer than two usable horizon points");
  const LineFit lf = fit_line(xs, ys);
  if (!std::isfinite(lf.slope))
    throw NumericalError("scaling-study: degenerate horizon grid");
  out.slope = lf.slope;
  out.slope_se = lf.slope_se;
  out.intercept = lf.intercept;
  out.mle_slope = fit_line(xm, ym).slope;
  return out;
}

VerifyResult run_verify(const RunConfig& cfg) {
  if (!cfg.model.theta) throw ConfigError("verify: model.theta is required");
  const auto model = make_model(cfg.model);
  const Vector theta0 = *cfg.model.theta;
  int s0 = 0;
  double l_min = std::numeric_limits<double>::infinity();
  for (int j = 0; j < theta0.size(); ++j) {
    const double a = std::abs(theta0[j]);
    if (a > cfg.exp.zero_tol) {
      ++s0;
      l_min = std::min(l_min, a);
    }
  }
  if (s0 == 0) throw ConfigError("verify: model.theta is identically zero");

  BoundInputs base = cfg.bounds;
  base.p = model->param_dim();
  base.s0 = s0;
  base.l_min = l_min;
  const double c0_eff = base.c0 > 0.0 ? base.c0 : 3.0 + 4.0 / base.gamma;

  VerifyResult out;
  out.trials.resize(static_cast<std::size_t>(cfg.exp.trials));
  out.oracle_reference = 1.0 - 2.0 * base.eps;

  const std::uint64_t fan = stream_seed(cfg.sim.seed, kStreamVerify);
  parallel_for_trials(cfg.exp.trials, cfg.exp.threads, [&](int t) {
    VerifyTrial row;
    row.trial = t;
    const std::uint64_t tb = stream_seed(fan, static_cast<std::uint64_t>(t));
    SimConfig sim = cfg.sim;
    sim.seed = stream_seed(tb, kStreamSimulate);
    const ObservedPath path = simulate(*model, theta0, sim);
    const LambdaChoice choice = select_lambda(cfg, path, *model);
    row.lambda = choice.lambda0;
    const LikelihoodEvaluator ev(*model, path);
    const SolverResult fit =
        fit_lasso(ev, row.lambda, cfg.solver,
                  choice.warm.size() ? choice.warm : Vector::Zero(model->param_dim()));
    row.certified = fit.converged;
    row.basic = basic_inequality_check(ev, fit.theta_hat, theta0, row.lambda);
    BoundInputs b = base;
    b.T = path.horizon();
    b.lambda = row.lambda;
    if (!(b.k > 0.0))
      b.k = re_constant_estimate(path, *model, ConeSpec{s0, c0_eff}, cfg.exp.n_directions,
                                 stream_seed(tb, kStreamReConstant));
    row.k_used = b.k;
    row.oracle = oracle_inequality_check(ev, fit.theta_hat, theta0, b);
    out.trials[static_cast<std::size_t>(t)] = row;
  });

  int certified = 0;
  int basic_hold = 0;
  int oracle_hold = 0;
  for (const VerifyTrial& r : out.trials) {
    if (r.certified) {
      ++certified;
      if (r.basic.holds) ++basic_hold;
    }
    if (r.oracle.holds) ++oracle_hold;
  }
  out.certified_count = certified;
  out.basic_frequency =
      certified > 0 ? static_cast<double>(basic_hold) / certified : kNaN;
  out.oracle_frequency = static_cast<double>(oracle_hold) / cfg.exp.trials;

  SimConfig csim = cfg.sim;
  csim.seed = stream_seed(cfg.sim.seed, kStreamConcentration);
  const int idx = cfg.exp.observable_index;
  const auto f = [idx](const Vector& x) { return x[idx]; };
  out.concentration = concentration_mc(*model, theta0, f, cfg.exp.f_lip, cfg.exp.f_mean, csim,
                                       cfg.exp.trials, cfg.exp.mu_grid, cfg.bounds.C);
  return out;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.model.theta) throw ConfigError("simulate: model.theta is required");
  const auto model = make_model(cfg.model);
  const ObservedPath path = simulate(*model, *cfg.model.theta, cfg.sim);
  ensure_outdir(cfg.exp.output_dir);
  write_path_csv(path, joinp(cfg.exp.output_dir, "path.csv"));
  njson meta;
  meta["config_hash"] = cfg.config_hash;
  meta["family"] = family_name(cfg.model.family);
  meta["d"] = path.dim();
  meta["p"] = model->param_dim();
  meta["n_increments"] = path.n_increments();
  meta["delta"] = path.delta();
  meta["T"] = path.horizon();
  meta["seed"] = cfg.sim.seed;
  meta["theta"] = to_std(*cfg.model.theta);
  write_text(joinp(cfg.exp.output_dir, "metadata.json"), meta.dump(2) + "\n");
  write_resolved(cfg);
  log << "simulate: " << path.n_increments() << " increments, d = " << path.dim()
      << ", delta = " << format_g17(path.delta()) << "\n";
  log << "wrote " << joinp(cfg.exp.output_dir, "path.csv") << "\n";
  return kExitOk;
}

int cmd_fit(const RunConfig& cfg, std::ostream& log) {
  const auto model = make_model(cfg.model);
  const ObservedPath path = load_or_simulate(cfg, *model);
  const LikelihoodEvaluator ev(*model, path);
  const Vector zero = Vector::Zero(model->param_dim());

  double lam = 0.0;
  bool by_cv = false;
  SolverResult res;
  if (cfg.exp.estimator == "mle") {
    res = fit_mle(ev, cfg.solver, zero);
  } else {
    lam = cfg.exp.lambda;
    Vector init = zero;
    if (lam < 0.0) {
      LambdaChoice choice = select_lambda(cfg, path, *model);
      lam = choice.lambda0;
      by_cv = true;
      if (choice.warm.size()) init = std::move(choice.warm);
    }
    if (cfg.exp.estimator == "lasso") {
      res = fit_lasso(ev, lam, cfg.solver, init);
    } else {
      const SolverResult pilot = fit_lasso(ev, lam, cfg.solver, init);
      try {
        res = fit_adaptive_lasso(ev, lam, cfg.exp.adaptive_alpha, pilot.theta_hat, cfg.solver);
      } catch (const ContractViolation& e) {
        throw NumericalError(std::string("fit: ") + e.what() + " (lower lambda)");
      }
    }
  }

  std::vector<int> support;
  for (int j = 0; j < res.theta_hat.size(); ++j)
    if (std::abs(res.theta_hat[j]) > cfg.exp.zero_tol) support.push_back(j);

  ensure_outdir(cfg.exp.output_dir);
  njson rep;
  rep["config_hash"] = cfg.config_hash;
  rep["estimator"] = cfg.exp.estimator;
  rep["lambda"] = lam;
  rep["lambda_by_cv"] = by_cv;
  rep["objective"] = res.objective;
  rep["iterations"] = res.iterations;
  rep["converged"] = res.converged;
  rep["stationarity_residual"] = res.stationarity_residual;
  rep["theta"] = to_std(res.theta_hat);
  rep["support"] = support;
  rep["support_size"] = static_cast<int>(support.size());
  if (path.theta_true) {
    const SupportMetrics sm = support_metrics(res.theta_hat, *path.theta_true, cfg.exp.zero_tol);
    njson m;
    m["l1_err"] = sm.l1_err;
    m["l2_err"] = sm.l2_err;
    m["precision"] = sm.precision;
    m["recall"] = sm.recall;
    m["f1"] = sm.f1;
    m["size_hat"] = sm.size_hat;
    rep["metrics"] = std::move(m);
  }
  write_text(joinp(cfg.exp.output_dir, "fit.json"), rep.dump(2) + "\n");
  write_resolved(cfg);
  log << "fit: " << cfg.exp.estimator << ", lambda = " << format_g17(lam)
      << (by_cv ? " (cv)" : "") << ", support = " << support.size()
      << ", converged = " << (res.converged ? "yes" : "no") << "\n";
  return kExitOk;
}

int cmd_cv(const RunConfig& cfg, std::ostream& log) {
  const auto model = make_model(cfg.model);
  const ObservedPath path = load_or_simulate(cfg, *model);
  double automax = 0.0;
  if (!(cfg.grid.max > 0.0))
    automax = train_window_lambda_max(path, *model, cfg.exp.train_fraction);
  const std::vector<double> grid = build_lambda_grid(cfg.grid, automax);
  const CvResult cv = cross_validate_lambda(path, *model, grid, cfg.cv_solver,
                                            cfg.exp.train_fraction, cfg.exp.validation_start);

  ensure_outdir(cfg.exp.output_dir);
  std::string buf = "lambda,validation_loss,converged\n";
  for (const CvRow& r : cv.table)
    buf += format_g17(r.lambda) + "," + format_g17(r.validation_loss) + "," +
           fmt_bool(r.converged) + "\n";
  write_text(joinp(cfg.exp.output_dir, "cv_table.csv"), buf);
  njson sel;
  sel["config_hash"] = cfg.config_hash;
  sel["lambda0"] = cv.lambda0;
  sel["grid_size"] = static_cast<int>(cv.table.size());
  write_text(joinp(cfg.exp.output_dir, "cv.json"), sel.dump(2) + "\n");
  write_resolved(cfg);
  log << "cv: lambda0 = " << format_g17(cv.lambda0) << " over " << cv.table.size()
      << " grid points\n";
  return kExitOk;
}

int cmd_figure1(const RunConfig& cfg, std::ostream& log) {
  const Figure1Result res = run_figure1(cfg);
  ensure_outdir(cfg.exp.output_dir);

  for (const Figure1Trial& tr : res.trials) {
    if (!tr.ok) continue;
    char name[32];
    std::snprintf(name, sizeof name, "trial_%03d", tr.trial);
    const std::string tdir = joinp(cfg.exp.output_dir, name);
    ensure_outdir(tdir);
    write_matrix_csv(tr.A_true, joinp(tdir, "theta_true.csv"));
    write_matrix_csv(tr.A_mle, joinp(tdir, "theta_mle.csv"));
    write_matrix_csv(tr.A_lasso, joinp(tdir, "theta_lasso.csv"));
  }

  // Column layout shared by the per-trial rows and the aggregate rows.
  const std::array<const char*, 22> header = {
      "trial",        "seed",          "status",          "gen_tries",    "spectral_margin",
      "margin_met",   "lambda0",       "mle_converged",   "mle_l1_err",   "mle_l2_err",
      "mle_precision", "mle_recall",   "mle_f1",          "mle_size",     "lasso_converged",
      "lasso_l1_err", "lasso_l2_err",  "lasso_precision", "lasso_recall", "lasso_f1",
      "lasso_size",   "note"};
  std::string buf;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i > 0) buf += ',';
    buf += header[i];
  }
  buf += '\n';

  const auto emit = [&buf](const std::array<std::string, 22>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) buf += ',';
      buf += cells[i];
    }
    buf += '\n';
  };

  std::vector<double> agg_tries, agg_margin, agg_lambda;
  std::vector<std::vector<double>> agg_mle(6), agg_lasso(6);
  int ok_count = 0;
  for (const Figure1Trial& tr : res.trials) {
    std::array<std::string, 22> c;
    c[0] = std::to_string(tr.trial);
    c[1] = std::to_string(tr.seed);
    c[2] = tr.ok ? "ok" : "failed";
    c[3] = std::to_string(tr.gen_tries);
    c[4] = format_g17(tr.spectral_margin);
    c[5] = fmt_bool(tr.margin_met);
    if (tr.ok) {
      c[6] = format_g17(tr.lambda0);
      c[7] = fmt_bool(tr.mle_converged);
      c[8] = format_g17(tr.mle.l1_err);
      c[9] = format_g17(tr.mle.l2_err);
      c[10] = format_g17(tr.mle.precision);
      c[11] = format_g17(tr.mle.recall);
      c[12] = format_g17(tr.mle.f1);
      c[13] = std::to_string(tr.mle.size_hat);
      c[14] = fmt_bool(tr.lasso_converged);
      c[15] = format_g17(tr.lasso.l1_err);
      c[16] = format_g17(tr.lasso.l2_err);
      c[17] = format_g17(tr.lasso.precision);
      c[18] = format_g17(tr.lasso.recall);
      c[19] = format_g17(tr.lasso.f1);
      c[20] = std::to_string(tr.lasso.size_hat);
      c[21] = "";
      ++ok_count;
      agg_tries.push_back(tr.gen_tries);
      agg_margin.push_back(tr.spectral_margin);
      agg_lambda.push_back(tr.lambda0);
      const std::array<double, 6> mv = {tr.mle.l1_err,    tr.mle.l2_err, tr.mle.precision,
                                        tr.mle.recall,    tr.mle.f1,
                                        static_cast<double>(tr.mle.size_hat)};
      const std::array<double, 6> lv = {tr.lasso.l1_err,  tr.lasso.l2_err, tr.lasso.precision,
                                        tr.lasso.recall,  tr.lasso.f1,
                                        static_cast<double>(tr.lasso.size_hat)};
      for (int i = 0; i < 6; ++i) {
        agg_mle[static_cast<std::size_t>(i)].push_back(mv[static_cast<std::size_t>(i)]);
        agg_lasso[static_cast<std::size_t>(i)].push_back(lv[static_cast<std::size_t>(i)]);
      }
    } else {
      for (int i = 6; i <= 20; ++i) c[static_cast<std::size_t>(i)] = "nan";
      c[7] = "0";
      c[14] = "0";
      c[13] = "0";
      c[20] = "0";
      c[21] = sanitize_cell(tr.note);
    }
    emit(c);
  }

  const auto agg_row = [&](const char* label, bool want_se) {
    std::array<std::string, 22> c;
    c[0] = label;
    const auto put = [&](std::size_t col, const std::vector<double>& v) {
      const MeanSe ms = mean_se(v);
      c[col] = format_g17(want_se ? ms.se : ms.mean);
    };
    put(3, agg_tries);
    put(4, agg_margin);
    put(6, agg_lambda);
    for (std::size_t i = 0; i < 6; ++i) {
      put(8 + i, agg_mle[i]);
      put(15 + i, agg_lasso[i]);
    }
    emit(c);
  };
  agg_row("mean", false);
  agg_row("se", true);

  write_text(joinp(cfg.exp.output_dir, "metrics.csv"), buf);
  write_resolved(cfg);

  const MeanSe lasso_f1 = mean_se(agg_lasso[4]);
  const MeanSe mle_f1 = mean_se(agg_mle[4]);
  log << "figure1: " << res.trials.size() << " trials, " << ok_count << " ok\n";
  log << "  lasso f1 " << format_g17(lasso_f1.mean) << " (se " << format_g17(lasso_f1.se)
      << "), mle f1 " << format_g17(mle_f1.mean) << " (se " << format_g17(mle_f1.se) << ")\n";
  log << "wrote " << joinp(cfg.exp.output_dir, "metrics.csv") << "\n";
  return kExitOk;
}

int cmd_scaling_study(const RunConfig& cfg, std::ostream& log) {
  const ScalingResult res = run_scaling_study(cfg);
  ensure_outdir(cfg.exp.output_dir);

  std::string buf = "T,trial,status,lambda0,lasso_l2,lasso_l1,lasso_size,lasso_converged,mle_l2\n";
  for (const ScalingRow& r : res.rows) {
    buf += format_g17(r.T) + "," + std::to_string(r.trial) + ",";
    if (r.ok) {
      buf += "ok," + format_g17(r.lambda0) + "," + format_g17(r.lasso_l2) + "," +
             format_g17(r.lasso_l1) + "," + std::to_string(r.lasso_size) + "," +
             fmt_bool(r.lasso_converged) + "," + format_g17(r.mle_l2) + "\n";
    } else {
      buf += "failed,nan,nan,nan,0,0,nan\n";
    }
  }
  write_text(joinp(cfg.exp.output_dir, "scaling.csv"), buf);

  std::string sum = "T,used,lasso_mean_l2,lasso_se_l2,mle_mean_l2\n";
  for (const ScalingPoint& pt : res.points)
    sum += format_g17(pt.T) + "," + std::to_string(pt.used) + "," +
           format_g17(pt.lasso_mean_l2) + "," + format_g17(pt.lasso_se_l2) + "," +
           format_g17(pt.mle_mean_l2) + "\n";
  write_text(joinp(cfg.exp.output_dir, "scaling_summary.csv"), sum);

  njson sl;
  sl["config_hash"] = cfg.config_hash;
  sl["lasso_slope"] = res.slope;
  sl["lasso_slope_se"] = res.slope_se;
  sl["lasso_intercept"] = res.intercept;
  sl["mle_slope"] = res.mle_slope;
  write_text(joinp(cfg.exp.output_dir, "slope.json"), sl.dump(2) + "\n");
  write_resolved(cfg);

  log << "scaling-study: lasso slope " << format_g17(res.slope) << " (se "
      << format_g17(res.slope_se) << "), mle slope " << format_g17(res.mle_slope) << "\n";
  log << "wrote " << joinp(cfg.exp.output_dir, "scaling_summary.csv") << "\n";
  return kExitOk;
}

int cmd_verify(const RunConfig& cfg, std::ostream& log) {
  const VerifyResult res = run_verify(cfg);
  ensure_outdir(cfg.exp.output_dir);

  std::string buf =
      "trial,lambda,k,certified,basic_lhs,basic_rhs,basic_holds,oracle_lhs,oracle_rhs,"
      "oracle_holds\n";
  std::vector<double> lambdas, ks;
  for (const VerifyTrial& r : res.trials) {
    buf += std::to_string(r.trial) + "," + format_g17(r.lambda) + "," + format_g17(r.k_used) +
           "," + fmt_bool(r.certified) + "," + format_g17(r.basic.lhs) + "," +
           format_g17(r.basic.rhs) + "," + fmt_bool(r.basic.holds) + "," +
           format_g17(r.oracle.lhs) + "," + format_g17(r.oracle.rhs) + "," +
           fmt_bool(r.oracle.holds) + "\n";
    lambdas.push_back(r.lambda);
    ks.push_back(r.k_used);
  }
  write_text(joinp(cfg.exp.output_dir, "checks.csv"), buf);

  std::string con = "mu,mgf_hat,mgf_se,bound_calibrated,bound_user,tail_freq\n";
  for (const ConcentrationRow& r : res.concentration.rows)
    con += format_g17(r.mu) + "," + format_g17(r.mgf_hat) + "," + format_g17(r.mgf_se) + "," +
           format_g17(r.bound_calibrated) + "," + format_g17(r.bound_user) + "," +
           format_g17(r.tail_freq) + "\n";
  write_text(joinp(cfg.exp.output_dir, "concentration.csv"), con);

  // Bound table at the run's context values; lambda and k enter as the
  // medians over trials.
  {
    const Vector& theta0 = *cfg.model.theta;
    BoundInputs b = cfg.bounds;
    b.p = theta0.size();
    b.s0 = 0;
    b.l_min = std::numeric_limits<double>::infinity();
    for (int j = 0; j < theta0.size(); ++j) {
      const double a = std::abs(theta0[j]);
      if (a > cfg.exp.zero_tol) {
        b.s0 += 1;
        b.l_min = std::min(b.l_min, a);
      }
    }
    b.T = cfg.sim.T;
    b.lambda = median_of(lambdas);
    b.k = median_of(ks);
    const double c0_eff = b.c0 > 0.0 ? b.c0 : 3.0 + 4.0 / b.gamma;
    const double eps0_eff = b.eps0 > 0.0 ? b.eps0 : b.eps;
    const ErrorBounds eb = error_bound_calculators(b);
    const RateConstants rc = lambda1_T1_calculators(b);
    std::string tb = "name,value\n";
    const auto put = [&tb](const char* name, double v) {
      tb += std::string(name) + "," + format_g17(v) + "\n";
    };
    put("s0", b.s0);
    put("p", b.p);
    put("T", b.T);
    put("lambda", b.lambda);
    put("gamma", b.gamma);
    put("k", b.k);
    put("l_min", b.l_min);
    put("eps", b.eps);
    put("C", b.C);
    put("L", b.L);
    put("Delta1", b.Delta1);
    put("Delta2", b.Delta2);
    put("gamma_43", b.gamma_43);
    put("gamma_2", b.gamma_2);
    put("c0_effective", c0_eff);
    put("eps0_effective", eps0_eff);
    put("M_inf", b.M_inf);
    put("l2_sq_bound", eb.l2_sq);
    put("l1_bound", eb.l1);
    put("l0_bound", eb.l0);
    put("cor_l2_sq_bound", eb.cor_l2_sq);
    put("cor_l1_bound", eb.cor_l1);
    put("cor_l0_bound", eb.cor_l0);
    put("lambda1", rc.lambda1);
    put("T1", rc.T1);
    put("log_T1", rc.log_T1);
    write_text(joinp(cfg.exp.output_dir, "bounds.csv"), tb);
  }

  const bool basic_ok = cfg.exp.min_basic_frequency <= 0.0 ||
                        res.basic_frequency >= cfg.exp.min_basic_frequency;
  const bool oracle_ok = cfg.exp.min_oracle_frequency <= 0.0 ||
                         res.oracle_frequency >= cfg.exp.min_oracle_frequency;

  int basic_hold = 0;
  int oracle_hold = 0;
  for (const VerifyTrial& r : res.trials) {
    if (r.certified && r.basic.holds) ++basic_hold;
    if (r.oracle.holds) ++oracle_hold;
  }

  njson summary;
  summary["config_hash"] = cfg.config_hash;
  summary["trials"] = static_cast<int>(res.trials.size());
  summary["certified_count"] = res.certified_count;
  summary["basic_holds"] = basic_hold;
  summary["basic_frequency"] = res.basic_frequency;
  summary["min_basic_frequency"] = cfg.exp.min_basic_frequency;
  summary["basic_gate_ok"] = basic_ok;
  summary["oracle_holds"] = oracle_hold;
  summary["oracle_frequency"] = res.oracle_frequency;
  summary["oracle_reference"] = res.oracle_reference;
  summary["min_oracle_frequency"] = cfg.exp.min_oracle_frequency;
  summary["oracle_gate_ok"] = oracle_ok;
  summary["calibrated_C"] = res.concentration.calibrated_C;
  summary["tail_a1"] = res.concentration.a1;
  summary["tail_a2"] = res.concentration.a2;
  write_text(joinp(cfg.exp.output_dir, "verify_summary.json"), summary.dump(2) + "\n");
  write_resolved(cfg);

  log << "basic inequality: held in " << basic_hold << "/" << res.certified_count
      << " certified trials (frequency " << format_g17(res.basic_frequency) << ", threshold "
      << format_g17(cfg.exp.min_basic_frequency) << ")\n";
  log << "sparse-competitor bound: held in " << oracle_hold << "/" << res.trials.size()
      << " trials (frequency " << format_g17(res.oracle_frequency) << ", reference 1-2eps = "
      << format_g17(res.oracle_reference) << ")\n";
  log << "concentration: calibrated C = " << format_g17(res.concentration.calibrated_C)
      << ", user C = " << format_g17(cfg.bounds.C) << "\n";
  if (!basic_ok) log << "basic-inequality frequency below threshold\n";
  if (!oracle_ok) log << "sparse-competitor frequency below threshold\n";
  return (basic_ok && oracle_ok) ? kExitOk : kExitCheckBelowThreshold;
}

}  // namespace driftlasso
