#include "driftlasso/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "driftlasso/rng.hpp"

namespace driftlasso {

bool cone_membership(const Vector& x, const ConeSpec& spec) {
  require(x.size() >= 1, "cone membership: empty vector");
  require(spec.s >= 1 && spec.s <= x.size(), "cone membership: s out of range");
  require(spec.c >= 0.0, "cone membership: c must be nonnegative");
  require(x.cwiseAbs().maxCoeff() > 0.0, "cone membership: x = 0 is outside the cone's domain");

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(x[a]) > std::abs(x[b]);  // stable: equal magnitudes keep low index first
  });

  double top = 0.0;
  for (int r = 0; r < spec.s; ++r) top += std::abs(x[idx[static_cast<std::size_t>(r)]]);
  return x.lpNorm<1>() <= (1.0 + spec.c) * top;
}

namespace {

const Vector& true_param(const LikelihoodEvaluator& ev, const char* what) {
  const auto& truth = ev.path().theta_true;
  if (!truth.has_value()) {
    throw ContractViolation(std::string(what) +
                            " needs the generating parameter; simulate() records it on the path");
  }
  require(truth->size() == ev.model().param_dim(),
          std::string(what) + ": recorded parameter has wrong length");
  return *truth;
}

}  // namespace

CheckResult basic_inequality_check(const LikelihoodEvaluator& ev, const Vector& theta_hat,
                                   const Vector& theta, double lambda, double tol) {
  require(lambda >= 0.0, "basic inequality: lambda must be nonnegative");
  require(tol >= 0.0, "basic inequality: tol must be nonnegative");
  const Vector& theta0 = true_param(ev, "basic inequality");

  const double lhs_norm =
      empirical_norm_param_diff(ev.path(), ev.model(), theta_hat, theta0);
  const double comp_norm = empirical_norm_param_diff(ev.path(), ev.model(), theta, theta0);
  const double g = ev.stochastic_term_G(theta, theta_hat);

  CheckResult out;
  out.lhs = lhs_norm * lhs_norm;
  out.rhs = comp_norm * comp_norm + 2.0 * g +
            2.0 * lambda * (theta.lpNorm<1>() - theta_hat.lpNorm<1>());
  const double scale = 1.0 + std::abs(out.lhs) + std::abs(out.rhs);
  out.holds = out.lhs <= out.rhs + tol * scale;
  return out;
}

CheckResult oracle_inequality_check(const LikelihoodEvaluator& ev, const Vector& theta_hat,
                                    const Vector& theta, const BoundInputs& in) {
  require(in.gamma > 0.0, "oracle inequality: gamma must be positive");
  require(in.k > 0.0, "oracle inequality: k must be positive");
  require(in.s0 >= 1.0, "oracle inequality: s0 must be >= 1");
  require(in.lambda >= 0.0, "oracle inequality: lambda must be nonnegative");
  const Vector& theta0 = true_param(ev, "oracle inequality");

  const double lhs_norm =
      empirical_norm_param_diff(ev.path(), ev.model(), theta_hat, theta0);
  const double comp_norm = empirical_norm_param_diff(ev.path(), ev.model(), theta, theta0);

  CheckResult out;
  out.lhs = lhs_norm * lhs_norm;
  out.rhs = (1.0 + in.gamma) * comp_norm * comp_norm +
            4.0 * (in.gamma + 2.0) * (in.gamma + 2.0) * in.s0 * in.lambda * in.lambda /
                (in.gamma * in.k * in.k);
  out.holds = out.lhs <= out.rhs;  // per-trial event, no tolerance
  return out;
}

ErrorBounds error_bound_calculators(const BoundInputs& in) {
  require(in.s0 > 0.0, "error bounds: s0 must be positive");
  require(in.lambda >= 0.0, "error bounds: lambda must be nonnegative");
  require(in.gamma > 0.0, "error bounds: gamma must be positive");
  require(in.k > 0.0, "error bounds: k must be positive");
  require(in.l_min > 0.0, "error bounds: l_min must be positive");
  require(in.M_inf > 0.0, "error bounds: M_inf must be positive");

  const double g = in.gamma;
  const double g32 = std::pow(g, 1.5);
  const double k2 = in.k * in.k;
  const double l2 = in.l_min * in.l_min;

  ErrorBounds out;
  out.l2_sq = 4.0 * (g + 2.0) * (g + 2.0) * in.s0 * in.lambda * in.lambda / (g * k2 * k2);
  out.l1 = 8.0 * (g + 1.0) * (g + 2.0) * in.s0 * in.lambda / (g32 * k2);
  out.l0 = 16.0 * in.M_inf * (g + 1.0) * (g + 2.0) * in.s0 / (g32 * k2);
  out.cor_l2_sq = 64.0 * (g + 2.0) * (g + 2.0) * in.s0 * in.lambda * in.lambda / (g * l2 * l2);
  out.cor_l1 = 32.0 * (g + 1.0) * (g + 2.0) * in.s0 * in.lambda / (g32 * l2);
  out.cor_l0 = 64.0 * in.M_inf * (g + 1.0) * (g + 2.0) * in.s0 / (g32 * l2);
  return out;
}

RateConstants lambda1_T1_calculators(const BoundInputs& in) {
  require(in.p >= 1.0, "rate constants: p must be >= 1");
  require(in.T > 0.0, "rate constants: T must be positive");
  require(in.eps > 0.0 && in.eps < 1.0, "rate constants: eps must lie in (0,1)");
  require(in.L > 0.0, "rate constants: L must be positive");
  require(in.C > 0.0, "rate constants: C must be positive");
  require(in.Delta1 > 0.0 && in.Delta2 > 0.0, "rate constants: Delta inputs must be positive");
  require(in.gamma_43 >= 0.0 && in.gamma_2 >= 0.0,
          "rate constants: gamma entropy inputs must be nonnegative");
  require(in.gamma > 0.0, "rate constants: gamma must be positive");
  require(in.s0 >= 1.0, "rate constants: s0 must be >= 1");
  require(in.l_min > 0.0, "rate constants: l_min must be positive");

  const double c0 = in.c0 >= 0.0 ? in.c0 : 3.0 + 4.0 / in.gamma;
  const double eps0 = in.eps0 >= 0.0 ? in.eps0 : in.eps;
  require(eps0 > 0.0, "rate constants: eps0 must be positive");

  RateConstants out;

  const double log_term = std::log(2.0 * in.L * in.p) + std::log(2.0 / in.eps);
  const double branch1 = std::sqrt(log_term / (2.0 * in.T));
  const double branch2 =
      std::pow(std::cbrt(2.0 * in.C) / 6.0 * log_term / in.T, 0.75);
  out.lambda1 = 4.0 * in.L * in.Delta1 * std::max(branch1, branch2) +
                4.0 * in.L * in.gamma_43 / std::sqrt(in.T);

  // log(21^{2 s0} * min(p^{2 s0}, (e p / (2 s0))^{2 s0})) + log(L / eps0),
  // expanded so the combinatorial factor never overflows.
  const double two_s0 = 2.0 * in.s0;
  const double alt = 1.0 + std::log(in.p) - std::log(two_s0);
  const double inner = two_s0 * std::log(21.0) + two_s0 * std::min(std::log(in.p), alt) +
                       std::log(in.L / eps0);
  require(inner >= 0.0, "rate constants: entropy log-term is negative; inputs inconsistent");

  out.log_T1 = std::log(2592.0) + 4.0 * std::log(c0 + 2.0) + 2.0 * std::log(in.L) +
               std::log(in.C) - 2.0 * std::log(in.l_min) +
               2.0 * std::log(in.Delta2 * std::sqrt(inner) + in.gamma_2);
  out.T1 = std::exp(out.log_T1);
  return out;
}

double re_constant_estimate(const ObservedPath& path, const DriftModel& model,
                            const ConeSpec& spec, int n_directions, std::uint64_t rng_seed,
                            double theta_box) {
  const int p = model.param_dim();
  require(n_directions >= 1, "re estimate: n_directions must be >= 1");
  require(spec.s >= 1 && spec.s <= p, "re estimate: cone sparsity out of range");
  require(spec.c >= 0.0, "re estimate: cone slack must be nonnegative");
  require(theta_box > 0.0, "re estimate: theta_box must be positive");

  auto rng = make_rng(rng_seed);
  NormalSampler normal(make_rng(rng_seed, 1));

  Vector theta(p), x(p), vartheta(p);
  std::vector<int> coords(static_cast<std::size_t>(p));
  double min_ratio = std::numeric_limits<double>::infinity();

  for (int n = 0; n < n_directions; ++n) {
    for (int j = 0; j < p; ++j) theta[j] = uniform_real(rng, -theta_box, theta_box);

    // Fisher-Yates prefix: the first s entries become the dominant support.
    std::iota(coords.begin(), coords.end(), 0);
    for (int r = 0; r < spec.s; ++r) {
      const auto pick = r + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(p - r)));
      std::swap(coords[static_cast<std::size_t>(r)], coords[static_cast<std::size_t>(pick)]);
    }

    double dom_l1 = 0.0;
    do {
      x.setZero();
      dom_l1 = 0.0;
      for (int r = 0; r < spec.s; ++r) {
        const double v = normal();
        x[coords[static_cast<std::size_t>(r)]] = v;
        dom_l1 += std::abs(v);
      }
    } while (dom_l1 == 0.0);

    if (spec.c > 0.0 && spec.s < p) {
      // Tail with l1 mass at most c * (dominant l1 mass): feasible by
      // construction since the top-s sum only grows past the dominant sum.
      double tail_raw = 0.0;
      for (int r = spec.s; r < p; ++r) {
        const double v = normal();
        x[coords[static_cast<std::size_t>(r)]] = v;
        tail_raw += std::abs(v);
      }
      if (tail_raw > 0.0) {
        const double budget = uniform_real(rng, 0.0, 1.0) * spec.c * dom_l1;
        const double scalefac = budget / tail_raw;
        for (int r = spec.s; r < p; ++r) x[coords[static_cast<std::size_t>(r)]] *= scalefac;
      }
    }

    vartheta = theta - x;
    const double ratio =
        empirical_norm_param_diff(path, model, theta, vartheta) / x.norm();
    min_ratio = std::min(min_ratio, ratio);
  }
  return min_ratio;
}

ConcentrationReport concentration_mc(const DriftModel& model, const Vector& theta,
                                     const std::function<double(const Vector&)>& f, double f_lip,
                                     double f_mean, const SimConfig& sim, int n_trials,
                                     const std::vector<double>& mu_grid, double user_C) {
  require(static_cast<bool>(f), "concentration: null observable");
  require(f_lip > 0.0, "concentration: Lipschitz constant must be positive");
  require(std::isfinite(f_mean), "concentration: f_mean must be finite");
  require(n_trials >= 1, "concentration: n_trials must be >= 1");
  require(!mu_grid.empty(), "concentration: empty mu grid");
  for (double mu : mu_grid) require(mu >= 0.0, "concentration: mu must be nonnegative");

  ConcentrationReport rep;
  rep.sample.resize(static_cast<std::size_t>(n_trials));

  for (int t = 0; t < n_trials; ++t) {
    SimConfig cfg = sim;
    cfg.seed = stream_seed(sim.seed, static_cast<std::uint64_t>(t));
    const ObservedPath path = simulate(model, theta, cfg);
    const long long n = path.n_increments();
    const double delta = path.delta();
    KahanSum acc;
    Vector x(path.dim());
    for (long long i = 0; i < n; ++i) {
      x = path.states.row(i).transpose();
      acc.add((f(x) - f_mean) * delta);
    }
    rep.sample[static_cast<std::size_t>(t)] = acc.value() / path.horizon();
  }

  const double T = sim.T;
  const double inv_n = 1.0 / static_cast<double>(n_trials);

  rep.calibrated_C = 0.0;
  std::vector<double> log_mgfs(mu_grid.size());
  for (std::size_t m = 0; m < mu_grid.size(); ++m) {
    const double mu = mu_grid[m];
    // Log-domain aggregation: scale by the max exponent before averaging.
    double max_e = -std::numeric_limits<double>::infinity();
    for (double s : rep.sample) max_e = std::max(max_e, mu * s);
    KahanSum wsum;
    for (double s : rep.sample) wsum.add(std::exp(mu * s - max_e));
    const double mean_w = wsum.value() * inv_n;
    const double log_mgf = max_e + std::log(mean_w);
    log_mgfs[m] = log_mgf;

    KahanSum var_acc;
    for (double s : rep.sample) {
      const double dev = std::exp(mu * s - max_e) - mean_w;
      var_acc.add(dev * dev);
    }
    const double sd_w =
        n_trials > 1 ? std::sqrt(var_acc.value() / static_cast<double>(n_trials - 1)) : 0.0;

    ConcentrationRow row;
    row.mu = mu;
    row.mgf_hat = std::exp(log_mgf);
    row.mgf_se = std::exp(max_e) * sd_w / std::sqrt(static_cast<double>(n_trials));
    long long hits = 0;
    for (double s : rep.sample) {
      if (s > mu) ++hits;
    }
    row.tail_freq = static_cast<double>(hits) * inv_n;
    rep.rows.push_back(row);

    if (mu > 0.0) {
      rep.calibrated_C = std::max(rep.calibrated_C, T * log_mgf / (mu * mu * f_lip * f_lip));
    }
  }

  for (std::size_t m = 0; m < mu_grid.size(); ++m) {
    const double mu = mu_grid[m];
    rep.rows[m].bound_calibrated = std::exp(rep.calibrated_C * mu * mu * f_lip * f_lip / T);
    rep.rows[m].bound_user = std::isnan(user_C)
                                 ? std::numeric_limits<double>::quiet_NaN()
                                 : std::exp(user_C * mu * mu * f_lip * f_lip / T);
  }

  // Tail-shape fit on interior quantiles: regress -T mu^2 / log(P(S > mu))
  // on mu. Thresholds where the empirical tail is 0 or 1 carry no slope
  // information and are skipped.
  std::vector<double> sorted = rep.sample;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> xs, ys;
  for (double q : {0.75, 0.85, 0.95}) {
    const auto pos = static_cast<std::size_t>(q * static_cast<double>(n_trials - 1));
    const double mu_q = sorted[pos];
    if (mu_q <= 0.0) continue;
    long long hits = 0;
    for (double s : rep.sample) {
      if (s > mu_q) ++hits;
    }
    const double freq = static_cast<double>(hits) * inv_n;
    if (freq <= 0.0 || freq >= 1.0) continue;
    xs.push_back(mu_q);
    ys.push_back(-T * mu_q * mu_q / std::log(freq));
  }
  if (xs.size() >= 2) {
    const double n_pts = static_cast<double>(xs.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    const double denom = n_pts * sxx - sx * sx;
    if (denom > 0.0) {
      rep.a2 = (n_pts * sxy - sx * sy) / denom;
      rep.a1 = (sy - rep.a2 * sx) / n_pts;
    } else {
      rep.a1 = rep.a2 = std::numeric_limits<double>::quiet_NaN();
    }
  } else {
    rep.a1 = rep.a2 = std::numeric_limits<double>::quiet_NaN();
  }

  return rep;
}

SupportMetrics support_metrics(const Vector& theta_hat, const Vector& theta0, double zero_tol) {
  require(theta_hat.size() == theta0.size(), "support metrics: length mismatch");
  require(zero_tol >= 0.0, "support metrics: zero_tol must be nonnegative");

  SupportMetrics out;
  out.l1_err = (theta_hat - theta0).lpNorm<1>();
  out.l2_err = (theta_hat - theta0).norm();

  int hat_size = 0, true_size = 0, both = 0;
  for (Eigen::Index j = 0; j < theta_hat.size(); ++j) {
    const bool in_hat = std::abs(theta_hat[j]) > zero_tol;
    const bool in_true = std::abs(theta0[j]) > zero_tol;
    hat_size += in_hat ? 1 : 0;
    true_size += in_true ? 1 : 0;
    both += (in_hat && in_true) ? 1 : 0;
  }
  out.size_hat = hat_size;
  out.precision = hat_size == 0 ? 1.0 : static_cast<double>(both) / hat_size;
  out.recall = true_size == 0 ? 1.0 : static_cast<double>(both) / true_size;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

double m_infinity_estimate(const ObservedPath& path, const DriftModel& model,
                           const std::vector<Vector>& theta_grid) {
  require(!theta_grid.empty(), "mixed-term estimate: empty parameter grid");
  require(path.dim() == model.dim(), "mixed-term estimate: dimension mismatch");
  const int d = model.dim();
  const int p = model.param_dim();
  const long long n = path.n_increments();
  const double delta = path.delta();
  const double T = path.horizon();

  double stat = 0.0;
  Matrix J(d, p);
  Vector b(d), acc(p), x(d);
  for (const Vector& th : theta_grid) {
    require(th.size() == p, "mixed-term estimate: parameter has wrong length");
    for (const Vector& vth : theta_grid) {
      acc.setZero();
      for (long long i = 0; i < n; ++i) {
        x = path.states.row(i).transpose();
        model.drift_jacobian(th, x, J);
        model.drift_eval(vth, x, b);
        acc.noalias() += J.transpose() * (b * delta);
      }
      stat = std::max(stat, acc.cwiseAbs().maxCoeff() / T);
    }
  }
  return stat;
}

}  // namespace driftlasso
