#include "driftlasso/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "driftlasso/rng.hpp"

namespace driftlasso {

void SolverConfig::validate() const {
  require(max_iter >= 1, "solver: max_iter must be >= 1");
  require(tol > 0.0, "solver: tol must be positive");
  require(step_init > 0.0, "solver: step_init must be positive");
  require(step_shrink > 0.0 && step_shrink < 1.0, "solver: step_shrink must lie in (0,1)");
  require(sufficient_decrease > 0.0, "solver: sufficient_decrease must be positive");
  require(multi_start >= 1, "solver: multi_start must be >= 1");
  require(multi_start_radius > 0.0, "solver: multi_start_radius must be positive");
}

double soft_threshold(double v, double t) {
  if (!std::isfinite(t)) return 0.0;
  require(t >= 0.0, "soft_threshold: threshold must be nonnegative");
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

namespace {

constexpr double kMinStep = 1e-18;

// Consecutive settled-but-uncertified iterations allowed before giving up.
// Traversing the sub-ulp flat region around a minimizer takes tens of steps
// (geometric contraction of the borderline coordinates); a plateau that
// still fails the certificate after this many flat steps is not going to
// certify, and grinding on it just burns max_iter.
constexpr int kPolishBudget = 200;

// Per-coordinate thresholds lambda * w_j, possibly +inf (frozen at zero).
// Unit weights are represented by an empty vector.
struct PenaltySpec {
  double lambda = 0.0;
  Vector weights;  // empty => all ones

  double threshold(Eigen::Index j) const {
    return weights.size() == 0 ? lambda : lambda * weights[j];
  }

  double penalty(const Vector& theta) const {
    double s = 0.0;
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      const double w = weights.size() == 0 ? 1.0 : weights[j];
      if (std::isfinite(w)) {
        s += w * std::abs(theta[j]);
      } else if (theta[j] != 0.0) {
        return std::numeric_limits<double>::infinity();
      }
    }
    return lambda * s;
  }

  void prox(const Vector& v, double step, Vector& out) const {
    out.resize(v.size());
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      out[j] = soft_threshold(v[j], step * threshold(j));
    }
  }

  // Subdifferential violation at theta in sup-norm: |grad_j + t_j sign| on
  // the support, max(|grad_j| - t_j, 0) off it. Frozen coordinates satisfy
  // the condition vacuously.
  double kkt_residual(const Vector& grad, const Vector& theta) const {
    double r = 0.0;
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      const double t = threshold(j);
      if (!std::isfinite(t)) continue;
      if (theta[j] > 0.0) {
        r = std::max(r, std::abs(grad[j] + t));
      } else if (theta[j] < 0.0) {
        r = std::max(r, std::abs(grad[j] - t));
      } else {
        r = std::max(r, std::max(std::abs(grad[j]) - t, 0.0));
      }
    }
    return r;
  }
};

// Proximal gradient with backtracking line search and optional momentum,
// restarted whenever it would push the objective up. The trace it leaves is
// non-increasing in both modes; momentum only changes where gradients are
// taken. Returns a stationarity point of F = L_T + penalty.
SolverResult prox_gradient_single(const LikelihoodEvaluator& ev, const PenaltySpec& pen,
                                  const SolverConfig& cfg, const Vector& theta_init) {
  const int p = ev.model().param_dim();
  require(theta_init.size() == p, "solver: theta_init has wrong length");

  Vector theta = theta_init;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    if (!std::isfinite(pen.threshold(j))) theta[j] = 0.0;
  }

  SolverResult res;
  Vector grad(p), y = theta, theta_prev = theta, cand(p), trial(p);

  double f_y = ev.nll_value_and_gradient(y, grad);
  auto eval_at = [&](const Vector& pt) { f_y = ev.nll_value_and_gradient(pt, grad); };

  double F_cur = f_y + pen.penalty(theta);
  res.scale = 1.0 + std::abs(F_cur);
  res.objective_trace.push_back(F_cur);

  double step = cfg.step_init;
  double momentum_t = 1.0;
  bool momentum_active = false;
  // Rounding-flat regime: the objective is settled but the stationarity
  // certificate still fails. True decreases down there are below ulp(F), so
  // the descent test cannot see them; accept prox steps that hold F to
  // rounding and let borderline coordinates contract to their fixed point.
  bool polish = false;
  int polish_iters = 0;
  double F_cand = F_cur;

  // Backtracks from the current (y, grad): fills cand and F_cand. False
  // means no step above the floor passed the sufficient-decrease test,
  // i.e. y is stationary to double precision.
  auto line_search = [&]() -> bool {
    const double F_y = f_y + pen.penalty(y);
    const double slack =
        polish ? 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(F_y)) : 0.0;
    while (true) {
      trial = y - step * grad;
      pen.prox(trial, step, cand);
      const double dist2 = (cand - y).squaredNorm();
      F_cand = ev.neg_log_likelihood(cand) + pen.penalty(cand);
      if (F_cand <= F_y - cfg.sufficient_decrease * dist2 / step) {
        if (dist2 > 0.0) {
          polish = false;  // measurable descent resumed
          polish_iters = 0;
        }
        return true;
      }
      if (polish && F_cand <= F_y + slack) return true;
      if (step * cfg.step_shrink < kMinStep) return false;
      step *= cfg.step_shrink;
    }
  };

  int it = 1;
  for (; it <= cfg.max_iter; ++it) {
    // One growth attempt per iteration, capped at the configured start. The
    // polish regime holds the step: regrowing past the stable range would
    // let borderline coordinates wander invisibly below the slack.
    if (!polish) step = std::min(cfg.step_init, step / cfg.step_shrink);
    bool accepted = line_search();

    if (momentum_active && (!accepted || F_cand > F_cur)) {
      // Momentum overshot or stalled: redo the step as plain descent.
      momentum_t = 1.0;
      momentum_active = false;
      y = theta;
      eval_at(y);
      step = cfg.step_init;
      accepted = line_search();
    }
    bool stuck = false;
    if (!accepted && F_cand > F_cur) {
      // Keep the iterate; the line search hit its floor without a descent
      // direction, so the point is numerically stationary.
      cand = theta;
      F_cand = F_cur;
      stuck = true;
    }

    theta_prev.swap(theta);
    theta = cand;
    res.objective_trace.push_back(F_cand);
    const bool settled = std::abs(F_cur - F_cand) <= cfg.tol * (1.0 + std::abs(F_cand));
    F_cur = F_cand;

    if (settled) {
      // Certify stationarity with a fresh gradient at the iterate itself
      // (momentum leaves grad at the extrapolated point otherwise).
      eval_at(theta);
      const double residual = pen.kkt_residual(grad, theta);
      if (residual <= cfg.tol * res.scale) {
        res.theta_hat = theta;
        res.iterations = it;
        res.objective = F_cur;
        res.stationarity_residual = residual;
        res.converged = true;
        return res;
      }
      if (stuck) break;  // cannot move and not certified: give up
      if (++polish_iters > kPolishBudget) break;  // flat plateau, not a floor
      // Objective is flat but the certificate fails: drop momentum and
      // keep polishing from the iterate (gradient already there).
      momentum_t = 1.0;
      momentum_active = false;
      polish = true;
      y = theta;
      continue;
    }

    if (cfg.acceleration) {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum_t * momentum_t));
      const double beta = (momentum_t - 1.0) / t_next;
      momentum_t = t_next;
      y = theta + beta * (theta - theta_prev);
      momentum_active = true;
    } else {
      y = theta;
    }
    eval_at(y);
  }

  res.theta_hat = theta;
  res.iterations = std::min(it, cfg.max_iter);
  res.objective = F_cur;
  eval_at(theta);
  res.stationarity_residual = pen.kkt_residual(grad, theta);
  res.converged = false;
  return res;
}

SolverResult prox_gradient(const LikelihoodEvaluator& ev, const PenaltySpec& pen,
                           const SolverConfig& cfg, const Vector& theta_init) {
  cfg.validate();
  SolverResult best = prox_gradient_single(ev, pen, cfg, theta_init);
  for (int s = 1; s < cfg.multi_start; ++s) {
    NormalSampler normal(make_rng(cfg.multi_start_seed, static_cast<std::uint64_t>(s)));
    Vector init = theta_init;
    for (Eigen::Index j = 0; j < init.size(); ++j) {
      init[j] += cfg.multi_start_radius * normal();
      if (!std::isfinite(pen.threshold(j))) init[j] = 0.0;
    }
    SolverResult alt = prox_gradient_single(ev, pen, cfg, init);
    if (alt.objective < best.objective) best = std::move(alt);
  }
  return best;
}

}  // namespace

SolverResult fit_mle(const LikelihoodEvaluator& ev, const SolverConfig& cfg,
                     const Vector& theta_init) {
  PenaltySpec pen;
  pen.lambda = 0.0;
  return prox_gradient(ev, pen, cfg, theta_init);
}

SolverResult fit_lasso(const LikelihoodEvaluator& ev, double lambda, const SolverConfig& cfg,
                       const Vector& theta_init) {
  require(lambda >= 0.0, "fit_lasso: lambda must be nonnegative");
  PenaltySpec pen;
  pen.lambda = lambda;
  return prox_gradient(ev, pen, cfg, theta_init);
}

SolverResult fit_adaptive_lasso(const LikelihoodEvaluator& ev, double lambda, double alpha,
                                const Vector& theta_pilot, const SolverConfig& cfg) {
  require(lambda >= 0.0, "fit_adaptive_lasso: lambda must be nonnegative");
  require(alpha > 0.0, "fit_adaptive_lasso: alpha must be positive");
  require(theta_pilot.size() == ev.model().param_dim(),
          "fit_adaptive_lasso: pilot has wrong length");

  PenaltySpec pen;
  pen.lambda = lambda;
  pen.weights.resize(theta_pilot.size());
  bool any_live = false;
  for (Eigen::Index j = 0; j < theta_pilot.size(); ++j) {
    const double m = std::abs(theta_pilot[j]);
    if (m > 0.0) {
      pen.weights[j] = std::pow(m, -alpha);
      any_live = true;
    } else {
      pen.weights[j] = std::numeric_limits<double>::infinity();
    }
  }
  if (!any_live) {
    throw ContractViolation("fit_adaptive_lasso: degenerate pilot, all coordinates zero");
  }
  // The pilot is feasible (its frozen coordinates are zero) and usually
  // close to the solution; start from it.
  return prox_gradient(ev, pen, cfg, theta_pilot);
}

double lambda_max(const LikelihoodEvaluator& ev) {
  Vector grad;
  ev.nll_value_and_gradient(Vector::Zero(ev.model().param_dim()), grad);
  return grad.lpNorm<Eigen::Infinity>();
}

std::vector<double> default_lambda_grid(double lam_max, int count, double decades) {
  require(count >= 1, "lambda grid: count must be >= 1");
  require(decades > 0.0, "lambda grid: decades must be positive");
  if (!(lam_max > 0.0)) return {0.0};
  std::vector<double> grid(static_cast<std::size_t>(count));
  if (count == 1) {
    grid[0] = lam_max;
    return grid;
  }
  const double log_hi = std::log10(lam_max);
  for (int i = 0; i < count; ++i) {
    grid[static_cast<std::size_t>(i)] =
        std::pow(10.0, log_hi - decades * static_cast<double>(i) / (count - 1));
  }
  // pin the top endpoint so lambda = lam_max keeps its exact-zero guarantee
  grid[0] = lam_max;
  return grid;
}

CvResult cross_validate_lambda(const ObservedPath& path, const DriftModel& model,
                               const std::vector<double>& lambda_grid, const SolverConfig& cfg,
                               double train_fraction, double validation_start_fraction) {
  require(!lambda_grid.empty(), "cross-validation: empty lambda grid");
  require(train_fraction > 0.0 && train_fraction < 1.0,
          "cross-validation: train_fraction must lie in (0,1)");
  require(validation_start_fraction >= train_fraction && validation_start_fraction < 1.0,
          "cross-validation: validation window must start in [train_fraction, 1)");

  std::vector<double> grid = lambda_grid;
  std::sort(grid.begin(), grid.end(), std::greater<double>());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  for (double lam : grid) require(lam >= 0.0, "cross-validation: negative lambda");

  const double t0 = path.times[0];
  const double T = path.horizon();
  const ObservedPath train = subpath(path, t0, t0 + train_fraction * T);
  const ObservedPath valid = subpath(path, t0 + validation_start_fraction * T, t0 + T);

  const LikelihoodEvaluator ev_train(model, train);
  const LikelihoodEvaluator ev_valid(model, valid);

  // Warm starts chain through the grid; extra random starts would break
  // the chain, so the sweep always runs single-start.
  SolverConfig fit_cfg = cfg;
  fit_cfg.multi_start = 1;

  CvResult out;
  out.table.reserve(grid.size());
  Vector warm = Vector::Zero(model.param_dim());
  double best_loss = std::numeric_limits<double>::infinity();
  bool any_usable = false;

  for (double lam : grid) {
    CvRow row;
    row.lambda = lam;
    SolverResult fit = fit_lasso(ev_train, lam, fit_cfg, warm);
    warm = fit.theta_hat;
    row.converged = fit.converged;
    row.validation_loss = ev_valid.neg_log_likelihood(fit.theta_hat);
    if (std::isfinite(row.validation_loss)) {
      any_usable = true;
      if (row.validation_loss < best_loss) {
        best_loss = row.validation_loss;
        out.lambda0 = lam;
        out.theta_at_lambda0 = fit.theta_hat;
      }
    }
    out.table.push_back(row);
  }

  if (!any_usable) {
    std::ostringstream msg;
    msg << "cross-validation failed: no finite validation loss;";
    for (const CvRow& row : out.table) {
      msg << " lambda=" << row.lambda << " loss=" << row.validation_loss
          << " converged=" << (row.converged ? "yes" : "no") << ";";
    }
    throw NumericalError(msg.str());
  }
  return out;
}

}  // namespace driftlasso
