#include "driftlasso/likelihood.hpp"

#include <cmath>

namespace driftlasso {

namespace {

void check_compat(const DriftModel& model, const ObservedPath& path) {
  require(path.states.rows() >= 2, "likelihood: path has no increments");
  require(path.dim() == model.dim(), "likelihood: path dimension does not match model");
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(std::string(what) + ": non-finite intermediate");
}

}  // namespace

QuadraticCache::QuadraticCache(const DriftModel& model, const ObservedPath& path) {
  check_compat(model, path);
  require(model.linear_in_theta(), "quadratic cache: model is not linear in theta");

  const int d = model.dim();
  const int p = model.param_dim();
  const long long n = path.n_increments();
  const double delta = path.delta();
  const double T = path.horizon();
  // Jacobian and baseline are theta-free for linear families; evaluate with
  // a zero parameter vector.
  const Vector theta0 = Vector::Zero(p);

  H_.setZero(p, p);
  q_.setZero(p);
  KahanSum c;
  Matrix J(d, p);
  Vector b0(d), rhs(d), x(d), dx(d);
  for (long long i = 0; i < n; ++i) {
    x = path.states.row(i).transpose();
    dx = (path.states.row(i + 1) - path.states.row(i)).transpose();
    model.drift_jacobian(theta0, x, J);
    model.baseline(x, b0);
    H_.selfadjointView<Eigen::Lower>().rankUpdate(J.transpose(), delta);
    rhs = dx + b0 * delta;
    q_.noalias() += J.transpose() * rhs;
    c.add(b0.dot(dx) + 0.5 * b0.squaredNorm() * delta);
  }
  H_ = Matrix(H_.selfadjointView<Eigen::Lower>());
  H_ /= T;
  q_ /= T;
  c_ = c.value() / T;
  check_finite(H_.sum() + q_.sum() + c_, "quadratic cache");
}

double QuadraticCache::value(const Vector& theta) const {
  const double v = c_ + q_.dot(theta) + 0.5 * theta.dot(H_ * theta);
  check_finite(v, "likelihood value");
  return v;
}

double QuadraticCache::value_and_gradient(const Vector& theta, Vector& grad) const {
  grad.noalias() = H_ * theta;
  const double v = c_ + q_.dot(theta) + 0.5 * theta.dot(grad);
  grad += q_;
  check_finite(v + grad.sum(), "likelihood gradient");
  return v;
}

LikelihoodEvaluator::LikelihoodEvaluator(const DriftModel& model, const ObservedPath& path,
                                         bool build_cache)
    : model_(&model), path_(&path) {
  check_compat(model, path);
  if (build_cache && model.linear_in_theta()) {
    cache_ = std::make_unique<QuadraticCache>(model, path);
  }
}

double LikelihoodEvaluator::neg_log_likelihood_direct(const Vector& theta) const {
  require(theta.size() == model_->param_dim(), "likelihood: theta has wrong length");
  const long long n = path_->n_increments();
  const double delta = path_->delta();
  const int d = model_->dim();
  KahanSum acc;
  Vector b(d), x(d), dx(d);
  for (long long i = 0; i < n; ++i) {
    x = path_->states.row(i).transpose();
    model_->drift_eval(theta, x, b);
    dx = (path_->states.row(i + 1) - path_->states.row(i)).transpose();
    acc.add(b.dot(dx) + 0.5 * b.squaredNorm() * delta);
  }
  const double v = acc.value() / path_->horizon();
  check_finite(v, "likelihood value");
  return v;
}

double LikelihoodEvaluator::nll_value_and_gradient_direct(const Vector& theta,
                                                          Vector& grad) const {
  require(theta.size() == model_->param_dim(), "likelihood: theta has wrong length");
  const long long n = path_->n_increments();
  const double delta = path_->delta();
  const int d = model_->dim();
  const int p = model_->param_dim();
  KahanSum acc;
  grad.setZero(p);
  Vector b(d), rhs(d), x(d), dx(d);
  Matrix J(d, p);
  for (long long i = 0; i < n; ++i) {
    x = path_->states.row(i).transpose();
    dx = (path_->states.row(i + 1) - path_->states.row(i)).transpose();
    model_->drift_and_jacobian(theta, x, b, J);
    acc.add(b.dot(dx) + 0.5 * b.squaredNorm() * delta);
    rhs = dx + b * delta;
    grad.noalias() += J.transpose() * rhs;
  }
  const double T = path_->horizon();
  grad /= T;
  const double v = acc.value() / T;
  check_finite(v + grad.sum(), "likelihood gradient");
  return v;
}

double LikelihoodEvaluator::neg_log_likelihood(const Vector& theta) const {
  if (cache_) return cache_->value(theta);
  return neg_log_likelihood_direct(theta);
}

double LikelihoodEvaluator::nll_value_and_gradient(const Vector& theta, Vector& grad) const {
  if (cache_) return cache_->value_and_gradient(theta, grad);
  return nll_value_and_gradient_direct(theta, grad);
}

Vector LikelihoodEvaluator::nll_gradient(const Vector& theta) const {
  Vector grad;
  nll_value_and_gradient(theta, grad);
  return grad;
}

double LikelihoodEvaluator::stochastic_term_G(const Vector& theta, const Vector& vartheta) const {
  require(path_->has_dw(),
          "stochastic term requires a generated path with retained increments");
  require(theta.size() == model_->param_dim() && vartheta.size() == model_->param_dim(),
          "stochastic term: parameter has wrong length");
  const long long n = path_->n_increments();
  const int d = model_->dim();
  KahanSum acc;
  Vector ba(d), bb(d), x(d);
  for (long long i = 0; i < n; ++i) {
    x = path_->states.row(i).transpose();
    model_->drift_eval(theta, x, ba);
    model_->drift_eval(vartheta, x, bb);
    acc.add((ba - bb).dot(path_->dw.row(i)));
  }
  const double v = acc.value() / path_->horizon();
  check_finite(v, "stochastic term");
  return v;
}

double LikelihoodEvaluator::martingale_sup_stat(const std::vector<Vector>& theta_grid) const {
  require(path_->has_dw(),
          "martingale statistic requires a generated path with retained increments");
  require(!theta_grid.empty(), "martingale statistic: empty parameter grid");
  const long long n = path_->n_increments();
  const int d = model_->dim();
  const int p = model_->param_dim();
  const double T = path_->horizon();

  double stat = 0.0;
  Matrix J(d, p);
  Vector acc(p), x(d);
  for (const Vector& theta : theta_grid) {
    require(theta.size() == p, "martingale statistic: parameter has wrong length");
    acc.setZero();
    for (long long i = 0; i < n; ++i) {
      x = path_->states.row(i).transpose();
      model_->drift_jacobian(theta, x, J);
      acc.noalias() += J.transpose() * path_->dw.row(i).transpose();
    }
    stat = std::max(stat, acc.cwiseAbs().maxCoeff() / T);
    // Theta-free Jacobian: every grid point gives the same value.
    if (model_->linear_in_theta()) break;
  }
  check_finite(stat, "martingale statistic");
  return stat;
}

double empirical_bilinear(const ObservedPath& path, const VectorField& f, const VectorField& g) {
  require(static_cast<bool>(f) && static_cast<bool>(g), "empirical form: null callback");
  const long long n = path.n_increments();
  const double delta = path.delta();
  KahanSum acc;
  for (long long i = 0; i < n; ++i) {
    const Vector x = path.states.row(i).transpose();
    acc.add(f(x).dot(g(x)) * delta);
  }
  return acc.value() / path.horizon();
}

double empirical_norm(const ObservedPath& path, const VectorField& f) {
  const double sq = empirical_bilinear(path, f, f);
  return std::sqrt(std::max(0.0, sq));
}

double empirical_norm_param_diff(const ObservedPath& path, const DriftModel& model,
                                 const Vector& theta_a, const Vector& theta_b) {
  check_compat(model, path);
  require(theta_a.size() == model.param_dim() && theta_b.size() == model.param_dim(),
          "empirical norm: parameter has wrong length");
  const long long n = path.n_increments();
  const double delta = path.delta();
  const int d = model.dim();
  KahanSum acc;
  Vector ba(d), bb(d), x(d);
  for (long long i = 0; i < n; ++i) {
    x = path.states.row(i).transpose();
    model.drift_eval(theta_a, x, ba);
    model.drift_eval(theta_b, x, bb);
    acc.add((ba - bb).squaredNorm() * delta);
  }
  return std::sqrt(std::max(0.0, acc.value() / path.horizon()));
}

}  // namespace driftlasso
