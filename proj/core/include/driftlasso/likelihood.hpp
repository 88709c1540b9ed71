#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "driftlasso/sde.hpp"

namespace driftlasso {

using VectorField = std::function<Vector(const Vector&)>;

// Cached quadratic form of the likelihood for families linear in theta:
// L_T(theta) = c + q.theta + theta' H theta / 2, assembled in one pass over
// the path. H is the empirical Gram matrix of the basis columns.
class QuadraticCache {
 public:
  QuadraticCache(const DriftModel& model, const ObservedPath& path);

  double value(const Vector& theta) const;
  double value_and_gradient(const Vector& theta, Vector& grad) const;

  const Matrix& H() const { return H_; }
  const Vector& q() const { return q_; }
  double constant() const { return c_; }

 private:
  Matrix H_;
  Vector q_;
  double c_ = 0.0;
};

// Discretized (scaled) negative log-likelihood of the observed path under
// drift parameter theta, with left-endpoint Ito sums:
//   L_T(theta) = (1/T) sum_i b_theta(X_i)'(X_{i+1}-X_i)
//              + (1/2T) sum_i ||b_theta(X_i)||^2 delta.
// The evaluator is immutable after construction and safe to share across
// threads. It borrows the model and path; the caller keeps them alive.
class LikelihoodEvaluator {
 public:
  // build_cache: assemble the quadratic form up front when the model is
  // linear in theta. Evaluations then cost O(p^2) instead of a path sweep.
  LikelihoodEvaluator(const DriftModel& model, const ObservedPath& path, bool build_cache = true);

  const DriftModel& model() const { return *model_; }
  const ObservedPath& path() const { return *path_; }
  const QuadraticCache* cache() const { return cache_.get(); }

  double neg_log_likelihood(const Vector& theta) const;
  Vector nll_gradient(const Vector& theta) const;
  // One fused pass; the solver hot path. Returns the value.
  double nll_value_and_gradient(const Vector& theta, Vector& grad) const;

  // Streaming evaluation that ignores the cache. Kept public so tests can
  // pin the two routes against each other.
  double neg_log_likelihood_direct(const Vector& theta) const;
  double nll_value_and_gradient_direct(const Vector& theta, Vector& grad) const;

  // G(theta, vartheta) = (1/T) sum_i (b_theta(X_i)-b_vartheta(X_i))' dW_i.
  // Needs the retained increments: generation-only oracle.
  double stochastic_term_G(const Vector& theta, const Vector& vartheta) const;

  // max over grid parameters and coordinates j of
  // |(1/T) sum_i (d b_theta(X_i)/d theta_j)' dW_i|. A finite-grid stand-in
  // for the supremum statistic; a lower bound of the true sup.
  double martingale_sup_stat(const std::vector<Vector>& theta_grid) const;

 private:
  const DriftModel* model_;
  const ObservedPath* path_;
  std::unique_ptr<QuadraticCache> cache_;
};

// (1/T) sum_i f(X_i)' g(X_i) delta and the induced seminorm.
double empirical_bilinear(const ObservedPath& path, const VectorField& f, const VectorField& g);
double empirical_norm(const ObservedPath& path, const VectorField& f);

// ||b_a - b_b||_T for two parameters of one model; the workhorse norm of
// the inequality checks.
double empirical_norm_param_diff(const ObservedPath& path, const DriftModel& model,
                                 const Vector& theta_a, const Vector& theta_b);

}  // namespace driftlasso
