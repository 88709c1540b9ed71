#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "driftlasso/common.hpp"

namespace driftlasso {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// h(x,k) = x^2 sin(k/x) for x != 0, and 0 at x = 0 (continuous extension).
// Inputs with |x| < 1e-300 return 0: k/x would overflow before the x^2
// factor could damp it.
double h_function(double x, double k);

// d/dk of h_function: x cos(k/x) for x != 0, 0 at x = 0.
double h_dk(double x, double k);

// vect(A) convention used throughout: column-major stacking, so
// theta[j*d + i] == A(i,j). Matches Eigen's default storage order.
Matrix unvec_param(const Vector& theta, int d);
Vector vec_param(const Matrix& A);

// Parametric drift family b_theta: R^d -> R^d with an analytic
// theta-Jacobian. The process under study is dX = -b_theta(X) dt + dW.
class DriftModel {
 public:
  virtual ~DriftModel() = default;

  virtual int dim() const = 0;        // d
  virtual int param_dim() const = 0;  // p

  // out = b_theta(x); out is resized to d.
  virtual void drift_eval(const Vector& theta, const Vector& x, Vector& out) const = 0;

  // out(:, j) = d b_theta(x) / d theta_j; out is resized to d x p.
  virtual void drift_jacobian(const Vector& theta, const Vector& x, Matrix& out) const = 0;

  // Both of the above in one pass; overridden where they share intermediate
  // work (the likelihood gradient calls this once per increment).
  virtual void drift_and_jacobian(const Vector& theta, const Vector& x, Vector& out_b,
                                  Matrix& out_jac) const {
    drift_eval(theta, x, out_b);
    drift_jacobian(theta, x, out_jac);
  }

  // True when b_theta(x) = baseline(x) + drift_jacobian(x) * theta with a
  // theta-free Jacobian. Enables the cached quadratic form of the likelihood.
  virtual bool linear_in_theta() const { return false; }

  // baseline(x) is the theta-free part of a linear family; zero otherwise.
  virtual void baseline(const Vector& x, Vector& out) const;

  virtual std::string family_name() const = 0;

  // Checked convenience wrappers.
  Vector drift(const Vector& theta, const Vector& x) const;
  Matrix jacobian(const Vector& theta, const Vector& x) const;

 protected:
  void check_dims(const Vector& theta, const Vector& x) const;
};

// b_theta(x) = A x with A read from theta = vect(A); p = d^2.
class OrnsteinUhlenbeck : public DriftModel {
 public:
  explicit OrnsteinUhlenbeck(int d);

  int dim() const override { return d_; }
  int param_dim() const override { return d_ * d_; }
  void drift_eval(const Vector& theta, const Vector& x, Vector& out) const override;
  void drift_jacobian(const Vector& theta, const Vector& x, Matrix& out) const override;
  bool linear_in_theta() const override { return true; }
  std::string family_name() const override { return "ornstein_uhlenbeck"; }

 private:
  int d_;
};

// b_theta(x) = phi0(x) + sum_j theta_j phi_j(x) for user-supplied basis
// functions. The Jacobian [phi_1(x) | ... | phi_p(x)] is theta-free.
class GeneralLinear : public DriftModel {
 public:
  using BasisFn = std::function<Vector(const Vector&)>;

  // phi0 may be empty, meaning zero baseline.
  GeneralLinear(int d, BasisFn phi0, std::vector<BasisFn> basis);

  int dim() const override { return d_; }
  int param_dim() const override { return static_cast<int>(basis_.size()); }
  void drift_eval(const Vector& theta, const Vector& x, Vector& out) const override;
  void drift_jacobian(const Vector& theta, const Vector& x, Matrix& out) const override;
  bool linear_in_theta() const override { return true; }
  void baseline(const Vector& x, Vector& out) const override;
  std::string family_name() const override { return "general_linear"; }

 private:
  int d_;
  BasisFn phi0_;  // may be null
  std::vector<BasisFn> basis_;
};

// Convenience factory: p = d, phi_j(x) = x_j e_j, zero baseline. The drift
// is a diagonal linear pull with one rate parameter per coordinate.
GeneralLinear make_diagonal_linear(int d);

// b_theta = grad_x V_theta, defined by callbacks. The potential itself is
// only needed for the invariant-density helpers below.
class LangevinGradient : public DriftModel {
 public:
  using Potential = std::function<double(const Vector& theta, const Vector& x)>;
  using GradientX = std::function<void(const Vector& theta, const Vector& x, Vector& out)>;
  using JacobianTheta = std::function<void(const Vector& theta, const Vector& x, Matrix& out)>;

  LangevinGradient(int d, int p, Potential potential, GradientX grad_x, JacobianTheta jac_theta);

  int dim() const override { return d_; }
  int param_dim() const override { return p_; }
  void drift_eval(const Vector& theta, const Vector& x, Vector& out) const override;
  void drift_jacobian(const Vector& theta, const Vector& x, Matrix& out) const override;
  std::string family_name() const override { return "langevin_gradient"; }

  double potential(const Vector& theta, const Vector& x) const;

 private:
  int d_;
  int p_;
  Potential potential_;
  GradientX grad_x_;
  JacobianTheta jac_theta_;
};

// Canonical non-quadratic instance used by tests and the CLI:
// V_theta(x) = ||x||^2/2 + sum_j theta_j cos(x_j), p = d, so
// b_i(x) = x_i - theta_i sin(x_i). Ergodic for ||theta||_inf < 1.
LangevinGradient make_cosine_langevin(int d);

// b^(i)(x) = sum_j h(x_j, A_ij) with A read from theta = vect(A); p = d^2.
// Nonlinear in theta; the theta-Jacobian row i touches only entries A_ij.
class SineQuadratic : public DriftModel {
 public:
  explicit SineQuadratic(int d);

  int dim() const override { return d_; }
  int param_dim() const override { return d_ * d_; }
  void drift_eval(const Vector& theta, const Vector& x, Vector& out) const override;
  void drift_jacobian(const Vector& theta, const Vector& x, Matrix& out) const override;
  // Shares 1/x_j and the sin/cos pair per entry.
  void drift_and_jacobian(const Vector& theta, const Vector& x, Vector& out_b,
                          Matrix& out_jac) const override;
  std::string family_name() const override { return "sine_quadratic"; }

 private:
  int d_;
};

// Diagnostic lower estimate of the monotonicity constant M in
// (b(x)-b(y))'(x-y) >= M ||x-y||^2: minimum of that Rayleigh-style ratio
// over sampled pairs drawn uniformly from [-box_radius, box_radius]^d.
// A positive value is evidence, not proof, that the condition holds.
double monotonicity_probe(const DriftModel& model, const Vector& theta, int sample_count,
                          double box_radius, std::uint64_t rng_seed);

// Unnormalized invariant density exp(-2 V(x)) of dX = -grad V(X) dt + dW.
// The log-domain variant avoids overflow for large |V|.
double langevin_invariant_density_unnormalized(const std::function<double(const Vector&)>& V,
                                               const Vector& x);
double langevin_log_invariant_density_unnormalized(const std::function<double(const Vector&)>& V,
                                                   const Vector& x);

}  // namespace driftlasso
