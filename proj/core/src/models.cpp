#include "driftlasso/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "driftlasso/rng.hpp"

namespace driftlasso {

double h_function(double x, double k) {
  if (std::abs(x) < 1e-300) return 0.0;  // k/x may overflow before x^2 damps it
  return x * x * std::sin(k / x);
}

double h_dk(double x, double k) {
  if (std::abs(x) < 1e-300) return 0.0;
  return x * std::cos(k / x);
}

Matrix unvec_param(const Vector& theta, int d) {
  require(theta.size() == static_cast<Eigen::Index>(d) * d,
          "unvec_param: theta length must be d^2");
  return Eigen::Map<const Matrix>(theta.data(), d, d);
}

Vector vec_param(const Matrix& A) {
  require(A.rows() == A.cols(), "vec_param: square matrix expected");
  return Eigen::Map<const Vector>(A.data(), A.size());
}

void DriftModel::baseline(const Vector& /*x*/, Vector& out) const {
  out.setZero(dim());
}

void DriftModel::check_dims(const Vector& theta, const Vector& x) const {
  require(theta.size() == param_dim(), family_name() + ": theta has wrong length");
  require(x.size() == dim(), family_name() + ": state has wrong length");
}

Vector DriftModel::drift(const Vector& theta, const Vector& x) const {
  check_dims(theta, x);
  Vector out;
  drift_eval(theta, x, out);
  return out;
}

Matrix DriftModel::jacobian(const Vector& theta, const Vector& x) const {
  check_dims(theta, x);
  Matrix out;
  drift_jacobian(theta, x, out);
  return out;
}

OrnsteinUhlenbeck::OrnsteinUhlenbeck(int d) : d_(d) {
  require(d >= 1, "ornstein_uhlenbeck: d must be positive");
}

void OrnsteinUhlenbeck::drift_eval(const Vector& theta, const Vector& x, Vector& out) const {
  check_dims(theta, x);
  out.noalias() = Eigen::Map<const Matrix>(theta.data(), d_, d_) * x;
}

void OrnsteinUhlenbeck::drift_jacobian(const Vector& theta, const Vector& x, Matrix& out) const {
  check_dims(theta, x);
  // b_i = sum_c A(i,c) x_c and theta[c*d+i] = A(i,c), so row i has x_c at
  // column c*d+i and zeros elsewhere.
  out.setZero(d_, d_ * d_);
  for (int c = 0; c < d_; ++c) {
    for (int i = 0; i < d_; ++i) {
      out(i, c * d_ + i) = x[c];
    }
  }
}

GeneralLinear::GeneralLinear(int d, BasisFn phi0, std::vector<BasisFn> basis)
    : d_(d), phi0_(std::move(phi0)), basis_(std::move(basis)) {
  require(d >= 1, "general_linear: d must be positive");
  require(!basis_.empty(), "general_linear: at least one basis function required");
  for (const auto& fn : basis_) {
    require(static_cast<bool>(fn), "general_linear: null basis function");
  }
}

void GeneralLinear::baseline(const Vector& x, Vector& out) const {
  if (phi0_) {
    out = phi0_(x);
    require(out.size() == d_, "general_linear: phi0 returned wrong dimension");
  } else {
    out.setZero(d_);
  }
}

void GeneralLinear::drift_eval(const Vector& theta, const Vector& x, Vector& out) const {
  check_dims(theta, x);
  baseline(x, out);
  for (std::size_t j = 0; j < basis_.size(); ++j) {
    if (theta[static_cast<Eigen::Index>(j)] == 0.0) continue;
    out.noalias() += theta[static_cast<Eigen::Index>(j)] * basis_[j](x);
  }
}

void GeneralLinear::drift_jacobian(const Vector& theta, const Vector& x, Matrix& out) const {
  check_dims(theta, x);
  out.resize(d_, static_cast<Eigen::Index>(basis_.size()));
  for (std::size_t j = 0; j < basis_.size(); ++j) {
    Vector col = basis_[j](x);
    require(col.size() == d_, "general_linear: basis function returned wrong dimension");
    out.col(static_cast<Eigen::Index>(j)) = col;
  }
}

GeneralLinear make_diagonal_linear(int d) {
  std::vector<GeneralLinear::BasisFn> basis;
  basis.reserve(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    basis.push_back([d, j](const Vector& x) {
      Vector e = Vector::Zero(d);
      e[j] = x[j];
      return e;
    });
  }
  return GeneralLinear(d, nullptr, std::move(basis));
}

LangevinGradient::LangevinGradient(int d, int p, Potential potential, GradientX grad_x,
                                   JacobianTheta jac_theta)
    : d_(d),
      p_(p),
      potential_(std::move(potential)),
      grad_x_(std::move(grad_x)),
      jac_theta_(std::move(jac_theta)) {
  require(d >= 1 && p >= 1, "langevin_gradient: dimensions must be positive");
  require(static_cast<bool>(grad_x_), "langevin_gradient: gradient callback required");
  require(static_cast<bool>(jac_theta_), "langevin_gradient: theta-Jacobian callback required");
}

void LangevinGradient::drift_eval(const Vector& theta, const Vector& x, Vector& out) const {
  check_dims(theta, x);
  grad_x_(theta, x, out);
  require(out.size() == d_, "langevin_gradient: gradient callback returned wrong dimension");
}

void LangevinGradient::drift_jacobian(const Vector& theta, const Vector& x, Matrix& out) const {
  check_dims(theta, x);
  jac_theta_(theta, x, out);
  require(out.rows() == d_ && out.cols() == p_,
          "langevin_gradient: Jacobian callback returned wrong shape");
}

double LangevinGradient::potential(const Vector& theta, const Vector& x) const {
  require(static_cast<bool>(potential_), "langevin_gradient: no potential callback supplied");
  check_dims(theta, x);
  return potential_(theta, x);
}

LangevinGradient make_cosine_langevin(int d) {
  auto potential = [](const Vector& theta, const Vector& x) {
    double v = 0.5 * x.squaredNorm();
    for (Eigen::Index i = 0; i < x.size(); ++i) v += theta[i] * std::cos(x[i]);
    return v;
  };
  auto grad = [](const Vector& theta, const Vector& x, Vector& out) {
    out.resize(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = x[i] - theta[i] * std::sin(x[i]);
  };
  auto jac = [](const Vector& /*theta*/, const Vector& x, Matrix& out) {
    out.setZero(x.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out(i, i) = -std::sin(x[i]);
  };
  return LangevinGradient(d, d, potential, grad, jac);
}

SineQuadratic::SineQuadratic(int d) : d_(d) {
  require(d >= 1, "sine_quadratic: d must be positive");
}

void SineQuadratic::drift_eval(const Vector& theta, const Vector& x, Vector& out) const {
  check_dims(theta, x);
  out.setZero(d_);
  for (int j = 0; j < d_; ++j) {
    const double xj = x[j];
    if (std::abs(xj) < 1e-300) continue;
    const double inv = 1.0 / xj;
    const double xj2 = xj * xj;
    for (int i = 0; i < d_; ++i) {
      const double k = theta[j * d_ + i];  // A(i,j)
      out[i] += xj2 * std::sin(k * inv);
    }
  }
}

void SineQuadratic::drift_jacobian(const Vector& theta, const Vector& x, Matrix& out) const {
  check_dims(theta, x);
  out.setZero(d_, d_ * d_);
  // d b_i / d A(i,j) = h_dk(x_j, A(i,j)) sits at column j*d+i of row i.
  for (int j = 0; j < d_; ++j) {
    const double xj = x[j];
    if (std::abs(xj) < 1e-300) continue;
    const double inv = 1.0 / xj;
    for (int i = 0; i < d_; ++i) {
      const double k = theta[j * d_ + i];
      out(i, j * d_ + i) = xj * std::cos(k * inv);
    }
  }
}

void SineQuadratic::drift_and_jacobian(const Vector& theta, const Vector& x, Vector& out_b,
                                       Matrix& out_jac) const {
  check_dims(theta, x);
  out_b.setZero(d_);
  out_jac.setZero(d_, d_ * d_);
  for (int j = 0; j < d_; ++j) {
    const double xj = x[j];
    if (std::abs(xj) < 1e-300) continue;
    const double inv = 1.0 / xj;
    const double xj2 = xj * xj;
    for (int i = 0; i < d_; ++i) {
      const double r = theta[j * d_ + i] * inv;
      out_b[i] += xj2 * std::sin(r);
      out_jac(i, j * d_ + i) = xj * std::cos(r);
    }
  }
}

double monotonicity_probe(const DriftModel& model, const Vector& theta, int sample_count,
                          double box_radius, std::uint64_t rng_seed) {
  require(sample_count >= 1, "monotonicity_probe: sample_count must be >= 1");
  require(box_radius > 0.0, "monotonicity_probe: box_radius must be positive");
  const int d = model.dim();
  auto rng = make_rng(rng_seed);
  Vector x(d), y(d), bx(d), by(d);
  double min_ratio = std::numeric_limits<double>::infinity();
  for (int n = 0; n < sample_count; ++n) {
    double dist2 = 0.0;
    do {
      for (int i = 0; i < d; ++i) {
        x[i] = uniform_real(rng, -box_radius, box_radius);
        y[i] = uniform_real(rng, -box_radius, box_radius);
      }
      dist2 = (x - y).squaredNorm();
    } while (dist2 < 1e-24);  // resample coincident pairs: the ratio is 0/0
    model.drift_eval(theta, x, bx);
    model.drift_eval(theta, y, by);
    const double ratio = (bx - by).dot(x - y) / dist2;
    min_ratio = std::min(min_ratio, ratio);
  }
  return min_ratio;
}

double langevin_invariant_density_unnormalized(const std::function<double(const Vector&)>& V,
                                               const Vector& x) {
  return std::exp(langevin_log_invariant_density_unnormalized(V, x));
}

double langevin_log_invariant_density_unnormalized(const std::function<double(const Vector&)>& V,
                                                   const Vector& x) {
  require(static_cast<bool>(V), "invariant density: potential callback required");
  const double v = V(x);
  require(std::isfinite(v), "invariant density: potential not finite at x");
  return -2.0 * v;
}

}  // namespace driftlasso
