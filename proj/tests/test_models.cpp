#include <cmath>

#include "test_support.hpp"

TEST_SUITE("models") {

TEST_CASE("scalar basis h is odd in x, vanishes at the origin, matches its k-derivative") {
  CHECK(dl::h_function(0.0, 3.0) == 0.0);
  CHECK(dl::h_function(1e-301, 7.0) == 0.0);  // guard region, not a limit evaluation
  CHECK(dl::h_function(2.0, 0.0) == 0.0);

  auto rng = dl::make_rng(11);
  for (int c = 0; c < 50; ++c) {
    double x = dl::uniform_real(rng, -3.0, 3.0);
    if (std::abs(x) < 1e-3) continue;
    double k = dl::uniform_real(rng, -4.0, 4.0);
    CHECK(dl::h_function(-x, k) == doctest::Approx(-dl::h_function(x, k)).epsilon(1e-14));
    CHECK(std::abs(dl::h_function(x, k)) <= x * x + 1e-15);

    double e = 1e-6 * (1.0 + std::abs(k));
    double fd = (dl::h_function(x, k + e) - dl::h_function(x, k - e)) / (2.0 * e);
    CHECK(dl::h_dk(x, k) == doctest::Approx(fd).epsilon(1e-7));
  }
  CHECK(dl::h_dk(0.0, 5.0) == 0.0);
}

TEST_CASE("parameter vectorization is column-major and round-trips") {
  dl::Matrix A(2, 2);
  A << 1, 2, 3, 4;
  dl::Vector t = dl::vec_param(A);
  REQUIRE(t.size() == 4);
  // theta[j*d + i] = A(i, j)
  CHECK(t[0] == 1);
  CHECK(t[1] == 3);
  CHECK(t[2] == 2);
  CHECK(t[3] == 4);
  CHECK((dl::unvec_param(t, 2) - A).norm() == 0.0);

  dl::Vector sq = dl::vec_param(dl::Matrix::Identity(3, 3));
  CHECK_THROWS_AS((void)dl::unvec_param(sq, 2), dl::ContractViolation);
  CHECK_THROWS_AS((void)dl::vec_param(dl::Matrix::Zero(2, 3)), dl::ContractViolation);
}

TEST_CASE("linear pull drift and Jacobian agree with the matrix form") {
  const int d = 3;
  dl::OrnsteinUhlenbeck model(d);
  CHECK(model.param_dim() == d * d);
  CHECK(model.linear_in_theta());

  dl::Matrix A = stable_matrix(d, 21);
  dl::Vector x = randn_vec(d, 22);
  dl::Vector b = model.drift(dl::vec_param(A), x);
  CHECK((b - A * x).lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + b.norm()));

  // column j*d+i of the Jacobian is x_j * e_i
  dl::Matrix J = model.jacobian(dl::vec_param(A), x);
  REQUIRE(J.rows() == d);
  REQUIRE(J.cols() == d * d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i)
      for (int r = 0; r < d; ++r)
        CHECK(J(r, j * d + i) == (r == i ? x[j] : 0.0));

  dl::Vector bad = randn_vec(d + 1, 23);
  CHECK_THROWS_AS((void)model.drift(dl::vec_param(A), bad), dl::ContractViolation);
  CHECK_THROWS_AS((void)model.drift(bad, x), dl::ContractViolation);
}

TEST_CASE("diagonal linear family multiplies coordinates and reports its baseline") {
  const int d = 4;
  dl::GeneralLinear model = dl::make_diagonal_linear(d);
  CHECK(model.param_dim() == d);
  CHECK(model.linear_in_theta());
  CHECK(model.family_name() == "general_linear");

  dl::Vector theta = randn_vec(d, 31);
  dl::Vector x = randn_vec(d, 32);
  dl::Vector b = model.drift(theta, x);
  for (int i = 0; i < d; ++i) CHECK(b[i] == theta[i] * x[i]);

  dl::Matrix J = model.jacobian(theta, x);
  CHECK((J - x.asDiagonal().toDenseMatrix()).norm() == 0.0);

  dl::Vector base(d);
  model.baseline(x, base);
  CHECK(base.norm() == 0.0);
}

TEST_CASE("general linear family adds the parameter-free baseline") {
  const int d = 2;
  dl::GeneralLinear::BasisFn phi0 = [](const dl::Vector& x) { return dl::Vector(2 * x); };
  std::vector<dl::GeneralLinear::BasisFn> basis;
  basis.push_back([](const dl::Vector& x) {
    dl::Vector v(2);
    v << x[0], 0.0;
    return v;
  });
  dl::GeneralLinear model(d, phi0, basis);
  CHECK(model.param_dim() == 1);

  dl::Vector theta(1);
  theta << 3.0;
  dl::Vector x(2);
  x << 1.0, -2.0;
  dl::Vector b = model.drift(theta, x);
  CHECK(b[0] == 2.0 + 3.0);
  CHECK(b[1] == -4.0);

  dl::Vector zero = dl::Vector::Zero(1);
  CHECK((model.drift(zero, x) - 2 * x).norm() == 0.0);
}

TEST_CASE("cosine Langevin drift is the potential gradient") {
  const int d = 3;
  dl::LangevinGradient model = dl::make_cosine_langevin(d);
  CHECK(model.param_dim() == d);
  CHECK_FALSE(model.linear_in_theta());

  dl::Vector theta = randn_vec(d, 41, 0.5);
  dl::Vector x = randn_vec(d, 42);
  dl::Vector b = model.drift(theta, x);
  for (int i = 0; i < d; ++i)
    CHECK(b[i] == doctest::Approx(x[i] - theta[i] * std::sin(x[i])).epsilon(1e-15));

  dl::Matrix J = model.jacobian(theta, x);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) CHECK(J(i, j) == (i == j ? -std::sin(x[i]) : 0.0));

  // drift should be the x-gradient of the reported potential
  double v0 = model.potential(theta, x);
  for (int i = 0; i < d; ++i) {
    dl::Vector xp = x, xm = x;
    double e = 1e-6;
    xp[i] += e;
    xm[i] -= e;
    double fd = (model.potential(theta, xp) - model.potential(theta, xm)) / (2 * e);
    CHECK(b[i] == doctest::Approx(fd).epsilon(1e-8));
  }
  CHECK(std::isfinite(v0));
}

TEST_CASE("sine-quadratic drift matches the scalar basis entrywise") {
  const int d = 3;
  dl::SineQuadratic model(d);
  CHECK(model.param_dim() == d * d);
  CHECK_FALSE(model.linear_in_theta());

  dl::Matrix A = dl::unvec_param(randn_vec(d * d, 51), d);
  dl::Vector x = randn_vec(d, 52, 2.0);
  dl::Vector b = model.drift(dl::vec_param(A), x);
  for (int i = 0; i < d; ++i) {
    double want = 0.0;
    for (int j = 0; j < d; ++j) want += dl::h_function(x[j], A(i, j));
    CHECK(b[i] == doctest::Approx(want).epsilon(1e-14));
  }

  // entry A_ij only feeds component i, through h_dk(x_j, A_ij)
  dl::Matrix J = model.jacobian(dl::vec_param(A), x);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i)
      for (int r = 0; r < d; ++r) {
        double want = (r == i) ? dl::h_dk(x[j], A(i, j)) : 0.0;
        CHECK(J(r, j * d + i) == doctest::Approx(want).epsilon(1e-14));
      }

  // the fused pass reproduces the two separate calls bit for bit
  dl::Vector b2;
  dl::Matrix J2;
  model.drift_and_jacobian(dl::vec_param(A), x, b2, J2);
  CHECK((b2 - b).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((J2 - J).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("monotonicity probe recovers the smallest symmetric eigenvalue of a linear pull") {
  dl::OrnsteinUhlenbeck model(2);
  dl::Matrix A(2, 2);
  A << 1.0, 0.0, 0.0, 3.0;
  double probe = dl::monotonicity_probe(model, dl::vec_param(A), 4000, 2.0, 7);
  CHECK(probe >= 1.0 - 1e-12);
  CHECK(probe <= 1.05);

  dl::OrnsteinUhlenbeck scalar(1);
  dl::Vector a(1);
  a << 2.0;
  CHECK(dl::monotonicity_probe(scalar, a, 100, 1.0, 8) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("invariant density helpers agree in linear and log domain") {
  auto V = [](const dl::Vector& x) { return 0.5 * x.squaredNorm(); };
  dl::Vector x = randn_vec(3, 61);
  double direct = dl::langevin_invariant_density_unnormalized(V, x);
  double logged = dl::langevin_log_invariant_density_unnormalized(V, x);
  CHECK(logged == doctest::Approx(-2.0 * V(x)).epsilon(1e-15));
  CHECK(direct == doctest::Approx(std::exp(logged)).epsilon(1e-14));
}

}  // TEST_SUITE
