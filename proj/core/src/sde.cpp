#include "driftlasso/sde.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "driftlasso/rng.hpp"

namespace driftlasso {

double ObservedPath::delta() const {
  require(times.size() >= 2, "path has no increments");
  return (times[times.size() - 1] - times[0]) / static_cast<double>(times.size() - 1);
}

double ObservedPath::horizon() const {
  require(times.size() >= 2, "path has no increments");
  return times[times.size() - 1] - times[0];
}

namespace {

// Horizons are taken to the nearest grid point: N = round(units / delta).
long long step_count(double units, int steps_per_unit) {
  return std::llround(units * static_cast<double>(steps_per_unit));
}

}  // namespace

ObservedPath simulate(const DriftModel& model, const Vector& theta, const SimConfig& cfg) {
  require(cfg.T > 0.0, "simulate: T must be positive");
  require(cfg.steps_per_unit >= 1, "simulate: steps_per_unit must be >= 1");
  require(cfg.burn_in >= 0.0, "simulate: burn_in must be nonnegative");
  require(theta.size() == model.param_dim(), "simulate: theta has wrong length");
  require(cfg.divergence_bound > 0.0, "simulate: divergence_bound must be positive");

  const int d = model.dim();
  const long long n_obs = step_count(cfg.T, cfg.steps_per_unit);
  require(n_obs >= 1, "simulate: T too short for the grid");
  const double delta = 1.0 / static_cast<double>(cfg.steps_per_unit);

  long long n_burn = step_count(cfg.burn_in, cfg.steps_per_unit);

  Vector x;
  NormalSampler normal(make_rng(cfg.seed));
  if (cfg.stationary_start) {
    require(model.linear_in_theta() && model.param_dim() == d * d,
            "simulate: stationary_start needs a linear pull b(x) = A x");
    const Matrix S = ou_stationary_covariance(unvec_param(theta, d));
    Eigen::LLT<Matrix> llt(S);
    require(llt.info() == Eigen::Success, "simulate: stationary covariance not factorizable");
    Vector z(d);
    for (int i = 0; i < d; ++i) z[i] = normal();
    x = llt.matrixL() * z;
    n_burn = 0;  // the start is already exact
  } else if (cfg.x0.has_value()) {
    require(cfg.x0->size() == d, "simulate: x0 has wrong dimension");
    x = *cfg.x0;
  } else {
    x = Vector::Zero(d);
  }

  ObservedPath path;
  path.times.resize(n_obs + 1);
  for (long long i = 0; i <= n_obs; ++i) {
    path.times[i] = static_cast<double>(i) * delta;
  }
  path.states.resize(n_obs + 1, d);
  if (cfg.keep_dw) path.dw.resize(n_obs, d);

  const double sqrt_delta = std::sqrt(delta);
  Vector b(d), bd(d), z(d), next(d);
  std::size_t global_step = 0;

  auto advance = [&](bool observed, long long i) {
    for (int c = 0; c < d; ++c) z[c] = normal() * sqrt_delta;
    if (cfg.noise_hook) cfg.noise_hook(global_step, z);
    model.drift_eval(theta, x, b);
    bd = b * delta;
    next = (x - bd) + z;
    if (!next.allFinite() || next.cwiseAbs().maxCoeff() > cfg.divergence_bound) {
      std::ostringstream msg;
      msg << "simulation diverged at step " << global_step
          << (observed ? " (observed window)" : " (burn-in)");
      throw SimulationDiverged(global_step, msg.str());
    }
    if (observed && cfg.keep_dw) {
      // Recompute the increment in the exact order the reconstruction
      // identity X_{i+1} - X_i + b*delta = dW_i is checked in.
      path.dw.row(i) = ((next - x) + bd).transpose();
    }
    x = next;
    ++global_step;
  };

  for (long long i = 0; i < n_burn; ++i) advance(false, 0);
  path.states.row(0) = x.transpose();
  for (long long i = 0; i < n_obs; ++i) {
    advance(true, i);
    path.states.row(i + 1) = x.transpose();
  }

  path.theta_true = theta;
  return path;
}

ObservedPath subpath(const ObservedPath& path, double a, double b) {
  const long long n = path.n_increments();
  require(n >= 1, "subpath: empty source path");
  const double delta = path.delta();
  const double t0 = path.times[0];
  const long long ia = std::llround((a - t0) / delta);
  const long long ib = std::llround((b - t0) / delta);
  require(ia >= 0 && ib <= n, "subpath: window outside the path");
  require(ia < ib, "subpath: empty window");

  ObservedPath out;
  out.times = path.times.segment(ia, ib - ia + 1);
  out.states = path.states.middleRows(ia, ib - ia + 1);
  if (path.has_dw()) out.dw = path.dw.middleRows(ia, ib - ia);
  out.theta_true = path.theta_true;
  return out;
}

Matrix ou_stationary_covariance(const Matrix& A) {
  require(A.rows() == A.cols() && A.rows() >= 1, "stationary covariance: square matrix expected");
  const int d = static_cast<int>(A.rows());

  // Kronecker form of A S + S A' = I: rows indexed by (i,j), unknowns by (k,l).
  Matrix K = Matrix::Zero(d * d, d * d);
  Vector rhs = Vector::Zero(d * d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const int row = i * d + j;
      for (int k = 0; k < d; ++k) {
        K(row, k * d + j) += A(i, k);  // (A S)_{ij} term, S_{kj}
        K(row, i * d + k) += A(j, k);  // (S A')_{ij} term, S_{ik}
      }
      if (i == j) rhs[row] = 1.0;
    }
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(K);
  const Vector s = qr.solve(rhs);
  Matrix S(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) S(i, j) = s[i * d + j];
  }
  S = 0.5 * (S + S.transpose()).eval();

  const double residual = (A * S + S * A.transpose() - Matrix::Identity(d, d)).norm();
  if (!(residual < 1e-8 * (1.0 + S.norm()))) {
    throw NumericalError("stationary covariance: Lyapunov solve failed (singular pencil?)");
  }
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(
        "stationary covariance: solution not positive definite; drift matrix is not stable");
  }
  return S;
}

double ou_time_average_variance(double a, double T) {
  require(a > 0.0 && T > 0.0, "time-average variance: a and T must be positive");
  return (a * T - 1.0 + std::exp(-a * T)) / (a * a * a * T * T);
}

namespace {

void append_g17(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

void write_path_csv(const ObservedPath& path, const std::string& file) {
  const int d = path.dim();
  const long long n = path.n_increments();
  std::string buf;
  buf.reserve(static_cast<std::size_t>((n + 1)) * (d + 1) * 26);

  buf += "t";
  for (int c = 0; c < d; ++c) buf += ",x" + std::to_string(c + 1);
  if (path.has_dw()) {
    for (int c = 0; c < d; ++c) buf += ",dw" + std::to_string(c + 1);
  }
  buf += "\n";

  for (long long i = 0; i <= n; ++i) {
    append_g17(buf, path.times[i]);
    for (int c = 0; c < d; ++c) {
      buf += ',';
      append_g17(buf, path.states(i, c));
    }
    if (path.has_dw()) {
      for (int c = 0; c < d; ++c) {
        buf += ',';
        if (i < n) append_g17(buf, path.dw(i, c));
      }
    }
    buf += "\n";
  }

  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + file);
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw Error("write failed: " + file);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

double parse_double(const std::string& cell, const std::string& file) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0') {
    throw Error("malformed numeric cell '" + cell + "' in " + file);
  }
  return v;
}

}  // namespace

ObservedPath read_path_csv(const std::string& file) {
  std::ifstream is(file);
  if (!is) throw Error("cannot open for reading: " + file);

  std::string line;
  if (!std::getline(is, line)) throw Error("empty path file: " + file);
  const auto header = split_csv_line(line);
  require(!header.empty() && header[0] == "t", "path csv must start with column t: " + file);

  int d = 0;
  while (1 + d < static_cast<int>(header.size()) &&
         header[1 + d] == "x" + std::to_string(d + 1)) {
    ++d;
  }
  require(d >= 1, "path csv has no state columns: " + file);
  const bool with_dw = static_cast<int>(header.size()) == 1 + 2 * d;
  require(static_cast<int>(header.size()) == 1 + d || with_dw,
          "path csv header has unexpected columns: " + file);

  std::vector<double> times;
  std::vector<double> states;
  std::vector<double> dws;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    require(static_cast<int>(cells.size()) == static_cast<int>(header.size()),
            "path csv row width mismatch: " + file);
    times.push_back(parse_double(cells[0], file));
    for (int c = 0; c < d; ++c) states.push_back(parse_double(cells[1 + c], file));
    if (with_dw && !cells[1 + d].empty()) {
      for (int c = 0; c < d; ++c) dws.push_back(parse_double(cells[1 + d + c], file));
    }
  }

  const long long rows = static_cast<long long>(times.size());
  require(rows >= 2, "path csv has fewer than two rows: " + file);
  ObservedPath path;
  path.times.resize(rows);
  path.states.resize(rows, d);
  for (long long i = 0; i < rows; ++i) {
    path.times[i] = times[static_cast<std::size_t>(i)];
    for (int c = 0; c < d; ++c) {
      path.states(i, c) = states[static_cast<std::size_t>(i) * d + c];
    }
  }
  if (with_dw) {
    require(static_cast<long long>(dws.size()) == (rows - 1) * d,
            "path csv dW rows inconsistent: " + file);
    path.dw.resize(rows - 1, d);
    for (long long i = 0; i < rows - 1; ++i) {
      for (int c = 0; c < d; ++c) {
        path.dw(i, c) = dws[static_cast<std::size_t>(i) * d + c];
      }
    }
  }
  return path;
}

}  // namespace driftlasso
