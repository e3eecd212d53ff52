#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "hydro/chain_model.hpp"
#include "hydro/work_limits.hpp"

namespace hydro::oracle {

using mp = boost::multiprecision::cpp_dec_float_50;
using nlohmann::json;

Eigen::MatrixXd drift_matrix(int n, double gamma) {
  const int d = 2 * n + 1;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(d, d);
  auto ri = [](int x) { return x - 1; };
  auto pi = [n](int x) { return n + x; };
  for (int x = 1; x <= n; ++x) {
    b(ri(x), pi(x)) += 1.0;
    b(ri(x), pi(x - 1)) -= 1.0;
  }
  for (int x = 0; x <= n; ++x) {
    if (x + 1 <= n) b(pi(x), ri(x + 1)) += 1.0;
    if (x >= 1) b(pi(x), ri(x)) -= 1.0;
    b(pi(x), pi(x)) -= 2.0 * gamma;
  }
  return b;
}

Eigen::MatrixXd lyapunov_kronecker(const Eigen::MatrixXd& m, const Eigen::MatrixXd& rhs) {
  const int d = static_cast<int>(m.rows());
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd k(d * d, d * d);
  // column-major vec: vec(M X) = (I kron M) vec X, vec(X M^T) = (M kron I) vec X
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) k.block(a * d, b * d, d, d) = id(a, b) * m + m(a, b) * id;
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(rhs.data(), d * d);
  Eigen::VectorXd x = k.fullPivLu().solve(v);
  return Eigen::Map<Eigen::MatrixXd>(x.data(), d, d);
}

Eigen::MatrixXd averaged_covariance(int n, double gamma, double t_minus, const Eigen::VectorXd& p_sq,
                                    const Eigen::MatrixXd& r) {
  Eigen::MatrixXd rhs = r;
  rhs(n, n) += 4.0 * gamma * t_minus;
  for (int y = 1; y <= n; ++y) rhs(n + y, n + y) += 4.0 * gamma * p_sq(y);
  return lyapunov_kronecker(-drift_matrix(n, gamma), rhs);
}

namespace {

Eigen::MatrixXd normalize_rows(Eigen::MatrixXd m) {
  for (int j = 0; j < m.rows(); ++j) m.row(j) /= m.row(j).norm();
  return m;
}

}  // namespace

Eigen::MatrixXd cosine_basis(int n) {
  Eigen::MatrixXd m(n + 1, n + 1);
  const double h = std::numbers::pi / (n + 1);
  for (int j = 0; j <= n; ++j)
    for (int x = 0; x <= n; ++x) m(j, x) = std::cos(h * j * (x + 0.5));
  return normalize_rows(m);
}

Eigen::MatrixXd sine_basis(int n) {
  Eigen::MatrixXd m(n, n);
  const double h = std::numbers::pi / (n + 1);
  for (int j = 1; j <= n; ++j)
    for (int x = 1; x <= n; ++x) m(j - 1, x - 1) = std::sin(h * j * x);
  return normalize_rows(m);
}

double laplacian_eigenvalue(int n, int j) {
  return 2.0 - 2.0 * std::cos(std::numbers::pi * j / (n + 1));
}

Eigen::MatrixXd noiseless_covariance(int n, double gamma, const Eigen::MatrixXd& s0, double tau) {
  const Eigen::MatrixXd e = (drift_matrix(n, gamma) * tau).exp();
  return e * s0 * e.transpose();
}

Oscillator damped_oscillator(double gamma, double lambda, double x0, double v0, double t) {
  const double disc = gamma * gamma - lambda;
  const double decay = std::exp(-gamma * t);
  Oscillator o;
  if (std::abs(disc) < 1e-14) {
    // x = (x0 + (v0 + gamma x0) t) e^{-gamma t}
    const double c = v0 + gamma * x0;
    o.x = (x0 + c * t) * decay;
    o.v = (c - gamma * (x0 + c * t)) * decay;
  } else if (disc > 0) {
    const double s = std::sqrt(disc);
    const double ch = std::cosh(s * t), sh = std::sinh(s * t);
    const double c = (v0 + gamma * x0) / s;
    o.x = decay * (x0 * ch + c * sh);
    o.v = decay * (x0 * s * sh + c * s * ch) - gamma * o.x;
  } else {
    const double w = std::sqrt(-disc);
    const double co = std::cos(w * t), si = std::sin(w * t);
    const double c = (v0 + gamma * x0) / w;
    o.x = decay * (x0 * co + c * si);
    o.v = decay * (-x0 * w * si + c * w * co) - gamma * o.x;
  }
  return o;
}

double heat_series(double u, double t, double gamma, double f_bar, int terms) {
  double s = u;
  for (int k = 1; k <= terms; ++k) {
    const double kp = k * std::numbers::pi;
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    s += 2.0 * sign / kp * std::exp(-kp * kp * t / (2.0 * gamma)) * std::sin(kp * u);
  }
  return f_bar * s;
}

double quotient_50(double gamma, double lambda, double t) {
  const mp g(gamma), l(lambda), tt(t);
  const mp d = g * g - l;
  const mp decay = exp(-g * tt);
  mp q;
  if (d == 0) {
    q = tt * decay;
  } else if (d > 0) {
    const mp s = sqrt(d);
    q = decay * sinh(s * tt) / s;
  } else {
    const mp w = sqrt(-d);
    q = decay * sin(w * tt) / w;
  }
  return q.convert_to<double>();
}

double forcing_series_50(double f_bar, int n, const std::vector<Mode>& modes, double theta, double tau) {
  const mp pi = boost::multiprecision::atan(mp(1)) * 4;
  const mp omega = 2 * pi / mp(theta);
  mp acc = 0;
  for (const auto& m : modes) {
    const mp ph = mp(m.ell) * omega * mp(tau);
    acc += 2 * (mp(m.re) * cos(ph) - mp(m.im) * sin(ph));
  }
  const mp v = mp(f_bar) + acc / sqrt(mp(n));
  return v.convert_to<double>();
}

Eigen::MatrixXd random_psd(int dim, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = nd(gen);
  Eigen::MatrixXd p = g * g.transpose() / dim;
  return 0.5 * (p + p.transpose());
}

Eigen::MatrixXd random_symmetric(int dim, std::uint64_t seed, double scale) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> ud(-scale, scale);
  Eigen::MatrixXd m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = ud(gen);
  return m;
}

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

double num(const json& p, const char* key, double fallback) {
  return p.contains(key) ? p.at(key).get<double>() : fallback;
}

json lyapunov(const json& p) {
  const int n = p.value("n", 6);
  const std::uint64_t seed = p.value("seed", 1);
  const double gamma = num(p, "gamma", 1.0), tm = num(p, "t_minus", 1.0);
  if (n < 1 || n > 16) throw std::invalid_argument("lyapunov: n must lie in [1, 16]");
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> ud(0.5, 1.5);
  Eigen::VectorXd p_sq(n + 1);
  p_sq(0) = tm;
  for (int y = 1; y <= n; ++y) p_sq(y) = ud(gen);
  const Eigen::MatrixXd r = random_symmetric(2 * n + 1, seed + 1, 0.1);
  const Eigen::MatrixXd s = averaged_covariance(n, gamma, tm, p_sq, r);
  const Eigen::MatrixXd c = cosine_basis(n), sn = sine_basis(n);
  Eigen::MatrixXd sp = Eigen::MatrixXd::Zero(n + 1, n);
  sp.bottomRows(n) = sn;
  return {{"n", n},
          {"gamma", gamma},
          {"t_minus", tm},
          {"p_sq", std::vector<double>(p_sq.data(), p_sq.data() + p_sq.size())},
          {"R", matrix_json(r)},
          {"S", matrix_json(s)},
          {"S_fourier",
           {{"r", matrix_json(sp * s.topLeftCorner(n, n) * sp.transpose())},
            {"p", matrix_json(c * s.bottomRightCorner(n + 1, n + 1) * c.transpose())},
            {"pr", matrix_json(c * s.bottomLeftCorner(n + 1, n) * sp.transpose())},
            {"rp", matrix_json(sp * s.topRightCorner(n, n + 1) * c.transpose())}}}};
}

}  // namespace

json run(const std::string& name, const json& p) {
  if (name == "lyapunov") return lyapunov(p);
  if (name == "wq-quadrature") {
    const json chain = p.contains("chain") ? p.at("chain") : p;
    const auto errs = chain_config_errors(chain);
    if (!errs.empty()) throw ValidationError(errs);
    const auto q = wq_quadrature_oracle(chain_config_from_json(chain), p.value("n_quad", 64));
    return {{"wq", q.value}, {"panels", q.panels}, {"converged", q.converged}};
  }
  if (name == "heat-series") {
    const int m = p.value("m", 512);
    const double t = num(p, "t", 0.3), g = num(p, "gamma", 1.0), f = num(p, "f_bar", 1.0);
    if (m < 1) throw std::invalid_argument("heat-series: m must be positive");
    json u = json::array(), r = json::array();
    for (int i = 0; i <= m; ++i) {
      const double x = static_cast<double>(i) / m;
      u.push_back(x);
      r.push_back(heat_series(x, t, g, f));
    }
    return {{"m", m}, {"t", t}, {"gamma", g}, {"f_bar", f}, {"u", u}, {"r", r}};
  }
  if (name == "quotient") {
    const double g = num(p, "gamma", 1.0), l = num(p, "lambda", 2.0), t = num(p, "t", 0.7);
    return {{"gamma", g}, {"lambda", l}, {"t", t}, {"q", quotient_50(g, l, t)}};
  }
  if (name == "oscillator") {
    const auto o = damped_oscillator(num(p, "gamma", 1.0), num(p, "lambda", 2.0), num(p, "x0", 1.0),
                                     num(p, "v0", 0.0), num(p, "t", 1.0));
    return {{"x", o.x}, {"v", o.v}};
  }
  if (name == "forcing") {
    std::vector<Mode> modes;
    for (const auto& m : p.value("forcing_modes", json::array())) {
      modes.push_back({m.at("ell").get<int>(), m.at("re").get<double>(), m.at("im").get<double>()});
    }
    return {{"F", forcing_series_50(num(p, "f_bar", 0.0), p.value("n", 1), modes, num(p, "theta", 1.0),
                                    num(p, "tau", 0.0))}};
  }
  throw ValidationError({"oracle: unknown oracle name '" + name +
                         "' (expected lyapunov, wq-quadrature, heat-series, quotient, oscillator, forcing)"});
}

}  // namespace hydro::oracle
