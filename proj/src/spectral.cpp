#include "hydro/spectral.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hydro {

namespace {

double psi_formula(int n, int j, int x) {
  const double norm = std::sqrt((j == 0 ? 1.0 : 2.0) / (n + 1));
  return norm * std::cos(std::numbers::pi * j * (2.0 * x + 1.0) / (2.0 * (n + 1)));
}

double phi_formula(int n, int j, int x) {
  return std::sqrt(2.0 / (n + 1)) * std::sin(std::numbers::pi * j * static_cast<double>(x) / (n + 1));
}

}  // namespace

double SpectralBasis::psi_at(int j, int x) const {
  return dense() ? psi(j, x) : psi_formula(n, j, x);
}

double SpectralBasis::phi_at(int j, int x) const {
  return dense() ? phi(j - 1, x - 1) : phi_formula(n, j, x);
}

SpectralBasis build_basis(int n) {
  if (n < 1) throw std::invalid_argument("build_basis: n must be >= 1");
  SpectralBasis b;
  b.n = n;
  b.lambda.resize(n + 1);
  for (int j = 0; j <= n; ++j) {
    const double s = std::sin(std::numbers::pi * j / (2.0 * (n + 1)));
    b.lambda(j) = 4.0 * s * s;
  }
  if (n <= SpectralBasis::kDenseLimit) {
    b.psi.resize(n + 1, n + 1);
    for (int j = 0; j <= n; ++j)
      for (int x = 0; x <= n; ++x) b.psi(j, x) = psi_formula(n, j, x);
    b.phi.resize(n, n);
    for (int j = 1; j <= n; ++j)
      for (int x = 1; x <= n; ++x) b.phi(j - 1, x - 1) = phi_formula(n, j, x);
  }
  return b;
}

Eigen::VectorXd grad(const Eigen::VectorXd& g) {
  const int n = static_cast<int>(g.size());
  Eigen::VectorXd out(n + 1);
  for (int x = 0; x <= n; ++x) {
    const double up = (x + 1 <= n) ? g(x) : 0.0;      // g_{x+1}
    const double here = (x >= 1) ? g(x - 1) : 0.0;    // g_x
    out(x) = up - here;
  }
  return out;
}

Eigen::VectorXd div(const Eigen::VectorXd& f) {
  if (f.size() < 2) throw std::invalid_argument("div: need n+1 >= 2 entries");
  const int n = static_cast<int>(f.size()) - 1;
  Eigen::VectorXd out(n);
  for (int x = 1; x <= n; ++x) out(x - 1) = f(x) - f(x - 1);
  return out;
}

ModeRates mode_rates(const Eigen::VectorXd& lambda, double gamma) {
  if (!(gamma > 0)) throw std::invalid_argument("mode_rates: gamma must be positive");
  ModeRates m;
  m.gamma = gamma;
  m.lambda = lambda;
  const int sz = static_cast<int>(lambda.size());
  m.lambda_minus.resize(sz);
  m.lambda_plus.resize(sz);
  m.delta_lambda.resize(sz);
  for (int j = 0; j < sz; ++j) {
    const cplx root = std::sqrt(cplx(gamma * gamma - lambda(j), 0.0));
    m.lambda_plus(j) = gamma + root;
    // The lambda_- = lambda / lambda_+ form avoids cancellation for small lambda.
    m.lambda_minus(j) = root.imag() == 0.0 ? cplx(lambda(j) / (gamma + root.real()), 0.0)
                                           : gamma - root;
    m.delta_lambda(j) = 2.0 * root;
  }
  return m;
}

ModeRates mode_rates(const SpectralBasis& basis, double gamma) {
  return mode_rates(basis.lambda, gamma);
}

cplx stable_quotient(cplx lambda_minus, cplx delta_lambda, double t) {
  if (t == 0.0) return 0.0;
  const cplx z = delta_lambda * t;
  const cplx decay = std::exp(-lambda_minus * t);
  if (std::abs(z) >= kQuotientSwitch) {
    return decay * (-cexpm1(-z)) / delta_lambda;
  }
  return t * decay * phi1(-z);
}

cplx stable_quotient(const ModeRates& rates, int j, double t) {
  return stable_quotient(rates.lambda_minus(j), rates.delta_lambda(j), t);
}

nlohmann::json KeyLemmaReport::to_json() const {
  return {{"n", n},
          {"gamma", gamma},
          {"ok", ok},
          {"violations", violations},
          {"min_ratio", min_ratio},
          {"max_ratio", max_ratio}};
}

KeyLemmaReport key_lemma_check(const ModeRates& rates, int n, double gamma) {
  KeyLemmaReport rep;
  rep.n = n;
  rep.gamma = gamma;
  const double slack = 1e-12;
  const double bound_plus = gamma + std::sqrt(gamma * gamma + 4.0);
  const double lower_coef = gamma / (bound_plus * bound_plus);
  rep.min_ratio = std::numeric_limits<double>::infinity();
  rep.max_ratio = 0.0;
  auto fail = [&](int j, const std::string& what) {
    rep.ok = false;
    rep.violations.push_back("j=" + std::to_string(j) + ": " + what);
  };
  for (int j = 0; j <= n; ++j) {
    const double lam = rates.lambda(j);
    const cplx lm = rates.lambda_minus(j);
    const cplx lp = rates.lambda_plus(j);
    if (std::abs(lm) > lam / gamma * (1 + slack) + slack) fail(j, "|lambda_-| > lambda/gamma");
    if (lm.real() < lam * lower_coef * (1 - slack) - slack) fail(j, "Re lambda_- below lower bound");
    if (lm.real() < -slack) fail(j, "Re lambda_- < 0");
    if (lp.real() < gamma * (1 - slack)) fail(j, "Re lambda_+ < gamma");
    if (std::abs(lp) > bound_plus * (1 + slack) || std::abs(lm) > bound_plus * (1 + slack)) {
      fail(j, "|lambda_pm| above gamma + sqrt(gamma^2+4)");
    }
    if (std::abs(lp + lm - 2.0 * gamma) > 1e-12 * (1 + gamma)) fail(j, "lambda_+ + lambda_- != 2 gamma");
    if (std::abs(lp * lm - lam) > 1e-12 * (1 + lam)) fail(j, "lambda_+ lambda_- != lambda");
    if (j >= 1) {
      const double s = static_cast<double>(j) / n;
      if (lam < 2.0 * s * s * (1 - slack)) fail(j, "lambda_j < 2 (j/n)^2");
      if (lam > std::numbers::pi * std::numbers::pi * s * s * (1 + slack)) fail(j, "lambda_j > (pi j/n)^2");
      const double ratio = lm.real() / (s * s);
      rep.min_ratio = std::min(rep.min_ratio, ratio);
      rep.max_ratio = std::max(rep.max_ratio, ratio);
    }
  }
  if (n < 1) rep.min_ratio = 0.0;
  return rep;
}

Eigen::VectorXd forward_p(const SpectralBasis& b, const Eigen::VectorXd& g) {
  if (g.size() != b.n + 1) throw std::invalid_argument("forward_p: size mismatch");
  if (b.dense()) return b.psi * g;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(b.n + 1);
  for (int j = 0; j <= b.n; ++j)
    for (int x = 0; x <= b.n; ++x) out(j) += b.psi_at(j, x) * g(x);
  return out;
}

Eigen::VectorXd inverse_p(const SpectralBasis& b, const Eigen::VectorXd& g_hat) {
  if (g_hat.size() != b.n + 1) throw std::invalid_argument("inverse_p: size mismatch");
  if (b.dense()) return b.psi.transpose() * g_hat;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(b.n + 1);
  for (int x = 0; x <= b.n; ++x)
    for (int j = 0; j <= b.n; ++j) out(x) += b.psi_at(j, x) * g_hat(j);
  return out;
}

Eigen::VectorXd forward_r(const SpectralBasis& b, const Eigen::VectorXd& f) {
  if (f.size() != b.n) throw std::invalid_argument("forward_r: size mismatch");
  if (b.dense()) return b.phi * f;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(b.n);
  for (int j = 1; j <= b.n; ++j)
    for (int x = 1; x <= b.n; ++x) out(j - 1) += b.phi_at(j, x) * f(x - 1);
  return out;
}

Eigen::VectorXd inverse_r(const SpectralBasis& b, const Eigen::VectorXd& f_hat) {
  if (f_hat.size() != b.n) throw std::invalid_argument("inverse_r: size mismatch");
  if (b.dense()) return b.phi.transpose() * f_hat;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(b.n);
  for (int x = 1; x <= b.n; ++x)
    for (int j = 1; j <= b.n; ++j) out(x - 1) += b.phi_at(j, x) * f_hat(j - 1);
  return out;
}

Eigen::MatrixXd phi_padded(const SpectralBasis& b) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(b.n + 1, b.n);
  for (int j = 1; j <= b.n; ++j)
    for (int x = 1; x <= b.n; ++x) out(j, x - 1) = b.phi_at(j, x);
  return out;
}

}  // namespace hydro
