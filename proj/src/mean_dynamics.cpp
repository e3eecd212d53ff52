#include "hydro/mean_dynamics.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace hydro {

namespace {
const cplx I(0.0, 1.0);
constexpr double kTwoPi = 2.0 * std::numbers::pi;

cplx ex(cplx kappa, double S) { return S * phi1(kappa * S); }  // integral of e^{kappa s}
}  // namespace

MeanState MeanState::zero(int n) {
  MeanState m;
  m.r_bar = Eigen::VectorXd::Zero(n);
  m.p_bar = Eigen::VectorXd::Zero(n + 1);
  return m;
}

MeanSolution::MeanSolution(const ChainConfig& cfg, const MeanState& init)
    : cfg_(cfg), basis_(build_basis(cfg.n)), rates_(mode_rates(basis_, cfg.gamma)), tau0_(init.tau) {
  cfg.validate();
  const int n = cfg.n;
  if (init.r_bar.size() != n || init.p_bar.size() != n + 1) {
    throw std::invalid_argument("MeanSolution: init has wrong size");
  }
  p0_hat_ = forward_p(basis_, init.p_bar);
  r0_hat_ = Eigen::VectorXd::Zero(n + 1);
  r0_hat_.tail(n) = forward_r(basis_, init.r_bar);
  psi_n_.resize(n + 1);
  phi_n_ = Eigen::VectorXd::Zero(n + 1);
  for (int j = 0; j <= n; ++j) psi_n_(j) = basis_.psi_at(j, n);
  for (int j = 1; j <= n; ++j) phi_n_(j) = basis_.phi_at(j, n);

  const double w = cfg.omega();
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  for (const auto& m : cfg.forcing_modes) {
    for (int sgn : {1, -1}) {
      const double nu = sgn * m.ell * w;
      const cplx amp = sgn > 0 ? m.amplitude : std::conj(m.amplitude);
      drives_.push_back({nu, amp * inv_sqrt_n * std::exp(I * std::remainder(nu * tau0_, kTwoPi))});
    }
  }

  const int L = static_cast<int>(drives_.size());
  a_.resize(n + 1);
  b_.resize(n + 1);
  d_.resize(n + 1, L);
  al_ = Eigen::VectorXcd::Zero(n + 1);
  be_ = Eigen::VectorXcd::Zero(n + 1);
  ka_ = Eigen::VectorXcd::Zero(n + 1);
  et_ = Eigen::MatrixXcd::Zero(n + 1, L);
  for (int j = 0; j <= n; ++j) {
    const double lam = rates_.lambda(j);
    const double sl = std::sqrt(lam);
    const cplx lm = rates_.lambda_minus(j), lp = rates_.lambda_plus(j), dl = rates_.delta_lambda(j);
    const double fb = cfg.f_bar * psi_n_(j);
    a_(j) = p0_hat_(j);
    b_(j) = -lm * p0_hat_(j) + sl * r0_hat_(j) + fb;
    if (j >= 1) {
      al_(j) = r0_hat_(j) + fb / sl;
      be_(j) = lp * r0_hat_(j) - sl * p0_hat_(j) + fb * (dl / sl + sl / lp);
      ka_(j) = -fb / sl;
    }
    for (int l = 0; l < L; ++l) {
      const double nu = drives_[l].nu;
      const cplx g = psi_n_(j) * drives_[l].c;
      const cplx D = lam - nu * nu + 2.0 * I * nu * cfg.gamma;
      d_(j, l) = g * I * nu / D;
      a_(j) -= g * I * nu / D;
      b_(j) += g * (I * nu * lm + lam) / D;
      if (j >= 1) {
        al_(j) += g * sl / D;
        be_(j) += g * sl * (dl / D + 1.0 / (I * nu + lp));
        et_(j, l) = -g * sl / D;
      }
    }
  }
}

void MeanSolution::modal(double s, Eigen::VectorXcd& z, Eigen::VectorXcd& y) const {
  const int n = cfg_.n;
  const double g = cfg_.gamma;
  z.resize(n + 1);
  y.resize(n + 1);
  std::vector<cplx> osc;
  for (const auto& dr : drives_) osc.push_back(std::exp(I * std::remainder(dr.nu * s, kTwoPi)));
  for (int j = 0; j <= n; ++j) {
    const double lam = rates_.lambda(j);
    const double sl = std::sqrt(lam);
    const cplx lm = rates_.lambda_minus(j), lp = rates_.lambda_plus(j), dl = rates_.delta_lambda(j);
    const cplx q = stable_quotient(lm, dl, s);
    const cplx em = std::exp(-lm * s), ep = std::exp(-lp * s);
    const double pt = p0_hat_(j), rt = r0_hat_(j);
    cplx zj, yj;
    if (std::abs(dl) < kDegeneracyTol) {
      const double e = std::exp(-g * s);
      zj = ((1.0 - g * s) * pt + g * s * rt) * e;
      yj = ((1.0 + g * s) * rt - g * s * pt) * e;
    } else {
      // The quotient forms of the two-exponential solution.
      zj = pt * (ep - lm * q) + rt * sl * q;
      yj = -pt * sl * q + rt * (em + lm * q);
    }
    if (j == 0) yj = 0.0;
    const double fb = cfg_.f_bar * psi_n_(j);
    zj += fb * q;
    if (j >= 1) yj += fb * ((em - 1.0) / sl + sl * q / lp);
    for (std::size_t l = 0; l < drives_.size(); ++l) {
      const double nu = drives_[l].nu;
      const cplx c = psi_n_(j) * drives_[l].c;
      const cplx D = lam - nu * nu + 2.0 * I * nu * g;
      zj += c * (I * nu * (osc[l] - em) / D + lp * q / (I * nu + lp));
      if (j >= 1) yj += c * (sl * (em - osc[l]) / D + sl * q / (I * nu + lp));
    }
    z(j) = zj;
    y(j) = yj;
  }
}

MeanState MeanSolution::at(double tau) const {
  const double s = tau - tau0_;
  if (s < 0) throw std::invalid_argument("MeanSolution::at: time before the initial time");
  Eigen::VectorXcd z, y;
  modal(s, z, y);
  const double scale = 1.0 + z.cwiseAbs().maxCoeff() + y.cwiseAbs().maxCoeff();
  const double residue = std::max(z.imag().cwiseAbs().maxCoeff(), y.imag().cwiseAbs().maxCoeff());
  if (residue > 1e-10 * scale) {
    throw std::runtime_error("MeanSolution::at: imaginary residue " + std::to_string(residue));
  }
  MeanState m;
  m.tau = tau;
  m.p_bar = inverse_p(basis_, z.real());
  m.r_bar = inverse_r(basis_, y.real().tail(cfg_.n));
  return m;
}

Eigen::VectorXd MeanSolution::p_bar(double tau) const { return at(tau).p_bar; }

BoundaryTerms MeanSolution::boundary_terms(double tau) const {
  const double s = tau - tau0_;
  const int n = cfg_.n;
  const double g = cfg_.gamma;
  BoundaryTerms bt;
  cplx p0 = 0, pf = 0, pfl = 0, pdp = 0;
  for (int j = 0; j <= n; ++j) {
    const double lam = rates_.lambda(j);
    const double sl = std::sqrt(lam);
    const cplx lm = rates_.lambda_minus(j), lp = rates_.lambda_plus(j), dl = rates_.delta_lambda(j);
    const cplx q = stable_quotient(lm, dl, s);
    const cplx em = std::exp(-lm * s), ep = std::exp(-lp * s);
    const double w2 = psi_n_(j) * psi_n_(j);
    cplx zj;
    if (std::abs(dl) < kDegeneracyTol) {
      zj = ((1.0 - g * s) * p0_hat_(j) + g * s * r0_hat_(j)) * std::exp(-g * s);
    } else {
      zj = p0_hat_(j) * (ep - lm * q) + r0_hat_(j) * sl * q;
    }
    p0 += psi_n_(j) * zj;
    pf += cfg_.f_bar * w2 * q;
    for (const auto& dr : drives_) {
      const cplx D = lam - dr.nu * dr.nu + 2.0 * I * dr.nu * g;
      const cplx osc = std::exp(I * std::remainder(dr.nu * s, kTwoPi));
      pfl += dr.c * I * dr.nu * w2 * (osc - em) / D;
      pdp += dr.c * w2 * lp * q / (I * dr.nu + lp);
    }
  }
  bt.p0 = p0.real();
  bt.pf = pf.real();
  bt.pfl = pfl.real();
  bt.pdp = pdp.real();
  return bt;
}

cplx MeanSolution::iq(int j, double nu, double S) const {
  const cplx lm = rates_.lambda_minus(j), lp = rates_.lambda_plus(j);
  const cplx A = lm - I * nu;
  const cplx B = lp - I * nu;
  const cplx q = stable_quotient(lm, rates_.delta_lambda(j), S);
  return (S * phi1(-A * S) - std::exp(I * std::remainder(nu * S, kTwoPi)) * q) / B;
}

double MeanSolution::integral_p_n(double tau) const {
  const double S = tau - tau0_;
  cplx acc = 0;
  for (int j = 0; j <= cfg_.n; ++j) {
    cplx pj = a_(j) * ex(-rates_.lambda_plus(j), S) + b_(j) * iq(j, 0.0, S);
    for (std::size_t l = 0; l < drives_.size(); ++l) pj += d_(j, l) * ex(I * drives_[l].nu, S);
    acc += psi_n_(j) * pj;
  }
  return acc.real();
}

double MeanSolution::integral_r_n(double tau) const {
  const double S = tau - tau0_;
  cplx acc = 0;
  for (int j = 1; j <= cfg_.n; ++j) {
    cplx rj = al_(j) * ex(-rates_.lambda_plus(j), S) + be_(j) * iq(j, 0.0, S) + ka_(j) * S;
    for (std::size_t l = 0; l < drives_.size(); ++l) rj += et_(j, l) * ex(I * drives_[l].nu, S);
    acc += phi_n_(j) * rj;
  }
  return acc.real();
}

double MeanSolution::work(double tau) const {
  const double S = tau - tau0_;
  // Drive list with the constant force prepended.
  std::vector<Drive> force = {{0.0, cplx(cfg_.f_bar, 0.0)}};
  force.insert(force.end(), drives_.begin(), drives_.end());
  cplx acc = 0;
  for (const auto& f : force) {
    if (f.c == 0.0) continue;
    cplx inner = 0;
    for (int j = 0; j <= cfg_.n; ++j) {
      cplx pj = a_(j) * ex(I * f.nu - rates_.lambda_plus(j), S) + b_(j) * iq(j, f.nu, S);
      for (std::size_t l = 0; l < drives_.size(); ++l) {
        pj += d_(j, l) * ex(I * (f.nu + drives_[l].nu), S);
      }
      inner += psi_n_(j) * pj;
    }
    acc += f.c * inner;
  }
  return acc.real() / cfg_.n;
}

MeanState closed_form_mean(const ChainConfig& cfg, const MeanState& init, double t_macro) {
  MeanSolution sol(cfg, init);
  return sol.at(init.tau + static_cast<double>(cfg.n) * cfg.n * t_macro);
}

BoundaryTerms boundary_momentum_terms(const ChainConfig& cfg, const MeanState& init, double t_macro) {
  MeanSolution sol(cfg, init);
  return sol.boundary_terms(init.tau + static_cast<double>(cfg.n) * cfg.n * t_macro);
}

namespace {

void mean_rhs(const ChainConfig& cfg, const Eigen::VectorXd& r, const Eigen::VectorXd& p, double tau,
              Eigen::VectorXd& dr, Eigen::VectorXd& dp) {
  dr = div(p);
  dp = grad(r) - 2.0 * cfg.gamma * p;
  dp(cfg.n) += forcing_value(cfg, tau);
}

}  // namespace

MeanState rk4_mean_oracle(const ChainConfig& cfg, const MeanState& init, double t_macro, double dt) {
  if (!(dt > 0)) throw std::invalid_argument("rk4_mean_oracle: dt must be positive");
  const double T = static_cast<double>(cfg.n) * cfg.n * t_macro;
  const long steps = std::max(1L, static_cast<long>(std::ceil(T / dt - 1e-9)));
  const double h = T / steps;
  Eigen::VectorXd r = init.r_bar, p = init.p_bar;
  Eigen::VectorXd k1r, k1p, k2r, k2p, k3r, k3p, k4r, k4p;
  double tau = init.tau;
  for (long k = 0; k < steps; ++k) {
    mean_rhs(cfg, r, p, tau, k1r, k1p);
    mean_rhs(cfg, r + 0.5 * h * k1r, p + 0.5 * h * k1p, tau + 0.5 * h, k2r, k2p);
    mean_rhs(cfg, r + 0.5 * h * k2r, p + 0.5 * h * k2p, tau + 0.5 * h, k3r, k3p);
    mean_rhs(cfg, r + h * k3r, p + h * k3p, tau + h, k4r, k4p);
    r += h / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r);
    p += h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
    tau = init.tau + (k + 1) * h;
  }
  return {r, p, tau};
}

Eigen::VectorXd mechanical_energy_profile(const MeanState& mean) {
  const int n = static_cast<int>(mean.r_bar.size());
  Eigen::VectorXd e(n + 1);
  e(0) = 0.5 * mean.p_bar(0) * mean.p_bar(0);
  for (int x = 1; x <= n; ++x) {
    e(x) = 0.5 * (mean.p_bar(x) * mean.p_bar(x) + mean.r_bar(x - 1) * mean.r_bar(x - 1));
  }
  return e;
}

void write_mean_csv(std::ostream& os, const std::vector<std::pair<double, MeanState>>& frames) {
  os << "time,u,r_bar,p_bar,mech_energy\n";
  os.precision(17);
  for (const auto& [t, m] : frames) {
    const int n = static_cast<int>(m.r_bar.size());
    const Eigen::VectorXd e = mechanical_energy_profile(m);
    for (int x = 0; x <= n; ++x) {
      os << t << ',' << static_cast<double>(x) / n << ',' << (x == 0 ? 0.0 : m.r_bar(x - 1)) << ','
         << m.p_bar(x) << ',' << e(x) << '\n';
    }
  }
}

}  // namespace hydro
