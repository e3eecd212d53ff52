#include "hydro/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace hydro {

CovarianceBlocks CovarianceBlocks::zero(int n) {
  CovarianceBlocks s;
  s.s_r = Eigen::MatrixXd::Zero(n, n);
  s.s_p = Eigen::MatrixXd::Zero(n + 1, n + 1);
  s.s_rp = Eigen::MatrixXd::Zero(n, n + 1);
  return s;
}

CovarianceBlocks CovarianceBlocks::scaled_identity(int n, double t) {
  CovarianceBlocks s = zero(n);
  s.s_r.diagonal().setConstant(t);
  s.s_p.diagonal().setConstant(t);
  return s;
}

Eigen::MatrixXd CovarianceBlocks::assemble() const {
  const int k = n();
  Eigen::MatrixXd m(2 * k + 1, 2 * k + 1);
  m.topLeftCorner(k, k) = s_r;
  m.topRightCorner(k, k + 1) = s_rp;
  m.bottomLeftCorner(k + 1, k) = s_rp.transpose();
  m.bottomRightCorner(k + 1, k + 1) = s_p;
  return m;
}

CovarianceBlocks CovarianceBlocks::from_matrix(const Eigen::MatrixXd& s, int n) {
  if (s.rows() != 2 * n + 1 || s.cols() != 2 * n + 1) {
    throw std::invalid_argument("CovarianceBlocks::from_matrix: expected (2n+1) square matrix");
  }
  CovarianceBlocks b;
  b.s_r = s.topLeftCorner(n, n);
  b.s_rp = s.topRightCorner(n, n + 1);
  b.s_p = s.bottomRightCorner(n + 1, n + 1);
  return b;
}

FourierBlocks FourierBlocks::zero(int n) {
  const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n + 1, n + 1);
  return {z, z, z, z};
}

FourierBlocks to_fourier(const SpectralBasis& b, const Eigen::MatrixXd& m) {
  const int n = b.n;
  if (m.rows() != 2 * n + 1 || m.cols() != 2 * n + 1) {
    throw std::invalid_argument("to_fourier: expected (2n+1) square matrix");
  }
  const Eigen::MatrixXd phi0 = phi_padded(b);
  FourierBlocks f;
  f.r = phi0 * m.topLeftCorner(n, n) * phi0.transpose();
  f.p = b.psi * m.bottomRightCorner(n + 1, n + 1) * b.psi.transpose();
  f.rp = phi0 * m.topRightCorner(n, n + 1) * b.psi.transpose();
  f.pr = b.psi * m.bottomLeftCorner(n + 1, n) * phi0.transpose();
  return f;
}

Eigen::MatrixXd from_fourier(const SpectralBasis& b, const FourierBlocks& f) {
  const int n = b.n;
  const Eigen::MatrixXd phi0 = phi_padded(b);
  Eigen::MatrixXd m(2 * n + 1, 2 * n + 1);
  m.topLeftCorner(n, n) = phi0.transpose() * f.r * phi0;
  m.bottomRightCorner(n + 1, n + 1) = b.psi.transpose() * f.p * b.psi;
  m.topRightCorner(n, n + 1) = phi0.transpose() * f.rp * b.psi;
  m.bottomLeftCorner(n + 1, n) = b.psi.transpose() * f.pr * phi0;
  return m;
}

ResolutionTables resolution_tables(double gamma) {
  if (!(gamma > 0)) throw std::invalid_argument("resolution_tables: gamma must be positive");
  return ResolutionTables{gamma};
}

double ResolutionTables::theta_fn(double c, double cp) const {
  return (c - cp) * (c - cp) + 8.0 * gamma * gamma * (c + cp);
}

double ResolutionTables::theta(Block a, double c, double cp) const {
  const double g = gamma;
  if (c == 0.0 && cp == 0.0) return a == Block::p ? 1.0 : 0.0;
  const double th = theta_fn(c, cp);
  switch (a) {
    case Block::p: return 8.0 * g * g * (c + cp) / th;
    case Block::r: return 16.0 * g * g * std::sqrt(c * cp) / th;
    case Block::pr: return 4.0 * g * std::sqrt(cp) * (c - cp) / th;
    case Block::rp: return 4.0 * g * std::sqrt(c) * (cp - c) / th;
  }
  return 0.0;
}

double ResolutionTables::xi(Block out, Block in, double c, double cp) const {
  const double g = gamma;
  if (c == 0.0 && cp == 0.0) return (out == Block::p && in == Block::p) ? 1.0 / (4.0 * g) : 0.0;
  const double th = theta_fn(c, cp);
  const double sc = std::sqrt(c), scp = std::sqrt(cp), g8 = 8.0 * g * g;
  using B = Block;
  switch (out) {
    case B::p:
      switch (in) {
        case B::p: return 2.0 * g * (c + cp) / th;
        case B::r: return 4.0 * g * sc * scp / th;
        case B::rp: return sc * (c - cp) / th;
        case B::pr: return scp * (cp - c) / th;
      }
      break;
    case B::r:
      switch (in) {
        case B::r: return 2.0 * g * (g8 + c + cp) / th;
        case B::p: return 4.0 * g * sc * scp / th;
        case B::pr: return -sc * (c - cp + g8) / th;
        case B::rp: return -scp * (cp - c + g8) / th;
      }
      break;
    case B::pr:
      switch (in) {
        case B::pr: return 4.0 * g * cp / th;
        case B::rp: return -4.0 * g * sc * scp / th;
        case B::p: return -scp * (cp - c) / th;
        case B::r: return sc * (c - cp + g8) / th;
      }
      break;
    case B::rp:
      switch (in) {
        case B::rp: return 4.0 * g * c / th;
        case B::pr: return -4.0 * g * sc * scp / th;
        case B::p: return -sc * (c - cp) / th;
        case B::r: return scp * (cp - c + g8) / th;
      }
      break;
  }
  return 0.0;
}

namespace {

// C = S A^T using column operations; valid for any square S of size 2n+1.
Eigen::MatrixXd right_apply_at(int n, double gamma, const Eigen::MatrixXd& s) {
  const int dim = 2 * n + 1;
  Eigen::MatrixXd c(dim, dim);
  auto rc = [&](int x) { return x - 1; };  // column of r_x
  auto pc = [&](int x) { return n + x; };  // column of p_x
  for (int x = 1; x <= n; ++x) c.col(rc(x)) = s.col(pc(x - 1)) - s.col(pc(x));
  for (int x = 0; x <= n; ++x) {
    auto col = c.col(pc(x));
    col = 2.0 * gamma * s.col(pc(x));
    if (x + 1 <= n) col -= s.col(rc(x + 1));
    if (x >= 1) col += s.col(rc(x));
  }
  return c;
}

void set_sigma2(int n, double gamma, double t_minus, const Eigen::VectorXd& p_sq, Eigen::MatrixXd& m,
                double sign) {
  m(n, n) += sign * 4.0 * gamma * t_minus;
  for (int y = 1; y <= n; ++y) m(n + y, n + y) += sign * 4.0 * gamma * p_sq(y);
}

}  // namespace

Eigen::MatrixXd apply_a(const ChainConfig& cfg, const Eigen::MatrixXd& s) {
  return right_apply_at(cfg.n, cfg.gamma, s.transpose()).transpose();
}

Eigen::MatrixXd dense_a(int n, double gamma) {
  const int dim = 2 * n + 1;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  for (int x = 1; x <= n; ++x) {
    a(x - 1, n + x) = -1.0;
    a(x - 1, n + x - 1) = 1.0;
  }
  for (int x = 0; x <= n; ++x) {
    if (x + 1 <= n) a(n + x, x) = -1.0;
    if (x >= 1) a(n + x, x - 1) = 1.0;
    a(n + x, n + x) = 2.0 * gamma;
  }
  return a;
}

Eigen::MatrixXd covariance_rhs(const ChainConfig& cfg, const Eigen::MatrixXd& s, const Eigen::VectorXd& pbar,
                               bool noise) {
  const int n = cfg.n;
  const Eigen::MatrixXd c = right_apply_at(n, cfg.gamma, s);
  Eigen::MatrixXd out = -(c + c.transpose());
  if (noise) {
    Eigen::VectorXd p_sq(n + 1);
    for (int y = 0; y <= n; ++y) p_sq(y) = s(n + y, n + y) + pbar(y) * pbar(y);
    set_sigma2(n, cfg.gamma, cfg.t_minus, p_sq, out, 1.0);
  }
  return out;
}

double min_eigenvalue(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

CovarianceBlocks CovariancePath::average(std::size_t k) const {
  if (k == 0 || k >= t_macro.size()) throw std::out_of_range("CovariancePath::average: bad index");
  CovarianceBlocks b = CovarianceBlocks::from_matrix(integral_s[k] / tau(k), n);
  b.tau = tau(k);
  return b;
}

Eigen::VectorXd CovariancePath::average_pbar_sq(std::size_t k) const {
  if (k == 0 || k >= t_macro.size()) throw std::out_of_range("CovariancePath::average_pbar_sq: bad index");
  return integral_pbar_sq[k] / tau(k);
}

std::size_t CovariancePath::index_of(double t) const {
  for (std::size_t k = 0; k < t_macro.size(); ++k) {
    if (std::abs(t_macro[k] - t) <= 1e-12 * std::max(1.0, t)) return k;
  }
  throw std::out_of_range("CovariancePath::index_of: time not recorded");
}

CovariancePath evolve_covariance(const ChainConfig& cfg, const CovarianceBlocks& s0, const MeanMomentum& pbar,
                                 double t_macro, double dt, const std::vector<double>& record_times,
                                 const CovarianceOptions& opts) {
  cfg.validate();
  const int n = cfg.n;
  const int dim = 2 * n + 1;
  if (!(dt > 0)) throw std::invalid_argument("evolve_covariance: dt must be positive");
  if (!(t_macro > 0)) throw std::invalid_argument("evolve_covariance: t_macro must be positive");
  std::vector<double> rec = record_times;
  rec.push_back(0.0);
  rec.push_back(t_macro);
  std::sort(rec.begin(), rec.end());
  rec.erase(std::unique(rec.begin(), rec.end()), rec.end());
  if (rec.back() > t_macro) throw std::invalid_argument("evolve_covariance: record time beyond t_macro");

  Eigen::MatrixXd s = s0.assemble();
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + s.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("evolve_covariance: s0 is not symmetric");
  }
  const double scale0 = std::max(1.0, s.cwiseAbs().maxCoeff());
  if (min_eigenvalue(s) < -opts.psd_tolerance * scale0) {
    throw std::invalid_argument("evolve_covariance: s0 is not positive semidefinite");
  }

  CovariancePath path;
  path.n = n;
  const double n2 = static_cast<double>(n) * n;
  Eigen::MatrixXd integral = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd integral_pb = Eigen::VectorXd::Zero(n + 1);
  double tau = 0.0;
  Eigen::VectorXd pb = pbar(0.0);

  auto record = [&](double t) {
    path.t_macro.push_back(t);
    CovarianceBlocks b = CovarianceBlocks::from_matrix(s, n);
    b.tau = tau;
    path.snapshots.push_back(std::move(b));
    path.integral_s.push_back(integral);
    path.integral_pbar_sq.push_back(integral_pb);
  };
  auto check_psd = [&]() {
    const double scale = std::max(1e-300, s.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    const double lmin = es.eigenvalues().minCoeff();
    path.min_eigenvalue.push_back(lmin);
    if (lmin < -opts.psd_tolerance * scale) {
      throw std::runtime_error("evolve_covariance: covariance lost positivity (min eigenvalue " +
                               std::to_string(lmin) + "); reduce dt");
    }
    if (lmin < 0) {
      const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
      s = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
      s = 0.5 * (s + s.transpose()).eval();
      ++path.clipped;
    }
  };

  record(0.0);
  path.min_eigenvalue.push_back(min_eigenvalue(s));
  Eigen::MatrixXd k1, k2, k3, k4, tmp;
  for (std::size_t r = 1; r < rec.size(); ++r) {
    const double target = n2 * rec[r];
    while (target - tau > 1e-12 * std::max(1.0, target)) {
      double h = std::min(dt, target - tau);
      if (target - tau - h < 1e-9 * dt) h = target - tau;
      const Eigen::VectorXd pb_mid = pbar(tau + 0.5 * h);
      const Eigen::VectorXd pb_end = pbar(tau + h);
      k1 = covariance_rhs(cfg, s, pb, opts.noise);
      tmp = s + 0.5 * h * k1;
      k2 = covariance_rhs(cfg, tmp, pb_mid, opts.noise);
      tmp = s + 0.5 * h * k2;
      k3 = covariance_rhs(cfg, tmp, pb_mid, opts.noise);
      tmp = s + h * k3;
      k4 = covariance_rhs(cfg, tmp, pb_end, opts.noise);
      integral += 0.5 * h * s;
      s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      integral += 0.5 * h * s;
      integral_pb += 0.5 * h * (pb.cwiseAbs2() + pb_end.cwiseAbs2());
      pb = pb_end;
      tau += h;
    }
    tau = target;
    check_psd();
    record(rec[r]);
  }
  return path;
}

Eigen::MatrixXd f_tilde(const SpectralBasis& b, double t_minus, const Eigen::VectorXd& p_sq) {
  Eigen::VectorXd d = p_sq;
  d(0) = t_minus;
  return b.psi * d.asDiagonal() * b.psi.transpose();
}

FourierBlocks resolve_time_averaged(const ChainConfig& cfg, const Eigen::MatrixXd& f_hat,
                                    const FourierBlocks& r_blocks) {
  const int n = cfg.n;
  const int m = n + 1;
  for (const Eigen::MatrixXd* x : {&f_hat, &r_blocks.r, &r_blocks.p, &r_blocks.pr, &r_blocks.rp}) {
    if (x->rows() != m || x->cols() != m) throw std::invalid_argument("resolve_time_averaged: blocks must be (n+1)^2");
  }
  const SpectralBasis b = build_basis(n);
  const ResolutionTables tab = resolution_tables(cfg.gamma);
  const Block blocks[4] = {Block::r, Block::p, Block::pr, Block::rp};
  const Eigen::MatrixXd* in[4] = {&r_blocks.r, &r_blocks.p, &r_blocks.pr, &r_blocks.rp};
  FourierBlocks out = FourierBlocks::zero(n);
  Eigen::MatrixXd* dst[4] = {&out.r, &out.p, &out.pr, &out.rp};
  for (int a = 0; a < 4; ++a) {
    for (int j = 0; j < m; ++j) {
      for (int jp = 0; jp < m; ++jp) {
        const double c = b.lambda(j), cp = b.lambda(jp);
        double v = tab.theta(blocks[a], c, cp) * f_hat(j, jp);
        for (int be = 0; be < 4; ++be) v += tab.xi(blocks[a], blocks[be], c, cp) * (*in[be])(j, jp);
        (*dst[a])(j, jp) = v;
      }
    }
  }
  // r-type index 0 carries no mode.
  out.r.row(0).setZero();
  out.r.col(0).setZero();
  out.rp.row(0).setZero();
  out.pr.col(0).setZero();
  return out;
}

double lyapunov_residual(const ChainConfig& cfg, const Eigen::MatrixXd& s_avg, const Eigen::VectorXd& p_sq_avg,
                         const Eigen::MatrixXd& r_resid) {
  const int n = cfg.n;
  Eigen::MatrixXd res = apply_a(cfg, s_avg) + right_apply_at(n, cfg.gamma, s_avg) - r_resid;
  set_sigma2(n, cfg.gamma, cfg.t_minus, p_sq_avg, res, -1.0);
  return res.norm();
}

double lyapunov_residual(const ChainConfig& cfg, const CovarianceBlocks& s_avg, const Eigen::VectorXd& p_sq_avg,
                         const CovarianceBlocks& r_resid) {
  return lyapunov_residual(cfg, s_avg.assemble(), p_sq_avg, r_resid.assemble());
}

Eigen::MatrixXd pi_matrix(double gamma, const Eigen::MatrixXd& gamma_matrix) {
  if (gamma_matrix.rows() != gamma_matrix.cols()) throw std::invalid_argument("pi_matrix: Gamma must be square");
  Eigen::MatrixXd g = gamma_matrix;
  if (g.rows() % 2 == 0) {
    // (r_0, r_1..r_n, p_0..p_n): drop the r_0 row and column.
    const int d = static_cast<int>(g.rows()) - 1;
    Eigen::MatrixXd h = g.bottomRightCorner(d, d);
    g = h;
  }
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("pi_matrix: Gamma is not symmetric");
  }
  const int n = (static_cast<int>(g.rows()) - 1) / 2;
  if (n < 1) throw std::invalid_argument("pi_matrix: Gamma too small");
  const SpectralBasis b = build_basis(n);
  const FourierBlocks f = to_fourier(b, g);
  const ResolutionTables tab = resolution_tables(gamma);
  Eigen::MatrixXd pi(n + 1, n + 1);
  for (int j = 0; j <= n; ++j) {
    for (int jp = 0; jp <= n; ++jp) {
      const double c = b.lambda(j), cp = b.lambda(jp);
      pi(j, jp) = tab.theta(Block::p, c, cp) * f.p(j, jp) + tab.theta(Block::r, c, cp) * f.r(j, jp) -
                  tab.theta(Block::pr, c, cp) * f.pr(j, jp) - tab.theta(Block::rp, c, cp) * f.rp(j, jp);
    }
  }
  return 0.5 * (pi + pi.transpose());
}

namespace {

// Entries of a (2n+1) covariance in physical indices with boundary conventions.
struct Cov {
  const Eigen::MatrixXd& m;
  int n;
  double rr(int a, int b) const {
    if (a < 1 || b < 1 || a > n || b > n) return 0.0;
    return m(a - 1, b - 1);
  }
  double pp(int a, int b) const { return m(n + std::max(a, 0), n + std::max(b, 0)); }
  double rp(int a, int b) const {  // E[r_a p_b]
    if (a < 1 || a > n) return 0.0;
    return m(a - 1, n + b);
  }
};

Eigen::VectorXd u_of(const Cov& s, double gamma) {
  Eigen::VectorXd u(s.n + 1);
  for (int x = 0; x <= s.n; ++x) {
    u(x) = 0.5 * (s.pp(x, x) + s.rr(x, x)) + 0.5 * s.rr(x, x + 1) + 0.5 * s.pp(x - 1, x) + gamma * s.rp(x, x);
  }
  return u;
}

Eigen::VectorXd v_of(const Cov& s, double gamma) {
  Eigen::VectorXd v(s.n);
  for (int x = 0; x < s.n; ++x) {
    v(x) = (2.0 * s.rp(x + 1, x) + s.rp(x + 1, x + 1) + s.rp(x, x)) / (8.0 * gamma) + 0.25 * s.rr(x + 1, x + 1);
  }
  return v;
}

}  // namespace

FdReport fd_relation_check(const ChainConfig& cfg, const CovariancePath& path, std::size_t k) {
  const int n = path.n;
  const double g = cfg.gamma;
  const double tau = path.tau(k);
  const Eigen::MatrixXd avg = path.integral_s.at(k) / tau;
  const Eigen::MatrixXd s0 = path.snapshots.at(0).assemble();
  const Eigen::MatrixXd st = path.snapshots.at(k).assemble();
  const Cov ca{avg, n}, c0{s0, n}, ct{st, n};
  const Eigen::VectorXd u = u_of(ca, g);
  const Eigen::VectorXd v = (v_of(c0, g) - v_of(ct, g)) / tau;
  FdReport rep;
  rep.residual.resize(n);
  rep.lhs.resize(n);
  for (int x = 0; x < n; ++x) {
    rep.lhs(x) = ca.rp(x + 1, x);
    rep.residual(x) = rep.lhs(x) - ((u(x + 1) - u(x)) / (4.0 * g) + v(x));
  }
  rep.max_residual = rep.residual.cwiseAbs().maxCoeff();
  rep.bulk_max_residual = 0.0;
  for (int x = n / 4; x <= (3 * n) / 4 && x < n; ++x) {
    rep.bulk_max_residual = std::max(rep.bulk_max_residual, std::abs(rep.residual(x)));
  }
  return rep;
}

MMatrixReport m_matrix_diagnostic(const ChainConfig& cfg) {
  const int n = cfg.n;
  const SpectralBasis b = build_basis(n);
  const ResolutionTables tab = resolution_tables(cfg.gamma);
  Eigen::MatrixXd theta(n + 1, n + 1);
  for (int j = 0; j <= n; ++j)
    for (int jp = 0; jp <= n; ++jp) theta(j, jp) = tab.theta(Block::p, b.lambda(j), b.lambda(jp));
  MMatrixReport rep;
  rep.m.resize(n + 1, n + 1);
  for (int x = 0; x <= n; ++x) {
    for (int y = 0; y <= n; ++y) {
      const Eigen::VectorXd w = b.psi.col(x).cwiseProduct(b.psi.col(y));
      rep.m(x, y) = w.dot(theta * w);
    }
  }
  rep.max_row_sum_error = (rep.m.rowwise().sum().array() - 1.0).abs().maxCoeff();
  rep.max_col_sum_error = (rep.m.colwise().sum().array() - 1.0).abs().maxCoeff();
  rep.min_entry = rep.m.minCoeff();
  rep.symmetry_error = (rep.m - rep.m.transpose()).cwiseAbs().maxCoeff();
  rep.ok = rep.max_row_sum_error <= 1e-10 && rep.max_col_sum_error <= 1e-10 && rep.min_entry > 0;
  return rep;
}

EquipartitionProfile equipartition_diagnostic(const CovariancePath& path, std::size_t k) {
  const int n = path.n;
  const CovarianceBlocks avg = path.average(k);
  const Eigen::VectorXd pb = path.average_pbar_sq(k);
  EquipartitionProfile prof;
  prof.gap.resize(n + 1);
  prof.thermal.resize(n + 1);
  prof.p_sq.resize(n + 1);
  for (int x = 0; x <= n; ++x) {
    const double pv = avg.s_p(x, x);
    const double rv = x == 0 ? 0.0 : avg.s_r(x - 1, x - 1);
    prof.gap(x) = pv - rv;
    prof.thermal(x) = 0.5 * (pv + rv);
    prof.p_sq(x) = pv + pb(x);
  }
  return prof;
}

double kinetic_flatness(const EquipartitionProfile& prof) {
  double s = 0.0;
  for (int x = 0; x + 1 < prof.p_sq.size(); ++x) {
    const double d = prof.p_sq(x) - prof.p_sq(x + 1);
    s += d * d;
  }
  return s;
}

double position_functional(const CovarianceBlocks& s) {
  const int n = s.n();
  // Prefix sums in both indices: Q(x, x) = sum_{y, y' <= x} S^r_{y y'}.
  Eigen::MatrixXd pre = s.s_r;
  for (int i = 1; i < n; ++i) pre.row(i) += pre.row(i - 1);
  for (int j = 1; j < n; ++j) pre.col(j) += pre.col(j - 1);
  double acc = 0.0;
  for (int x = 0; x < n; ++x) acc += pre(x, x);
  return acc / (static_cast<double>(n) * n * n);
}

void write_covariance_csv(std::ostream& os, const CovariancePath& path) {
  os << "time,u,p_var_avg,r_var_avg,thermal_avg,gap\n";
  os.precision(17);
  for (std::size_t k = 1; k < path.t_macro.size(); ++k) {
    const EquipartitionProfile prof = equipartition_diagnostic(path, k);
    const CovarianceBlocks avg = path.average(k);
    for (int x = 0; x <= path.n; ++x) {
      const double rv = x == 0 ? 0.0 : avg.s_r(x - 1, x - 1);
      os << path.t_macro[k] << ',' << static_cast<double>(x) / path.n << ',' << avg.s_p(x, x) << ',' << rv << ','
         << prof.thermal(x) << ',' << prof.gap(x) << '\n';
    }
  }
}

}  // namespace hydro
