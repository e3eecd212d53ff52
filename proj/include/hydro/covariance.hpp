#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <vector>

#include "hydro/blocks.hpp"
#include "hydro/chain_model.hpp"
#include "hydro/spectral.hpp"

namespace hydro {

// All four blocks are (n+1) x (n+1). r-type indices use phi_padded, so
// row/column 0 of an r-type index is zero.
struct FourierBlocks {
  Eigen::MatrixXd r, p, pr, rp;
  static FourierBlocks zero(int n);
};

// Transforms a (possibly non-symmetric) (2n+1) matrix in the
// (r_1..r_n, p_0..p_n) ordering. pr is the (p rows, r columns) block.
FourierBlocks to_fourier(const SpectralBasis& b, const Eigen::MatrixXd& m);
Eigen::MatrixXd from_fourier(const SpectralBasis& b, const FourierBlocks& f);

enum class Block { r = 0, p = 1, pr = 2, rp = 3 };

struct ResolutionTables {
  double gamma = 1.0;
  double theta_fn(double c, double cp) const;  // (c - c')^2 + 8 gamma^2 (c + c')
  double theta(Block a, double c, double cp) const;
  // Coefficient of input block `in` in output block `out`.
  double xi(Block out, Block in, double c, double cp) const;
};

ResolutionTables resolution_tables(double gamma);

// pbar(tau) returns the mean momentum profile p_0..p_n at microscopic tau.
using MeanMomentum = std::function<Eigen::VectorXd(double)>;

struct CovarianceOptions {
  bool noise = true;              // test hook: drop 4 gamma Sigma_2
  double psd_tolerance = 1e-9;    // relative
};

struct CovariancePath {
  int n = 0;
  std::vector<double> t_macro;                 // record times, starting at 0
  std::vector<CovarianceBlocks> snapshots;     // S at each record time
  std::vector<Eigen::MatrixXd> integral_s;     // integral of S over [0, tau_k]
  std::vector<Eigen::VectorXd> integral_pbar_sq;
  std::vector<double> min_eigenvalue;
  int clipped = 0;

  double tau(std::size_t k) const { return static_cast<double>(n) * n * t_macro.at(k); }
  // Time average of S over [0, tau_k] (k >= 1).
  CovarianceBlocks average(std::size_t k) const;
  Eigen::VectorXd average_pbar_sq(std::size_t k) const;
  std::size_t index_of(double t) const;
};

// RK4 in microscopic time for dS/dtau = -AS - SA^T + 4 gamma Sigma_2; record
// times are macroscopic and the integrals use the trapezoid rule on the step
// grid.
CovariancePath evolve_covariance(const ChainConfig& cfg, const CovarianceBlocks& s0,
                                 const MeanMomentum& pbar, double t_macro, double dt,
                                 const std::vector<double>& record_times = {},
                                 const CovarianceOptions& opts = {});

// Right-hand side, exposed for tests.
Eigen::MatrixXd covariance_rhs(const ChainConfig& cfg, const Eigen::MatrixXd& s,
                               const Eigen::VectorXd& pbar, bool noise = true);

// A S (dense result) with A from the averaged dynamics.
Eigen::MatrixXd apply_a(const ChainConfig& cfg, const Eigen::MatrixXd& s);
Eigen::MatrixXd dense_a(int n, double gamma);

// F~ = psi diag(T_-, Ep^2_1..Ep^2_n) psi^T.
Eigen::MatrixXd f_tilde(const SpectralBasis& b, double t_minus, const Eigen::VectorXd& p_sq);

FourierBlocks resolve_time_averaged(const ChainConfig& cfg, const Eigen::MatrixXd& f_hat,
                                    const FourierBlocks& r_blocks);

double lyapunov_residual(const ChainConfig& cfg, const CovarianceBlocks& s_avg,
                         const Eigen::VectorXd& p_sq_avg, const CovarianceBlocks& r_resid);
double lyapunov_residual(const ChainConfig& cfg, const Eigen::MatrixXd& s_avg,
                         const Eigen::VectorXd& p_sq_avg, const Eigen::MatrixXd& r_resid);

// Accepts the (2n+1) layout or a (2n+2) layout with a leading r_0 row and
// column (which the Dirichlet basis annihilates).
Eigen::MatrixXd pi_matrix(double gamma, const Eigen::MatrixXd& gamma_matrix);

struct FdReport {
  Eigen::VectorXd residual;  // x = 0..n-1
  double max_residual = 0.0;
  double bulk_max_residual = 0.0;  // x in [n/4, 3n/4]
  Eigen::VectorXd lhs;
};

// Time-averaged current identity at record index k.
FdReport fd_relation_check(const ChainConfig& cfg, const CovariancePath& path, std::size_t k);

struct MMatrixReport {
  Eigen::MatrixXd m;
  double max_row_sum_error = 0.0;
  double max_col_sum_error = 0.0;
  double min_entry = 0.0;
  double symmetry_error = 0.0;
  bool ok = false;
};

MMatrixReport m_matrix_diagnostic(const ChainConfig& cfg);

struct EquipartitionProfile {
  Eigen::VectorXd gap;      // <p'_x^2> - <r'_x^2>, x = 0..n, r'_0 = 0
  Eigen::VectorXd thermal;  // 1/2 (<S^p_xx> + <S^r_xx>)
  Eigen::VectorXd p_sq;     // <p_x^2> including the mean part
};

EquipartitionProfile equipartition_diagnostic(const CovariancePath& path, std::size_t k);

// sum_x (<p_x^2> - <p_{x+1}^2>)^2
double kinetic_flatness(const EquipartitionProfile& prof);

// n^{-3} sum_x E[(q'_x)^2], q'_x = sum_{y <= x} r'_y.
double position_functional(const CovarianceBlocks& s);

double min_eigenvalue(const Eigen::MatrixXd& s);

void write_covariance_csv(std::ostream& os, const CovariancePath& path);

}  // namespace hydro
