#pragma once

// Reference implementations written independently of the library: dense
// linear algebra, closed-form scalar solutions and 50-digit series. Only the
// JSON dispatcher reaches into the library (for the quadrature oracle).

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

namespace hydro::oracle {

// Drift matrix of the averaged chain in (r_1..r_n, p_0..p_n) order, from the
// equations of motion: dr_x = p_x - p_{x-1}, dp_x = r_{x+1} - r_x - 2 gamma p_x.
// The returned matrix is B with d/dtau (r, p) = B (r, p).
Eigen::MatrixXd drift_matrix(int n, double gamma);

// Solves M X + X M^T = rhs by vectorizing into (I kron M + M kron I).
Eigen::MatrixXd lyapunov_kronecker(const Eigen::MatrixXd& m, const Eigen::MatrixXd& rhs);

// Time-averaged covariance: -B S - S B^T = 4 gamma diag(0, T_-, p_sq_1..n) + R.
Eigen::MatrixXd averaged_covariance(int n, double gamma, double t_minus, const Eigen::VectorXd& p_sq,
                                    const Eigen::MatrixXd& r);

// Orthonormal cosine (n+1) and sine (n) bases, rows are modes, normalized numerically.
Eigen::MatrixXd cosine_basis(int n);
Eigen::MatrixXd sine_basis(int n);
double laplacian_eigenvalue(int n, int j);

// exp(B tau) S0 exp(B^T tau) via a dense matrix exponential.
Eigen::MatrixXd noiseless_covariance(int n, double gamma, const Eigen::MatrixXd& s0, double tau);

struct Oscillator {
  double x = 0.0, v = 0.0;
};
// x'' + 2 gamma x' + lambda x = 0, all three damping regimes.
Oscillator damped_oscillator(double gamma, double lambda, double x0, double v0, double t);

// r_t = r_uu / (2 gamma), r(0) = 0, r(t,0) = 0, r(t,1) = f_bar, by the sine series.
double heat_series(double u, double t, double gamma, double f_bar, int terms = 2000);

// e^{-gamma t} sinh(s t)/s with s^2 = gamma^2 - lambda, in 50 digits.
double quotient_50(double gamma, double lambda, double t);

// F + n^{-1/2} sum_l 2 Re(F^(l) e^{i l omega tau}), omega = 2 pi / theta, in 50 digits.
struct Mode {
  int ell;
  double re, im;
};
double forcing_series_50(double f_bar, int n, const std::vector<Mode>& modes, double theta, double tau);

// Random symmetric positive semidefinite matrix G G^T / dim.
Eigen::MatrixXd random_psd(int dim, std::uint64_t seed);
Eigen::MatrixXd random_symmetric(int dim, std::uint64_t seed, double scale);

// Names: lyapunov, wq-quadrature, heat-series, quotient, oscillator, forcing.
nlohmann::json run(const std::string& name, const nlohmann::json& params);

}  // namespace hydro::oracle
