#pragma once

#include <iosfwd>
#include <vector>

#include "hydro/chain_model.hpp"
#include "hydro/spectral.hpp"

namespace hydro {

struct MeanState {
  Eigen::VectorXd r_bar;  // n
  Eigen::VectorXd p_bar;  // n+1
  double tau = 0.0;

  static MeanState zero(int n);
};

struct BoundaryTerms {
  double p0 = 0.0;   // homogeneous part
  double pf = 0.0;   // constant force
  double pfl = 0.0;  // oscillating force, e^{i l w t} - e^{-lambda_- t} part
  double pdp = 0.0;  // oscillating force, quotient part
  double sum() const { return p0 + pf + pfl + pdp; }
};

// Spectral solution of the averaged dynamics started from init at init.tau.
// All times passed to member functions are absolute microscopic times.
class MeanSolution {
 public:
  MeanSolution(const ChainConfig& cfg, const MeanState& init);

  MeanState at(double tau) const;
  Eigen::VectorXd p_bar(double tau) const;
  BoundaryTerms boundary_terms(double tau) const;

  // Integrals over [init.tau, tau].
  double integral_p_n(double tau) const;
  double integral_r_n(double tau) const;
  // (1/n) * integral of F(s) p_n(s) ds.
  double work(double tau) const;

  const SpectralBasis& basis() const { return basis_; }
  const ModeRates& rates() const { return rates_; }
  double tau0() const { return tau0_; }

  static constexpr double kDegeneracyTol = 1e-8;

 private:
  struct Drive {
    double nu;
    cplx c;  // amplitude / sqrt(n), phase-shifted to tau0
  };
  void modal(double s, Eigen::VectorXcd& z, Eigen::VectorXcd& y) const;
  // Integral of e^{i nu s} Q_j(s) over [0, S].
  cplx iq(int j, double nu, double S) const;

  ChainConfig cfg_;
  SpectralBasis basis_;
  ModeRates rates_;
  double tau0_;
  Eigen::VectorXd p0_hat_;  // j = 0..n
  Eigen::VectorXd r0_hat_;  // j = 0..n, entry 0 is zero
  Eigen::VectorXd psi_n_;   // psi_j(n)
  Eigen::VectorXd phi_n_;   // phi_j(n), entry 0 is zero
  std::vector<Drive> drives_;
  // p_j(s) = a_j e^{-lambda_+ s} + b_j Q_j(s) + sum_l d_jl e^{i nu_l s}
  Eigen::VectorXcd a_, b_;
  Eigen::MatrixXcd d_;
  // r_j(s) = al_j e^{-lambda_+ s} + be_j Q_j(s) + ka_j + sum_l et_jl e^{i nu_l s}
  Eigen::VectorXcd al_, be_, ka_;
  Eigen::MatrixXcd et_;
};

MeanState closed_form_mean(const ChainConfig& cfg, const MeanState& init, double t_macro);
MeanState rk4_mean_oracle(const ChainConfig& cfg, const MeanState& init, double t_macro, double dt);
BoundaryTerms boundary_momentum_terms(const ChainConfig& cfg, const MeanState& init, double t_macro);
// 1/2 (p_x^2 + r_x^2), x = 0..n with r_0 = 0.
Eigen::VectorXd mechanical_energy_profile(const MeanState& mean);

void write_mean_csv(std::ostream& os, const std::vector<std::pair<double, MeanState>>& frames);

}  // namespace hydro
