#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hydro/numerics.hpp"
#include "json.hpp"

namespace hydro {

// psi(j, x) = psi_j(x) for j, x = 0..n (Neumann-type cosine basis).
// phi(j-1, x-1) = phi_j(x) for j, x = 1..n (Dirichlet sine basis).
// Matrices are materialized only for n <= kDenseLimit.
struct SpectralBasis {
  static constexpr int kDenseLimit = 4096;

  int n = 0;
  Eigen::MatrixXd psi;
  Eigen::MatrixXd phi;
  Eigen::VectorXd lambda;  // j = 0..n

  bool dense() const { return psi.size() > 0; }
  double psi_at(int j, int x) const;
  double phi_at(int j, int x) const;
};

SpectralBasis build_basis(int n);

// grad: length n -> n+1, (grad g)_x = g_{x+1} - g_x, x = 0..n, g_0 = g_{n+1} = 0.
Eigen::VectorXd grad(const Eigen::VectorXd& g);
// div: length n+1 -> n, (div f)_x = f_x - f_{x-1}, x = 1..n.
Eigen::VectorXd div(const Eigen::VectorXd& f);

struct ModeRates {
  double gamma = 0.0;
  Eigen::VectorXd lambda;
  Eigen::VectorXcd lambda_minus;
  Eigen::VectorXcd lambda_plus;
  Eigen::VectorXcd delta_lambda;  // lambda_plus - lambda_minus
};

ModeRates mode_rates(const SpectralBasis& basis, double gamma);
ModeRates mode_rates(const Eigen::VectorXd& lambda, double gamma);

constexpr double kQuotientSwitch = 1e-4;

// e^{-lambda_- t} (1 - e^{-dlambda t}) / dlambda, with its t e^{-gamma t} limit.
cplx stable_quotient(const ModeRates& rates, int j, double t);
cplx stable_quotient(cplx lambda_minus, cplx delta_lambda, double t);

struct KeyLemmaReport {
  int n = 0;
  double gamma = 0.0;
  bool ok = true;
  std::vector<std::string> violations;
  double min_ratio = 0.0;  // min over j >= 1 of Re lambda_- / (j/n)^2
  double max_ratio = 0.0;
  nlohmann::json to_json() const;
};

KeyLemmaReport key_lemma_check(const ModeRates& rates, int n, double gamma);

Eigen::VectorXd forward_p(const SpectralBasis& b, const Eigen::VectorXd& g);
Eigen::VectorXd inverse_p(const SpectralBasis& b, const Eigen::VectorXd& g_hat);
Eigen::VectorXd forward_r(const SpectralBasis& b, const Eigen::VectorXd& f);
Eigen::VectorXd inverse_r(const SpectralBasis& b, const Eigen::VectorXd& f_hat);

// Phi with a leading zero row: (n+1) x n, row j = phi_j for j >= 1. Used to
// give r-indexed Fourier blocks the same (n+1) shape as p-indexed ones.
Eigen::MatrixXd phi_padded(const SpectralBasis& b);

}  // namespace hydro
