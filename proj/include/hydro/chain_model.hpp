#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "hydro/rng.hpp"

namespace hydro {

// Thrown when user-supplied input fails validation. Carries every problem
// found, not only the first.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct ForcingMode {
  int ell = 1;
  std::complex<double> amplitude;  // F^(ell); F^(-ell) is its conjugate.
};

struct ChainConfig {
  int n = 1;
  double gamma = 1.0;
  double t_minus = 1.0;
  double f_bar = 0.0;
  double theta = 1.0;
  std::vector<ForcingMode> forcing_modes;

  double omega() const;
  // Sum of |F^(ell)| over ell != 0.
  double forcing_l1() const;
  std::vector<std::string> validation_errors() const;
  void validate() const;
};

ChainConfig chain_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ChainConfig& cfg);
// Lists problems in a chain JSON document (unknown keys, types, ranges).
std::vector<std::string> chain_config_errors(const nlohmann::json& j);

struct ChainState {
  Eigen::VectorXd r;  // r_1..r_n
  Eigen::VectorXd p;  // p_0..p_n
  double tau = 0.0;

  static ChainState zero(int n);
  int n() const { return static_cast<int>(r.size()); }
};

struct ObservableFrame {
  Eigen::VectorXd site_energy;
  Eigen::VectorXd currents;
  Eigen::VectorXd u_e;
  Eigen::VectorXd v_e;
};

double forcing_value(const ChainConfig& cfg, double tau);

// E_x = p_x^2/2 + r_x^2/2 for x = 0..n, with r_0 = 0.
Eigen::VectorXd site_energy(const ChainState& state);
double total_energy(const ChainState& state);

// Entry k holds j_{k-2,k-1}: index 0 is the bath current j_{-1,0}, index
// n+1 is the work current j_{n,n+1}.
Eigen::VectorXd currents(const ChainConfig& cfg, const ChainState& state,
                         double tau);

struct FdObservables {
  Eigen::VectorXd u_e;  // x = 0..n
  Eigen::VectorXd v_e;  // x = 0..n-1
};

// r_right is the value used for r_{n+1} in U^e_n (the force for the raw
// forced field, 0 for centered fields). p_{-1} is taken equal to p_0.
FdObservables fd_observables(const ChainConfig& cfg, const ChainState& state,
                             double r_right = 0.0);

ObservableFrame observe(const ChainConfig& cfg, const ChainState& state);

// Product Gaussian with p_0 ~ N(0, T_-), p_x, r_x ~ N(mean_r_x, T_x) for
// x >= 1 (mean 0 for p). temperature_profile has n+1 entries; entry 0 is
// ignored. Draw order: p_0, then (r_x, p_x) for x = 1..n.
ChainState sample_local_gibbs(const ChainConfig& cfg,
                              const Eigen::VectorXd& temperature_profile,
                              RngStream& rng);
ChainState sample_local_gibbs(const ChainConfig& cfg,
                              const Eigen::VectorXd& temperature_profile,
                              const Eigen::VectorXd& mean_r, RngStream& rng);

}  // namespace hydro
