#pragma once

#include <iosfwd>
#include <vector>

#include "hydro/chain_model.hpp"
#include "hydro/macro_pde.hpp"
#include "json.hpp"

namespace hydro {

double wq_closed_form(const ChainConfig& cfg);
// Per-mode summand |F^|^2 nu Re sqrt(4/(nu^2 - 2 i gamma nu) - 1).
double wq_summand(double gamma, double nu, double amp_sq);

struct QuadratureResult {
  double value = 0.0;
  int panels = 0;
  bool converged = false;
};

// Composite 10-point Gauss-Legendre, starting at n_quad panels and doubling
// until successive values differ by less than 1e-10.
QuadratureResult wq_quadrature_oracle(const ChainConfig& cfg, int n_quad = 64);

// (F/2gamma) int_0^t d_u r(s,1) ds + W^Q t, trapezoid over the path steps.
double macroscopic_work(const FieldPath& r_path, const ChainConfig& cfg, double wq, double t);

struct WorkRow {
  int n = 0;
  double t = 0.0;
  double w_n = 0.0;
  double w = 0.0;
  double abs_error = 0.0;
  double micro_w_n = 0.0;
  double micro_stderr = 0.0;
  bool has_micro = false;
};

struct WorkStudyParams {
  double t = 1.0;
  Profile r0 = [](double) { return 0.0; };
  GridSpec grid;
  int micro_ensemble = 0;  // 0 disables the stochastic estimate
  double micro_dt = 0.05;
  std::uint64_t seed = 0;
  int threads = 1;
};

// Deterministic W_n(t) from the averaged dynamics (r(0) = r0(x/n), p(0) = 0)
// against the limit W(t), for each n in sizes (other fields from base).
std::vector<WorkRow> work_convergence_study(const ChainConfig& base, const std::vector<int>& sizes,
                                            const WorkStudyParams& params);

void write_work_csv(std::ostream& os, const std::vector<WorkRow>& rows);

}  // namespace hydro
