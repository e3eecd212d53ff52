#include "hydro/work_limits.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>

#include <boost/math/quadrature/gauss.hpp>

#include "hydro/mean_dynamics.hpp"
#include "hydro/micro_sim.hpp"

namespace hydro {

double wq_summand(double gamma, double nu, double amp_sq) {
  const std::complex<double> w = 4.0 / std::complex<double>(nu * nu, -2.0 * gamma * nu) - 1.0;
  return amp_sq * nu * std::sqrt(w).real();
}

double wq_closed_form(const ChainConfig& cfg) {
  double s = 0.0;
  for (const auto& m : cfg.forcing_modes) {
    s += wq_summand(cfg.gamma, m.ell * cfg.omega(), std::norm(m.amplitude));
  }
  return s;
}

namespace {

double panel_sum(double gamma, double nu, int panels) {
  using Gauss = boost::math::quadrature::gauss<double, 10>;
  const double pi = std::numbers::pi;
  auto f = [&](double u) {
    const double c = std::cos(0.5 * pi * u);
    const double s = std::sin(0.5 * pi * u);
    const double d = 4.0 * s * s - nu * nu;
    return c * c / (d * d + 4.0 * nu * nu * gamma * gamma);
  };
  double acc = 0.0;
  const double h = 1.0 / panels;
  for (int k = 0; k < panels; ++k) acc += Gauss::integrate(f, k * h, (k + 1) * h);
  return acc;
}

}  // namespace

QuadratureResult wq_quadrature_oracle(const ChainConfig& cfg, int n_quad) {
  QuadratureResult res;
  res.converged = true;
  res.panels = 0;
  const int max_panels = 1 << 22;
  for (const auto& m : cfg.forcing_modes) {
    const double nu = m.ell * cfg.omega();
    const double pref = 8.0 * cfg.gamma * nu * nu * std::norm(m.amplitude);
    int panels = std::max(1, n_quad);
    double prev = pref * panel_sum(cfg.gamma, nu, panels);
    bool ok = false;
    while (panels < max_panels) {
      panels *= 2;
      const double cur = pref * panel_sum(cfg.gamma, nu, panels);
      const bool done = std::abs(cur - prev) < 1e-10;
      prev = cur;
      if (done) {
        ok = true;
        break;
      }
    }
    res.value += prev;
    res.panels = std::max(res.panels, panels);
    res.converged = res.converged && ok;
  }
  return res;
}

double macroscopic_work(const FieldPath& r_path, const ChainConfig& cfg, double wq, double t) {
  if (r_path.grid.m < 2) throw std::invalid_argument("macroscopic_work: path needs at least 3 grid points");
  if (t < 0 || t > r_path.t.back() * (1 + 1e-12)) throw std::invalid_argument("macroscopic_work: t outside the path");
  const double du = r_path.grid.du();
  double integral = 0.0;
  double prev = right_derivative(r_path.v[0], du);
  for (std::size_t k = 1; k < r_path.t.size() && r_path.t[k - 1] < t; ++k) {
    const double cur = right_derivative(r_path.v[k], du);
    const double t0 = r_path.t[k - 1];
    const double t1 = std::min(r_path.t[k], t);
    // Partial last interval: linear interpolation of the flux.
    const double w = (t1 - t0) / (r_path.t[k] - t0);
    const double end = (1.0 - w) * prev + w * cur;
    integral += 0.5 * (t1 - t0) * (prev + end);
    prev = cur;
  }
  return cfg.f_bar / (2.0 * cfg.gamma) * integral + wq * t;
}

std::vector<WorkRow> work_convergence_study(const ChainConfig& base, const std::vector<int>& sizes,
                                            const WorkStudyParams& params) {
  const double wq = wq_closed_form(base);
  const FieldPath r_path = solve_stretch(params.r0, base, params.grid, params.t);
  const double w_limit = macroscopic_work(r_path, base, wq, params.t);
  std::vector<WorkRow> rows;
  for (int n : sizes) {
    ChainConfig cfg = base;
    cfg.n = n;
    MeanState init = MeanState::zero(n);
    for (int x = 1; x <= n; ++x) init.r_bar(x - 1) = params.r0(static_cast<double>(x) / n);
    MeanSolution sol(cfg, init);
    WorkRow row;
    row.n = n;
    row.t = params.t;
    row.w_n = sol.work(static_cast<double>(n) * n * params.t);
    row.w = w_limit;
    row.abs_error = std::abs(row.w_n - row.w);
    if (params.micro_ensemble >= 2) {
      SimParams sp;
      sp.dt = params.micro_dt;
      sp.t_macro_end = params.t;
      sp.record_times = {params.t};
      sp.ensemble_size = params.micro_ensemble;
      sp.seed = params.seed;
      Eigen::VectorXd prof = Eigen::VectorXd::Constant(n + 1, cfg.t_minus);
      auto sampler = [&](RngStream& rng) { return sample_local_gibbs(cfg, prof, init.r_bar, rng); };
      EnsembleOptions eo;
      eo.threads = params.threads;
      const auto stats = run_ensemble(cfg, sampler, sp, eo);
      row.micro_w_n = stats.back().work;
      row.micro_stderr = stats.back().stderr_work;
      row.has_micro = true;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_work_csv(std::ostream& os, const std::vector<WorkRow>& rows) {
  os << "n,t,W_n,W,abs_error,micro_W_n,micro_stderr\n";
  os.precision(17);
  for (const auto& r : rows) {
    os << r.n << ',' << r.t << ',' << r.w_n << ',' << r.w << ',' << r.abs_error << ',';
    if (r.has_micro) {
      os << r.micro_w_n << ',' << r.micro_stderr;
    } else {
      os << ',';
    }
    os << '\n';
  }
}

}  // namespace hydro
