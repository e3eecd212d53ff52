#include "hydro/macro_pde.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "hydro/numerics.hpp"

namespace hydro {

std::vector<std::string> GridSpec::validation_errors(double gamma) const {
  std::vector<std::string> errs;
  if (m < 2) errs.push_back("grid.m must be >= 2");
  if (!(dt_macro > 0)) errs.push_back("grid.dt_macro must be > 0");
  if (scheme == Scheme::explicit_euler && m >= 2) {
    const double limit = 0.9 * 2.0 * gamma * du() * du();
    if (dt_macro > limit) errs.push_back("grid.dt_macro violates the explicit stability limit");
  }
  return errs;
}

void GridSpec::validate(double gamma) const {
  auto errs = validation_errors(gamma);
  if (!errs.empty()) throw ValidationError(std::move(errs));
}

std::size_t FieldPath::index_of(double time) const {
  auto it = std::lower_bound(t.begin(), t.end(), time - 1e-12 * std::max(1.0, time));
  if (it == t.end() || std::abs(*it - time) > 1e-12 * std::max(1.0, time)) {
    throw std::out_of_range("FieldPath::index_of: time not on the step grid");
  }
  return static_cast<std::size_t>(it - t.begin());
}

double FieldPath::sample(std::size_t k, double u) const {
  const Eigen::VectorXd& f = v.at(k);
  const double pos = std::clamp(u, 0.0, 1.0) * grid.m;
  const int i = std::min(static_cast<int>(std::floor(pos)), grid.m - 1);
  const double w = pos - i;
  return (1.0 - w) * f(i) + w * f(i + 1);
}

Eigen::VectorXd sample_nodes(const Profile& f, int m) {
  Eigen::VectorXd out(m + 1);
  for (int i = 0; i <= m; ++i) out(i) = f(static_cast<double>(i) / m);
  return out;
}

std::vector<double> time_grid(const GridSpec& grid, double t_end, const std::vector<double>& record_times) {
  std::vector<double> stops = record_times;
  stops.push_back(t_end);
  std::sort(stops.begin(), stops.end());
  std::vector<double> t = {0.0};
  for (double stop : stops) {
    if (stop < 0 || stop > t_end) throw std::invalid_argument("time_grid: record time outside [0, t_end]");
    while (stop - t.back() > 1e-12 * std::max(1.0, stop)) {
      double h = std::min(grid.dt_macro, stop - t.back());
      if (stop - t.back() - h < 1e-9 * grid.dt_macro) h = stop - t.back();
      t.push_back(t.back() + h);
    }
    t.back() = std::max(t.back(), stop);
  }
  if (grid.scheme == Scheme::crank_nicolson && grid.rannacher_startup) {
    // The first two steps become four implicit Euler half steps.
    std::vector<double> out = {0.0};
    for (std::size_t k = 1; k < t.size(); ++k) {
      if (k <= 2) out.push_back(0.5 * (t[k - 1] + t[k]));
      out.push_back(t[k]);
    }
    t = std::move(out);
  }
  return t;
}

double right_derivative(const Eigen::VectorXd& f, double du) {
  const auto m = f.size() - 1;
  if (m < 2) throw std::invalid_argument("right_derivative: need at least 3 nodes");
  return (3.0 * f(m) - 4.0 * f(m - 1) + f(m - 2)) / (2.0 * du);
}

double left_derivative(const Eigen::VectorXd& f, double du) {
  if (f.size() < 3) throw std::invalid_argument("left_derivative: need at least 3 nodes");
  return (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * du);
}

double integrate_nodes(const Eigen::VectorXd& f, double du) {
  const auto m = f.size() - 1;
  CompensatedSum s;
  s.add(0.5 * f(0));
  for (Eigen::Index i = 1; i < m; ++i) s.add(f(i));
  s.add(0.5 * f(m));
  return s.value() * du;
}

namespace {

// Solves a tridiagonal system in place (Thomas algorithm, no pivoting; the
// matrices here are diagonally dominant).
void thomas(std::vector<double> a, std::vector<double> b, std::vector<double> c, std::vector<double>& d) {
  const std::size_t n = d.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  d[n - 1] /= b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) d[i] = (d[i] - c[i] * d[i + 1]) / b[i];
}

struct RightBc {
  bool neumann = false;
  double old_value = 0.0;  // Dirichlet value or flux du at the old level
  double new_value = 0.0;
};

// One theta-step of u_t = kappa u_uu + src on the nodes 0..m, with u_0 fixed.
// src_old/src_new are nodal sources at the two time levels (may be empty).
Eigen::VectorXd theta_step(const Eigen::VectorXd& u, double theta, double h, double kappa, double du,
                           double left_value, const RightBc& bc, const Eigen::VectorXd& src_old,
                           const Eigen::VectorXd& src_new) {
  const int m = static_cast<int>(u.size()) - 1;
  const int last = bc.neumann ? m : m - 1;
  const int k = last;  // unknowns 1..last
  const double mu = kappa * h / (du * du);
  std::vector<double> a(k, 0.0), b(k, 0.0), c(k, 0.0), d(k, 0.0);
  auto lap_old = [&](int i) {
    if (i == m) return 2.0 * (u(m - 1) - u(m)) + 2.0 * du * bc.old_value;
    return u(i - 1) - 2.0 * u(i) + u(i + 1);
  };
  for (int i = 1; i <= last; ++i) {
    const int row = i - 1;
    double rhs = u(i) + (1.0 - theta) * mu * lap_old(i);
    if (src_old.size()) rhs += h * (1.0 - theta) * src_old(i);
    if (src_new.size()) rhs += h * theta * src_new(i);
    b[row] = 1.0 + 2.0 * theta * mu;
    if (i == m) {
      a[row] = -2.0 * theta * mu;
      rhs += theta * mu * 2.0 * du * bc.new_value;
    } else {
      if (i > 1) {
        a[row] = -theta * mu;
      } else {
        rhs += theta * mu * left_value;
      }
      if (i < last) {
        c[row] = -theta * mu;
      } else {
        rhs += theta * mu * bc.new_value;  // Dirichlet right value
      }
    }
    d[row] = rhs;
  }
  Eigen::VectorXd out(m + 1);
  out(0) = left_value;
  if (theta == 0.0) {
    for (int i = 1; i <= last; ++i) out(i) = d[i - 1];
  } else {
    thomas(a, b, c, d);
    for (int i = 1; i <= last; ++i) out(i) = d[i - 1];
  }
  if (!bc.neumann) out(m) = bc.new_value;
  return out;
}

// Sub-steps of [t_k, t_{k+1}] as (theta, fraction start, fraction end).
struct Sub {
  double theta, f0, f1;
};

std::vector<Sub> substeps(const GridSpec& grid, std::size_t k) {
  if (grid.scheme == Scheme::explicit_euler) return {{0.0, 0.0, 1.0}};
  if (grid.rannacher_startup && k < 4) return {{1.0, 0.0, 1.0}};
  return {{0.5, 0.0, 1.0}};
}

Eigen::VectorXd lerp(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double w) { return (1.0 - w) * a + w * b; }

void check_same_grid(const FieldPath& r_path) {
  if (r_path.t.size() < 2) throw std::invalid_argument("solver: stretch path has fewer than two time levels");
}

}  // namespace

FieldPath solve_stretch(const Profile& r0, const ChainConfig& cfg, const GridSpec& grid, double t_end,
                        const std::vector<double>& record_times) {
  grid.validate(cfg.gamma);
  FieldPath path;
  path.grid = grid;
  path.t = time_grid(grid, t_end, record_times);
  Eigen::VectorXd r = sample_nodes(r0, grid.m);
  r(0) = 0.0;
  r(grid.m) = cfg.f_bar;
  path.v.push_back(r);
  const double kappa = 1.0 / (2.0 * cfg.gamma);
  const Eigen::VectorXd none;
  for (std::size_t k = 0; k + 1 < path.t.size(); ++k) {
    const double h = path.t[k + 1] - path.t[k];
    for (const Sub& s : substeps(grid, k)) {
      r = theta_step(r, s.theta, h * (s.f1 - s.f0), kappa, grid.du(), 0.0, {false, cfg.f_bar, cfg.f_bar}, none,
                     none);
    }
    path.v.push_back(r);
  }
  return path;
}

FieldPath solve_energy(const Profile& e0, const FieldPath& r_path, const ChainConfig& cfg, double wq) {
  check_same_grid(r_path);
  const GridSpec& grid = r_path.grid;
  const double du = grid.du();
  const double kappa = 1.0 / (4.0 * cfg.gamma);
  FieldPath path;
  path.grid = grid;
  path.t = r_path.t;
  Eigen::VectorXd e = sample_nodes(e0, grid.m);
  e(0) = cfg.t_minus;
  path.v.push_back(e);
  // The diffused quantity is w = e + r^2/2, which shares the Neumann end.
  auto s_of = [](const Eigen::VectorXd& r) { return Eigen::VectorXd(0.5 * r.array().square()); };
  auto flux_w = [&](const Eigen::VectorXd& r) { return 2.0 * cfg.f_bar * right_derivative(r, du) + 4.0 * cfg.gamma * wq; };
  for (std::size_t k = 0; k + 1 < path.t.size(); ++k) {
    const double h = path.t[k + 1] - path.t[k];
    for (const Sub& s : substeps(grid, k)) {
      const Eigen::VectorXd ra = lerp(r_path.v[k], r_path.v[k + 1], s.f0);
      const Eigen::VectorXd rb = lerp(r_path.v[k], r_path.v[k + 1], s.f1);
      const double hs = h * (s.f1 - s.f0);
      const Eigen::VectorXd sa = s_of(ra), sb = s_of(rb);
      const Eigen::VectorXd w = e + sa;
      const Eigen::VectorXd ds = (sb - sa) / hs;
      // (w_new - w)/h = kappa L(theta w_new + (1 - theta) w) + (s_b - s_a)/h
      const Eigen::VectorXd w_new = theta_step(w, s.theta, hs, kappa, du, cfg.t_minus + sa(0),
                                               {true, flux_w(ra), flux_w(rb)}, ds, ds);
      e = w_new - sb;
      e(0) = cfg.t_minus;
    }
    path.v.push_back(e);
  }
  return path;
}

FieldPath solve_temperature(const Profile& t0, const FieldPath& r_path, const ChainConfig& cfg, double wq) {
  check_same_grid(r_path);
  const GridSpec& grid = r_path.grid;
  const double du = grid.du();
  const int m = grid.m;
  const double kappa = 1.0 / (4.0 * cfg.gamma);
  FieldPath path;
  path.grid = grid;
  path.t = r_path.t;
  Eigen::VectorXd T = sample_nodes(t0, m);
  T(0) = cfg.t_minus;
  path.v.push_back(T);
  // (r_u)^2 as the mean of the squared one-sided differences, and at u = 1
  // through the same ghost node the energy solve uses; then e - r^2/2 and T
  // obey the same discrete equation up to the time error.
  auto source = [&](const Eigen::VectorXd& r) {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(m + 1);
    const double c = 1.0 / (2.0 * cfg.gamma * du * du);
    for (int i = 1; i < m; ++i) {
      const double a = r(i + 1) - r(i), b = r(i) - r(i - 1);
      q(i) = 0.5 * c * (a * a + b * b);
    }
    q(m) = c * (r(m - 1) * r(m - 1) - r(m) * r(m) + 2.0 * du * r(m) * right_derivative(r, du));
    return q;
  };
  const double flux = 4.0 * cfg.gamma * wq;
  for (std::size_t k = 0; k + 1 < path.t.size(); ++k) {
    const double h = path.t[k + 1] - path.t[k];
    for (const Sub& s : substeps(grid, k)) {
      const Eigen::VectorXd qa = source(lerp(r_path.v[k], r_path.v[k + 1], s.f0));
      const Eigen::VectorXd qb = source(lerp(r_path.v[k], r_path.v[k + 1], s.f1));
      T = theta_step(T, s.theta, h * (s.f1 - s.f0), kappa, du, cfg.t_minus, {true, flux, flux}, qa, qb);
    }
    path.v.push_back(T);
  }
  return path;
}

std::vector<AuditRow> energy_balance_audit(const FieldPath& e_path, const FieldPath& r_path, const ChainConfig& cfg,
                                           double wq, const FieldPath* t_path) {
  if (e_path.t.size() != r_path.t.size()) throw std::invalid_argument("energy_balance_audit: path mismatch");
  const double du = e_path.grid.du();
  const double k4 = 1.0 / (4.0 * cfg.gamma);
  const double e_int0 = integrate_nodes(e_path.v[0], du);
  std::vector<AuditRow> rows;
  double j0 = 0.0, j1 = 0.0, w14 = 0.0, w16 = 0.0;
  auto terms = [&](std::size_t k, double& left_flux, double& right_flux, double& f14, double& f16) {
    const Eigen::VectorXd& e = e_path.v[k];
    const Eigen::VectorXd& r = r_path.v[k];
    const Eigen::VectorXd w = e + 0.5 * Eigen::VectorXd(r.array().square());
    const Eigen::VectorXd T = t_path ? t_path->v[k] : Eigen::VectorXd(e - 0.5 * Eigen::VectorXd(r.array().square()));
    left_flux = -k4 * left_derivative(w, du);
    const double ru = right_derivative(r, du);
    right_flux = -k4 * (2.0 * cfg.f_bar * ru + 4.0 * cfg.gamma * wq);
    f14 = k4 * (right_derivative(e, du) + cfg.f_bar * ru);
    f16 = k4 * (right_derivative(T, du) + 2.0 * cfg.f_bar * ru);
  };
  double lf_prev, rf_prev, f14_prev, f16_prev;
  terms(0, lf_prev, rf_prev, f14_prev, f16_prev);
  rows.push_back({0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0});
  for (std::size_t k = 1; k < e_path.t.size(); ++k) {
    const double h = e_path.t[k] - e_path.t[k - 1];
    double lf, rf, f14, f16;
    terms(k, lf, rf, f14, f16);
    // Same time weights as the step that produced level k.
    const double th = substeps(e_path.grid, k - 1).front().theta;
    auto quad = [&](double now, double before) { return h * (th * now + (1.0 - th) * before); };
    j0 += quad(lf, lf_prev);
    j1 += quad(rf, rf_prev);
    w14 += quad(f14, f14_prev);
    w16 += quad(f16, f16_prev);
    lf_prev = lf;
    rf_prev = rf;
    f14_prev = f14;
    f16_prev = f16;
    AuditRow row;
    row.t = e_path.t[k];
    row.energy_change = integrate_nodes(e_path.v[k], du) - e_int0;
    row.j0 = j0;
    row.j1 = j1;
    row.residual = row.energy_change - (row.j0 - row.j1);
    row.w_energy_form = w14;
    row.w_temp_form = w16;
    rows.push_back(row);
  }
  return rows;
}

double steady_temperature(const ChainConfig& cfg, double wq, double u) {
  const double f2 = cfg.f_bar * cfg.f_bar;
  return cfg.t_minus + (4.0 * cfg.gamma * wq + 2.0 * f2) * u - f2 * u * u;
}

void write_fields_csv(std::ostream& os, const FieldPath& r, const FieldPath& e, const FieldPath& temp,
                      const std::vector<double>& times) {
  os << "t,u,r,e,T\n";
  os.precision(17);
  for (double t : times) {
    const std::size_t k = r.index_of(t);
    for (int i = 0; i <= r.grid.m; ++i) {
      os << t << ',' << static_cast<double>(i) / r.grid.m << ',' << r.v[k](i) << ',' << e.v[k](i) << ','
         << temp.v[k](i) << '\n';
    }
  }
}

}  // namespace hydro
