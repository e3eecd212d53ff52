#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hydro/chain_model.hpp"

namespace hydro {

enum class Scheme { explicit_euler, crank_nicolson };

struct GridSpec {
  int m = 128;             // cells; nodes u_i = i/m, i = 0..m
  double dt_macro = 1e-3;
  Scheme scheme = Scheme::crank_nicolson;
  // Crank-Nicolson only: the first two steps are replaced by four implicit
  // Euler half steps (stored as time levels) to damp incompatible initial data.
  bool rannacher_startup = true;

  double du() const { return 1.0 / m; }
  std::vector<std::string> validation_errors(double gamma) const;
  void validate(double gamma) const;
};

struct MacroFields {
  Eigen::VectorXd r, e, temp;
  double t = 0.0;
};

// Values of one field at every time step of a solve.
struct FieldPath {
  GridSpec grid;
  std::vector<double> t;
  std::vector<Eigen::VectorXd> v;

  std::size_t index_of(double time) const;
  // Linear interpolation in u at the stored time index k.
  double sample(std::size_t k, double u) const;
};

using Profile = std::function<double(double)>;

// Sample a profile on the nodes of a grid.
Eigen::VectorXd sample_nodes(const Profile& f, int m);

// The time grid shared by all solvers: uniform steps of dt_macro, shortened
// to land on each record time and on t_end.
std::vector<double> time_grid(const GridSpec& grid, double t_end, const std::vector<double>& record_times = {});

FieldPath solve_stretch(const Profile& r0, const ChainConfig& cfg, const GridSpec& grid, double t_end,
                        const std::vector<double>& record_times = {});
FieldPath solve_energy(const Profile& e0, const FieldPath& r_path, const ChainConfig& cfg, double wq);
FieldPath solve_temperature(const Profile& t0, const FieldPath& r_path, const ChainConfig& cfg, double wq);

// d/du at u = 1 and u = 0 by one-sided three-point stencils.
double right_derivative(const Eigen::VectorXd& f, double du);
double left_derivative(const Eigen::VectorXd& f, double du);

// Trapezoid rule in u on the grid nodes.
double integrate_nodes(const Eigen::VectorXd& f, double du);

struct AuditRow {
  double t = 0.0;
  double energy_change = 0.0;   // int e(t) - int e(0)
  double j0 = 0.0;              // energy entering at u = 0
  double j1 = 0.0;              // -W(t)
  double residual = 0.0;        // energy_change - (j0 - j1)
  double w_energy_form = 0.0;   // (1/4g) int [e_u(s,1) + F r_u(s,1)] ds
  double w_temp_form = 0.0;     // (1/4g) int [T_u(s,1) + 2 F r_u(s,1)] ds
};

// T defaults to e - r^2/2 when no temperature path is given.
std::vector<AuditRow> energy_balance_audit(const FieldPath& e_path, const FieldPath& r_path, const ChainConfig& cfg,
                                           double wq, const FieldPath* t_path = nullptr);

// T(u) = T_- + (4 gamma W^Q + 2 F^2) u - F^2 u^2
double steady_temperature(const ChainConfig& cfg, double wq, double u);

void write_fields_csv(std::ostream& os, const FieldPath& r, const FieldPath& e, const FieldPath& temp,
                      const std::vector<double>& times);

}  // namespace hydro
