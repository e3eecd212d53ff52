#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "hydro/macro_pde.hpp"
#include "oracles.hpp"

using namespace hydro;

namespace {

ChainConfig cfg_of(double gamma, double f_bar, double t_minus = 1.0) {
  ChainConfig c;
  c.n = 8;
  c.gamma = gamma;
  c.f_bar = f_bar;
  c.t_minus = t_minus;
  return c;
}

GridSpec grid_of(int m, double dt) {
  GridSpec g;
  g.m = m;
  g.dt_macro = dt;
  return g;
}

double l2_nodes(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double du) {
  return std::sqrt(integrate_nodes(Eigen::VectorXd((a - b).array().square()), du));
}

double series_error(const FieldPath& r, std::size_t k, int m, double t, double gamma) {
  Eigen::VectorXd ref(m + 1);
  for (int i = 0; i <= m; ++i) ref(i) = oracle::heat_series(static_cast<double>(i) / m, t, gamma, 1.0);
  return l2_nodes(r.v[k], ref, 1.0 / m);
}

}  // namespace

TEST_CASE("grid validation") {
  GridSpec g = grid_of(16, 1e-2);
  CHECK(g.validation_errors(1.0).empty());
  g.scheme = Scheme::explicit_euler;
  CHECK(g.validation_errors(1.0).size() == 1);
  g.dt_macro = 0.9 * 2.0 * (1.0 / 256) * 0.99;
  CHECK(g.validation_errors(1.0).empty());
  CHECK_THROWS_AS(grid_of(1, 0.0).validate(1.0), ValidationError);
  CHECK(grid_of(1, 0.0).validation_errors(1.0).size() == 2);
}

TEST_CASE("stencils and quadrature") {
  const int m = 10;
  const Eigen::VectorXd q = sample_nodes([](double u) { return 3.0 * u * u - u + 2.0; }, m);
  CHECK(right_derivative(q, 0.1) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(left_derivative(q, 0.1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(integrate_nodes(sample_nodes([](double u) { return 2.0 * u; }, m), 0.1) == doctest::Approx(1.0));
  GridSpec g = grid_of(4, 0.3);
  g.rannacher_startup = false;
  CHECK(time_grid(g, 1.0, {0.5}) == std::vector<double>{0.0, 0.3, 0.5, 0.8, 1.0});
  g.rannacher_startup = true;
  CHECK(time_grid(g, 1.0, {0.5}) == std::vector<double>{0.0, 0.15, 0.3, 0.4, 0.5, 0.8, 1.0});
}

TEST_CASE("stretch equation") {
  const ChainConfig c = cfg_of(1.0, 1.0);
  SUBCASE("linear profile is steady") {
    const FieldPath r = solve_stretch([](double u) { return u; }, c, grid_of(64, 1e-2), 1.0);
    for (const auto& v : r.v) CHECK((v - sample_nodes([](double u) { return u; }, 64)).cwiseAbs().maxCoeff() < 1e-13);
  }
  SUBCASE("relaxation from rest") {
    const FieldPath r = solve_stretch([](double) { return 0.0; }, c, grid_of(64, 1e-2), 2.0);
    CHECK(l2_nodes(r.v.back(), sample_nodes([](double u) { return u; }, 64), 1.0 / 64) < 0.05);
    CHECK(r.v.back()(0) == 0.0);
    CHECK(r.v.back()(64) == 1.0);
  }
  SUBCASE("second order against the series") {
    const double t = 0.1;
    double prev = 0.0;
    for (int m : {16, 32, 64}) {
      const FieldPath r = solve_stretch([](double) { return 0.0; }, c, grid_of(m, 2e-4), t);
      const double e = series_error(r, r.t.size() - 1, m, t, c.gamma);
      if (prev > 0) CHECK(prev / e == doctest::Approx(4.0).epsilon(0.15).scale(0));
      prev = e;
    }
  }
  SUBCASE("explicit scheme agrees") {
    GridSpec g = grid_of(32, 0.5 * 2.0 / (32.0 * 32.0));
    g.scheme = Scheme::explicit_euler;
    const Profile r0 = [](double u) { return u + 0.3 * std::sin(std::numbers::pi * u); };
    const FieldPath a = solve_stretch(r0, c, g, 0.05);
    const FieldPath b = solve_stretch(r0, c, grid_of(32, 1e-4), 0.05);
    CHECK((a.v.back() - b.v.back()).cwiseAbs().maxCoeff() < 1e-3);
  }
  SUBCASE("maximum principle") {
    const Profile r0 = [](double u) { return 1.5 * std::sin(std::numbers::pi * u) - 0.3; };
    const FieldPath r = solve_stretch(r0, c, grid_of(64, 2e-3), 0.5);
    const Eigen::VectorXd s = sample_nodes(r0, 64);
    const double lo = std::min({s.minCoeff(), 0.0, c.f_bar}), hi = std::max({s.maxCoeff(), 0.0, c.f_bar});
    for (const auto& v : r.v) {
      CHECK(v.minCoeff() >= lo - 1e-12);
      CHECK(v.maxCoeff() <= hi + 1e-12);
    }
  }
}

TEST_CASE("energy and temperature equations") {
  SUBCASE("equilibrium is constant") {
    const ChainConfig c = cfg_of(1.0, 0.0, 1.3);
    const FieldPath r = solve_stretch([](double) { return 0.0; }, c, grid_of(32, 1e-2), 0.5);
    const FieldPath e = solve_energy([](double) { return 1.3; }, r, c, 0.0);
    const FieldPath T = solve_temperature([](double) { return 1.3; }, r, c, 0.0);
    for (std::size_t k = 0; k < e.v.size(); ++k) {
      CHECK((e.v[k].array() - 1.3).abs().maxCoeff() < 1e-13);
      CHECK((T.v[k].array() - 1.3).abs().maxCoeff() < 1e-13);
    }
    for (const auto& row : energy_balance_audit(e, r, c, 0.0)) CHECK(std::abs(row.residual) < 1e-14);
  }
  SUBCASE("steady profiles") {
    const ChainConfig c = cfg_of(0.8, 0.6);
    const double wq = 0.05;
    // T'' = -2F^2 on (0,1), T(0) = T_-, T'(1) = 4 gamma W^Q.
    auto t_inf = [&](double u) {
      const double f2 = c.f_bar * c.f_bar;
      return c.t_minus + (4.0 * c.gamma * wq + 2.0 * f2) * u - f2 * u * u;
    };
    for (double u : {0.0, 0.3, 1.0}) CHECK(steady_temperature(c, wq, u) == doctest::Approx(t_inf(u)));
    const Profile r_lin = [&](double u) { return c.f_bar * u; };
    const FieldPath r = solve_stretch(r_lin, c, grid_of(32, 1e-2), 1.0);
    const FieldPath T = solve_temperature(t_inf, r, c, wq);
    const FieldPath e = solve_energy([&](double u) { return t_inf(u) + 0.5 * r_lin(u) * r_lin(u); }, r, c, wq);
    const Eigen::VectorXd tn = sample_nodes(t_inf, 32);
    CHECK((T.v.back() - tn).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((e.v.back() - tn - 0.5 * Eigen::VectorXd(r.v.back().array().square())).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("long-time convergence and positivity") {
    const ChainConfig c = cfg_of(1.0, 0.7);
    const double wq = 0.1;
    const FieldPath r = solve_stretch([](double) { return 0.0; }, c, grid_of(32, 5e-3), 14.0);
    const FieldPath T = solve_temperature([](double) { return 1.0; }, r, c, wq);
    const Eigen::VectorXd tn = sample_nodes([&](double u) { return steady_temperature(c, wq, u); }, 32);
    double prev = 1e300;
    for (std::size_t k = 0; k < T.v.size(); ++k) {
      CHECK(T.v[k].minCoeff() >= 1.0 - 1e-10);
      if (T.t[k] >= 1.0 && k % 20 == 0) {
        const double d = l2_nodes(T.v[k], tn, 1.0 / 32);
        CHECK(d < prev);
        prev = d;
      }
    }
    CHECK(prev < 1e-3);
  }
}

TEST_CASE("cross-solver identity") {
  const ChainConfig c = cfg_of(1.0, 0.8);
  const double wq = 0.07;
  const Profile r0 = [](double u) { return 0.8 * u * u; };
  const Profile t0 = [](double u) { return 1.0 + 0.5 * u; };
  const FieldPath r = solve_stretch(r0, c, grid_of(512, 1e-4), 0.1);
  const FieldPath T = solve_temperature(t0, r, c, wq);
  const FieldPath e = solve_energy([&](double u) { return t0(u) + 0.5 * r0(u) * r0(u); }, r, c, wq);
  double worst = 0.0;
  for (std::size_t k = 0; k < r.v.size(); ++k) {
    const Eigen::VectorXd d = e.v[k] - 0.5 * Eigen::VectorXd(r.v[k].array().square()) - T.v[k];
    worst = std::max(worst, d.cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("energy balance audit") {
  const ChainConfig c = cfg_of(1.0, 1.0);
  const double wq = 0.2;
  const Profile r0 = [](double u) { return u * u; };
  const Profile t0 = [](double u) { return 1.0 + u; };
  auto audit = [&](int m) {
    const FieldPath r = solve_stretch(r0, c, grid_of(m, 0.4 / m), 0.2);
    const FieldPath e = solve_energy([&](double u) { return t0(u) + 0.5 * r0(u) * r0(u); }, r, c, wq);
    const FieldPath T = solve_temperature(t0, r, c, wq);
    return std::pair{energy_balance_audit(e, r, c, wq).back(), energy_balance_audit(e, r, c, wq, &T).back()};
  };
  const auto [a, at] = audit(32);
  const auto [b, bt] = audit(64);
  CHECK(std::abs(a.residual) < 1e-3);
  const double ratio = std::abs(a.residual) / std::abs(b.residual);
  CHECK(ratio > 3.6);
  CHECK(ratio < 4.4);
  CHECK(std::abs(b.j1 + b.w_energy_form) < std::abs(a.j1 + a.w_energy_form));
  CHECK(std::abs(b.w_energy_form - b.w_temp_form) < 0.5 * std::abs(a.w_energy_form - a.w_temp_form));
  const double d32 = std::abs(at.w_energy_form - at.w_temp_form);
  const double d64 = std::abs(bt.w_energy_form - bt.w_temp_form);
  CHECK(d64 < 1e-3);
  CHECK(d64 < d32);
  std::ostringstream os;
  const FieldPath r = solve_stretch(r0, c, grid_of(4, 0.1), 0.2);
  write_fields_csv(os, r, r, r, {0.0, 0.2});
  CHECK(os.str().rfind("t,u,r,e,T\n", 0) == 0);
  const std::string csv = os.str();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 5);
}
