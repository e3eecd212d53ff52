#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hydro/work_limits.hpp"

using namespace hydro;

namespace {

ChainConfig single_mode(double gamma, double omega, std::complex<double> amp, int ell = 1) {
  ChainConfig c;
  c.n = 16;
  c.gamma = gamma;
  c.t_minus = 1.0;
  c.f_bar = 0.0;
  c.theta = 2.0 * std::numbers::pi / omega;
  c.forcing_modes = {{ell, amp}};
  return c;
}

// Adaptive Gauss-Kronrod on the same integral, used as a second reference.
double kronrod_wq(double gamma, double nu, double amp_sq) {
  const double pi = std::numbers::pi;
  auto f = [&](double u) {
    const double c = std::cos(0.5 * pi * u), s = std::sin(0.5 * pi * u);
    const double d = 4.0 * s * s - nu * nu;
    return c * c / (d * d + 4.0 * nu * nu * gamma * gamma);
  };
  const double i = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 30, 1e-14);
  return 8.0 * gamma * nu * nu * amp_sq * i;
}

GridSpec fine_grid() {
  GridSpec g;
  g.m = 256;
  g.dt_macro = 1e-3;
  return g;
}

}  // namespace

TEST_CASE("wq without fluctuating modes") {
  ChainConfig c = single_mode(1.0, 1.0, 1.0);
  c.forcing_modes.clear();
  CHECK(wq_closed_form(c) == 0.0);
  CHECK(wq_quadrature_oracle(c).value == 0.0);
}

TEST_CASE("wq closed form against quadrature") {
  const ChainConfig c = single_mode(1.0, 1.0, 1.0);
  const double q = wq_quadrature_oracle(c).value;
  CHECK(std::abs(wq_closed_form(c) - q) <= 1e-8);
  CHECK(std::abs(wq_closed_form(c) - kronrod_wq(1.0, 1.0, 1.0)) <= 1e-10);

  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> ug(0.2, 2.0), uw(0.3, 3.0), ua(-1.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    ChainConfig r = single_mode(ug(gen), uw(gen), {ua(gen), ua(gen)});
    r.forcing_modes.push_back({2, {ua(gen), ua(gen)}});
    const auto res = wq_quadrature_oracle(r);
    CHECK(res.converged);
    CHECK(std::abs(wq_closed_form(r) - res.value) <= 1e-8);
  }
}

TEST_CASE("quadrature near resonance is stable under refinement") {
  const ChainConfig c = single_mode(0.5, 2.0, 1.0);
  const double a = wq_quadrature_oracle(c, 64).value;
  const double b = wq_quadrature_oracle(c, 128).value;
  CHECK(std::isfinite(a));
  CHECK(std::abs(a - b) <= 1e-8);
  CHECK(std::abs(a - wq_closed_form(c)) <= 1e-8);
}

TEST_CASE("small gamma limit") {
  ChainConfig c = single_mode(1e-3, 0.7, {0.6, 0.2});
  c.forcing_modes.push_back({2, {0.3, -0.1}});
  c.forcing_modes.push_back({3, {0.5, 0.0}});  // 3 * 0.7 > 2: no contribution in the limit
  double limit = 0.0;
  for (const auto& m : c.forcing_modes) {
    const double nu = m.ell * c.omega();
    if (nu < 2) limit += std::norm(m.amplitude) * std::sqrt(4.0 - nu * nu);
  }
  CHECK(std::abs(wq_closed_form(c) - limit) <= 1e-2);
}

TEST_CASE("branch and scaling") {
  for (double g : {1e-3, 0.1, 1.0, 10.0})
    for (double nu = 0.05; nu < 8.0; nu += 0.05) CHECK(wq_summand(g, nu, 1.0) >= 0.0);
  ChainConfig c = single_mode(0.8, 1.3, {0.4, -0.7});
  c.forcing_modes.push_back({3, {0.1, 0.2}});
  const double base = wq_closed_form(c);
  for (auto& m : c.forcing_modes) m.amplitude *= 3.0;
  CHECK(wq_closed_form(c) == doctest::Approx(9.0 * base).epsilon(1e-14));
}

TEST_CASE("macroscopic work") {
  ChainConfig c = single_mode(1.0, 1.0, 0.5);
  SUBCASE("no forcing") {
    c.forcing_modes.clear();
    const FieldPath r = solve_stretch([](double) { return 0.0; }, c, fine_grid(), 0.5);
    CHECK(macroscopic_work(r, c, 0.0, 0.5) == 0.0);
  }
  SUBCASE("steady state") {
    c.f_bar = 0.7;
    const double wq = wq_closed_form(c);
    const FieldPath r = solve_stretch([&](double u) { return c.f_bar * u; }, c, fine_grid(), 0.5);
    for (double t : {0.1, 0.25, 0.5}) {
      CHECK(macroscopic_work(r, c, wq, t) ==
            doctest::Approx((c.f_bar * c.f_bar / (2 * c.gamma) + wq) * t).epsilon(1e-10));
    }
  }
  SUBCASE("start from rest approaches the steady slope from above") {
    c.f_bar = 1.0;
    const double wq = wq_closed_form(c);
    const double slope = 1.0 / (2 * c.gamma) + wq;
    const FieldPath r = solve_stretch([](double) { return 0.0; }, c, fine_grid(), 4.0);
    double prev = 1e300;
    for (double t = 0.25; t <= 4.0; t += 0.25) {
      const double rate = macroscopic_work(r, c, wq, t) / t;
      CHECK(rate < prev);
      CHECK(rate > slope);
      prev = rate;
    }
  }
  SUBCASE("flat start at the right end approaches from below") {
    c.f_bar = 1.0;
    const double wq = wq_closed_form(c);
    const double slope = 1.0 / (2 * c.gamma) + wq;
    const FieldPath r = solve_stretch([](double u) { return std::sin(0.5 * std::numbers::pi * u); }, c,
                                      fine_grid(), 4.0);
    double prev = -1.0;
    for (double t = 0.25; t <= 4.0; t += 0.25) {
      const double rate = macroscopic_work(r, c, wq, t) / t;
      CHECK(rate > prev);
      CHECK(rate < slope);
      prev = rate;
    }
    CHECK(prev == doctest::Approx(slope).epsilon(0.05));
  }
  SUBCASE("coarse path rejected") {
    GridSpec g = fine_grid();
    g.m = 1;
    CHECK_THROWS(macroscopic_work(solve_stretch([](double) { return 0.0; }, c, g, 0.1), c, 0.0, 0.1));
  }
}

TEST_CASE("work convergence study") {
  ChainConfig c;
  c.gamma = 1.0;
  c.theta = 1.0;
  WorkStudyParams p;
  p.t = 0.2;
  p.grid = fine_grid();
  SUBCASE("no forcing") {
    for (const auto& row : work_convergence_study(c, {8, 16}, p)) {
      CHECK(row.w_n == 0.0);
      CHECK(row.w == 0.0);
    }
  }
  SUBCASE("errors decrease with n") {
    c.f_bar = 1.0;
    c.forcing_modes = {{1, {0.5, 0.2}}};
    p.r0 = [](double u) { return u * u; };
    const auto rows = work_convergence_study(c, {16, 32, 64, 128}, p);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].abs_error < rows[i - 1].abs_error);
    CHECK(rows.back().abs_error < 0.05 * std::abs(rows.back().w));
    std::ostringstream os;
    write_work_csv(os, rows);
    CHECK(os.str().rfind("n,t,W_n,W,abs_error,micro_W_n,micro_stderr\n", 0) == 0);
  }
  SUBCASE("mechanical only") {
    c.f_bar = 0.8;
    p.r0 = [](double u) { return 0.8 * u * u; };
    const auto rows = work_convergence_study(c, {32, 128}, p);
    const FieldPath r = solve_stretch(p.r0, c, p.grid, p.t);
    const double mech = macroscopic_work(r, c, 0.0, p.t);
    CHECK(rows[0].w == doctest::Approx(mech));
    CHECK(std::abs(rows[1].w_n - mech) < 0.5 * std::abs(rows[0].w_n - mech));
  }
}
