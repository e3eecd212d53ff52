#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "hydro/mean_dynamics.hpp"
#include "hydro/micro_sim.hpp"

using namespace hydro;

namespace {

ChainConfig quiet(int n) {
  ChainConfig c;
  c.n = n;
  c.gamma = 1.0;
  c.t_minus = 1.0;
  c.f_bar = 0.0;
  c.theta = 3.0;
  return c;
}

SimParams params(double dt, double t_end, std::vector<double> rec, int ens, std::uint64_t seed = 1) {
  SimParams p;
  p.dt = dt;
  p.t_macro_end = t_end;
  p.record_times = std::move(rec);
  p.ensemble_size = ens;
  p.seed = seed;
  return p;
}

InitSampler gibbs(const ChainConfig& c) {
  const Eigen::VectorXd prof = Eigen::VectorXd::Constant(c.n + 1, c.t_minus);
  return [c, prof](RngStream& rng) { return sample_local_gibbs(c, prof, rng); };
}

}  // namespace

TEST_CASE("sim params validation") {
  CHECK(params(0.05, 1.0, {0.5, 1.0}, 4).validation_errors().empty());
  CHECK(!params(0.2, 1.0, {1.0}, 4).validation_errors().empty());
  CHECK(!params(0.05, 1.0, {1.5}, 4).validation_errors().empty());
  CHECK(!params(0.05, 1.0, {0.7, 0.2}, 4).validation_errors().empty());
  CHECK(!params(0.05, 1.0, {}, 4).validation_errors().empty());
}

TEST_CASE("trajectory bookkeeping") {
  ChainConfig c = quiet(5);
  RngStream rng(3, 0);
  const ChainState init = sample_local_gibbs(c, Eigen::VectorXd::Constant(6, 1.0), rng);
  auto p = params(0.05, 0.2, {0.0}, 2);
  auto tr = run_trajectory(c, init, p, 0);
  REQUIRE(tr.frames.size() == 1);
  CHECK(tr.frames[0].state.r == init.r);
  CHECK(tr.frames[0].state.p == init.p);

  p.record_times = {0.05, 0.2};
  const auto a = run_trajectory(c, init, p, 4), b = run_trajectory(c, init, p, 4);
  CHECK(a.frames[1].state.p == b.frames[1].state.p);
  CHECK(a.frames[1].state.r == b.frames[1].state.r);
  CHECK(a.frames[1].state.tau == doctest::Approx(25.0 * 0.2));
  CHECK(a.frames[1].work == 0.0);
  const auto d = run_trajectory(c, init, p, 5);
  CHECK(d.frames[1].state.p != a.frames[1].state.p);
}

TEST_CASE("flip substep") {
  ChainConfig c = quiet(4);
  c.gamma = 0.8;
  StepOptions only_flips{false, true, false};
  ChainState s = ChainState::zero(4);
  s.p << 0.3, -1.0, 2.0, 0.5, -0.25;
  s.r << 1.0, 2.0, 3.0, 4.0;
  RngStream rng(1, 1);
  ChainState cur = s;
  for (int k = 0; k < 50; ++k) {
    cur = step(c, cur, 0.05, rng, only_flips);
    CHECK(cur.p.cwiseAbs() == s.p.cwiseAbs());
    CHECK(cur.r == s.r);
    CHECK(total_energy(cur) == total_energy(s));
  }

  // Sign autocorrelation e^{-2 gamma tau}.
  ChainState one = ChainState::zero(4);
  one.p.setOnes();
  const double tau = 0.5;
  auto p = params(0.05, tau / 16.0, {tau / 16.0}, 20000, 7);
  EnsembleOptions eo;
  eo.step = only_flips;
  const auto stats = run_ensemble(c, [one](RngStream&) { return one; }, p, eo);
  for (int x = 1; x <= 4; ++x) {
    CHECK(std::abs(stats[0].mean_p(x) - std::exp(-2.0 * c.gamma * tau)) <= 4.0 * stats[0].stderr_p(x));
  }
  CHECK(stats[0].mean_p(0) == 1.0);
}

TEST_CASE("bath substep is exact in law") {
  ChainConfig c = quiet(2);
  c.gamma = 0.6;
  c.t_minus = 1.5;
  StepOptions only_bath{false, false, true};
  ChainState s = ChainState::zero(2);
  s.p(0) = 2.0;
  const double tau = 1.3;
  auto p = params(0.1, tau / 4.0, {tau / 4.0}, 40000, 11);
  EnsembleOptions eo;
  eo.step = only_bath;
  const auto st = run_ensemble(c, [s](RngStream&) { return s; }, p, eo);
  const double m = 2.0 * std::exp(-2.0 * c.gamma * tau);
  const double m2 = c.t_minus + (4.0 - c.t_minus) * std::exp(-4.0 * c.gamma * tau);
  CHECK(std::abs(st[0].mean_p(0) - m) <= 4.0 * st[0].stderr_p(0));
  CHECK(std::abs(st[0].mean_p_sq(0) - m2) <= 4.0 * st[0].stderr_p_sq(0));
}

TEST_CASE("verlet energy error is second order") {
  ChainConfig c = quiet(6);
  StepOptions ham{true, false, false};
  RngStream rng(5, 0);
  const ChainState init = sample_local_gibbs(c, Eigen::VectorXd::Constant(7, 1.0), rng);
  auto err = [&](double dt) {
    RngStream unused(0, 0);
    ChainState s = init;
    double worst = 0.0;
    const int steps = static_cast<int>(std::lround(1.0 / dt));
    for (int k = 0; k < steps; ++k) {
      s = step(c, s, dt, unused, ham);
      worst = std::max(worst, std::abs(total_energy(s) - total_energy(init)));
    }
    return worst;
  };
  const double e1 = err(0.1), e2 = err(0.05);
  CHECK(e1 < 1e-2 * total_energy(init));
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.15).scale(0));
}

TEST_CASE("equilibrium ensemble") {
  ChainConfig c = quiet(1);
  const Eigen::VectorXd prof = Eigen::VectorXd::Constant(2, 1.0);
  auto p = params(0.05, 100.0, {0.0, 50.0, 100.0}, 4000, 3);
  EnsembleOptions eo;
  eo.threads = 2;
  const auto st = run_ensemble(c, gibbs(c), p, eo);
  REQUIRE(st.size() == 3);
  for (const auto& f : st) {
    CHECK(std::abs(f.mean_p_sq(1) - 1.0) <= 4.0 * f.stderr_p_sq(1));
    CHECK(std::abs(f.mean_p_sq(0) - 1.0) <= 4.0 * f.stderr_p_sq(0));
    CHECK(std::abs(f.mean_r(0)) <= 4.0 * f.stderr_r(0));
    CHECK(std::abs(f.energy_residual) <= 4.0 * f.stderr_energy_residual + 1e-12);
    CHECK(f.negative_energy_flags == 0);
  }
}

TEST_CASE("ensemble reduction does not depend on thread count") {
  ChainConfig c = quiet(4);
  c.f_bar = 0.5;
  c.forcing_modes = {{1, {0.2, 0.1}}};
  auto p = params(0.05, 0.1, {0.05, 0.1}, 300, 9);
  EnsembleOptions e1, e3;
  e1.threads = 1;
  e3.threads = 3;
  e3.block_size = 64;
  e1.second_moments = e3.second_moments = true;
  e1.block_size = 64;
  const auto a = run_ensemble(c, gibbs(c), p, e1), b = run_ensemble(c, gibbs(c), p, e3);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].mean_r == b[k].mean_r);
    CHECK(a[k].mean_p_sq == b[k].mean_p_sq);
    CHECK(a[k].work == b[k].work);
    REQUIRE(a[k].second_moments.has_value());
    CHECK(a[k].second_moments->s_rp == b[k].second_moments->s_rp);
  }
  std::ostringstream o1, o2;
  write_ensemble_csv(o1, a);
  write_ensemble_csv(o2, b);
  CHECK(o1.str() == o2.str());
  CHECK(o1.str().rfind("time,u,mean_r,mean_p,mean_energy,mean_p_sq,stderr_r,stderr_p,stderr_energy,stderr_p_sq\n", 0) ==
        0);
}

TEST_CASE("identical deterministic trajectories have zero stderr") {
  ChainConfig c = quiet(3);
  c.f_bar = 0.3;
  ChainState s = ChainState::zero(3);
  s.p << 0.1, 0.2, -0.3, 0.4;
  EnsembleOptions eo;
  eo.step = {true, false, false};
  const auto st = run_ensemble(c, [s](RngStream&) { return s; }, params(0.05, 0.2, {0.2}, 8), eo);
  CHECK(st[0].stderr_p.cwiseAbs().maxCoeff() == 0.0);
  CHECK(st[0].stderr_work == 0.0);
}

TEST_CASE("micro means match the averaged dynamics") {
  ChainConfig c = quiet(8);
  c.f_bar = 1.0;
  c.forcing_modes = {{1, {0.3, 0.2}}};
  const double t = 0.2;
  auto p = params(0.05, t, {t}, 4000, 21);
  const auto st = run_ensemble(c, gibbs(c), p);
  const MeanState m = closed_form_mean(c, MeanState::zero(8), t);
  for (int x = 1; x <= 8; ++x) CHECK(std::abs(st[0].mean_r(x - 1) - m.r_bar(x - 1)) <= 4.0 * st[0].stderr_r(x - 1));
  for (int x = 0; x <= 8; ++x) CHECK(std::abs(st[0].mean_p(x) - m.p_bar(x)) <= 4.0 * st[0].stderr_p(x));
  // Work starts nonnegative under a positive force.
  CHECK(st[0].work >= -4.0 * st[0].stderr_work);
}

TEST_CASE("time average") {
  std::vector<Frame> fr(1001);
  for (int k = 0; k <= 1000; ++k) fr[k].t_macro = k / 1000.0;
  CHECK(time_average(fr, [](const Frame&) { return 2.5; }) == doctest::Approx(2.5));
  CHECK(time_average(fr, [](const Frame& f) { return f.t_macro; }) == doctest::Approx(0.5));
  CHECK(std::abs(time_average(fr, [](const Frame& f) { return std::sin(2.0 * std::numbers::pi * f.t_macro); })) <
        1e-3);
  std::vector<Frame> one(1);
  CHECK_THROWS(time_average(one, [](const Frame&) { return 1.0; }));
}
