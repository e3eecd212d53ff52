#include "hydro/micro_sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "hydro/numerics.hpp"

namespace hydro {

std::vector<std::string> SimParams::validation_errors() const {
  std::vector<std::string> errs;
  if (!(dt > 0)) errs.push_back("sim.dt must be > 0");
  if (dt > kMaxDt) errs.push_back("sim.dt must be <= 0.1");
  if (!(t_macro_end > 0)) errs.push_back("sim.t_macro_end must be > 0");
  if (ensemble_size < 1) errs.push_back("sim.ensemble_size must be >= 1");
  if (record_times.empty()) errs.push_back("sim.record_times must not be empty");
  for (std::size_t k = 0; k < record_times.size(); ++k) {
    if (record_times[k] < 0 || record_times[k] > t_macro_end * (1 + 1e-12)) {
      errs.push_back("sim.record_times must lie in [0, t_macro_end]");
      break;
    }
    if (k > 0 && record_times[k] < record_times[k - 1]) {
      errs.push_back("sim.record_times must be sorted");
      break;
    }
  }
  return errs;
}

namespace {

void ou_half(const ChainConfig& cfg, ChainState& s, double dt, RngStream& rng, StepTally* tally) {
  const double decay = std::exp(-cfg.gamma * dt);           // e^{-2 gamma dt/2}
  const double var = -cfg.t_minus * std::expm1(-2.0 * cfg.gamma * dt);
  const double p0 = s.p(0);
  if (tally) tally->heat += 0.5 * -std::expm1(-2.0 * cfg.gamma * dt) * (cfg.t_minus - p0 * p0);
  s.p(0) = decay * p0 + std::sqrt(var) * rng.normal();
}

void kick(ChainState& s, double h, double force) {
  const int n = s.n();
  // dp_x = (r_{x+1} - r_x) dtau, r_0 = r_{n+1} = 0.
  s.p(0) += h * s.r(0);
  for (int x = 1; x < n; ++x) s.p(x) += h * (s.r(x) - s.r(x - 1));
  s.p(n) += h * (force - s.r(n - 1));
}

void drift(ChainState& s, double h) {
  const int n = s.n();
  for (int x = 1; x <= n; ++x) s.r(x - 1) += h * (s.p(x) - s.p(x - 1));
}

}  // namespace

ChainState step(const ChainConfig& cfg, const ChainState& state, double dt, RngStream& rng,
                const StepOptions& opts, StepTally* tally) {
  ChainState s = state;
  const int n = s.n();
  if (opts.bath) ou_half(cfg, s, dt, rng, tally);
  if (opts.hamiltonian) {
    const double force = forcing_value(cfg, state.tau + 0.5 * dt);
    kick(s, 0.5 * dt, force);
    if (tally) tally->work_raw += force * s.p(n) * dt;
    drift(s, dt);
    kick(s, 0.5 * dt, force);
  }
  if (opts.flips) {
    const double q = -0.5 * std::expm1(-2.0 * cfg.gamma * dt);
    for (int x = 1; x <= n; ++x) {
      if (rng.uniform() < q) s.p(x) = -s.p(x);
    }
  }
  if (opts.bath) ou_half(cfg, s, dt, rng, tally);
  s.tau = state.tau + dt;
  return s;
}

Trajectory run_trajectory(const ChainConfig& cfg, const ChainState& init, const SimParams& params,
                          RngStream& rng, const StepOptions& opts) {
  const double n2 = static_cast<double>(cfg.n) * cfg.n;
  Trajectory traj;
  traj.frames.reserve(params.record_times.size());
  ChainState s = init;
  s.tau = 0.0;
  const double h0 = total_energy(s);
  StepTally tally;
  for (double t_rec : params.record_times) {
    const double target = n2 * t_rec;
    while (target - s.tau > 1e-12 * std::max(1.0, target)) {
      double h = std::min(params.dt, target - s.tau);
      // Merge a sliver remainder into this step rather than taking a tiny one.
      if (target - s.tau - h < 1e-9 * params.dt) h = target - s.tau;
      s = step(cfg, s, h, rng, opts, &tally);
    }
    s.tau = target;
    Frame f;
    f.t_macro = t_rec;
    f.state = s;
    f.work = tally.work_raw / cfg.n;
    f.energy_residual = total_energy(s) - h0 - tally.heat - tally.work_raw;
    traj.frames.push_back(std::move(f));
  }
  return traj;
}

Trajectory run_trajectory(const ChainConfig& cfg, const ChainState& init, const SimParams& params,
                          std::uint64_t trajectory_index, const StepOptions& opts) {
  RngStream rng(params.seed, trajectory_index);
  return run_trajectory(cfg, init, params, rng, opts);
}

namespace {

// Shifted compensated moments of one scalar across trajectories.
struct Moments {
  double shift = 0.0;
  bool primed = false;
  CompensatedSum s1, s2;
  void add(double v) {
    if (!primed) {
      shift = v;
      primed = true;
    }
    const double d = v - shift;
    s1.add(d);
    s2.add(d * d);
  }
  void finish(long count, double& mean, double& se) const {
    const double m1 = s1.value() / count;
    mean = shift + m1;
    double var = count > 1 ? (s2.value() - count * m1 * m1) / (count - 1) : 0.0;
    if (var < 0) var = 0;
    se = std::sqrt(var / count);
  }
};

struct FrameAccumulator {
  std::vector<Moments> r, p, e, psq;
  Moments work, resid;
  Eigen::VectorXd z_shift;
  Eigen::MatrixXd zz;
  Eigen::VectorXd zsum;
  bool z_primed = false;

  explicit FrameAccumulator(int n) : r(n), p(n + 1), e(n + 1), psq(n + 1) {}
};

}  // namespace

std::vector<EnsembleStats> run_ensemble(const ChainConfig& cfg, const InitSampler& sampler,
                                        const SimParams& params, const EnsembleOptions& opts) {
  auto errs = params.validation_errors();
  if (!errs.empty()) throw ValidationError(errs);
  if (params.ensemble_size < 2) throw std::invalid_argument("run_ensemble: ensemble_size must be >= 2");
  const int n = cfg.n;
  const int dim = 2 * n + 1;
  const std::size_t nf = params.record_times.size();
  std::vector<FrameAccumulator> acc(nf, FrameAccumulator(n));
  const int threads = std::max(1, opts.threads);
  const int block = std::max(1, opts.block_size);
  std::vector<Trajectory> buf;

  for (int start = 0; start < params.ensemble_size; start += block) {
    const int count = std::min(block, params.ensemble_size - start);
    buf.assign(count, Trajectory{});
    auto work = [&](int worker) {
      for (int k = worker; k < count; k += threads) {
        RngStream rng(params.seed, static_cast<std::uint64_t>(start + k));
        ChainState init = sampler(rng);
        buf[k] = run_trajectory(cfg, init, params, rng, opts.step);
      }
    };
    if (threads == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
      for (auto& th : pool) th.join();
    }
    // Reduce in ascending trajectory index.
    for (int k = 0; k < count; ++k) {
      for (std::size_t f = 0; f < nf; ++f) {
        const Frame& fr = buf[k].frames[f];
        auto& a = acc[f];
        const Eigen::VectorXd en = site_energy(fr.state);
        for (int x = 0; x < n; ++x) a.r[x].add(fr.state.r(x));
        for (int x = 0; x <= n; ++x) {
          a.p[x].add(fr.state.p(x));
          a.e[x].add(en(x));
          a.psq[x].add(fr.state.p(x) * fr.state.p(x));
        }
        a.work.add(fr.work);
        a.resid.add(fr.energy_residual);
        if (opts.second_moments) {
          Eigen::VectorXd z(dim);
          z << fr.state.r, fr.state.p;
          if (!a.z_primed) {
            a.z_shift = z;
            a.zz = Eigen::MatrixXd::Zero(dim, dim);
            a.zsum = Eigen::VectorXd::Zero(dim);
            a.z_primed = true;
          }
          const Eigen::VectorXd d = z - a.z_shift;
          a.zsum += d;
          a.zz.selfadjointView<Eigen::Lower>().rankUpdate(d);
        }
      }
    }
  }

  const long total = params.ensemble_size;
  std::vector<EnsembleStats> out(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    auto& a = acc[f];
    EnsembleStats& st = out[f];
    st.t_macro = params.record_times[f];
    st.mean_r.resize(n);
    st.stderr_r.resize(n);
    st.mean_p.resize(n + 1);
    st.stderr_p.resize(n + 1);
    st.mean_energy.resize(n + 1);
    st.stderr_energy.resize(n + 1);
    st.mean_p_sq.resize(n + 1);
    st.stderr_p_sq.resize(n + 1);
    for (int x = 0; x < n; ++x) a.r[x].finish(total, st.mean_r(x), st.stderr_r(x));
    for (int x = 0; x <= n; ++x) {
      a.p[x].finish(total, st.mean_p(x), st.stderr_p(x));
      a.e[x].finish(total, st.mean_energy(x), st.stderr_energy(x));
      a.psq[x].finish(total, st.mean_p_sq(x), st.stderr_p_sq(x));
      if (st.mean_energy(x) < -3.0 * st.stderr_energy(x)) ++st.negative_energy_flags;
    }
    a.work.finish(total, st.work, st.stderr_work);
    a.resid.finish(total, st.energy_residual, st.stderr_energy_residual);
    if (opts.second_moments) {
      Eigen::MatrixXd zz = a.zz.selfadjointView<Eigen::Lower>();
      const Eigen::VectorXd m = a.zsum / static_cast<double>(total);
      Eigen::MatrixXd cov = (zz - total * m * m.transpose()) / static_cast<double>(total - 1);
      st.second_moments = CovarianceBlocks::from_matrix(cov, n);
      st.second_moments->tau = static_cast<double>(n) * n * st.t_macro;
    }
  }
  return out;
}

double time_average(const std::vector<Frame>& frames, const std::function<double(const Frame&)>& f) {
  if (frames.size() < 2) throw std::invalid_argument("time_average: need at least 2 frames");
  std::vector<double> t, v;
  for (const auto& fr : frames) {
    t.push_back(fr.t_macro);
    v.push_back(f(fr));
  }
  return trapezoid_average(t, v);
}

void write_ensemble_csv(std::ostream& os, const std::vector<EnsembleStats>& stats) {
  os << "time,u,mean_r,mean_p,mean_energy,mean_p_sq,stderr_r,stderr_p,stderr_energy,stderr_p_sq\n";
  os.precision(17);
  for (const auto& st : stats) {
    const int n = static_cast<int>(st.mean_r.size());
    for (int x = 0; x <= n; ++x) {
      const double r = x == 0 ? 0.0 : st.mean_r(x - 1);
      const double sr = x == 0 ? 0.0 : st.stderr_r(x - 1);
      os << st.t_macro << ',' << static_cast<double>(x) / n << ',' << r << ',' << st.mean_p(x) << ','
         << st.mean_energy(x) << ',' << st.mean_p_sq(x) << ',' << sr << ',' << st.stderr_p(x) << ','
         << st.stderr_energy(x) << ',' << st.stderr_p_sq(x) << '\n';
    }
  }
}

}  // namespace hydro
