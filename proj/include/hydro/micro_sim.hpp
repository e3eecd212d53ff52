#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "hydro/blocks.hpp"
#include "hydro/chain_model.hpp"

namespace hydro {

struct SimParams {
  double dt = 0.01;
  double t_macro_end = 0.0;
  std::vector<double> record_times;
  int ensemble_size = 2;
  std::uint64_t seed = 0;

  static constexpr double kMaxDt = 0.1;
  std::vector<std::string> validation_errors() const;
};

// Test hooks: any substep can be switched off.
struct StepOptions {
  bool hamiltonian = true;
  bool flips = true;
  bool bath = true;
};

// Running integrals carried alongside a trajectory.
struct StepTally {
  double work_raw = 0.0;  // sum of F(tau_mid) p_n^{mid} h
  double heat = 0.0;      // conditional mean energy injected by the bath
};

// One Strang step OU(h/2) / Verlet(h) / flips(h) / OU(h/2). Draw order:
// one normal, n uniforms (x = 1..n), one normal.
ChainState step(const ChainConfig& cfg, const ChainState& state, double dt, RngStream& rng,
                const StepOptions& opts = {}, StepTally* tally = nullptr);

struct Frame {
  double t_macro = 0.0;
  ChainState state;
  double work = 0.0;             // W_n(t) = work_raw / n
  double energy_residual = 0.0;  // H(tau) - H(0) - heat - work_raw
};

struct Trajectory {
  std::vector<Frame> frames;
};

// Integrates from init (assumed at tau = 0) and records at tau = n^2 t for
// each record time. The stream (seed, trajectory_index) is used as is.
Trajectory run_trajectory(const ChainConfig& cfg, const ChainState& init, const SimParams& params,
                          std::uint64_t trajectory_index, const StepOptions& opts = {});
Trajectory run_trajectory(const ChainConfig& cfg, const ChainState& init, const SimParams& params,
                          RngStream& rng, const StepOptions& opts = {});

struct EnsembleStats {
  double t_macro = 0.0;
  Eigen::VectorXd mean_r, mean_p, mean_energy, mean_p_sq;
  Eigen::VectorXd stderr_r, stderr_p, stderr_energy, stderr_p_sq;
  double work = 0.0, stderr_work = 0.0;
  double energy_residual = 0.0, stderr_energy_residual = 0.0;
  std::optional<CovarianceBlocks> second_moments;
  int negative_energy_flags = 0;  // sites with mean_energy < -3 stderr
};

// Draws the initial state from the trajectory's own stream.
using InitSampler = std::function<ChainState(RngStream&)>;

struct EnsembleOptions {
  int threads = 1;
  bool second_moments = false;
  StepOptions step;
  int block_size = 256;
};

std::vector<EnsembleStats> run_ensemble(const ChainConfig& cfg, const InitSampler& sampler,
                                        const SimParams& params, const EnsembleOptions& opts = {});

// Trapezoidal (1/t) integral over macroscopic frame times.
double time_average(const std::vector<Frame>& frames,
                    const std::function<double(const Frame&)>& f);

void write_ensemble_csv(std::ostream& os, const std::vector<EnsembleStats>& stats);

}  // namespace hydro
