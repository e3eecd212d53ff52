#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hydro/blocks.hpp"
#include "hydro/chain_model.hpp"
#include "hydro/expression.hpp"
#include "hydro/macro_pde.hpp"
#include "hydro/micro_sim.hpp"

namespace hydro {

inline constexpr const char* kVersion = "0.1.0";

enum class InitKind { gibbs, local_gibbs, deterministic_mean, explicit_state };
enum class Study { micro, mean, covariance, pde, converge_profiles, converge_work, equipartition, wq };

struct InitSpec {
  InitKind kind = InitKind::gibbs;
  std::optional<Expression> r0;
  std::optional<Expression> temperature;
  std::optional<Expression> e0;
  std::optional<ChainState> state;  // explicit_state only

  // Mean stretch profile (0 when absent).
  double r0_at(double u) const;
  // Temperature profile; from e0 - r0^2/2 when only e0 is given, T_- when
  // neither is given.
  double temperature_at(double u, double t_minus) const;
};

struct StudyParams {
  double t = 0.1;
  std::vector<double> record_times;
  std::vector<int> sizes;
  std::optional<Expression> weight;
  double cov_dt = 0.25;
  int micro_ensemble = 0;
  double micro_dt = 0.05;
};

struct ExperimentSpec {
  ChainConfig chain;
  InitSpec init;
  std::optional<SimParams> sim;
  std::optional<GridSpec> grid;
  Study study = Study::wq;
  StudyParams params;
  std::filesystem::path output_dir;
  nlohmann::json source;  // the document as read, after overrides
};

std::string study_name(Study s);

// Every problem in the document, as "<path>: <message>" strings. base_dir
// resolves relative file references.
std::vector<std::string> spec_errors(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentSpec parse_spec(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

// FNV-1a 64 of the canonical dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

// Runs jobs 0..count-1 on at most `threads` workers. The first exception is
// rethrown after all workers stop.
void parallel_jobs(int count, int threads, const std::function<void(int)>& job);

// Product covariance of the local Gibbs state: r_x and p_x at T(x/n), p_0 at T_-.
CovarianceBlocks local_gibbs_covariance(const ChainConfig& cfg, const Profile& temperature);

struct ProfileStudyParams {
  double t = 0.1;
  Profile r0 = [](double) { return 0.0; };
  Profile temperature = [](double) { return 1.0; };
  Profile weight = [](double) { return 1.0; };
  GridSpec grid;
  double cov_dt = 0.25;
  int threads = 1;
};

struct ProfileSample {
  int n = 0;
  std::vector<double> u;
  std::vector<double> r_bar, r_pde;
  std::vector<double> energy, e_pde;    // total energy, mean + thermal
  std::vector<double> thermal, t_pde;
  std::vector<double> mech, mech_pde;   // 1/2 r_bar^2 (+ 1/2 p_bar^2) vs 1/2 r^2
};

struct ProfileRow {
  int n = 0;
  double t = 0.0;
  double err_stretch = 0.0;
  double err_energy = 0.0;
  double err_thermal = 0.0;
  double err_mech = 0.0;
};

struct ProfileStudy {
  std::vector<ProfileRow> rows;
  std::vector<ProfileSample> samples;
};

// Weighted L2 distance (1/n sum_x w(x/n) (a_x - b_x)^2)^{1/2} over x = 1..n,
// divided by the same norm of b (unless that norm vanishes).
double weighted_relative_error(const std::vector<double>& u, const std::vector<double>& a,
                               const std::vector<double>& b, const Profile& weight);

ProfileStudy converge_profiles(const ChainConfig& base, const std::vector<int>& sizes, const ProfileStudyParams& p);

struct EquipartitionRow {
  int n = 0;
  double t = 0.0;
  double weighted_gap = 0.0;       // 1/n sum_x w(x/n) |gap_x|
  double signed_gap = 0.0;         // 1/n sum_x w(x/n) gap_x
  double kinetic_flatness = 0.0;
  double position_functional = 0.0;
  double min_eigenvalue = 0.0;
};

std::vector<EquipartitionRow> equipartition_study(const ChainConfig& base, const std::vector<int>& sizes,
                                                  const ProfileStudyParams& p);

struct RunOptions {
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
};

// Runs the study and writes its outputs plus manifest.json. Returns the
// produced file names (relative to output_dir).
std::vector<std::string> run_experiment(const ExperimentSpec& spec, const RunOptions& opts = {});

// Oracle dispatcher: name and merged parameters in, reference JSON out.
using OracleHandler = std::function<nlohmann::json(const std::string&, const nlohmann::json&)>;

int cli(int argc, const char* const* argv, const OracleHandler& oracle = {});

}  // namespace hydro
