#include "hydro/chain_model.hpp"

#include <cmath>
#include <numbers>
#include <set>

namespace hydro {

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out = "validation failed";
  for (const auto& e : errors) out += "; " + e;
  return out;
}

ChainConfig parse_unchecked(const nlohmann::json& j) {
  ChainConfig cfg;
  cfg.n = j["n"].get<int>();
  cfg.gamma = j["gamma"].get<double>();
  cfg.t_minus = j["t_minus"].get<double>();
  cfg.f_bar = j["f_bar"].get<double>();
  cfg.theta = j["theta"].get<double>();
  for (const auto& m : j["forcing_modes"]) {
    cfg.forcing_modes.push_back({m["ell"].get<int>(), {m["re"].get<double>(), m["im"].get<double>()}});
  }
  return cfg;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> errors)
    : std::invalid_argument(join_errors(errors)), errors_(std::move(errors)) {}

double ChainConfig::omega() const { return 2.0 * std::numbers::pi / theta; }

double ChainConfig::forcing_l1() const {
  double s = 0.0;
  for (const auto& m : forcing_modes) s += 2.0 * std::abs(m.amplitude);
  return s;
}

std::vector<std::string> ChainConfig::validation_errors() const {
  std::vector<std::string> errs;
  if (n < 1) errs.push_back("chain.n must be >= 1");
  if (!(gamma > 0) || !std::isfinite(gamma)) errs.push_back("chain.gamma must be > 0");
  if (!(t_minus > 0) || !std::isfinite(t_minus)) errs.push_back("chain.t_minus must be > 0");
  if (!std::isfinite(f_bar)) errs.push_back("chain.f_bar must be finite");
  if (!(theta > 0) || !std::isfinite(theta)) errs.push_back("chain.theta must be > 0");
  std::set<int> seen;
  for (const auto& m : forcing_modes) {
    if (m.ell < 1) errs.push_back("chain.forcing_modes: ell must be >= 1");
    if (!seen.insert(m.ell).second) {
      errs.push_back("chain.forcing_modes: duplicate ell " + std::to_string(m.ell));
    }
    if (!std::isfinite(m.amplitude.real()) || !std::isfinite(m.amplitude.imag())) {
      errs.push_back("chain.forcing_modes: non-finite amplitude");
    }
  }
  return errs;
}

void ChainConfig::validate() const {
  auto errs = validation_errors();
  if (!errs.empty()) throw ValidationError(std::move(errs));
}

std::vector<std::string> chain_config_errors(const nlohmann::json& j) {
  std::vector<std::string> errs;
  std::vector<std::string> unknown;  // reported, but range checks still run
  if (!j.is_object()) return {"chain: expected an object"};
  static const std::set<std::string> keys = {"n", "gamma", "t_minus", "f_bar",
                                             "theta", "forcing_modes"};
  for (const auto& [k, v] : j.items()) {
    if (!keys.count(k)) unknown.push_back("chain: unknown key '" + k + "'");
  }
  for (const auto& k : keys) {
    if (!j.contains(k)) errs.push_back("chain: missing key '" + k + "'");
  }
  if (j.contains("n") && !j["n"].is_number_integer()) {
    errs.push_back("chain.n must be an integer");
  }
  for (const char* k : {"gamma", "t_minus", "f_bar", "theta"}) {
    if (j.contains(k) && !j[k].is_number()) {
      errs.push_back(std::string("chain.") + k + " must be a number");
    }
  }
  if (j.contains("forcing_modes")) {
    const auto& fm = j["forcing_modes"];
    if (!fm.is_array()) {
      errs.push_back("chain.forcing_modes must be an array");
    } else {
      static const std::set<std::string> mkeys = {"ell", "re", "im"};
      for (const auto& m : fm) {
        if (!m.is_object()) {
          errs.push_back("chain.forcing_modes: entries must be objects");
          continue;
        }
        for (const auto& [k, v] : m.items()) {
          if (!mkeys.count(k)) unknown.push_back("chain.forcing_modes: unknown key '" + k + "'");
        }
        if (!m.contains("ell") || !m["ell"].is_number_integer()) {
          errs.push_back("chain.forcing_modes: 'ell' must be an integer");
        }
        for (const char* k : {"re", "im"}) {
          if (!m.contains(k) || !m[k].is_number()) {
            errs.push_back(std::string("chain.forcing_modes: '") + k + "' must be a number");
          }
        }
      }
    }
  }
  if (errs.empty()) errs = parse_unchecked(j).validation_errors();
  unknown.insert(unknown.end(), errs.begin(), errs.end());
  return unknown;
}

ChainConfig chain_config_from_json(const nlohmann::json& j) {
  auto errs = chain_config_errors(j);
  if (!errs.empty()) throw ValidationError(std::move(errs));
  return parse_unchecked(j);
}

nlohmann::json to_json(const ChainConfig& cfg) {
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& m : cfg.forcing_modes) {
    modes.push_back({{"ell", m.ell}, {"re", m.amplitude.real()}, {"im", m.amplitude.imag()}});
  }
  return {{"n", cfg.n},         {"gamma", cfg.gamma}, {"t_minus", cfg.t_minus},
          {"f_bar", cfg.f_bar}, {"theta", cfg.theta}, {"forcing_modes", modes}};
}

ChainState ChainState::zero(int n) {
  ChainState s;
  s.r = Eigen::VectorXd::Zero(n);
  s.p = Eigen::VectorXd::Zero(n + 1);
  return s;
}

double forcing_value(const ChainConfig& cfg, double tau) {
  if (cfg.forcing_modes.empty()) return cfg.f_bar;
  const double w = cfg.omega();
  double fl = 0.0;
  for (const auto& m : cfg.forcing_modes) {
    // Reduce the phase modulo 2*pi before the trig call so the period is
    // exact up to rounding of the phase itself.
    const double phase = std::remainder(m.ell * w * tau, 2.0 * std::numbers::pi);
    fl += 2.0 * (m.amplitude.real() * std::cos(phase) - m.amplitude.imag() * std::sin(phase));
  }
  return cfg.f_bar + fl / std::sqrt(static_cast<double>(cfg.n));
}

Eigen::VectorXd site_energy(const ChainState& state) {
  const int n = state.n();
  Eigen::VectorXd e(n + 1);
  e(0) = 0.5 * state.p(0) * state.p(0);
  for (int x = 1; x <= n; ++x) {
    e(x) = 0.5 * (state.p(x) * state.p(x) + state.r(x - 1) * state.r(x - 1));
  }
  return e;
}

double total_energy(const ChainState& state) {
  return 0.5 * (state.p.squaredNorm() + state.r.squaredNorm());
}

Eigen::VectorXd currents(const ChainConfig& cfg, const ChainState& state, double tau) {
  const int n = state.n();
  Eigen::VectorXd j(n + 2);
  j(0) = 2.0 * cfg.gamma * (cfg.t_minus - state.p(0) * state.p(0));
  for (int x = 0; x < n; ++x) j(x + 1) = -state.p(x) * state.r(x);  // r_{x+1} at r(x)
  j(n + 1) = -forcing_value(cfg, tau) * state.p(n);
  return j;
}

FdObservables fd_observables(const ChainConfig& cfg, const ChainState& state, double r_right) {
  const int n = state.n();
  const double g = cfg.gamma;
  auto r = [&](int x) {
    if (x <= 0) return 0.0;
    if (x > n) return r_right;
    return state.r(x - 1);
  };
  auto p = [&](int x) { return state.p(x < 0 ? 0 : x); };
  FdObservables out;
  out.u_e.resize(n + 1);
  for (int x = 0; x <= n; ++x) {
    const double ex = 0.5 * (p(x) * p(x) + r(x) * r(x));
    out.u_e(x) = ex + 0.5 * (r(x) * r(x + 1) + p(x - 1) * p(x)) + g * p(x) * r(x);
  }
  out.v_e.resize(n);
  for (int x = 0; x < n; ++x) {
    out.v_e(x) = (2.0 * r(x + 1) * p(x) + p(x + 1) * r(x + 1) + p(x) * r(x)) / (8.0 * g) +
                 0.25 * r(x + 1) * r(x + 1);
  }
  return out;
}

ObservableFrame observe(const ChainConfig& cfg, const ChainState& state) {
  ObservableFrame f;
  f.site_energy = site_energy(state);
  f.currents = currents(cfg, state, state.tau);
  auto fd = fd_observables(cfg, state, forcing_value(cfg, state.tau));
  f.u_e = std::move(fd.u_e);
  f.v_e = std::move(fd.v_e);
  return f;
}

ChainState sample_local_gibbs(const ChainConfig& cfg, const Eigen::VectorXd& temperature_profile,
                              RngStream& rng) {
  return sample_local_gibbs(cfg, temperature_profile, Eigen::VectorXd::Zero(cfg.n), rng);
}

ChainState sample_local_gibbs(const ChainConfig& cfg, const Eigen::VectorXd& temperature_profile,
                              const Eigen::VectorXd& mean_r, RngStream& rng) {
  const int n = cfg.n;
  if (temperature_profile.size() != n + 1) {
    throw std::invalid_argument("sample_local_gibbs: profile must have n+1 entries");
  }
  if (mean_r.size() != n) throw std::invalid_argument("sample_local_gibbs: mean_r must have n entries");
  for (int x = 1; x <= n; ++x) {
    if (!(temperature_profile(x) > 0)) {
      throw std::invalid_argument("sample_local_gibbs: temperature must be positive at x=" +
                                  std::to_string(x));
    }
  }
  ChainState s = ChainState::zero(n);
  s.p(0) = std::sqrt(cfg.t_minus) * rng.normal();
  for (int x = 1; x <= n; ++x) {
    const double sd = std::sqrt(temperature_profile(x));
    s.r(x - 1) = mean_r(x - 1) + sd * rng.normal();
    s.p(x) = sd * rng.normal();
  }
  return s;
}

}  // namespace hydro
