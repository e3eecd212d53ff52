#include "hydro/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "hydro/covariance.hpp"
#include "hydro/mean_dynamics.hpp"
#include "hydro/spectral.hpp"
#include "hydro/work_limits.hpp"

namespace hydro {

using nlohmann::json;
namespace fs = std::filesystem;

double InitSpec::r0_at(double u) const { return r0 ? (*r0)(u) : 0.0; }

double InitSpec::temperature_at(double u, double t_minus) const {
  if (temperature) return (*temperature)(u);
  if (e0) {
    const double r = r0_at(u);
    return (*e0)(u) - 0.5 * r * r;
  }
  return t_minus;
}

namespace {

const std::vector<std::pair<Study, std::string>> kStudies = {
    {Study::micro, "micro"},
    {Study::mean, "mean"},
    {Study::covariance, "covariance"},
    {Study::pde, "pde"},
    {Study::converge_profiles, "converge_profiles"},
    {Study::converge_work, "converge_work"},
    {Study::equipartition, "equipartition"},
    {Study::wq, "wq"},
};

const std::vector<std::pair<InitKind, std::string>> kInitKinds = {
    {InitKind::gibbs, "gibbs"},
    {InitKind::local_gibbs, "local_gibbs"},
    {InitKind::deterministic_mean, "deterministic_mean"},
    {InitKind::explicit_state, "explicit"},
};

// Collects errors while reading one JSON object.
class Reader {
 public:
  Reader(const json& obj, std::string path, std::vector<std::string>& errors, std::vector<std::string> allowed)
      : obj_(obj), path_(std::move(path)), errors_(errors) {
    if (!obj_.is_object()) {
      fail("", "must be an object");
      ok_ = false;
      return;
    }
    for (const auto& [k, v] : obj_.items()) {
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) fail(k, "unknown key");
    }
  }

  bool ok() const { return ok_; }
  bool has(const std::string& k) const { return ok_ && obj_.contains(k); }

  void fail(const std::string& key, const std::string& msg) {
    errors_.push_back((key.empty() ? path_ : path_ + "." + key) + ": " + msg);
  }

  std::optional<double> number(const std::string& k, bool required) {
    if (!has(k)) {
      if (required && ok_) fail(k, "missing");
      return std::nullopt;
    }
    const json& v = obj_.at(k);
    if (!v.is_number()) {
      fail(k, "must be a number");
      return std::nullopt;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
      fail(k, "must be finite");
      return std::nullopt;
    }
    return d;
  }

  std::optional<long long> integer(const std::string& k, bool required) {
    if (!has(k)) {
      if (required && ok_) fail(k, "missing");
      return std::nullopt;
    }
    const json& v = obj_.at(k);
    if (!v.is_number_integer()) {
      fail(k, "must be an integer");
      return std::nullopt;
    }
    return v.get<long long>();
  }

  std::optional<std::string> string(const std::string& k, bool required) {
    if (!has(k)) {
      if (required && ok_) fail(k, "missing");
      return std::nullopt;
    }
    const json& v = obj_.at(k);
    if (!v.is_string()) {
      fail(k, "must be a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  std::optional<bool> boolean(const std::string& k) {
    if (!has(k)) return std::nullopt;
    const json& v = obj_.at(k);
    if (!v.is_boolean()) {
      fail(k, "must be a boolean");
      return std::nullopt;
    }
    return v.get<bool>();
  }

  std::optional<std::vector<double>> numbers(const std::string& k, bool required) {
    if (!has(k)) {
      if (required && ok_) fail(k, "missing");
      return std::nullopt;
    }
    const json& v = obj_.at(k);
    if (!v.is_array()) {
      fail(k, "must be an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) {
        fail(k, "must be an array of numbers");
        return std::nullopt;
      }
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::optional<Expression> expression(const std::string& k, bool required) {
    auto s = string(k, required);
    if (!s) return std::nullopt;
    try {
      return Expression::parse(*s);
    } catch (const ExpressionError& e) {
      fail(k, e.what());
      return std::nullopt;
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string>& errors_;
  bool ok_ = true;
};

template <class E>
std::optional<E> lookup(const std::vector<std::pair<E, std::string>>& table, const std::string& name) {
  for (const auto& [e, s] : table) {
    if (s == name) return e;
  }
  return std::nullopt;
}

std::optional<SimParams> read_sim(const json& j, std::vector<std::string>& errors) {
  const std::size_t before = errors.size();
  Reader rd(j, "sim", errors, {"dt", "t_end", "record_times", "ensemble_size", "seed"});
  if (!rd.ok()) return std::nullopt;
  SimParams sp;
  if (auto v = rd.number("dt", true)) sp.dt = *v;
  if (auto v = rd.number("t_end", true)) sp.t_macro_end = *v;
  if (auto v = rd.numbers("record_times", false)) sp.record_times = *v;
  if (sp.record_times.empty()) sp.record_times = {sp.t_macro_end};
  if (auto v = rd.integer("ensemble_size", true)) sp.ensemble_size = static_cast<int>(*v);
  if (auto v = rd.integer("seed", false)) {
    if (*v < 0) {
      rd.fail("seed", "must be non-negative");
    } else {
      sp.seed = static_cast<std::uint64_t>(*v);
    }
  }
  if (errors.size() != before) return std::nullopt;
  for (const auto& e : sp.validation_errors()) errors.push_back(e);
  return sp;
}

std::optional<GridSpec> read_grid(const json& j, double gamma, std::vector<std::string>& errors) {
  const std::size_t before = errors.size();
  Reader rd(j, "grid", errors, {"m", "dt", "scheme", "rannacher_startup"});
  if (!rd.ok()) return std::nullopt;
  GridSpec g;
  if (auto v = rd.integer("m", true)) g.m = static_cast<int>(*v);
  if (auto v = rd.number("dt", true)) g.dt_macro = *v;
  if (auto v = rd.string("scheme", false)) {
    if (*v == "crank_nicolson") {
      g.scheme = Scheme::crank_nicolson;
    } else if (*v == "explicit_euler") {
      g.scheme = Scheme::explicit_euler;
    } else {
      rd.fail("scheme", "must be \"crank_nicolson\" or \"explicit_euler\"");
    }
  }
  if (auto v = rd.boolean("rannacher_startup")) g.rannacher_startup = *v;
  if (errors.size() != before) return std::nullopt;
  if (gamma > 0) {
    for (const auto& e : g.validation_errors(gamma)) errors.push_back("grid: " + e);
  }
  return g;
}

std::optional<ChainState> read_state_arrays(Reader& rd, int n) {
  auto r = rd.numbers("r", true);
  auto p = rd.numbers("p", true);
  if (!r || !p) return std::nullopt;
  if (n < 1) return std::nullopt;  // sizes unknown until the chain is valid
  if (static_cast<int>(r->size()) != n) {
    rd.fail("r", "needs " + std::to_string(n) + " entries (r_1..r_n)");
    return std::nullopt;
  }
  if (static_cast<int>(p->size()) != n + 1) {
    rd.fail("p", "needs " + std::to_string(n + 1) + " entries (p_0..p_n)");
    return std::nullopt;
  }
  ChainState s = ChainState::zero(n);
  for (int i = 0; i < n; ++i) s.r(i) = (*r)[i];
  for (int i = 0; i <= n; ++i) s.p(i) = (*p)[i];
  return s;
}

std::optional<InitSpec> read_init(const json& j, int n, const fs::path& base_dir, std::vector<std::string>& errors) {
  const std::size_t before = errors.size();
  Reader rd(j, "init", errors, {"kind", "r0", "temperature", "e0", "r", "p", "file"});
  if (!rd.ok()) return std::nullopt;
  InitSpec init;
  auto kind_name = rd.string("kind", true);
  if (!kind_name) return std::nullopt;
  auto kind = lookup(kInitKinds, *kind_name);
  if (!kind) {
    rd.fail("kind", "must be one of gibbs, local_gibbs, deterministic_mean, explicit");
    return std::nullopt;
  }
  init.kind = *kind;
  auto forbid = [&](std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
      if (rd.has(k)) rd.fail(k, "not allowed for kind " + *kind_name);
    }
  };
  switch (init.kind) {
    case InitKind::gibbs:
      forbid({"r0", "temperature", "e0", "r", "p", "file"});
      break;
    case InitKind::local_gibbs:
      forbid({"e0", "r", "p", "file"});
      init.temperature = rd.expression("temperature", true);
      init.r0 = rd.expression("r0", false);
      break;
    case InitKind::deterministic_mean:
      forbid({"r", "p", "file"});
      init.r0 = rd.expression("r0", true);
      init.temperature = rd.expression("temperature", false);
      init.e0 = rd.expression("e0", false);
      if (init.temperature && init.e0) rd.fail("e0", "give temperature or e0, not both");
      break;
    case InitKind::explicit_state:
      forbid({"r0", "temperature", "e0"});
      if (rd.has("file")) {
        if (rd.has("r") || rd.has("p")) rd.fail("file", "give file or inline r/p arrays, not both");
        auto f = rd.string("file", true);
        if (f) {
          fs::path path = fs::path(*f).is_absolute() ? fs::path(*f) : base_dir / *f;
          std::ifstream in(path);
          if (!in) {
            rd.fail("file", "referenced file does not exist: " + path.string());
          } else {
            json doc = json::parse(in, nullptr, false);
            if (doc.is_discarded()) {
              rd.fail("file", "not valid JSON: " + path.string());
            } else {
              Reader frd(doc, "init.file", errors, {"r", "p"});
              if (frd.ok()) init.state = read_state_arrays(frd, n);
            }
          }
        }
      } else {
        init.state = read_state_arrays(rd, n);
      }
      break;
  }
  if (errors.size() != before) return std::nullopt;
  return init;
}

StudyParams read_params(const json& j, std::vector<std::string>& errors) {
  StudyParams sp;
  Reader rd(j, "study_params", errors,
            {"t", "record_times", "sizes", "weight", "cov_dt", "micro_ensemble", "micro_dt"});
  if (!rd.ok()) return sp;
  if (auto v = rd.number("t", false)) {
    if (*v <= 0) rd.fail("t", "must be positive");
    sp.t = *v;
  }
  if (auto v = rd.numbers("record_times", false)) {
    sp.record_times = *v;
    for (double r : *v) {
      if (r < 0 || r > sp.t) {
        rd.fail("record_times", "entries must lie in [0, t]");
        break;
      }
    }
  }
  if (rd.has("sizes")) {
    const json& v = j.at("sizes");
    bool good = v.is_array() && !v.empty();
    if (good) {
      for (const auto& e : v) {
        if (!e.is_number_integer() || e.get<long long>() < 1 || e.get<long long>() > 100000) {
          good = false;
          break;
        }
        sp.sizes.push_back(static_cast<int>(e.get<long long>()));
      }
    }
    if (!good) rd.fail("sizes", "must be a non-empty array of integers in [1, 100000]");
  }
  sp.weight = rd.expression("weight", false);
  if (auto v = rd.number("cov_dt", false)) {
    if (*v <= 0 || *v > 1.0) rd.fail("cov_dt", "must lie in (0, 1]");
    sp.cov_dt = *v;
  }
  if (auto v = rd.integer("micro_ensemble", false)) {
    if (*v < 0 || *v == 1) rd.fail("micro_ensemble", "must be 0 or at least 2");
    sp.micro_ensemble = static_cast<int>(*v);
  }
  if (auto v = rd.number("micro_dt", false)) {
    if (*v <= 0 || *v > SimParams::kMaxDt) rd.fail("micro_dt", "must lie in (0, 0.1]");
    sp.micro_dt = *v;
  }
  return sp;
}

struct Parsed {
  ExperimentSpec spec;
  std::vector<std::string> errors;
};

Parsed parse_all(const json& doc, const fs::path& base_dir) {
  Parsed out;
  auto& errors = out.errors;
  auto& spec = out.spec;
  spec.source = doc;
  Reader top(doc, "spec", errors, {"chain", "init", "sim", "grid", "study", "study_params", "output_dir"});
  if (!top.ok()) return out;

  bool chain_ok = false;
  if (!doc.contains("chain")) {
    top.fail("chain", "missing");
  } else {
    auto ce = chain_config_errors(doc.at("chain"));
    errors.insert(errors.end(), ce.begin(), ce.end());
    if (ce.empty()) {
      spec.chain = chain_config_from_json(doc.at("chain"));
      chain_ok = true;
    }
  }
  const int n = chain_ok ? spec.chain.n : 0;

  std::optional<Study> study;
  if (auto s = top.string("study", true)) {
    study = lookup(kStudies, *s);
    if (!study) {
      top.fail("study",
               "must be one of micro, mean, covariance, pde, converge_profiles, converge_work, equipartition, wq");
    }
  }
  if (auto o = top.string("output_dir", true)) {
    if (o->empty()) top.fail("output_dir", "must not be empty");
    spec.output_dir = *o;
  }

  bool have_init = false;
  if (doc.contains("init")) {
    if (auto init = read_init(doc.at("init"), n, base_dir, errors)) {
      spec.init = std::move(*init);
      have_init = true;
    }
  }
  if (doc.contains("sim")) spec.sim = read_sim(doc.at("sim"), errors);
  if (doc.contains("grid")) spec.grid = read_grid(doc.at("grid"), chain_ok ? spec.chain.gamma : -1.0, errors);
  bool have_params = doc.contains("study_params");
  if (have_params) spec.params = read_params(doc.at("study_params"), errors);
  if (!study) return out;
  spec.study = *study;

  // Study-specific sections.
  auto need = [&](const char* key) {
    if (!doc.contains(key)) top.fail(key, std::string("required by study ") + study_name(*study));
  };
  auto need_param = [&](const char* key) {
    if (!have_params || !doc.at("study_params").is_object() || !doc.at("study_params").contains(key)) {
      errors.push_back(std::string("study_params.") + key + ": required by study " + study_name(*study));
    }
  };
  auto no_explicit = [&]() {
    if (have_init && spec.init.kind == InitKind::explicit_state) {
      errors.push_back("init.kind: explicit states are not profiles; study " + study_name(*study) +
                       " needs gibbs, local_gibbs or deterministic_mean");
    }
  };
  switch (*study) {
    case Study::micro:
      need("init");
      need("sim");
      break;
    case Study::mean:
    case Study::covariance:
      need("init");
      need_param("t");
      break;
    case Study::pde:
      need("init");
      need("grid");
      need_param("t");
      no_explicit();
      break;
    case Study::converge_profiles:
    case Study::equipartition:
      need("init");
      need_param("t");
      need_param("sizes");
      no_explicit();
      if (*study == Study::converge_profiles) need("grid");
      break;
    case Study::converge_work:
      need("grid");
      need_param("t");
      need_param("sizes");
      no_explicit();
      if (spec.params.micro_ensemble > 0 && have_init && spec.init.kind == InitKind::local_gibbs) {
        errors.push_back("study_params.micro_ensemble: the work study samples at T_-; use deterministic_mean");
      }
      break;
    case Study::wq:
      break;
  }
  // Profile sanity on a probe grid.
  if (have_init && chain_ok && spec.init.kind != InitKind::explicit_state) {
    for (int i = 0; i <= 64; ++i) {
      const double u = i / 64.0;
      const double t = spec.init.temperature_at(u, spec.chain.t_minus);
      const double r = spec.init.r0_at(u);
      if (!std::isfinite(t) || !std::isfinite(r)) {
        errors.push_back("init: profile is not finite at u = " + std::to_string(u));
        break;
      }
      if (t <= 0) {
        errors.push_back("init: temperature must be positive, got " + std::to_string(t) + " at u = " + std::to_string(u));
        break;
      }
    }
  }
  if (spec.params.weight) {
    for (int i = 0; i <= 64; ++i) {
      const double w = (*spec.params.weight)(i / 64.0);
      if (!std::isfinite(w) || w < 0) {
        errors.push_back("study_params.weight: must be finite and non-negative on [0, 1]");
        break;
      }
    }
  }
  return out;
}

std::ofstream open_out(const fs::path& dir, const std::string& name, std::vector<std::string>& files) {
  std::ofstream os(dir / name);
  if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
  files.push_back(name);
  return os;
}

void write_json(const fs::path& dir, const std::string& name, const json& j, std::vector<std::string>& files) {
  auto os = open_out(dir, name, files);
  os << j.dump(2) << '\n';
}

Profile as_profile(const std::optional<Expression>& e, double fallback) {
  if (!e) return [fallback](double) { return fallback; };
  Expression copy = *e;
  return [copy](double u) { return copy(u); };
}

MeanState mean_init(const ExperimentSpec& spec) {
  const int n = spec.chain.n;
  if (spec.init.kind == InitKind::explicit_state) {
    MeanState m = MeanState::zero(n);
    m.r_bar = spec.init.state->r;
    m.p_bar = spec.init.state->p;
    return m;
  }
  MeanState m = MeanState::zero(n);
  for (int x = 1; x <= n; ++x) m.r_bar(x - 1) = spec.init.r0_at(static_cast<double>(x) / n);
  return m;
}

CovarianceBlocks cov_init(const ExperimentSpec& spec) {
  if (spec.init.kind == InitKind::explicit_state) return CovarianceBlocks::zero(spec.chain.n);
  const InitSpec& init = spec.init;
  const double tm = spec.chain.t_minus;
  return local_gibbs_covariance(spec.chain, [&](double u) { return init.temperature_at(u, tm); });
}

std::vector<double> with_end(std::vector<double> times, double t_end) {
  times.push_back(t_end);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

json rng_info() {
  return {{"generator", RngStream::kGenerator}, {"gaussian", RngStream::kGaussianMethod}};
}

void run_micro(const ExperimentSpec& spec, int threads, const fs::path& dir, std::vector<std::string>& files) {
  const ChainConfig& cfg = spec.chain;
  const int n = cfg.n;
  const SimParams& sp = *spec.sim;
  InitSampler sampler;
  if (spec.init.kind == InitKind::explicit_state) {
    ChainState s = *spec.init.state;
    sampler = [s](RngStream&) { return s; };
  } else {
    Eigen::VectorXd temp(n + 1), mean_r(n);
    temp(0) = cfg.t_minus;
    for (int x = 1; x <= n; ++x) {
      const double u = static_cast<double>(x) / n;
      temp(x) = spec.init.temperature_at(u, cfg.t_minus);
      mean_r(x - 1) = spec.init.r0_at(u);
    }
    sampler = [cfg, temp, mean_r](RngStream& rng) { return sample_local_gibbs(cfg, temp, mean_r, rng); };
  }
  EnsembleOptions eo;
  eo.threads = threads;
  const auto stats = run_ensemble(cfg, sampler, sp, eo);
  {
    auto os = open_out(dir, "micro.csv", files);
    write_ensemble_csv(os, stats);
  }
  json frames = json::array();
  for (const auto& s : stats) {
    frames.push_back({{"t", s.t_macro},
                      {"work", s.work},
                      {"stderr_work", s.stderr_work},
                      {"energy_residual", s.energy_residual},
                      {"stderr_energy_residual", s.stderr_energy_residual},
                      {"negative_energy_flags", s.negative_energy_flags}});
  }
  write_json(dir, "micro.json",
             {{"config_hash", config_hash(spec.source)},
              {"seed", sp.seed},
              {"dt", sp.dt},
              {"ensemble_size", sp.ensemble_size},
              {"version", std::string("hydro-") + kVersion},
              {"rng", rng_info()},
              {"frames", frames}},
             files);
}

void run_mean(const ExperimentSpec& spec, const fs::path& dir, std::vector<std::string>& files) {
  const ChainConfig& cfg = spec.chain;
  const double n2 = static_cast<double>(cfg.n) * cfg.n;
  MeanSolution sol(cfg, mean_init(spec));
  std::vector<std::pair<double, MeanState>> frames;
  for (double t : with_end(spec.params.record_times, spec.params.t)) frames.emplace_back(t, sol.at(n2 * t));
  {
    auto os = open_out(dir, "mean.csv", files);
    write_mean_csv(os, frames);
  }
  const double tau = n2 * spec.params.t;
  const BoundaryTerms bt = sol.boundary_terms(tau);
  write_json(dir, "mean.json",
             {{"t", spec.params.t},
              {"r_n_time_average", sol.integral_r_n(tau) / tau},
              {"integral_p_n", sol.integral_p_n(tau)},
              {"work", sol.work(tau)},
              {"boundary_terms", {{"p0", bt.p0}, {"pf", bt.pf}, {"pfl", bt.pfl}, {"pdp", bt.pdp}}}},
             files);
}

void run_covariance(const ExperimentSpec& spec, const fs::path& dir, std::vector<std::string>& files) {
  const ChainConfig& cfg = spec.chain;
  MeanSolution sol(cfg, mean_init(spec));
  const auto path = evolve_covariance(cfg, cov_init(spec), [&](double tau) { return sol.p_bar(tau); },
                                      spec.params.t, spec.params.cov_dt, spec.params.record_times);
  {
    auto os = open_out(dir, "covariance.csv", files);
    write_covariance_csv(os, path);
  }
  const std::size_t k = path.t_macro.size() - 1;
  const FdReport fd = fd_relation_check(cfg, path, k);
  const ModeRates rates = mode_rates(build_basis(cfg.n), cfg.gamma);
  const MMatrixReport mm = m_matrix_diagnostic(cfg);
  write_json(dir, "covariance.json",
             {{"t", spec.params.t},
              {"dt", spec.params.cov_dt},
              {"min_eigenvalue", path.min_eigenvalue},
              {"clipped", path.clipped},
              {"fd_max_residual", fd.max_residual},
              {"fd_bulk_max_residual", fd.bulk_max_residual},
              {"position_functional", position_functional(path.snapshots[k])},
              {"kinetic_flatness", kinetic_flatness(equipartition_diagnostic(path, k))},
              {"m_matrix_ok", mm.ok},
              {"key_lemma", key_lemma_check(rates, cfg.n, cfg.gamma).to_json()}},
             files);
}

void run_pde(const ExperimentSpec& spec, const fs::path& dir, std::vector<std::string>& files) {
  const ChainConfig& cfg = spec.chain;
  const double tm = cfg.t_minus;
  const InitSpec& init = spec.init;
  const auto times = with_end(spec.params.record_times, spec.params.t);
  Profile r0 = [&](double u) { return init.r0_at(u); };
  Profile t0 = [&](double u) { return init.temperature_at(u, tm); };
  Profile e0 = [&](double u) { return t0(u) + 0.5 * r0(u) * r0(u); };
  const double wq = wq_closed_form(cfg);
  const FieldPath r = solve_stretch(r0, cfg, *spec.grid, spec.params.t, times);
  const FieldPath e = solve_energy(e0, r, cfg, wq);
  const FieldPath temp = solve_temperature(t0, r, cfg, wq);
  {
    auto os = open_out(dir, "fields.csv", files);
    write_fields_csv(os, r, e, temp, times);
  }
  json rows = json::array();
  for (const auto& a : energy_balance_audit(e, r, cfg, wq, &temp)) {
    if (std::find(times.begin(), times.end(), a.t) == times.end()) continue;
    rows.push_back({{"t", a.t},
                    {"energy_change", a.energy_change},
                    {"j0", a.j0},
                    {"j1", a.j1},
                    {"residual", a.residual},
                    {"w_energy_form", a.w_energy_form},
                    {"w_temp_form", a.w_temp_form}});
  }
  write_json(dir, "audit.json", {{"wq", wq}, {"m", spec.grid->m}, {"dt", spec.grid->dt_macro}, {"rows", rows}},
             files);
}

ProfileStudyParams profile_params(const ExperimentSpec& spec, int threads) {
  ProfileStudyParams p;
  const InitSpec init = spec.init;
  const double tm = spec.chain.t_minus;
  p.t = spec.params.t;
  p.r0 = [init](double u) { return init.r0_at(u); };
  p.temperature = [init, tm](double u) { return init.temperature_at(u, tm); };
  p.weight = as_profile(spec.params.weight, 1.0);
  if (spec.grid) p.grid = *spec.grid;
  p.cov_dt = spec.params.cov_dt;
  p.threads = threads;
  return p;
}

void run_converge_profiles(const ExperimentSpec& spec, int threads, const fs::path& dir,
                           std::vector<std::string>& files) {
  const ProfileStudy st = converge_profiles(spec.chain, spec.params.sizes, profile_params(spec, threads));
  for (const auto& s : st.samples) {
    auto os = open_out(dir, "profiles_n" + std::to_string(s.n) + ".csv", files);
    os << "t,u,r_bar,r_pde,energy,e_pde,thermal,T_pde,mech,mech_pde\n";
    os.precision(17);
    for (std::size_t i = 0; i < s.u.size(); ++i) {
      os << st.rows.front().t << ',' << s.u[i] << ',' << s.r_bar[i] << ',' << s.r_pde[i] << ',' << s.energy[i] << ','
         << s.e_pde[i] << ',' << s.thermal[i] << ',' << s.t_pde[i] << ',' << s.mech[i] << ',' << s.mech_pde[i] << '\n';
    }
  }
  auto os = open_out(dir, "summary.csv", files);
  os << "n,t,err_stretch,err_energy,err_thermal,err_mech\n";
  os.precision(17);
  for (const auto& r : st.rows) {
    os << r.n << ',' << r.t << ',' << r.err_stretch << ',' << r.err_energy << ',' << r.err_thermal << ','
       << r.err_mech << '\n';
  }
}

void run_converge_work(const ExperimentSpec& spec, int threads, std::uint64_t seed, const fs::path& dir,
                       std::vector<std::string>& files) {
  WorkStudyParams p;
  const InitSpec init = spec.init;
  p.t = spec.params.t;
  p.r0 = [init](double u) { return init.r0_at(u); };
  p.grid = *spec.grid;
  p.micro_ensemble = spec.params.micro_ensemble;
  p.micro_dt = spec.params.micro_dt;
  p.seed = seed;
  p.threads = threads;
  const auto rows = work_convergence_study(spec.chain, spec.params.sizes, p);
  {
    auto os = open_out(dir, "work.csv", files);
    write_work_csv(os, rows);
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < rows.size(); ++i) decreasing = decreasing && rows[i].abs_error < rows[i - 1].abs_error;
  const double wq = wq_closed_form(spec.chain);
  bool branch_ok = true;
  for (const auto& m : spec.chain.forcing_modes) {
    branch_ok = branch_ok && wq_summand(spec.chain.gamma, m.ell * spec.chain.omega(), std::norm(m.amplitude)) >= 0;
  }
  write_json(dir, "work.json",
             {{"wq", wq},
              {"W", rows.empty() ? 0.0 : rows.front().w},
              {"t", p.t},
              {"branch_nonnegative", branch_ok},
              {"error_decreasing", decreasing}},
             files);
}

void run_equipartition(const ExperimentSpec& spec, int threads, const fs::path& dir, std::vector<std::string>& files) {
  const auto rows = equipartition_study(spec.chain, spec.params.sizes, profile_params(spec, threads));
  auto os = open_out(dir, "equipartition.csv", files);
  os << "n,t,weighted_gap,signed_gap,kinetic_flatness,position_functional,min_eigenvalue\n";
  os.precision(17);
  for (const auto& r : rows) {
    os << r.n << ',' << r.t << ',' << r.weighted_gap << ',' << r.signed_gap << ',' << r.kinetic_flatness << ','
       << r.position_functional << ',' << r.min_eigenvalue << '\n';
  }
}

void run_wq(const ExperimentSpec& spec, const fs::path& dir, std::vector<std::string>& files) {
  const ChainConfig& cfg = spec.chain;
  json modes = json::array();
  double inviscid = 0.0;  // modes above the band contribute nothing as gamma -> 0
  for (const auto& m : cfg.forcing_modes) {
    const double nu = m.ell * cfg.omega();
    const double a2 = std::norm(m.amplitude);
    modes.push_back({{"ell", m.ell}, {"nu", nu}, {"summand", wq_summand(cfg.gamma, nu, a2)}});
    if (nu * nu < 4.0) inviscid += a2 * std::sqrt(4.0 - nu * nu);
  }
  write_json(dir, "wq.json",
             {{"wq", wq_closed_form(cfg)}, {"modes", modes}, {"small_gamma_limit", inviscid}}, files);
}

}  // namespace

std::string study_name(Study s) {
  for (const auto& [e, name] : kStudies) {
    if (e == s) return name;
  }
  return "?";
}

std::vector<std::string> spec_errors(const json& doc, const fs::path& base_dir) {
  return parse_all(doc, base_dir).errors;
}

ExperimentSpec parse_spec(const json& doc, const fs::path& base_dir) {
  Parsed p = parse_all(doc, base_dir);
  if (!p.errors.empty()) throw ValidationError(p.errors);
  return std::move(p.spec);
}

std::string config_hash(const json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void parallel_jobs(int count, int threads, const std::function<void(int)>& job) {
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (int i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

CovarianceBlocks local_gibbs_covariance(const ChainConfig& cfg, const Profile& temperature) {
  const int n = cfg.n;
  CovarianceBlocks s = CovarianceBlocks::zero(n);
  s.s_p(0, 0) = cfg.t_minus;
  for (int x = 1; x <= n; ++x) {
    const double t = temperature(static_cast<double>(x) / n);
    s.s_r(x - 1, x - 1) = t;
    s.s_p(x, x) = t;
  }
  return s;
}

double weighted_relative_error(const std::vector<double>& u, const std::vector<double>& a,
                               const std::vector<double>& b, const Profile& weight) {
  if (a.size() != u.size() || b.size() != u.size() || u.empty()) {
    throw std::invalid_argument("weighted_relative_error: size mismatch");
  }
  CompensatedSum num, den;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double w = weight(u[i]);
    num.add(w * (a[i] - b[i]) * (a[i] - b[i]));
    den.add(w * b[i] * b[i]);
  }
  const double d = std::sqrt(den.value() / u.size());
  const double e = std::sqrt(num.value() / u.size());
  return d > 1e-12 ? e / d : e;
}

ProfileStudy converge_profiles(const ChainConfig& base, const std::vector<int>& sizes, const ProfileStudyParams& p) {
  const double wq = wq_closed_form(base);
  const std::vector<double> times = {p.t};
  Profile e0 = [&](double u) { return p.temperature(u) + 0.5 * p.r0(u) * p.r0(u); };
  const FieldPath r_path = solve_stretch(p.r0, base, p.grid, p.t, times);
  const FieldPath e_path = solve_energy(e0, r_path, base, wq);
  const FieldPath t_path = solve_temperature(p.temperature, r_path, base, wq);
  const std::size_t kr = r_path.index_of(p.t);

  ProfileStudy st;
  st.rows.resize(sizes.size());
  st.samples.resize(sizes.size());
  parallel_jobs(static_cast<int>(sizes.size()), p.threads, [&](int job) {
    ChainConfig cfg = base;
    cfg.n = sizes[job];
    const int n = cfg.n;
    const double tau = static_cast<double>(n) * n * p.t;
    MeanState init = MeanState::zero(n);
    for (int x = 1; x <= n; ++x) init.r_bar(x - 1) = p.r0(static_cast<double>(x) / n);
    MeanSolution sol(cfg, init);
    const MeanState mt = sol.at(tau);
    const CovariancePath cov = evolve_covariance(cfg, local_gibbs_covariance(cfg, p.temperature),
                                                 [&](double s) { return sol.p_bar(s); }, p.t, p.cov_dt);
    const CovarianceBlocks& sk = cov.snapshots.back();

    ProfileSample& s = st.samples[job];
    s.n = n;
    for (int x = 1; x <= n; ++x) {
      const double u = static_cast<double>(x) / n;
      const double rb = mt.r_bar(x - 1), pb = mt.p_bar(x);
      const double th = 0.5 * (sk.s_p(x, x) + sk.s_r(x - 1, x - 1));
      const double mech = 0.5 * (rb * rb + pb * pb);
      const double rp = r_path.sample(kr, u);
      s.u.push_back(u);
      s.r_bar.push_back(rb);
      s.r_pde.push_back(rp);
      s.thermal.push_back(th);
      s.t_pde.push_back(t_path.sample(kr, u));
      s.mech.push_back(mech);
      s.mech_pde.push_back(0.5 * rp * rp);
      s.energy.push_back(mech + th);
      s.e_pde.push_back(e_path.sample(kr, u));
    }
    ProfileRow& row = st.rows[job];
    row.n = n;
    row.t = p.t;
    row.err_stretch = weighted_relative_error(s.u, s.r_bar, s.r_pde, p.weight);
    row.err_energy = weighted_relative_error(s.u, s.energy, s.e_pde, p.weight);
    row.err_thermal = weighted_relative_error(s.u, s.thermal, s.t_pde, p.weight);
    row.err_mech = weighted_relative_error(s.u, s.mech, s.mech_pde, p.weight);
  });
  return st;
}

std::vector<EquipartitionRow> equipartition_study(const ChainConfig& base, const std::vector<int>& sizes,
                                                  const ProfileStudyParams& p) {
  std::vector<EquipartitionRow> rows(sizes.size());
  parallel_jobs(static_cast<int>(sizes.size()), p.threads, [&](int job) {
    ChainConfig cfg = base;
    cfg.n = sizes[job];
    const int n = cfg.n;
    MeanState init = MeanState::zero(n);
    for (int x = 1; x <= n; ++x) init.r_bar(x - 1) = p.r0(static_cast<double>(x) / n);
    MeanSolution sol(cfg, init);
    const CovariancePath cov = evolve_covariance(cfg, local_gibbs_covariance(cfg, p.temperature),
                                                 [&](double s) { return sol.p_bar(s); }, p.t, p.cov_dt);
    const std::size_t k = cov.t_macro.size() - 1;
    const EquipartitionProfile prof = equipartition_diagnostic(cov, k);
    CompensatedSum l1, sg;
    for (int x = 1; x <= n; ++x) {
      const double w = p.weight(static_cast<double>(x) / n);
      l1.add(w * std::abs(prof.gap(x)));
      sg.add(w * prof.gap(x));
    }
    EquipartitionRow& r = rows[job];
    r.n = n;
    r.t = p.t;
    r.weighted_gap = l1.value() / n;
    r.signed_gap = sg.value() / n;
    r.kinetic_flatness = kinetic_flatness(prof);
    r.position_functional = position_functional(cov.average(k));
    r.min_eigenvalue = *std::min_element(cov.min_eigenvalue.begin(), cov.min_eigenvalue.end());
  });
  return rows;
}

std::vector<std::string> run_experiment(const ExperimentSpec& spec_in, const RunOptions& opts) {
  ExperimentSpec spec = spec_in;
  std::uint64_t seed = 0;
  if (spec.sim) seed = spec.sim->seed;
  if (opts.seed) {
    seed = *opts.seed;
    if (spec.sim) spec.sim->seed = seed;
    if (spec.source.contains("sim")) spec.source["sim"]["seed"] = seed;
  }
  const int threads = std::max(1, opts.threads.value_or(1));

  fs::create_directories(spec.output_dir);
  const fs::path& dir = spec.output_dir;
  std::vector<std::string> files;
  switch (spec.study) {
    case Study::micro: run_micro(spec, threads, dir, files); break;
    case Study::mean: run_mean(spec, dir, files); break;
    case Study::covariance: run_covariance(spec, dir, files); break;
    case Study::pde: run_pde(spec, dir, files); break;
    case Study::converge_profiles: run_converge_profiles(spec, threads, dir, files); break;
    case Study::converge_work: run_converge_work(spec, threads, seed, dir, files); break;
    case Study::equipartition: run_equipartition(spec, threads, dir, files); break;
    case Study::wq: run_wq(spec, dir, files); break;
  }
  json manifest = {
      {"study", study_name(spec.study)},
      {"config_hash", config_hash(spec.source)},
      {"seed", seed},
      {"threads_do_not_affect_results", true},
      {"versions",
       {{"hydro", kVersion},
        {"chain-model", kVersion},
        {"spectral", kVersion},
        {"micro-sim", kVersion},
        {"mean-dynamics", kVersion},
        {"covariance", kVersion},
        {"work-limits", kVersion},
        {"macro-pde", kVersion},
        {"harness-cli", kVersion}}},
      {"rng", rng_info()},
      {"spec", spec.source},
      {"files", files},
  };
  std::vector<std::string> dummy;
  write_json(dir, "manifest.json", manifest, dummy);
  return files;
}

namespace {

void print_errors(std::ostream& os, const std::vector<std::string>& errors) {
  os << json{{"ok", false}, {"errors", errors}}.dump(2) << '\n';
}

json load_json(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError({"spec: cannot open " + file});
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ValidationError({"spec: " + file + " is not valid JSON"});
  return doc;
}

}  // namespace

int cli(int argc, const char* const* argv, const OracleHandler& oracle) {
  CLI::App app{"Open harmonic chain with velocity flips: simulation and hydrodynamic limit"};
  app.require_subcommand(1);
  std::string spec_file;
  int threads = 1;
  std::int64_t seed = -1;

  auto* run = app.add_subcommand("run", "Run the study described by a spec file");
  run->add_option("--spec", spec_file, "Experiment spec (JSON)")->required();
  run->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1, 1024));
  run->add_option("--seed", seed, "Seed override")->check(CLI::NonNegativeNumber);

  auto* validate = app.add_subcommand("validate", "Check a spec file without running it");
  validate->add_option("--spec", spec_file, "Experiment spec (JSON)")->required();

  std::string oracle_name, oracle_input, oracle_out;
  auto* orc = app.add_subcommand("oracle", "Evaluate a reference oracle");
  orc->add_option("name", oracle_name, "lyapunov | wq-quadrature | heat-series | quotient | oscillator | forcing")->required();
  orc->add_option("--input", oracle_input, "JSON parameters");
  orc->add_option("--out", oracle_out, "Write the result here instead of stdout");
  orc->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_errors(std::cout, {std::string("cli: ") + e.what()});
    return 2;
  }

  try {
    if (*validate || *run) {
      const json doc = load_json(spec_file);
      const fs::path base = fs::path(spec_file).parent_path();
      const auto errors = spec_errors(doc, base);
      if (!errors.empty()) {
        print_errors(std::cout, errors);
        return 2;
      }
      if (*validate) {
        std::cout << json{{"ok", true}, {"errors", json::array()}}.dump(2) << '\n';
        return 0;
      }
      ExperimentSpec spec = parse_spec(doc, base);
      RunOptions ro;
      ro.threads = threads;
      if (seed >= 0) ro.seed = static_cast<std::uint64_t>(seed);
      const auto files = run_experiment(spec, ro);
      std::cout << json{{"ok", true}, {"output_dir", spec.output_dir.string()}, {"files", files}}.dump(2) << '\n';
      return 0;
    }
    // oracle
    if (!oracle) throw std::runtime_error("no oracle handler installed");
    json params = json::object();
    if (!oracle_input.empty()) params = load_json(oracle_input);
    const auto extras = orc->remaining();
    for (std::size_t i = 0; i < extras.size(); ++i) {
      const std::string& a = extras[i];
      if (a.rfind("--", 0) != 0 || i + 1 >= extras.size()) {
        throw ValidationError({"oracle: expected --key value pairs, got '" + a + "'"});
      }
      const std::string key = a.substr(2);
      const std::string val = extras[++i];
      json parsed = json::parse(val, nullptr, false);
      params[key] = parsed.is_discarded() ? json(val) : parsed;
    }
    const json result = oracle(oracle_name, params);
    if (oracle_out.empty()) {
      std::cout << result.dump(2) << '\n';
    } else {
      std::ofstream os(oracle_out);
      if (!os) throw std::runtime_error("cannot write " + oracle_out);
      os << result.dump(2) << '\n';
    }
    return 0;
  } catch (const ValidationError& e) {
    print_errors(std::cout, e.errors());
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "hydro: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace hydro
