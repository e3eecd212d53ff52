#include "doctest.h"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hydro/harness.hpp"
#include "oracles.hpp"

using namespace hydro;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hydro_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

json chain_json(int n = 8) {
  return {{"n", n},         {"gamma", 1.0}, {"t_minus", 1.0},
          {"f_bar", 0.5},   {"theta", 1.0}, {"forcing_modes", json::array({{{"ell", 1}, {"re", 0.2}, {"im", 0.1}}})}};
}

bool has_error(const std::vector<std::string>& errs, const std::string& needle) {
  for (const auto& e : errs)
    if (e.find(needle) != std::string::npos) return true;
  return false;
}

struct Captured {
  int code;
  std::string out;
};

Captured run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hydro");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream buf;
  std::streambuf* old = std::cout.rdbuf(buf.rdbuf());
  const int code = cli(static_cast<int>(argv.size()), argv.data(), oracle::run);
  std::cout.rdbuf(old);
  return {code, buf.str()};
}

fs::path write_spec(const fs::path& dir, const json& j) {
  const fs::path p = dir / "spec.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST_CASE("expression parser") {
  CHECK(Expression::parse("1 + 2 * 3")(0) == 7.0);
  CHECK(Expression::parse("2 ^ 3 ^ 2")(0) == 512.0);
  CHECK(Expression::parse("-u^2")(3.0) == -9.0);
  CHECK(Expression::parse("(1 - u) / 2")(0.5) == 0.25);
  CHECK(Expression::parse("2\xC2\xB7u")(1.5) == 3.0);
  CHECK(Expression::parse("sin(pi*u)^2")(0.5) == doctest::Approx(1.0));
  CHECK(Expression::parse("exp(1) - e")(0) == doctest::Approx(0.0));
  CHECK(Expression::parse("sqrt(4) + cos(0)")(0) == 3.0);
  CHECK(Expression::parse("1.5e-1")(0) == doctest::Approx(0.15));
  CHECK(Expression::parse("u").text() == "u");
  for (const char* bad : {"", "1 +", "(u", "u)", "foo(u)", "x", "1 $ 2", "sin u"}) {
    CHECK_THROWS_AS(Expression::parse(bad), ExpressionError);
  }
}

TEST_CASE("spec validation") {
  const fs::path data = fs::path(HYDRO_TEST_DATA);
  std::ifstream good(data / "wq_spec.json");
  CHECK(spec_errors(json::parse(good), data).empty());
  std::ifstream bad(data / "bad_spec.json");
  const auto errs = spec_errors(json::parse(bad), data);
  CHECK(has_error(errs, "unknown key 'colour'"));
  CHECK(has_error(errs, "chain.n must be >= 1"));
  CHECK(has_error(errs, "chain.gamma must be > 0"));
  CHECK(has_error(errs, "temperature"));
  CHECK(has_error(errs, "grid"));
  CHECK(has_error(errs, "study_params.t"));
  CHECK(has_error(errs, "study_params.sizes"));

  json doc = {{"chain", chain_json()}, {"study", "pde"}, {"output_dir", "x"},
              {"init", {{"kind", "deterministic_mean"}, {"r0", "u"}, {"temperature", "1 - 2*u"}}},
              {"grid", {{"m", 32}, {"dt", 1e-3}, {"scheme", "leapfrog"}}},
              {"study_params", {{"t", 0.1}, {"weight", "u - 1"}}}};
  const auto e2 = spec_errors(doc);
  CHECK(has_error(e2, "grid.scheme"));
  CHECK(has_error(e2, "temperature must be positive"));
  CHECK(has_error(e2, "study_params.weight"));
  doc["init"] = {{"kind", "explicit"}, {"file", "missing.json"}};
  CHECK(has_error(spec_errors(doc), "does not exist"));
  doc["init"] = {{"kind", "explicit"}, {"r", {0, 0}}, {"p", {0, 0, 0}}};
  CHECK(has_error(spec_errors(doc), "init.r"));
  doc["study"] = "nope";
  CHECK(has_error(spec_errors(doc), "study"));
  CHECK_THROWS_AS(parse_spec(doc), ValidationError);
}

TEST_CASE("config hash") {
  const json a = {{"chain", chain_json()}, {"study", "wq"}, {"output_dir", "o"}};
  json b = a;
  const std::string h = config_hash(a);
  CHECK(h.size() == 16);
  CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(config_hash(b) == h);
  b["chain"]["gamma"] = 1.0000001;
  CHECK(config_hash(b) != h);
}

TEST_CASE("parallel jobs") {
  std::vector<int> hit(37, 0);
  parallel_jobs(37, 4, [&](int j) { hit[j] += 1; });
  for (int v : hit) CHECK(v == 1);
  std::atomic<int> done{0};
  CHECK_THROWS_AS(parallel_jobs(10, 3,
                                [&](int j) {
                                  ++done;
                                  if (j == 4) throw std::runtime_error("job failed");
                                }),
                  std::runtime_error);
}

TEST_CASE("local gibbs covariance and error metric") {
  ChainConfig c;
  c.n = 4;
  c.t_minus = 0.7;
  const CovarianceBlocks s = local_gibbs_covariance(c, [](double u) { return 1.0 + u; });
  CHECK(s.s_p(0, 0) == 0.7);
  for (int x = 1; x <= 4; ++x) {
    CHECK(s.s_p(x, x) == doctest::Approx(1.0 + x / 4.0));
    CHECK(s.s_r(x - 1, x - 1) == doctest::Approx(1.0 + x / 4.0));
  }
  CHECK(s.assemble().trace() == doctest::Approx(0.7 + 2 * (1.25 + 1.5 + 1.75 + 2.0)));
  CHECK((s.assemble() - Eigen::MatrixXd(s.assemble().diagonal().asDiagonal())).norm() == 0.0);

  const std::vector<double> u = {0.25, 0.5, 0.75, 1.0};
  const std::vector<double> b = {1, 2, 3, 4}, a = {1.1, 2.2, 3.3, 4.4};
  CHECK(weighted_relative_error(u, a, b, [](double) { return 1.0; }) == doctest::Approx(0.1));
  CHECK(weighted_relative_error(u, a, b, [](double x) { return x < 0.6 ? 1.0 : 0.0; }) == doctest::Approx(0.1));
  CHECK(weighted_relative_error(u, b, b, [](double) { return 1.0; }) == 0.0);
}

TEST_CASE("wq run writes outputs and a manifest") {
  const fs::path dir = scratch("wq");
  json doc = {{"chain", chain_json()}, {"study", "wq"}, {"output_dir", (dir / "out").string()}};
  doc["chain"]["forcing_modes"] = json::array();
  const auto files = run_experiment(parse_spec(doc));
  CHECK(files == std::vector<std::string>{"wq.json"});
  const json wq = json::parse(slurp(dir / "out" / "wq.json"));
  CHECK(wq["wq"].get<double>() == 0.0);
  const json man = json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(man["config_hash"] == config_hash(doc));
  CHECK(man["files"] == json::array({"wq.json"}));
  CHECK(man["versions"]["hydro"] == kVersion);
  CHECK(man["versions"].size() == 9);
  CHECK(man.contains("rng"));
  CHECK(man["spec"] == doc);
  const std::string first = slurp(dir / "out" / "manifest.json");
  run_experiment(parse_spec(doc));
  CHECK(slurp(dir / "out" / "manifest.json") == first);
}

TEST_CASE("every study runs end to end") {
  const fs::path dir = scratch("studies");
  const json init_lg = {{"kind", "local_gibbs"}, {"temperature", "1 + u"}, {"r0", "0.5*u^2"}};
  const json init_dm = {{"kind", "deterministic_mean"}, {"r0", "0.5*u^2"}, {"temperature", "1 + u"}};
  const json grid = {{"m", 32}, {"dt", 2e-3}};
  struct Case {
    std::string study;
    json extra;
    std::vector<std::string> files;
    std::string header;
  };
  const std::vector<Case> cases = {
      {"micro",
       {{"init", init_lg}, {"sim", {{"dt", 0.05}, {"t_end", 0.02}, {"record_times", {0.01}}, {"ensemble_size", 40}, {"seed", 3}}}},
       {"micro.csv", "micro.json"},
       ""},
      {"mean", {{"init", init_dm}, {"study_params", {{"t", 0.05}, {"record_times", {0.01}}}}}, {"mean.csv", "mean.json"}, ""},
      {"covariance",
       {{"init", init_lg}, {"study_params", {{"t", 0.02}, {"record_times", {0.01}}}}},
       {"covariance.csv", "covariance.json"},
       "time,u,p_var_avg,r_var_avg,thermal_avg,gap"},
      {"pde", {{"init", init_dm}, {"grid", grid}, {"study_params", {{"t", 0.05}}}}, {"fields.csv", "audit.json"}, "t,u,r,e,T"},
      {"converge_profiles",
       {{"init", init_lg}, {"grid", grid}, {"study_params", {{"t", 0.02}, {"sizes", {8, 16}}, {"weight", "sin(pi*u)^2"}}}},
       {"profiles_n8.csv", "profiles_n16.csv", "summary.csv"},
       "t,u,r_bar,r_pde,energy,e_pde,thermal,T_pde,mech,mech_pde"},
      {"converge_work",
       {{"init", init_dm}, {"grid", grid}, {"study_params", {{"t", 0.05}, {"sizes", {8, 16}}}}},
       {"work.csv", "work.json"},
       "n,t,W_n,W,abs_error,micro_W_n,micro_stderr"},
      {"equipartition",
       {{"init", init_lg}, {"study_params", {{"t", 0.02}, {"sizes", {8, 16}}}}},
       {"equipartition.csv"},
       "n,t,weighted_gap,signed_gap,kinetic_flatness,position_functional,min_eigenvalue"},
  };
  for (const auto& c : cases) {
    CAPTURE(c.study);
    json doc = c.extra;
    doc["chain"] = chain_json();
    doc["study"] = c.study;
    doc["output_dir"] = (dir / c.study).string();
    REQUIRE(spec_errors(doc).empty());
    const auto files = run_experiment(parse_spec(doc), {2, std::nullopt});
    CHECK(files == c.files);
    for (const auto& f : files) CHECK(fs::file_size(dir / c.study / f) > 0);
    if (!c.header.empty()) CHECK(first_line(dir / c.study / files.front()) == c.header);
    // Thread count and reruns leave the bytes unchanged.
    std::vector<std::string> before;
    for (const auto& f : files) before.push_back(slurp(dir / c.study / f));
    run_experiment(parse_spec(doc), {1, std::nullopt});
    for (std::size_t i = 0; i < files.size(); ++i) CHECK(slurp(dir / c.study / files[i]) == before[i]);
  }
  const json work = json::parse(slurp(dir / "converge_work" / "work.json"));
  CHECK(work["branch_nonnegative"] == true);
  CHECK(work["wq"].get<double>() > 0);
}

TEST_CASE("seed override changes the micro output") {
  const fs::path dir = scratch("seed");
  json doc = {{"chain", chain_json(4)},
              {"study", "micro"},
              {"output_dir", (dir / "o").string()},
              {"init", {{"kind", "gibbs"}}},
              {"sim", {{"dt", 0.05}, {"t_end", 0.05}, {"ensemble_size", 20}, {"seed", 1}}}};
  run_experiment(parse_spec(doc));
  const std::string a = slurp(dir / "o" / "micro.csv");
  run_experiment(parse_spec(doc), {std::nullopt, 2});
  CHECK(slurp(dir / "o" / "micro.csv") != a);
  CHECK(json::parse(slurp(dir / "o" / "manifest.json"))["seed"] == 2);
  doc["sim"]["seed"] = 2;
  run_experiment(parse_spec(doc));
  CHECK(json::parse(slurp(dir / "o" / "manifest.json"))["spec"]["sim"]["seed"] == 2);
}

TEST_CASE("command line") {
  const fs::path data = fs::path(HYDRO_TEST_DATA);
  const fs::path dir = scratch("cli");
  auto ok = run_cli({"validate", "--spec", (data / "wq_spec.json").string()});
  CHECK(ok.code == 0);
  CHECK(json::parse(ok.out)["ok"] == true);

  auto bad = run_cli({"validate", "--spec", (data / "bad_spec.json").string()});
  CHECK(bad.code == 2);
  const json doc = json::parse(bad.out);
  CHECK(doc["ok"] == false);
  CHECK(doc["errors"].size() >= 5);

  CHECK(run_cli({"validate", "--spec", (dir / "absent.json").string()}).code == 2);
  CHECK(run_cli({"frobnicate"}).code == 2);
  CHECK(run_cli({"run"}).code == 2);

  auto q = run_cli({"oracle", "quotient", "--gamma", "1", "--lambda", "2", "--t", "0.7"});
  CHECK(q.code == 0);
  CHECK(json::parse(q.out)["q"].get<double>() == doctest::Approx(oracle::quotient_50(1, 2, 0.7)).epsilon(1e-15));
  CHECK(run_cli({"oracle", "no-such-oracle"}).code == 2);
  CHECK(run_cli({"oracle", "quotient", "--gamma"}).code == 2);
  const fs::path out = dir / "heat.json";
  CHECK(run_cli({"oracle", "heat-series", "--m", "8", "--out", out.string()}).code == 0);
  CHECK(json::parse(slurp(out))["r"].size() == 9);

  json spec = {{"chain", chain_json(6)},
               {"study", "wq"},
               {"output_dir", (dir / "run_out").string()}};
  auto r = run_cli({"run", "--spec", write_spec(dir, spec).string(), "--threads", "2", "--seed", "5"});
  CHECK(r.code == 0);
  CHECK(json::parse(slurp(dir / "run_out" / "manifest.json"))["seed"] == 5);

  // A step too large for the covariance integrator fails at run time.
  spec = {{"chain", chain_json(6)},
          {"study", "covariance"},
          {"output_dir", (dir / "cov_out").string()},
          {"init", {{"kind", "gibbs"}}},
          {"study_params", {{"t", 1.0}, {"cov_dt", 1.0}}}};
  std::ostringstream err;
  std::streambuf* old = std::cerr.rdbuf(err.rdbuf());
  const int code = run_cli({"run", "--spec", write_spec(dir, spec).string()}).code;
  std::cerr.rdbuf(old);
  CHECK(code == 1);
  CHECK(err.str().find("positivity") != std::string::npos);
}
