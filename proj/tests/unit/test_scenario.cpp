#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "../common/oracles.hpp"
#include "fes/commands.hpp"
#include "fes/errors.hpp"
#include "fes/scenario.hpp"

using namespace fes;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fesopt_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

// A random but valid scenario text touching every section.
std::string random_scenario(oracle::Gen& g) {
  std::ostringstream os;
  os.precision(17);
  os << "[model]\ntau_c = " << g.uniform(10, 30) << "\nk_m = " << g.uniform(0.05, 0.3) << "\n";
  if (g.index(0, 1)) {
    os << "[train]\ntimes = 0, " << g.uniform(20, 40) << ", " << g.uniform(60, 90) << "\nhorizon = "
       << g.uniform(100, 200) << "\n";
  } else {
    os << "[train]\npulses = " << g.index(0, 9) << "\nspacing = " << g.uniform(20, 60) << "\n";
  }
  os << "[simulation]\nstep = " << g.uniform(0.1, 1.0) << "\nmethod = " << (g.index(0, 1) ? "rk4" : "adaptive")
     << "\nfatigue = " << (g.index(0, 1) ? "true" : "false") << "\n";
  const char* kinds[] = {"max-force-terminal", "track-force", "max-cn-terminal", "track-cn"};
  const char* schemes[] = {"triangular", "affine-constant", "constant-average"};
  os << "[objective]\nkind = " << kinds[g.index(0, 3)] << "\nscheme = " << schemes[g.index(0, 2)]
     << "\np = " << g.index(1, 6) << "\nnu = " << g.uniform(0.9, 1.1) << "\nf_ref = " << g.uniform(0.05, 0.3) << "\n";
  os << "[solver]\nkkt_tol = " << g.uniform(1e-8, 1e-5) << "\nfreeze_amplitudes = "
     << (g.index(0, 1) ? "true" : "false") << "\nstarts = " << g.index(1, 4) << "\n";
  if (g.index(0, 1)) os << "[program]\nt_f_s = " << g.uniform(5, 100) << "\nkind = train-endurance\n";
  os << "[output]\ndir = out_" << g.index(0, 99) << "\n";
  os << "[run]\nseed = " << g.index(0, 1u << 30) << "\ncases = " << g.index(1, 50) << "\n";
  return os.str();
}

}  // namespace

TEST_CASE("parsing") {
  const auto cfg = parse_scenario(
      "# comment\n[model]\ntau_c = 25 # inline\n; another\n[train]\ntimes = 0, 30, 70\namplitudes = 1, 0.5, "
      "0.25\nhorizon = 120\n");
  CHECK(cfg.model.tau_c == 25.0);
  CHECK(cfg.has("model"));
  CHECK(cfg.has("train"));
  CHECK_FALSE(cfg.has("objective"));
  const auto tr = cfg.train.build();
  CHECK(tr.times == std::vector<double>{0.0, 30.0, 70.0});
  CHECK(tr.amplitudes[2] == 0.25);
  CHECK_NOTHROW(cfg.require({"model", "train"}));
  CHECK_THROWS_AS(cfg.require({"objective"}), ConfigError);
}

TEST_CASE("parse errors name the line") {
  auto message = [](const std::string& text) {
    try {
      parse_scenario(text, "s.ini");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("[model]\nbogus = 1\n") == "s.ini:2: unknown key 'bogus' in [model]");
  CHECK(message("[nowhere]\n") == "s.ini:1: unknown section [nowhere]");
  CHECK(message("[model]\ntau_c = 1\ntau_c = 2\n") == "s.ini:3: key 'tau_c' already set on line 2");
  CHECK(message("[model]\n[model]\n").find("duplicate section") != std::string::npos);
  CHECK(message("tau_c = 1\n").find("outside of any section") != std::string::npos);
  CHECK(message("[model]\ntau_c = abc\n").find("s.ini:2:") == 0);
  CHECK(message("[model]\ntau_c\n").find("expected") != std::string::npos);
  CHECK(message("[simulation]\nmethod = euler\n").find("rk4 or adaptive") != std::string::npos);
  CHECK(message("[objective]\nscheme = spline\n").find("s.ini:2:") == 0);
  CHECK_THROWS_AS(load_scenario("/nonexistent/file.ini"), ConfigError);
}

TEST_CASE("train config errors are configuration errors") {
  auto cfg = parse_scenario("[train]\ntimes = 0, 10\nhorizon = 50\ni_min = 20\n");
  CHECK_THROWS_AS(cfg.train.build(), ConfigError);
  cfg = parse_scenario("[train]\nempty = true\n");
  CHECK_THROWS_AS(cfg.train.build(), ConfigError);
}

TEST_CASE("serialize then parse is the identity") {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    oracle::Gen g(seed);
    const auto text = random_scenario(g);
    CAPTURE(text);
    const auto cfg = parse_scenario(text);
    const auto again = parse_scenario(serialize_scenario(cfg));
    CHECK(again == cfg);
    CHECK(serialize_scenario(again) == serialize_scenario(cfg));
    CHECK(config_hash(again) == config_hash(cfg));
  }
  const ScenarioConfig empty;
  CHECK(serialize_scenario(empty).empty());
  CHECK(config_hash(empty).size() == 16);
  CHECK(config_hash(parse_scenario("[model]\ntau_c = 21\n")) != config_hash(empty));
}

TEST_CASE("commands write deterministic, stamped outputs") {
  const auto dir = scratch("cmd");
  CommandContext ctx;
  ctx.config = parse_scenario("[train]\npulses = 2\nspacing = 30\n[output]\nprefix = t\n");
  ctx.out_dir = dir.string();
  const auto res = dispatch("simulate", ctx);
  REQUIRE(res.code == exit_code::ok);
  REQUIRE(res.files.size() == 2);
  const auto csv = slurp(dir / "t_trajectory.csv");
  const std::string header = std::string("# fesopt ") + version() + " config_hash=" + config_hash(ctx.config) + "\n";
  CHECK(csv.rfind(header, 0) == 0);
  CHECK(csv.find("t_ms,c_n,force_kN,a\n") == header.size());
  const auto summary = nlohmann::json::parse(slurp(dir / "t_summary.json"));
  CHECK(summary["meta"]["config_hash"] == config_hash(ctx.config));
  CHECK(summary["peak_c_n"].get<double>() > 0.0);
  // Same inputs, same bytes.
  const auto first = slurp(dir / "t_summary.json");
  REQUIRE(dispatch("simulate", ctx).code == exit_code::ok);
  CHECK(slurp(dir / "t_summary.json") == first);
  CHECK(slurp(dir / "t_trajectory.csv") == csv);
}

TEST_CASE("single pulse peak through the simulate command") {
  const auto dir = scratch("peak");
  CommandContext ctx;
  ctx.config = parse_scenario("[train]\npulses = 0\nspacing = 100\n");
  ctx.out_dir = dir.string();
  REQUIRE(dispatch("simulate", ctx).code == exit_code::ok);
  const auto summary = nlohmann::json::parse(slurp(dir / "fesopt_summary.json"));
  CHECK(summary["peak_c_n_t_ms"].get<double>() == doctest::Approx(20.0));
  CHECK(std::abs(summary["peak_c_n"].get<double>() - std::exp(-1.0)) < 1e-9);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("codes");
  CommandContext ctx;
  ctx.out_dir = dir.string();
  SUBCASE("missing section") {
    CHECK(dispatch("simulate", ctx).code == exit_code::config);
    CHECK(dispatch("optimize", ctx).code == exit_code::config);
    CHECK(dispatch("nonsense", ctx).code == exit_code::config);
  }
  SUBCASE("no strictly feasible train leaves no files") {
    ctx.config = parse_scenario("[train]\npulses = 7\nspacing = 30\n[objective]\n[solver]\nt_max = 150\n");
    const auto res = dispatch("optimize", ctx);
    CHECK(res.code == exit_code::config);
    CHECK(res.message.find("t_max") != std::string::npos);
    CHECK(fs::is_empty(dir));
  }
  SUBCASE("unknown suite") {
    ctx.suite = "nope";
    CHECK(dispatch("validate", ctx).code == exit_code::config);
  }
  SUBCASE("invalid model") {
    ctx.config = parse_scenario("[model]\ntau_c = -1\n[train]\npulses = 1\n");
    CHECK(dispatch("simulate", ctx).code == exit_code::config);
  }
  SUBCASE("solver failure still writes the trace") {
    ctx.config = parse_scenario(
        "[train]\npulses = 3\nspacing = 30\n[objective]\nkind = track-force\n[solver]\nmax_inner = 1\n");
    const auto res = dispatch("optimize", ctx);
    CHECK(res.code == exit_code::solver);
    CHECK(fs::exists(dir / "fesopt_sigma.json"));
    const auto j = nlohmann::json::parse(slurp(dir / "fesopt_sigma.json"));
    CHECK(j["status"] != "converged");
    CHECK(j["trace"].size() > 0);
  }
}

TEST_CASE("optimize reports the OCP2 tracking costs") {
  const auto dir = scratch("ocp2");
  CommandContext ctx;
  ctx.config = parse_scenario(
      "[train]\npulses = 7\nspacing = 30\n[objective]\nkind = track-force\nf_ref = 0.2\n[output]\nprefix = ocp2\n");
  ctx.out_dir = dir.string();
  const auto res = dispatch("optimize", ctx);
  REQUIRE(res.code == exit_code::ok);
  const auto j = nlohmann::json::parse(slurp(dir / "ocp2_sigma.json"));
  CHECK(j["tracking_cost"]["after"].get<double>() < j["tracking_cost"]["before"].get<double>());
  CHECK(j["constraints"].size() == 3 * 7 + 5);
  CHECK(j["train"]["times"].size() == 8);
  CHECK(fs::exists(dir / "ocp2_trajectories.csv"));
}
