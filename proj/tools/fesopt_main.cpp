#include <CLI11.hpp>

#include <iostream>

#include "fes/commands.hpp"
#include "fes/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Pulse-train simulation, approximation and optimization for FES force models"};
  app.set_version_flag("--version", std::string(fes::version()));
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string suite;
  bool quiet = false;

  const char* names[][2] = {
      {"simulate", "Reference (F, A) trajectory for the configured train"},
      {"approximate", "Compare the closed-form force approximation with the oracle"},
      {"optimize", "Optimize pulse times and amplitudes"},
      {"plan", "Assemble a stimulation program"},
      {"validate", "Run a property-check suite"},
      {"bench", "Time the approximation against re-simulation"},
  };
  for (const auto& [name, help] : names) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Scenario file (INI)")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Random seed for validation suites");
    sub->add_option("--suite", suite, "Validation suite name");
    sub->add_flag("-q,--quiet", quiet, "Suppress progress lines");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : fes::exit_code::config;
  }

  const auto* sub = app.get_subcommands().front();
  fes::CommandContext ctx;
  try {
    if (!config_path.empty()) ctx.config = fes::load_scenario(config_path);
  } catch (const fes::Error& e) {
    std::cerr << "fesopt: " << e.what() << '\n';
    return fes::exit_code::config;
  }
  if (sub->count("--out")) ctx.out_dir = out_dir;
  if (sub->count("--seed")) ctx.seed = seed;
  if (sub->count("--suite")) ctx.suite = suite;
  if (!quiet) ctx.log = &std::cout;

  const auto res = fes::dispatch(sub->get_name(), ctx);
  if (!quiet) {
    for (const auto& f : res.files) std::cout << "wrote " << f << '\n';
  }
  if (res.code != fes::exit_code::ok) std::cerr << "fesopt: " << res.message << '\n';
  return res.code;
}
