#pragma once

// Subcommands behind the `fesopt` executable. Each writes its files into
// the output directory and returns an exit code; nothing is printed except
// through `log`.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fes/scenario.hpp"

namespace fes {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int solver = 3;
inline constexpr int validation = 4;
}  // namespace exit_code

struct CommandContext {
  ScenarioConfig config;
  std::optional<std::string> out_dir;  // overrides [output] dir
  std::optional<std::uint64_t> seed;   // overrides [run] seed
  std::optional<std::string> suite;    // overrides [run] suite
  std::ostream* log = nullptr;
};

struct CommandResult {
  int code = exit_code::ok;
  std::vector<std::string> files;
  std::string message;
};

const char* version();

CommandResult run_simulate(const CommandContext& ctx);
CommandResult run_approximate(const CommandContext& ctx);
CommandResult run_optimize(const CommandContext& ctx);
CommandResult run_plan(const CommandContext& ctx);
CommandResult run_validate(const CommandContext& ctx);
CommandResult run_bench(const CommandContext& ctx);

/// Runs a subcommand by name, mapping configuration errors to exit code 2
/// and solver errors to 3.
CommandResult dispatch(const std::string& command, const CommandContext& ctx);

}  // namespace fes
