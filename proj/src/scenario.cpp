#include "fes/scenario.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "fes/errors.hpp"

namespace fes {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v) {
  if (v.empty()) throw InvalidArgument("expected a number");
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || errno == ERANGE) throw InvalidArgument("'" + v + "' is not a number");
  return x;
}

std::uint64_t to_uint(const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw InvalidArgument("'" + v + "' is not a non-negative integer");
  }
  errno = 0;
  const auto x = std::strtoull(v.c_str(), nullptr, 10);
  if (errno == ERANGE) throw InvalidArgument("'" + v + "' is out of range");
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw InvalidArgument("'" + v + "' is not a boolean");
}

std::vector<double> to_list(const std::string& v) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(trim(item)));
  return out;
}

std::string fmt_double(double x) { return fmt::format("{}", x); }
std::string fmt_bool(bool b) { return b ? "true" : "false"; }
std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_double(v[i]);
  return s;
}

struct Key {
  std::string name;
  std::function<void(ScenarioConfig&, const std::string&)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

#define FES_DOUBLE(field) \
  [](ScenarioConfig& c, const std::string& v) { c.field = to_double(v); }, \
      [](const ScenarioConfig& c) { return fmt_double(c.field); }
#define FES_SIZE(field) \
  [](ScenarioConfig& c, const std::string& v) { c.field = static_cast<std::size_t>(to_uint(v)); }, \
      [](const ScenarioConfig& c) { return std::to_string(c.field); }
#define FES_BOOL(field) \
  [](ScenarioConfig& c, const std::string& v) { c.field = to_bool(v); }, \
      [](const ScenarioConfig& c) { return fmt_bool(c.field); }
#define FES_STRING(field) \
  [](ScenarioConfig& c, const std::string& v) { c.field = v; }, [](const ScenarioConfig& c) { return c.field; }

const std::vector<std::pair<std::string, std::vector<Key>>>& schema() {
  static const std::vector<std::pair<std::string, std::vector<Key>>> table = {
      {"model",
       {{"tau_c", FES_DOUBLE(model.tau_c)},
        {"r_bar", FES_DOUBLE(model.r_bar)},
        {"a_rest", FES_DOUBLE(model.a_rest)},
        {"k_m", FES_DOUBLE(model.k_m)},
        {"tau_1", FES_DOUBLE(model.tau_1)},
        {"tau_2", FES_DOUBLE(model.tau_2)},
        {"alpha_a", FES_DOUBLE(model.alpha_a)},
        {"tau_fat", FES_DOUBLE(model.tau_fat)}}},
      {"train",
       {{"times", [](ScenarioConfig& c, const std::string& v) { c.train.times = to_list(v); },
         [](const ScenarioConfig& c) { return fmt_list(c.train.times); }},
        {"amplitudes", [](ScenarioConfig& c, const std::string& v) { c.train.amplitudes = to_list(v); },
         [](const ScenarioConfig& c) { return fmt_list(c.train.amplitudes); }},
        {"horizon", FES_DOUBLE(train.horizon)},
        {"pulses", FES_SIZE(train.pulses)},
        {"spacing", FES_DOUBLE(train.spacing)},
        {"amplitude", FES_DOUBLE(train.amplitude)},
        {"i_min", FES_DOUBLE(train.i_min)},
        {"empty", FES_BOOL(train.empty)}}},
      {"simulation",
       {{"step", FES_DOUBLE(simulation.step)},
        {"method",
         [](ScenarioConfig& c, const std::string& v) {
           if (v != "rk4" && v != "adaptive") throw InvalidArgument("method must be rk4 or adaptive");
           c.simulation.method = v;
         },
         [](const ScenarioConfig& c) { return c.simulation.method; }},
        {"fatigue", FES_BOOL(simulation.fatigue)},
        {"record_every", FES_SIZE(simulation.record_every)},
        {"abs_tol", FES_DOUBLE(simulation.abs_tol)},
        {"rel_tol", FES_DOUBLE(simulation.rel_tol)}}},
      {"objective",
       {{"kind", [](ScenarioConfig& c, const std::string& v) { c.objective.kind = objective_from_string(v); },
         [](const ScenarioConfig& c) { return std::string(to_string(c.objective.kind)); }},
        {"backend", [](ScenarioConfig& c, const std::string& v) { c.objective.backend = backend_from_string(v); },
         [](const ScenarioConfig& c) { return std::string(to_string(c.objective.backend)); }},
        {"f_ref", FES_DOUBLE(objective.f_ref)},
        {"c_ref", FES_DOUBLE(objective.c_ref)},
        {"w1", FES_DOUBLE(objective.w1)},
        {"a_s", FES_DOUBLE(objective.a_s)},
        {"scale", FES_DOUBLE(objective.scale)},
        {"scheme", [](ScenarioConfig& c, const std::string& v) { c.objective.scheme = scheme_from_string(v.c_str()); },
         [](const ScenarioConfig& c) { return std::string(to_string(c.objective.scheme)); }},
        {"p", FES_SIZE(objective.p)},
        {"nu", FES_DOUBLE(objective.nu)},
        {"sim_step", FES_DOUBLE(objective.sim_step)},
        {"repeats", FES_SIZE(objective.repeats)},
        {"rest_ms", FES_DOUBLE(objective.rest_ms)}}},
      {"solver",
       {{"mu0", FES_DOUBLE(solver.options.mu0)},
        {"mu_min", FES_DOUBLE(solver.options.mu_min)},
        {"mu_factor", FES_DOUBLE(solver.options.mu_factor)},
        {"kkt_tol", FES_DOUBLE(solver.options.kkt_tol)},
        {"feas_tol", FES_DOUBLE(solver.options.feas_tol)},
        {"h_rel", FES_DOUBLE(solver.options.h_rel)},
        {"nudge", FES_DOUBLE(solver.options.nudge)},
        {"max_inner", FES_SIZE(solver.options.max_inner)},
        {"max_backtracks", FES_SIZE(solver.options.max_backtracks)},
        {"parallel", FES_BOOL(solver.options.parallel_gradient)},
        {"trace", FES_BOOL(solver.options.trace)},
        {"t_max", FES_DOUBLE(solver.t_max)},
        {"freeze_amplitudes", FES_BOOL(solver.freeze_amplitudes)},
        {"freeze_times", FES_BOOL(solver.freeze_times)},
        {"freeze_horizon", FES_BOOL(solver.freeze_horizon)},
        {"starts", FES_SIZE(solver.starts)}}},
      {"program",
       {{"kind", [](ScenarioConfig& c, const std::string& v) { c.program.kind = program_from_string(v); },
         [](const ScenarioConfig& c) { return std::string(to_string(c.program.kind)); }},
        {"f_ref", FES_DOUBLE(program.f_ref)},
        {"k_ratio", FES_DOUBLE(program.k_ratio)},
        {"train_ms", FES_DOUBLE(program.train_ms)},
        {"pulses", FES_SIZE(program.pulses)},
        {"i_min", FES_DOUBLE(program.i_min)},
        {"rest_ms", FES_DOUBLE(program.rest_ms)},
        {"rest_cap_ms", FES_DOUBLE(program.rest_cap_ms)},
        {"t_f_s", FES_DOUBLE(program.t_f_s)},
        {"k_fatigue", FES_DOUBLE(program.k_fatigue)},
        {"drift", FES_DOUBLE(program.drift)},
        {"record_every", FES_SIZE(program.record_every)}}},
      {"output", {{"dir", FES_STRING(output.dir)}, {"prefix", FES_STRING(output.prefix)}}},
      {"run",
       {{"seed", [](ScenarioConfig& c, const std::string& v) { c.run.seed = to_uint(v); },
         [](const ScenarioConfig& c) { return std::to_string(c.run.seed); }},
        {"suite", FES_STRING(run.suite)},
        {"cases", FES_SIZE(run.cases)},
        {"bench_points", FES_SIZE(run.bench_points)},
        {"speedup_threshold", FES_DOUBLE(run.speedup_threshold)}}},
  };
  return table;
}

#undef FES_DOUBLE
#undef FES_SIZE
#undef FES_BOOL
#undef FES_STRING

}  // namespace

PulseTrain TrainConfig::build() const {
  if (empty) {
    if (!(horizon > 0.0)) throw ConfigError("[train] an empty train needs a positive horizon");
    PulseTrain t;
    t.times = {0.0};
    t.amplitudes = {0.0};
    t.horizon = horizon;
    t.i_min = i_min;
    return t;
  }
  PulseTrain t;
  if (!times.empty()) {
    t.times = times;
    t.amplitudes = amplitudes.empty() ? std::vector<double>(times.size(), amplitude) : amplitudes;
    t.horizon = horizon;
    t.i_min = i_min;
  } else {
    t = PulseTrain::regular(pulses, spacing, i_min, amplitude);
    if (horizon > 0.0) t.horizon = horizon;
  }
  try {
    t.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("[train] ") + e.what());
  }
  return t;
}

SimOptions SimulationConfig::options() const {
  SimOptions o;
  o.step = step;
  o.method = method == "adaptive" ? Integrator::Adaptive : Integrator::FixedRk4;
  o.record_every = record_every;
  o.abs_tol = abs_tol;
  o.rel_tol = rel_tol;
  return o;
}

bool SolverConfig::operator==(const SolverConfig& o) const {
  const auto& a = options;
  const auto& b = o.options;
  return a.mu0 == b.mu0 && a.mu_min == b.mu_min && a.mu_factor == b.mu_factor && a.kkt_tol == b.kkt_tol &&
         a.feas_tol == b.feas_tol && a.h_rel == b.h_rel && a.nudge == b.nudge && a.max_inner == b.max_inner &&
         a.max_backtracks == b.max_backtracks && a.parallel_gradient == b.parallel_gradient && a.trace == b.trace &&
         t_max == o.t_max && freeze_amplitudes == o.freeze_amplitudes && freeze_times == o.freeze_times &&
         freeze_horizon == o.freeze_horizon && starts == o.starts;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  return a.tau_c == b.tau_c && a.r_bar == b.r_bar && a.a_rest == b.a_rest && a.k_m == b.k_m && a.tau_1 == b.tau_1 &&
         a.tau_2 == b.tau_2 && a.alpha_a == b.alpha_a && a.tau_fat == b.tau_fat;
}

bool operator==(const ObjectiveSpec& a, const ObjectiveSpec& b) {
  return a.kind == b.kind && a.backend == b.backend && a.f_ref == b.f_ref && a.c_ref == b.c_ref && a.w1 == b.w1 &&
         a.a_s == b.a_s && a.scale == b.scale && a.scheme == b.scheme && a.p == b.p && a.nu == b.nu &&
         a.sim_step == b.sim_step && a.repeats == b.repeats && a.rest_ms == b.rest_ms;
}

bool operator==(const ProgramSpec& a, const ProgramSpec& b) {
  return a.kind == b.kind && a.f_ref == b.f_ref && a.k_ratio == b.k_ratio && a.train_ms == b.train_ms &&
         a.pulses == b.pulses && a.i_min == b.i_min && a.rest_ms == b.rest_ms && a.rest_cap_ms == b.rest_cap_ms &&
         a.t_f_s == b.t_f_s && a.k_fatigue == b.k_fatigue && a.drift == b.drift && a.record_every == b.record_every;
}

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
  return a.model == b.model && a.train == b.train && a.simulation == b.simulation && a.objective == b.objective &&
         a.solver == b.solver && a.program == b.program && a.output == b.output && a.run == b.run &&
         a.sections == b.sections;
}

void ScenarioConfig::require(std::initializer_list<const char*> names) const {
  for (const char* n : names) {
    if (!has(n)) throw ConfigError(std::string("missing section [") + n + "]");
  }
}

ScenarioConfig parse_scenario(const std::string& text, const std::string& origin) {
  ScenarioConfig cfg;
  const std::vector<Key>* keys = nullptr;
  std::string section;
  std::map<std::string, std::size_t> seen;  // "section.key" -> line
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw ConfigError(fmt::format("{}:{}: {}", origin, line_no, what));
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      keys = nullptr;
      for (const auto& [name, ks] : schema()) {
        if (name == section) keys = &ks;
      }
      if (!keys) fail("unknown section [" + section + "]");
      if (!cfg.sections.insert(section).second) fail("duplicate section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    if (!keys) fail("key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    const auto hash = value.find(" #");
    if (hash != std::string::npos) value = trim(value.substr(0, hash));
    const Key* k = nullptr;
    for (const auto& cand : *keys) {
      if (cand.name == key) k = &cand;
    }
    if (!k) fail("unknown key '" + key + "' in [" + section + "]");
    const auto [it, fresh] = seen.emplace(section + "." + key, line_no);
    if (!fresh) fail(fmt::format("key '{}' already set on line {}", key, it->second));
    try {
      k->set(cfg, value);
    } catch (const InvalidArgument& e) {
      fail("key '" + key + "': " + e.what());
    }
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_scenario(buf.str(), path);
}

std::string serialize_scenario(const ScenarioConfig& cfg) {
  const ScenarioConfig defaults;
  std::string out;
  for (const auto& [name, keys] : schema()) {
    bool differs = false;
    for (const auto& k : keys) differs = differs || k.get(cfg) != k.get(defaults);
    if (!cfg.has(name) && !differs) continue;
    out += "[" + name + "]\n";
    for (const auto& k : keys) out += k.name + " = " + k.get(cfg) + "\n";
    out += "\n";
  }
  return out;
}

std::string config_hash(const ScenarioConfig& cfg) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : serialize_scenario(cfg)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace fes
