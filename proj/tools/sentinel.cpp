#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sentinel/automaton.hpp"
#include "sentinel/config.hpp"
#include "sentinel/experiments.hpp"
#include "sentinel/observer.hpp"
#include "sentinel/sim.hpp"
#include "sentinel/solver.hpp"

namespace fs = std::filesystem;
using namespace sentinel;

namespace {

constexpr const char* kVersion = "0.1.0";

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kCapacity = 3, kNoConvergence = 4 };

struct Common {
  std::string config_path;
  std::optional<int> k;
  std::optional<bool> h_on_w;
  std::optional<std::string> start;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON configuration file");
  cmd->add_option("--k", c.k, "Number of computers")->check(CLI::Range(1, kMaxComputers));
  cmd->add_option("--h-on-w", c.h_on_w, "Allow network attacks onto W computers (true|false)");
  cmd->add_option("--start", c.start, "Initial observer phase (decision|intermediate)")
      ->check(CLI::IsMember({"decision", "intermediate"}));
  cmd->add_option("--out", c.out, "Output directory");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? parse_config(nlohmann::json::object())
                                        : load_config(c.config_path);
  nlohmann::json j = to_json(cfg);
  if (c.k && *c.k != cfg.k) {
    j["k"] = *c.k;
    auto resize = [&](nlohmann::json& v) {
      if (v.is_array()) v = v.front();
    };
    resize(j["costs"]["sense"]);
    resize(j["costs"]["reimage"]);
    if (cfg.initial.kind == InitialChoice::Kind::explicit_set) j["observer"]["initial"] = "normal";
  }
  if (c.h_on_w) j["model"]["h_on_w"] = *c.h_on_w;
  if (c.start) j["observer"]["start"] = *c.start;
  if (!c.out.empty()) {
    j["output_dir"] = c.out;
  } else if (const char* env = std::getenv("SENTINEL_OUT_DIR"); env && *env) {
    j["output_dir"] = env;
  }
  return parse_config(j);
}

ObserverAutomaton build_observer(const RunConfig& cfg) {
  return build_observer_automaton(build_system_automaton(cfg.k, cfg.flags),
                                  cfg.initial.resolve(cfg.k), cfg.observer_options());
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

nlohmann::json manifest_base(const RunConfig& cfg, const std::string& command) {
  nlohmann::json m;
  m["tool"] = "sentinel";
  m["version"] = kVersion;
  m["command"] = command;
  m["config_hash"] = config_hash(cfg);
  m["config"] = to_json(cfg);
  return m;
}

nlohmann::json observer_counts(const ObserverAutomaton& obs) {
  return {{"states", obs.size()},
          {"transitions", obs.transition_count()},
          {"intermediate_states", obs.intermediate_count()},
          {"bipartite_edges", obs.bipartite_edge_count()}};
}

int cmd_model_export(const Common& c, const std::string& format) {
  RunConfig cfg = resolve(c);
  const std::string& file = c.out;
  auto aut = build_system_automaton(cfg.k, cfg.flags);
  std::ostringstream ss;
  if (format == "dot") write_dot(aut, ss);
  else write_fsm(aut, ss);
  if (file.empty() || file == "-") {
    std::cout << ss.str();
  } else {
    fs::path p(file);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_file(p, ss.str());
  }
  return kOk;
}

int cmd_observer_build(const Common& c) {
  RunConfig cfg = resolve(c);
  auto obs = build_observer(cfg);
  auto dir = prepare_dir(cfg.output_dir);
  std::ostringstream fsm, dot;
  write_observer_fsm(obs, fsm);
  write_observer_dot(obs, dot);
  write_file(dir / "observer.fsm", fsm.str());
  write_file(dir / "observer.dot", dot.str());
  auto m = manifest_base(cfg, "observer build");
  m["counts"] = observer_counts(obs);
  write_file(dir / "manifest.json", m.dump(2) + "\n");
  std::cout << "states=" << obs.size() << " transitions=" << obs.transition_count()
            << " intermediate_states=" << obs.intermediate_count()
            << " bipartite_edges=" << obs.bipartite_edge_count() << '\n';
  return kOk;
}

int cmd_solve(const Common& c, std::optional<double> r, std::optional<double> tol) {
  RunConfig cfg = resolve(c);
  if (r) cfg.costs = with_reimage_cost(cfg.costs, *r);
  if (tol) cfg.tolerance = *tol;
  cfg = parse_config(to_json(cfg));
  auto obs = build_observer(cfg);
  const auto table = QTable::build(obs, cfg.costs);
  const auto vi = value_iteration(table, cfg.costs, cfg.solve_settings());
  Policy p = extract_policy(vi.values, obs, table, cfg.costs);
  p.iterations = vi.iterations;
  p.residual = vi.residual;

  auto dir = prepare_dir(cfg.output_dir);
  std::ostringstream pol;
  write_policy(obs, cfg.costs, p, pol);
  write_file(dir / "policy.txt", pol.str());

  std::array<std::size_t, 3> kinds{};
  for (const auto& d : p.action) ++kinds[action_rank(d)];
  auto m = manifest_base(cfg, "solve");
  m["counts"] = observer_counts(obs);
  m["iterations"] = vi.iterations;
  m["residual"] = vi.residual;
  m["error_bound"] = vi.error_bound;
  m["initial_value"] = initial_value(obs, vi.values);
  m["actions"] = {{"null", kinds[0]}, {"sense", kinds[1]}, {"reimage", kinds[2]}};
  write_file(dir / "manifest.json", m.dump(2) + "\n");
  std::cout << "states=" << obs.size() << " iterations=" << vi.iterations
            << " residual=" << detail::fmt_double(vi.residual)
            << " initial_value=" << detail::fmt_double(initial_value(obs, vi.values)) << '\n';
  return kOk;
}

int cmd_sweep(const Common& c, std::optional<double> from, std::optional<double> to,
              std::optional<double> step, std::optional<unsigned> workers) {
  RunConfig cfg = resolve(c);
  if (from) cfg.sweep.r_from = *from;
  if (to) cfg.sweep.r_to = *to;
  if (step) cfg.sweep.r_step = *step;
  if (workers) cfg.sweep.workers = *workers;
  cfg = parse_config(to_json(cfg));
  auto obs = build_observer(cfg);
  auto sweep = sweep_reimage(obs, cfg.costs, cfg.sweep.r_from, cfg.sweep.r_to, cfg.sweep.r_step,
                             cfg.solve_settings(), cfg.sweep.workers);
  auto rep = detect_thresholds(sweep);

  auto dir = prepare_dir(cfg.output_dir);
  std::ostringstream actions, shares, thresholds;
  write_actions_csv(sweep, actions);
  write_shares_csv(sweep, shares);
  write_thresholds_csv(rep, thresholds);
  write_file(dir / "actions.csv", actions.str());
  write_file(dir / "shares.csv", shares.str());
  write_file(dir / "thresholds.csv", thresholds.str());

  auto m = manifest_base(cfg, "sweep");
  m["counts"] = observer_counts(obs);
  m["grid_points"] = sweep.r_values.size();
  m["max_iterations_used"] = *std::max_element(sweep.iterations.begin(), sweep.iterations.end());
  m["max_residual"] = *std::max_element(sweep.residuals.begin(), sweep.residuals.end());
  m["monotone"] = rep.monotone();
  m["reversal_states"] = rep.reversals;
  m["null_left_states"] = rep.null_left;
  write_file(dir / "manifest.json", m.dump(2) + "\n");
  std::cout << "states=" << obs.size() << " grid_points=" << sweep.r_values.size()
            << " monotone=" << (rep.monotone() ? "true" : "false") << '\n';
  return kOk;
}

int cmd_simulate(const std::string& policy_path, const std::string& adversary, std::uint64_t seed,
                 std::size_t horizon, const std::string& script, const std::string& z0_text,
                 const std::string& out_file) {
  std::ifstream in(policy_path);
  if (!in) throw ParseError("cannot read policy " + policy_path);
  PolicyFile pf = read_policy(in);
  ObserverOptions opts;
  opts.start = pf.start;
  auto obs = build_observer_automaton(build_system_automaton(pf.k, pf.flags), pf.initial, opts);
  if (obs.states() != pf.states)
    throw ParseError("policy states do not match the rebuilt observer automaton");

  Adversary adv = Scripted{};
  if (adversary == "uniform") {
    adv = UniformRandom(seed);
  } else if (adversary == "worst") {
    adv = WorstCaseGreedy{pf.policy.value};
  } else {
    Scripted s;
    std::string_view rest = script;
    while (!rest.empty()) {
      auto comma = rest.find(',');
      s.events.push_back(parse_attacker_event(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    adv = std::move(s);
  }
  const SystemState z0 = z0_text.empty() ? pf.initial.candidate(0) : SystemState::parse(z0_text);
  Trace trace = simulate(obs, pf.policy.action, adv, z0, horizon, pf.costs);
  std::ostringstream ss;
  write_trace(trace, ss);
  if (out_file.empty() || out_file == "-") {
    std::cout << ss.str();
  } else {
    fs::path p(out_file);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_file(p, ss.str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Defender policies for networks under progressive attack"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common model_c, observer_c, solve_c, sweep_c;
  std::string format = "fsm";
  std::optional<double> r, tol, r_from, r_to, r_step;
  std::optional<unsigned> workers;
  std::string policy_path, adversary = "uniform", script, z0, trace_out;
  std::uint64_t seed = 1;
  std::size_t horizon = 100;

  auto* model = app.add_subcommand("model", "System automaton");
  model->require_subcommand(1);
  auto* model_export = model->add_subcommand("export", "Write the system automaton");
  add_common(model_export, model_c);
  model_export->add_option("--format", format, "fsm or dot")->check(CLI::IsMember({"fsm", "dot"}));

  auto* observer = app.add_subcommand("observer", "Observer automaton");
  observer->require_subcommand(1);
  auto* observer_build = observer->add_subcommand("build", "Build and export the observer");
  add_common(observer_build, observer_c);

  auto* solve_cmd = app.add_subcommand("solve", "Solve for the optimal policy");
  add_common(solve_cmd, solve_c);
  solve_cmd->add_option("--r", r, "Re-image cost for every computer");
  solve_cmd->add_option("--tol", tol, "Value iteration tolerance");

  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep the re-image cost");
  add_common(sweep_cmd, sweep_c);
  sweep_cmd->add_option("--r-from", r_from, "First grid value");
  sweep_cmd->add_option("--r-to", r_to, "Last grid value");
  sweep_cmd->add_option("--r-step", r_step, "Grid step");
  sweep_cmd->add_option("--workers", workers, "Worker threads");

  auto* sim_cmd = app.add_subcommand("simulate", "Play a policy against an adversary");
  sim_cmd->add_option("--policy", policy_path, "Policy file written by solve")->required();
  sim_cmd->add_option("--adversary", adversary, "uniform, worst or script")
      ->check(CLI::IsMember({"uniform", "worst", "script"}));
  sim_cmd->add_option("--script", script, "Comma separated events for the script adversary");
  sim_cmd->add_option("--seed", seed, "Random seed");
  sim_cmd->add_option("--horizon", horizon, "Number of steps")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--z0", z0, "Initial true state, e.g. NN");
  sim_cmd->add_option("--out", trace_out, "Trace file, - for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*model_export) return cmd_model_export(model_c, format);
    if (*observer_build) return cmd_observer_build(observer_c);
    if (*solve_cmd) return cmd_solve(solve_c, r, tol);
    if (*sweep_cmd) return cmd_sweep(sweep_c, r_from, r_to, r_step, workers);
    if (*sim_cmd)
      return cmd_simulate(policy_path, adversary, seed, horizon, script, z0, trace_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error:\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v << '\n';
    return kConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kConfig;
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return kCapacity;
  } catch (const ConvergenceError& e) {
    std::cerr << "no convergence: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
