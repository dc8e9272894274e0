#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sentinel/experiments.hpp"

namespace sentinel {

/// Initial observer choice: all computers normal, every state possible, or
/// an explicit candidate list.
struct InitialChoice {
  enum class Kind { normal, full, explicit_set };
  Kind kind = Kind::normal;
  std::string set;  // "{NN,RN}" when explicit

  ObserverState resolve(int k) const {
    switch (kind) {
      case Kind::normal: return initial_observer(k);
      case Kind::full: return full_observer(k);
      case Kind::explicit_set: {
        auto s = ObserverState::parse(set);
        if (s.computers() != k) throw ConfigError({"observer.initial: candidates need " +
                                                   std::to_string(k) + " levels"});
        return s;
      }
    }
    return initial_observer(k);
  }

  std::string text() const {
    switch (kind) {
      case Kind::normal: return "normal";
      case Kind::full: return "full";
      case Kind::explicit_set: return set;
    }
    return "normal";
  }

  friend bool operator==(const InitialChoice&, const InitialChoice&) = default;
};

struct SweepSettings {
  double r_from = 3.0;
  double r_to = 30.0;
  double r_step = 0.2;
  unsigned workers = 1;

  friend bool operator==(const SweepSettings&, const SweepSettings&) = default;
};

struct RunConfig {
  int k = 2;
  CostModel costs = CostModel::uniform(2, 0.1, 10.0);
  ModelFlags flags;
  StartPhase start = StartPhase::intermediate;
  InitialChoice initial;
  double tolerance = 1e-9;
  std::size_t max_iterations = 100000;
  SweepSettings sweep;
  std::string output_dir = "out";
  std::uint64_t seed = 1;

  SolveSettings solve_settings() const {
    SolveSettings s;
    s.tolerance = tolerance;
    s.max_iterations = max_iterations;
    return s;
  }

  ObserverOptions observer_options() const {
    ObserverOptions o;
    o.start = start;
    return o;
  }

  friend bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.k == b.k && a.costs.c_n == b.costs.c_n && a.costs.c_r == b.costs.c_r &&
           a.costs.c_w == b.costs.c_w && a.costs.c_f == b.costs.c_f &&
           a.costs.cost_null == b.costs.cost_null && a.costs.cost_sense == b.costs.cost_sense &&
           a.costs.cost_reimage == b.costs.cost_reimage && a.costs.beta == b.costs.beta &&
           a.flags == b.flags && a.start == b.start && a.initial == b.initial &&
           a.tolerance == b.tolerance && a.max_iterations == b.max_iterations &&
           a.sweep == b.sweep && a.output_dir == b.output_dir && a.seed == b.seed;
  }
};

namespace detail {

class ConfigReader {
 public:
  std::vector<std::string> errors;

  void reject_unknown(const nlohmann::json& obj, const std::string& where,
                      std::initializer_list<const char*> known) {
    std::set<std::string> ok(known.begin(), known.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!ok.count(it.key())) errors.push_back(where + it.key() + ": unknown key");
  }

  const nlohmann::json* section(const nlohmann::json& obj, const char* key) {
    if (!obj.contains(key)) return nullptr;
    const auto& v = obj.at(key);
    if (!v.is_object()) {
      errors.push_back(std::string(key) + ": expected an object");
      return nullptr;
    }
    return &v;
  }

  void number(const nlohmann::json* obj, const std::string& where, const char* key, double& out) {
    if (!obj || !obj->contains(key)) return;
    const auto& v = obj->at(key);
    if (!v.is_number()) errors.push_back(where + key + ": expected a number");
    else out = v.get<double>();
  }

  template <class Int>
  void integer(const nlohmann::json* obj, const std::string& where, const char* key, Int& out) {
    if (!obj || !obj->contains(key)) return;
    const auto& v = obj->at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0))
      errors.push_back(where + key + ": expected a nonnegative integer");
    else out = v.get<Int>();
  }

  void boolean(const nlohmann::json* obj, const std::string& where, const char* key, bool& out) {
    if (!obj || !obj->contains(key)) return;
    const auto& v = obj->at(key);
    if (!v.is_boolean()) errors.push_back(where + key + ": expected true or false");
    else out = v.get<bool>();
  }

  void string(const nlohmann::json* obj, const std::string& where, const char* key,
              std::string& out) {
    if (!obj || !obj->contains(key)) return;
    const auto& v = obj->at(key);
    if (!v.is_string()) errors.push_back(where + key + ": expected a string");
    else out = v.get<std::string>();
  }

  /// Scalar (applied to every computer) or one value per computer.
  void per_computer(const nlohmann::json* obj, const std::string& where, const char* key, int k,
                    std::vector<double>& out) {
    if (!obj || !obj->contains(key)) return;
    const auto& v = obj->at(key);
    if (v.is_number()) {
      out.assign(static_cast<std::size_t>(std::max(k, 0)), v.get<double>());
    } else if (v.is_array() && std::all_of(v.begin(), v.end(), [](auto& x) { return x.is_number(); })) {
      out = v.get<std::vector<double>>();
      if (static_cast<int>(out.size()) != k)
        errors.push_back(where + key + ": expected " + std::to_string(k) + " values, got " +
                         std::to_string(out.size()));
    } else {
      errors.push_back(where + key + ": expected a number or a list of numbers");
    }
  }
};

}  // namespace detail

/// Parses and validates a configuration document. Every violation found is
/// reported in a single ConfigError.
inline RunConfig parse_config(const nlohmann::json& doc) {
  detail::ConfigReader rd;
  RunConfig c;
  if (!doc.is_object()) throw ConfigError({"configuration must be a JSON object"});
  rd.reject_unknown(doc, "",
                    {"k", "costs", "model", "observer", "solver", "sweep", "output_dir", "seed"});

  rd.integer(&doc, "", "k", c.k);
  if (c.k < 1 || c.k > kMaxComputers)
    rd.errors.push_back("k: must lie in 1.." + std::to_string(kMaxComputers));
  c.costs = CostModel::uniform(std::max(c.k, 0), 0.1, 10.0);

  if (auto* s = rd.section(doc, "costs")) {
    rd.reject_unknown(*s, "costs.",
                      {"c_n", "c_r", "c_w", "c_f", "null", "sense", "reimage", "beta"});
    rd.number(s, "costs.", "c_n", c.costs.c_n);
    rd.number(s, "costs.", "c_r", c.costs.c_r);
    rd.number(s, "costs.", "c_w", c.costs.c_w);
    rd.number(s, "costs.", "c_f", c.costs.c_f);
    rd.number(s, "costs.", "null", c.costs.cost_null);
    rd.per_computer(s, "costs.", "sense", c.k, c.costs.cost_sense);
    rd.per_computer(s, "costs.", "reimage", c.k, c.costs.cost_reimage);
    rd.number(s, "costs.", "beta", c.costs.beta);
  }
  for (const auto& v : c.costs.violations()) rd.errors.push_back("costs: " + v);

  if (auto* s = rd.section(doc, "model")) {
    rd.reject_unknown(*s, "model.", {"h_on_w"});
    rd.boolean(s, "model.", "h_on_w", c.flags.h_admissible_on_w);
  }

  if (auto* s = rd.section(doc, "observer")) {
    rd.reject_unknown(*s, "observer.", {"start", "initial"});
    std::string start = std::string(start_phase_name(c.start));
    rd.string(s, "observer.", "start", start);
    if (start == "decision") c.start = StartPhase::decision;
    else if (start == "intermediate") c.start = StartPhase::intermediate;
    else rd.errors.push_back("observer.start: expected \"decision\" or \"intermediate\"");
    std::string initial = "normal";
    rd.string(s, "observer.", "initial", initial);
    if (initial == "normal") {
      c.initial = {};
    } else if (initial == "full") {
      c.initial = {InitialChoice::Kind::full, ""};
    } else {
      try {
        auto parsed = ObserverState::parse(initial);
        if (parsed.computers() != c.k)
          rd.errors.push_back("observer.initial: candidates need " + std::to_string(c.k) +
                              " levels");
        c.initial = {InitialChoice::Kind::explicit_set, parsed.name()};
      } catch (const Error& e) {
        rd.errors.push_back(std::string("observer.initial: ") + e.what());
      }
    }
  }

  if (auto* s = rd.section(doc, "solver")) {
    rd.reject_unknown(*s, "solver.", {"tolerance", "max_iterations"});
    rd.number(s, "solver.", "tolerance", c.tolerance);
    rd.integer(s, "solver.", "max_iterations", c.max_iterations);
  }
  if (!(c.tolerance > 0.0)) rd.errors.push_back("solver.tolerance: must be positive");
  if (c.max_iterations < 1) rd.errors.push_back("solver.max_iterations: must be positive");

  if (auto* s = rd.section(doc, "sweep")) {
    rd.reject_unknown(*s, "sweep.", {"r_from", "r_to", "r_step", "workers"});
    rd.number(s, "sweep.", "r_from", c.sweep.r_from);
    rd.number(s, "sweep.", "r_to", c.sweep.r_to);
    rd.number(s, "sweep.", "r_step", c.sweep.r_step);
    rd.integer(s, "sweep.", "workers", c.sweep.workers);
  }
  if (!(c.sweep.r_from > 0.0)) rd.errors.push_back("sweep.r_from: must be positive");
  if (!(c.sweep.r_to >= c.sweep.r_from)) rd.errors.push_back("sweep.r_to: must be >= r_from");
  if (!(c.sweep.r_step > 0.0)) rd.errors.push_back("sweep.r_step: must be positive");
  if (c.sweep.workers < 1) rd.errors.push_back("sweep.workers: must be positive");

  rd.string(&doc, "", "output_dir", c.output_dir);
  rd.integer(&doc, "", "seed", c.seed);

  if (!rd.errors.empty()) throw ConfigError(std::move(rd.errors));
  return c;
}

inline RunConfig parse_config_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("configuration: ") + e.what());
  }
  return parse_config(doc);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read configuration " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

namespace detail {

inline nlohmann::json cost_list(const std::vector<double>& v) {
  if (!v.empty() && std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); }))
    return v.front();
  return v;
}

}  // namespace detail

/// Complete configuration with every default spelled out.
inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["k"] = c.k;
  j["costs"] = {{"c_n", c.costs.c_n},
                {"c_r", c.costs.c_r},
                {"c_w", c.costs.c_w},
                {"c_f", c.costs.c_f},
                {"null", c.costs.cost_null},
                {"sense", detail::cost_list(c.costs.cost_sense)},
                {"reimage", detail::cost_list(c.costs.cost_reimage)},
                {"beta", c.costs.beta}};
  j["model"] = {{"h_on_w", c.flags.h_admissible_on_w}};
  j["observer"] = {{"start", std::string(start_phase_name(c.start))},
                   {"initial", c.initial.text()}};
  j["solver"] = {{"tolerance", c.tolerance}, {"max_iterations", c.max_iterations}};
  j["sweep"] = {{"r_from", c.sweep.r_from},
                {"r_to", c.sweep.r_to},
                {"r_step", c.sweep.r_step},
                {"workers", c.sweep.workers}};
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  return j;
}

inline std::string serialize_config(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

/// 64-bit FNV-1a of the canonical serialization, as 16 hex digits.
inline std::string config_hash(const RunConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sentinel
