#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sentinel/observer.hpp"

namespace sentinel {

using ValueFunction = std::vector<double>;

// Absolute tolerance for membership in the optimal action set.
inline constexpr double kValueTieTolerance = 1e-9;

/// Successor observer-state indices that can occur from S under d when the
/// true state is z, read off the observer automaton.
inline std::vector<std::uint32_t> automaton_q(const ObserverAutomaton& obs, std::uint32_t s,
                                              const DefenderAction& d, const SystemState& z) {
  std::vector<std::uint32_t> out;
  for (const auto& o : realizable_observations(z, d, obs.flags()))
    out.push_back(obs.successor(s, d, o));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Q-sets of every (observer state, action, candidate) flattened for fast
/// backups. Candidates sharing a Q-set are merged, keeping the largest state
/// cost, since only the maximum over candidates enters the backup.
class QTable {
 public:
  struct Entry {
    double state_cost;
    std::uint32_t succ_begin;
    std::uint32_t succ_end;
  };

  static QTable build(const ObserverAutomaton& obs, const CostModel& cm) {
    QTable t;
    t.states_ = obs.size();
    t.slots_ = obs.action_count();
    t.state_costs_ = {cm.c_n, cm.c_r, cm.c_w, cm.c_f};
    const auto actions = defender_actions(obs.computers());
    t.group_begin_.reserve(t.states_ * t.slots_ + 1);
    for (std::uint32_t s = 0; s < obs.size(); ++s) {
      const auto candidates = obs.state(s).candidates();
      for (const auto& d : actions) {
        t.group_begin_.push_back(static_cast<std::uint32_t>(t.entries_.size()));
        std::map<std::vector<std::uint32_t>, double> merged;
        for (const auto& z : candidates) {
          auto q = automaton_q(obs, s, d, z);
          double c = state_cost(z, cm);
          auto [it, inserted] = merged.try_emplace(std::move(q), c);
          if (!inserted) it->second = std::max(it->second, c);
        }
        for (const auto& [q, c] : merged) {
          Entry e{c, static_cast<std::uint32_t>(t.succ_.size()), 0};
          t.succ_.insert(t.succ_.end(), q.begin(), q.end());
          e.succ_end = static_cast<std::uint32_t>(t.succ_.size());
          t.entries_.push_back(e);
        }
      }
    }
    t.group_begin_.push_back(static_cast<std::uint32_t>(t.entries_.size()));
    return t;
  }

  std::size_t states() const noexcept { return states_; }
  std::size_t slots() const noexcept { return slots_; }

  std::span<const Entry> entries(std::size_t s, std::size_t slot) const {
    const std::size_t g = s * slots_ + slot;
    return {entries_.data() + group_begin_[g], entries_.data() + group_begin_[g + 1]};
  }

  std::span<const std::uint32_t> successors(const Entry& e) const {
    return {succ_.data() + e.succ_begin, succ_.data() + e.succ_end};
  }

  /// Max over candidates of C_Z + beta * max_{S' in Q} V(S'), for one action.
  template <class Real>
  Real worst_case(std::size_t s, std::size_t slot, const std::vector<Real>& v, Real beta) const {
    Real worst = -std::numeric_limits<Real>::infinity();
    for (const auto& e : entries(s, slot)) {
      Real best_next = -std::numeric_limits<Real>::infinity();
      for (auto q : successors(e)) best_next = std::max(best_next, v[q]);
      worst = std::max(worst, static_cast<Real>(e.state_cost) + beta * best_next);
    }
    return worst;
  }

  /// State costs (c_N..c_F) the table was built with.
  const std::array<double, 4>& state_costs() const noexcept { return state_costs_; }

 private:
  std::size_t states_ = 0;
  std::size_t slots_ = 0;
  std::array<double, 4> state_costs_{};
  std::vector<std::uint32_t> group_begin_;
  std::vector<Entry> entries_;
  std::vector<std::uint32_t> succ_;
};

namespace detail {

inline std::vector<double> slot_costs(int k, const CostModel& cm) {
  std::vector<double> out;
  for (const auto& d : defender_actions(k)) out.push_back(action_cost(d, cm));
  return out;
}

inline void check_table(const QTable& table, const CostModel& cm, std::size_t values) {
  if (values != table.states())
    throw ModelError("value function has " + std::to_string(values) + " entries, expected " +
                     std::to_string(table.states()));
  const std::array<double, 4> costs{cm.c_n, cm.c_r, cm.c_w, cm.c_f};
  if (costs != table.state_costs())
    throw ModelError("Q-table was built with different state costs");
}

inline int computers_of(const QTable& table) { return static_cast<int>((table.slots() - 1) / 2); }

}  // namespace detail

/// One application of the min-max operator:
///   TV(S) = min_d max_{Z in S} [C_Z + C(d) + beta * max_{S' in Q(S,d,Z)} V(S')]
template <class Real>
void apply_operator_into(const std::vector<Real>& v, const QTable& table, const CostModel& cm,
                         std::vector<Real>& out) {
  detail::check_table(table, cm, v.size());
  const auto costs = detail::slot_costs(detail::computers_of(table), cm);
  const Real beta = static_cast<Real>(cm.beta);
  out.resize(v.size());
  for (std::size_t s = 0; s < table.states(); ++s) {
    Real best = std::numeric_limits<Real>::infinity();
    for (std::size_t slot = 0; slot < table.slots(); ++slot)
      best = std::min(best, static_cast<Real>(costs[slot]) + table.worst_case(s, slot, v, beta));
    out[s] = best;
  }
}

inline ValueFunction apply_operator(const ValueFunction& v, const QTable& table,
                                    const CostModel& cm) {
  ValueFunction out;
  apply_operator_into(v, table, cm, out);
  return out;
}

struct Backup {
  ValueFunction values;
  std::vector<std::vector<DefenderAction>> minimizers;  // canonical action order
};

inline Backup bellman_backup(const ValueFunction& v, const QTable& table, const CostModel& cm) {
  detail::check_table(table, cm, v.size());
  const int k = detail::computers_of(table);
  const auto actions = defender_actions(k);
  const auto costs = detail::slot_costs(k, cm);
  Backup out{ValueFunction(v.size()), std::vector<std::vector<DefenderAction>>(v.size())};
  std::vector<double> q(table.slots());
  for (std::size_t s = 0; s < table.states(); ++s) {
    for (std::size_t slot = 0; slot < table.slots(); ++slot)
      q[slot] = costs[slot] + table.worst_case(s, slot, v, cm.beta);
    const double best = *std::min_element(q.begin(), q.end());
    out.values[s] = best;
    for (std::size_t slot = 0; slot < table.slots(); ++slot)
      if (q[slot] - best <= kValueTieTolerance) out.minimizers[s].push_back(actions[slot]);
  }
  return out;
}

struct SolveSettings {
  double tolerance = 1e-9;
  std::size_t max_iterations = 100000;
  ValueFunction v0;  // empty means all zero
};

struct ValueIterationResult {
  ValueFunction values;
  std::size_t iterations = 0;
  double residual = 0.0;
  std::vector<double> residuals;  // sup-norm change of every sweep
  double error_bound = 0.0;       // residual * beta / (1 - beta)
};

inline double sup_distance(const ValueFunction& a, const ValueFunction& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Jacobi value iteration until the sup-norm change drops to the tolerance.
/// Iterates in extended precision so that residuals near the tolerance are
/// not swamped by rounding of values in the hundreds.
inline ValueIterationResult value_iteration(const QTable& table, const CostModel& cm,
                                            const SolveSettings& settings = {}) {
  using Wide = long double;
  cm.validate();
  if (!(settings.tolerance > 0.0)) throw ConfigError({"solver tolerance must be positive"});
  if (!settings.v0.empty()) detail::check_table(table, cm, settings.v0.size());
  ValueIterationResult r;
  std::vector<Wide> v(table.states(), 0.0L), next;
  if (!settings.v0.empty()) v.assign(settings.v0.begin(), settings.v0.end());
  while (true) {
    if (r.iterations >= settings.max_iterations)
      throw ConvergenceError("value iteration did not converge in " +
                                 std::to_string(settings.max_iterations) +
                                 " iterations, residual " + std::to_string(r.residual),
                             r.residual);
    apply_operator_into(v, table, cm, next);
    Wide residual = 0.0L;
    for (std::size_t i = 0; i < v.size(); ++i) residual = std::max(residual, std::abs(next[i] - v[i]));
    r.residual = static_cast<double>(residual);
    r.residuals.push_back(r.residual);
    std::swap(v, next);
    ++r.iterations;
    if (r.residual <= settings.tolerance) break;
  }
  r.values.assign(v.begin(), v.end());
  r.error_bound = r.residual * cm.beta / (1.0 - cm.beta);
  return r;
}

/// Sum over candidates of the cost of computer i's level.
inline double confidentiality_threat(const ObserverState& s, int i, const CostModel& cm) {
  if (i < 1 || i > s.computers())
    throw ModelError("computer " + std::to_string(i) + " outside 1.." +
                     std::to_string(s.computers()));
  double t = 0.0;
  for (const auto& z : s.candidates()) t += level_cost(z.level(i), cm);
  return t;
}

/// Picks one action from the optimal set. Null wins unless some optimal
/// action targets a computer with positive confidentiality threat. Among
/// targeted actions: highest threat, then lowest computer index, then sense
/// over re-image.
inline DefenderAction choose_action(std::span<const DefenderAction> optimal,
                                    const ObserverState& s, const CostModel& cm) {
  if (optimal.empty()) throw ModelError("empty optimal action set");
  bool has_null = false;
  const DefenderAction* best = nullptr;
  double best_threat = 0.0;
  for (const auto& d : optimal) {
    if (!d.targets_computer()) {
      has_null = true;
      continue;
    }
    const double threat = confidentiality_threat(s, d.computer, cm);
    bool better = false;
    if (!best) {
      better = true;
    } else if (threat != best_threat) {
      better = threat > best_threat;
    } else if (d.computer != best->computer) {
      better = d.computer < best->computer;
    } else {
      better = d.kind == DefenderAction::Kind::sense && best->kind != DefenderAction::Kind::sense;
    }
    if (better) {
      best = &d;
      best_threat = threat;
    }
  }
  if (!best || (has_null && best_threat <= 0.0)) return DefenderAction::null_action();
  return *best;
}

struct Policy {
  std::vector<DefenderAction> action;
  std::vector<std::vector<DefenderAction>> optimal_set;
  ValueFunction value;
  double residual = 0.0;
  std::size_t iterations = 0;
};

inline Policy extract_policy(const ValueFunction& v, const ObserverAutomaton& obs,
                             const QTable& table, const CostModel& cm) {
  Backup b = bellman_backup(v, table, cm);
  Policy p;
  p.value = v;
  p.optimal_set = std::move(b.minimizers);
  for (std::uint32_t s = 0; s < obs.size(); ++s)
    p.action.push_back(choose_action(p.optimal_set[s], obs.state(s), cm));
  return p;
}

inline Policy solve(const ObserverAutomaton& obs, const QTable& table, const CostModel& cm,
                    const SolveSettings& settings = {}) {
  auto vi = value_iteration(table, cm, settings);
  Policy p = extract_policy(vi.values, obs, table, cm);
  p.residual = vi.residual;
  p.iterations = vi.iterations;
  return p;
}

inline Policy solve(const ObserverAutomaton& obs, const CostModel& cm,
                    const SolveSettings& settings = {}) {
  return solve(obs, QTable::build(obs, cm), cm, settings);
}

// ---------------------------------------------------------------------------
// Policy file: line-oriented, one record per observer state.

struct PolicyFile {
  int k = 0;
  ModelFlags flags;
  StartPhase start = StartPhase::intermediate;
  ObserverState initial;
  CostModel costs;
  Policy policy;
  std::vector<ObserverState> states;
};

namespace detail {

inline std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string join_actions(const std::vector<DefenderAction>& ds) {
  std::string s;
  for (const auto& d : ds) {
    if (!s.empty()) s += ',';
    s += d.name();
  }
  return s;
}

}  // namespace detail

inline void write_policy(const ObserverAutomaton& obs, const CostModel& cm, const Policy& p,
                         std::ostream& out) {
  using detail::fmt_double;
  out << "sentinel-policy 1\n";
  out << "k " << obs.computers() << '\n';
  out << "h_on_w " << (obs.flags().h_admissible_on_w ? "true" : "false") << '\n';
  out << "start " << start_phase_name(obs.start_phase()) << '\n';
  out << "initial " << obs.initial().name() << '\n';
  out << "state_costs " << fmt_double(cm.c_n) << ' ' << fmt_double(cm.c_r) << ' '
      << fmt_double(cm.c_w) << ' ' << fmt_double(cm.c_f) << '\n';
  out << "null_cost " << fmt_double(cm.cost_null) << '\n';
  out << "sense_cost";
  for (double c : cm.cost_sense) out << ' ' << fmt_double(c);
  out << "\nreimage_cost";
  for (double c : cm.cost_reimage) out << ' ' << fmt_double(c);
  out << "\nbeta " << fmt_double(cm.beta) << '\n';
  out << "iterations " << p.iterations << '\n';
  out << "residual " << fmt_double(p.residual) << '\n';
  out << "states " << obs.size() << '\n';
  for (std::uint32_t s = 0; s < obs.size(); ++s)
    out << "s " << s << ' ' << obs.state(s).name() << ' ' << fmt_double(p.value[s]) << ' '
        << p.action[s].name() << ' ' << detail::join_actions(p.optimal_set[s]) << '\n';
}

inline PolicyFile read_policy(std::istream& in) {
  PolicyFile f;
  std::string line;
  std::size_t declared = 0;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    throw ParseError("policy line " + std::to_string(lineno) + ": " + why);
  };
  auto read_list = [](std::istringstream& ls) {
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (lineno == 1) {
      int version = 0;
      if (tag != "sentinel-policy" || !(ls >> version) || version != 1) fail("not a policy file");
      continue;
    }
    if (tag == "k") {
      ls >> f.k;
    } else if (tag == "h_on_w") {
      std::string v;
      ls >> v;
      if (v != "true" && v != "false") fail("h_on_w must be true or false");
      f.flags.h_admissible_on_w = v == "true";
    } else if (tag == "start") {
      std::string v;
      ls >> v;
      if (v == "decision") f.start = StartPhase::decision;
      else if (v == "intermediate") f.start = StartPhase::intermediate;
      else fail("bad start phase " + v);
    } else if (tag == "initial") {
      std::string v;
      ls >> v;
      f.initial = ObserverState::parse(v);
    } else if (tag == "state_costs") {
      ls >> f.costs.c_n >> f.costs.c_r >> f.costs.c_w >> f.costs.c_f;
    } else if (tag == "null_cost") {
      ls >> f.costs.cost_null;
    } else if (tag == "sense_cost") {
      f.costs.cost_sense = read_list(ls);
      continue;  // list reads stop on failure
    } else if (tag == "reimage_cost") {
      f.costs.cost_reimage = read_list(ls);
      continue;
    } else if (tag == "beta") {
      ls >> f.costs.beta;
    } else if (tag == "iterations") {
      ls >> f.policy.iterations;
    } else if (tag == "residual") {
      ls >> f.policy.residual;
    } else if (tag == "states") {
      ls >> declared;
    } else if (tag == "s") {
      std::size_t idx = 0;
      std::string cand, act, opt;
      double value = 0.0;
      if (!(ls >> idx >> cand >> value >> act >> opt)) fail("bad state record");
      if (idx != f.states.size()) fail("state records out of order");
      f.states.push_back(ObserverState::parse(cand));
      f.policy.value.push_back(value);
      f.policy.action.push_back(parse_defender_action(act));
      std::vector<DefenderAction> set;
      std::string_view rest = opt;
      while (!rest.empty()) {
        auto comma = rest.find(',');
        set.push_back(parse_defender_action(rest.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
      f.policy.optimal_set.push_back(std::move(set));
    } else {
      fail("unknown record \"" + tag + "\"");
    }
    if (ls.fail()) fail("malformed " + tag + " record");
  }
  if (f.k < 1) throw ParseError("policy: missing computer count");
  if (f.states.size() != declared)
    throw ParseError("policy: declared " + std::to_string(declared) + " states, found " +
                     std::to_string(f.states.size()));
  f.costs.validate();
  return f;
}

}  // namespace sentinel
