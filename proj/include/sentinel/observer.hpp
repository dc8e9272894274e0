#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sentinel/automaton.hpp"
#include "sentinel/model.hpp"

namespace sentinel {

/// The defender's information state: the nonempty set of system states it
/// considers possible. Candidates are kept sorted by canonical index, so two
/// observer states are equal iff their candidate sets are.
class ObserverState {
 public:
  ObserverState() = default;

  ObserverState(int k, std::vector<std::uint32_t> codes, Phase phase = Phase::decision)
      : k_(k), phase_(phase), codes_(std::move(codes)) {
    check_computer_count(k);
    std::sort(codes_.begin(), codes_.end());
    codes_.erase(std::unique(codes_.begin(), codes_.end()), codes_.end());
    if (codes_.empty()) throw ModelError("observer state must have at least one candidate");
    if (codes_.back() >= state_space_size(k))
      throw ModelError("candidate index out of range for K=" + std::to_string(k));
  }

  static ObserverState of(std::span<const SystemState> states) {
    if (states.empty()) throw ModelError("observer state must have at least one candidate");
    std::vector<std::uint32_t> codes;
    for (const auto& z : states) {
      if (z.size() != states.front().size() || z.phase() != states.front().phase())
        throw ModelError("observer candidates must share computer count and phase");
      codes.push_back(z.index());
    }
    return ObserverState(states.front().size(), std::move(codes), states.front().phase());
  }

  static ObserverState of(std::initializer_list<SystemState> states) {
    return of(std::span<const SystemState>(states.begin(), states.size()));
  }

  /// Parses "{FNN,FNR}".
  static ObserverState parse(std::string_view text, Phase phase = Phase::decision) {
    if (text.size() < 3 || text.front() != '{' || text.back() != '}')
      throw ParseError("bad observer state \"" + std::string(text) + "\"");
    std::vector<SystemState> zs;
    std::string_view body = text.substr(1, text.size() - 2);
    while (!body.empty()) {
      auto comma = body.find(',');
      zs.push_back(SystemState::parse(body.substr(0, comma), phase));
      if (comma == std::string_view::npos) break;
      body.remove_prefix(comma + 1);
    }
    return of(zs);
  }

  int computers() const noexcept { return k_; }
  Phase phase() const noexcept { return phase_; }
  std::size_t size() const noexcept { return codes_.size(); }
  std::span<const std::uint32_t> codes() const noexcept { return codes_; }

  SystemState candidate(std::size_t n) const {
    return SystemState::from_index(k_, codes_.at(n), phase_);
  }

  std::vector<SystemState> candidates() const {
    std::vector<SystemState> out;
    out.reserve(codes_.size());
    for (auto c : codes_) out.push_back(SystemState::from_index(k_, c, phase_));
    return out;
  }

  bool contains(const SystemState& z) const {
    return z.size() == k_ && std::binary_search(codes_.begin(), codes_.end(), z.index());
  }

  std::string name() const {
    std::string s = "{";
    for (std::size_t n = 0; n < codes_.size(); ++n) {
      if (n) s += ',';
      s += candidate(n).name();
    }
    return s + "}";
  }

  friend bool operator==(const ObserverState&, const ObserverState&) = default;
  friend auto operator<=>(const ObserverState&, const ObserverState&) = default;

 private:
  int k_ = 0;
  Phase phase_ = Phase::decision;
  std::vector<std::uint32_t> codes_;
};

struct ObserverStateHash {
  std::size_t operator()(const ObserverState& s) const noexcept {
    std::size_t h = std::hash<int>{}(s.computers() * 2 + static_cast<int>(s.phase()));
    for (auto c : s.codes()) h ^= std::hash<std::uint32_t>{}(c) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

// ---------------------------------------------------------------------------
// Direct observer dynamics, computed from the model rules.

inline ObserverState initial_observer(int k) {
  return ObserverState(k, {SystemState::all(k, Level::N).index()});
}

inline ObserverState full_observer(int k) {
  std::vector<std::uint32_t> all(state_space_size(k));
  for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
  return ObserverState(k, std::move(all));
}

/// Splits S by the level of computer i, in level order N..F.
inline std::vector<std::pair<Level, ObserverState>> sense_partition(const ObserverState& s, int i) {
  if (i < 1 || i > s.computers())
    throw ModelError("sense target " + std::to_string(i) + " outside 1.." +
                     std::to_string(s.computers()));
  std::array<std::vector<std::uint32_t>, 4> groups;
  for (const auto& z : s.candidates()) groups[static_cast<int>(z.level(i))].push_back(z.index());
  std::vector<std::pair<Level, ObserverState>> out;
  for (Level z : kLevels)
    if (!groups[static_cast<int>(z)].empty())
      out.emplace_back(z, ObserverState(s.computers(), groups[static_cast<int>(z)], s.phase()));
  return out;
}

namespace detail {

inline ObserverState apply_defender_all(const ObserverState& s, const DefenderAction& d) {
  std::vector<std::uint32_t> out;
  for (const auto& z : s.candidates()) out.push_back(apply_defender(z, d).index());
  return ObserverState(s.computers(), std::move(out), Phase::intermediate);
}

}  // namespace detail

/// Successor observer states of an intermediate observer state, one per
/// attacker observation that some candidate can produce. X comes first, then
/// H(i,j) in lexicographic order.
inline std::vector<std::pair<AttackerObs, ObserverState>> observation_successors(
    const ObserverState& st, const ModelFlags& flags) {
  if (st.phase() != Phase::intermediate)
    throw ModelError("observation successors need an intermediate observer state");
  std::map<AttackerObs, std::vector<std::uint32_t>> groups;
  for (const auto& z : st.candidates())
    for (const auto& a : admissible_attacker(z, flags))
      groups[observe(a)].push_back(apply_attacker(z, a, flags).index());
  std::vector<std::pair<AttackerObs, ObserverState>> out;
  for (auto& [obs, codes] : groups)
    out.emplace_back(obs, ObserverState(st.computers(), std::move(codes), Phase::decision));
  return out;
}

/// One step of the defender's observer: apply d, keep the branch matching the
/// sense reading, then advance under the observed attacker move.
inline ObserverState observer_step(const ObserverState& s, const DefenderAction& d,
                                   const Observation& obs, const ModelFlags& flags) {
  if (s.phase() != Phase::decision) throw ModelError("observer_step needs a decision observer state");
  const bool sensing = d.kind == DefenderAction::Kind::sense;
  if (sensing != obs.sense_reading.has_value())
    throw InconsistentObservation(sensing ? "sense action without a reading"
                                          : "sense reading given for " + d.name());

  ObserverState branch = s;
  if (sensing) {
    std::optional<ObserverState> match;
    for (auto& [z, part] : sense_partition(s, d.computer))
      if (z == *obs.sense_reading) match = std::move(part);
    if (!match)
      throw InconsistentObservation(std::string("no candidate of ") + s.name() + " reads " +
                                    level_char(*obs.sense_reading) + " at computer " +
                                    std::to_string(d.computer));
    branch = std::move(*match);
  }
  const ObserverState st = detail::apply_defender_all(branch, d);

  std::vector<std::uint32_t> next;
  for (const auto& z : st.candidates()) {
    if (obs.attacker.is_x()) {
      for (const auto& a : admissible_attacker(z, flags))
        if (!a.observable()) next.push_back(apply_attacker(z, a, flags).index());
    } else {
      auto a = AttackerEvent::network(obs.attacker.source, obs.attacker.target);
      if (is_admissible(z, a, flags)) next.push_back(apply_attacker(z, a, flags).index());
    }
  }
  if (next.empty())
    throw InconsistentObservation("observation " + obs.attacker.name() + " impossible after " +
                                  d.name() + " from " + s.name());
  return ObserverState(s.computers(), std::move(next), Phase::decision);
}

/// Observations the defender can receive when the true state is z and it plays d.
inline std::vector<Observation> realizable_observations(const SystemState& z,
                                                        const DefenderAction& d,
                                                        const ModelFlags& flags) {
  std::optional<Level> reading;
  if (d.kind == DefenderAction::Kind::sense) reading = z.level(d.computer);
  std::vector<Observation> out{{AttackerObs::x(), reading}};
  for (const auto& a : admissible_attacker(apply_defender(z, d), flags))
    if (a.observable()) out.push_back({observe(a), reading});
  return out;
}

/// Q(S,d,Z): the next observer states that can actually occur when the true
/// state is Z. Sorted and deduplicated.
inline std::vector<ObserverState> compute_q(const ObserverState& s, const DefenderAction& d,
                                            const SystemState& z, const ModelFlags& flags) {
  if (!s.contains(z))
    throw ModelError("true state " + z.name() + " is not a candidate of " + s.name());
  std::vector<ObserverState> out;
  for (const auto& obs : realizable_observations(z, d, flags))
    out.push_back(observer_step(s, d, obs, flags));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Observer automaton

/// Where the initial observer state sits. With `intermediate` the attacker
/// moves first, so the initial set is an intermediate observer state and
/// only its successors enter the decision-state space.
enum class StartPhase { decision, intermediate };

inline std::string_view start_phase_name(StartPhase p) {
  return p == StartPhase::decision ? "decision" : "intermediate";
}

struct ObserverOptions {
  StartPhase start = StartPhase::intermediate;
  std::size_t state_budget = kDefaultStateBudget;
};

struct Branch {
  std::optional<Level> reading;  // set for sense actions
  std::uint32_t target;          // intermediate observer state index

  friend bool operator==(const Branch&, const Branch&) = default;
};

struct ObservationEdge {
  AttackerObs obs;
  std::uint32_t target;  // decision observer state index

  friend bool operator==(const ObservationEdge&, const ObservationEdge&) = default;
};

class ObserverAutomaton {
 public:
  int computers() const noexcept { return k_; }
  const ModelFlags& flags() const noexcept { return flags_; }
  StartPhase start_phase() const noexcept { return start_; }
  const ObserverState& initial() const noexcept { return initial_; }

  std::size_t size() const noexcept { return states_.size(); }
  std::size_t intermediate_count() const noexcept { return intermediates_.size(); }
  std::size_t action_count() const noexcept { return static_cast<std::size_t>(2 * k_ + 1); }

  const ObserverState& state(std::uint32_t s) const { return states_.at(s); }
  const ObserverState& intermediate(std::uint32_t t) const { return intermediates_.at(t); }
  const std::vector<ObserverState>& states() const noexcept { return states_; }

  const std::vector<Branch>& branches(std::uint32_t s, std::size_t slot) const {
    return branches_.at(s).at(slot);
  }
  const std::vector<ObservationEdge>& observations(std::uint32_t t) const {
    return observations_.at(t);
  }

  std::optional<std::uint32_t> find(const ObserverState& s) const {
    const auto& index = s.phase() == Phase::decision ? state_index_ : intermediate_index_;
    auto it = index.find(s);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }

  /// Index of f(S, d, obs) in the automaton.
  std::uint32_t successor(std::uint32_t s, const DefenderAction& d, const Observation& obs) const {
    const auto& bs = branches(s, action_slot(d, k_));
    const Branch* branch = nullptr;
    for (const auto& b : bs)
      if (b.reading == obs.sense_reading) branch = &b;
    if (!branch)
      throw InconsistentObservation("no branch of " + d.name() + " at observer state " +
                                    std::to_string(s) + " matches the sense reading");
    for (const auto& e : observations(branch->target))
      if (e.obs == obs.attacker) return e.target;
    throw InconsistentObservation("observation " + obs.attacker.name() + " impossible after " +
                                  d.name() + " at observer state " + std::to_string(s));
  }

  /// Entries of the transition function f, keyed by (S, d, sense reading, a').
  std::size_t transition_count() const {
    std::size_t n = 0;
    for (const auto& per_state : branches_)
      for (const auto& per_action : per_state)
        for (const auto& b : per_action) n += observations_[b.target].size();
    return n;
  }

  /// Edges of the bipartite observer graph: defender branches plus observation edges.
  std::size_t bipartite_edge_count() const {
    std::size_t n = 0;
    for (const auto& per_state : branches_)
      for (const auto& per_action : per_state) n += per_action.size();
    for (const auto& v : observations_) n += v.size();
    return n;
  }

  friend bool operator==(const ObserverAutomaton&, const ObserverAutomaton&) = default;

 private:
  friend ObserverAutomaton build_observer_automaton(const SystemAutomaton&, const ObserverState&,
                                                    ObserverOptions);

  int k_ = 0;
  ModelFlags flags_;
  StartPhase start_ = StartPhase::intermediate;
  ObserverState initial_;
  std::vector<ObserverState> states_;
  std::vector<ObserverState> intermediates_;
  std::vector<std::vector<std::vector<Branch>>> branches_;   // [state][action slot]
  std::vector<std::vector<ObservationEdge>> observations_;   // [intermediate]
  std::unordered_map<ObserverState, std::uint32_t, ObserverStateHash> state_index_;
  std::unordered_map<ObserverState, std::uint32_t, ObserverStateHash> intermediate_index_;
};

/// Reachable subset construction over the system automaton, with the
/// unobservable attacker events grouped into X and the expanded sense events
/// regrouped per computer. Indices follow breadth-first discovery order, so
/// identical inputs give identical automata.
inline ObserverAutomaton build_observer_automaton(const SystemAutomaton& aut,
                                                  const ObserverState& s0,
                                                  ObserverOptions options = {}) {
  const int k = aut.computers();
  if (s0.computers() != k) throw ModelError("initial observer state has the wrong computer count");
  if (s0.phase() != Phase::decision)
    throw ModelError("initial observer candidates are given as decision-phase states");

  ObserverAutomaton out;
  out.k_ = k;
  out.flags_ = aut.flags();
  out.start_ = options.start;
  out.initial_ = s0;

  std::deque<std::uint32_t> frontier;
  auto check_budget = [&] {
    if (out.states_.size() + out.intermediates_.size() > options.state_budget)
      throw CapacityError("observer automaton exceeds the state budget of " +
                          std::to_string(options.state_budget));
  };

  auto add_state = [&](ObserverState s) -> std::uint32_t {
    auto [it, inserted] =
        out.state_index_.try_emplace(std::move(s), static_cast<std::uint32_t>(out.states_.size()));
    if (inserted) {
      out.states_.push_back(it->first);
      out.branches_.emplace_back();
      frontier.push_back(it->second);
      check_budget();
    }
    return it->second;
  };

  auto add_intermediate = [&](ObserverState st) -> std::uint32_t {
    auto [it, inserted] = out.intermediate_index_.try_emplace(
        std::move(st), static_cast<std::uint32_t>(out.intermediates_.size()));
    const std::uint32_t t = it->second;
    if (!inserted) return t;
    out.intermediates_.push_back(it->first);
    out.observations_.emplace_back();
    check_budget();

    std::map<AttackerObs, std::vector<std::uint32_t>> groups;
    for (auto code : out.intermediates_[t].codes())
      for (const auto& e : aut.attacker_edges(code))
        groups[e.event.observable() ? observe(e.event) : AttackerObs::x()].push_back(e.target);
    std::vector<ObservationEdge> edges;
    for (auto& [obs, codes] : groups)
      edges.push_back({obs, add_state(ObserverState(k, std::move(codes), Phase::decision))});
    out.observations_[t] = std::move(edges);
    return t;
  };

  if (options.start == StartPhase::intermediate) {
    std::vector<std::uint32_t> codes(s0.codes().begin(), s0.codes().end());
    add_intermediate(ObserverState(k, std::move(codes), Phase::intermediate));
  } else {
    add_state(s0);
  }

  const auto actions = defender_actions(k);
  while (!frontier.empty()) {
    const std::uint32_t s = frontier.front();
    frontier.pop_front();
    std::vector<std::vector<Branch>> per_action(actions.size());
    for (std::size_t slot = 0; slot < actions.size(); ++slot) {
      const auto& d = actions[slot];
      std::map<std::optional<Level>, std::vector<std::uint32_t>> groups;
      for (auto code : out.states_[s].codes()) {
        const SystemState z = aut.decision_state(code);
        DefenderEvent e = d.kind == DefenderAction::Kind::sense
                              ? DefenderEvent::expanded_sense(d.computer, z.level(d.computer))
                              : DefenderEvent::plain(d);
        auto target = aut.defender_successor(code, e);
        if (!target) throw ModelError("system automaton lacks edge " + e.name());
        groups[e.reading].push_back(*target);
      }
      for (auto& [reading, codes] : groups)
        per_action[slot].push_back(
            {reading, add_intermediate(ObserverState(k, std::move(codes), Phase::intermediate))});
    }
    out.branches_[s] = std::move(per_action);
  }
  return out;
}

inline ObserverAutomaton build_observer_automaton(int k, ModelFlags flags = {},
                                                  ObserverOptions options = {}) {
  return build_observer_automaton(build_system_automaton(k, flags, options.state_budget),
                                  initial_observer(k), options);
}

// ---------------------------------------------------------------------------
// Exports, same line format as the system automaton.

inline std::string observer_state_label(const ObserverAutomaton& obs, std::uint32_t s) {
  return "S" + std::to_string(s) + "=" + obs.state(s).name();
}

inline std::string observer_intermediate_label(const ObserverAutomaton& obs, std::uint32_t t) {
  return "T" + std::to_string(t) + "=" + obs.intermediate(t).name();
}

inline void write_observer_fsm(const ObserverAutomaton& obs, std::ostream& out) {
  const auto actions = defender_actions(obs.computers());
  // Observable alphabet: expanded defender events, X, and the H events.
  std::size_t events = 1 + 5 * static_cast<std::size_t>(obs.computers()) + 1 +
                       static_cast<std::size_t>(obs.computers() * (obs.computers() - 1));
  out << "states " << obs.size() + obs.intermediate_count() << " events " << events << '\n';
  for (std::uint32_t s = 0; s < obs.size(); ++s)
    out << "state " << observer_state_label(obs, s) << " decision\n";
  for (std::uint32_t t = 0; t < obs.intermediate_count(); ++t)
    out << "state " << observer_intermediate_label(obs, t) << " intermediate\n";
  for (std::uint32_t s = 0; s < obs.size(); ++s)
    for (std::size_t slot = 0; slot < actions.size(); ++slot)
      for (const auto& b : obs.branches(s, slot))
        out << "trans " << observer_state_label(obs, s) << ' '
            << DefenderEvent{actions[slot], b.reading}.name() << ' '
            << observer_intermediate_label(obs, b.target) << " c o\n";
  for (std::uint32_t t = 0; t < obs.intermediate_count(); ++t)
    for (const auto& e : obs.observations(t))
      out << "trans " << observer_intermediate_label(obs, t) << ' ' << e.obs.name() << ' '
          << observer_state_label(obs, e.target) << " uc o\n";
}

inline void write_observer_dot(const ObserverAutomaton& obs, std::ostream& out) {
  const auto actions = defender_actions(obs.computers());
  out << "digraph observer {\n  rankdir=LR;\n";
  for (std::uint32_t s = 0; s < obs.size(); ++s)
    out << "  S" << s << " [shape=box, label=\"S" << s << "\\n" << obs.state(s).name() << "\"];\n";
  for (std::uint32_t t = 0; t < obs.intermediate_count(); ++t)
    out << "  T" << t << " [shape=ellipse, label=\"T" << t << "\\n" << obs.intermediate(t).name()
        << "\"];\n";
  for (std::uint32_t s = 0; s < obs.size(); ++s)
    for (std::size_t slot = 0; slot < actions.size(); ++slot)
      for (const auto& b : obs.branches(s, slot))
        out << "  S" << s << " -> T" << b.target << " [label=\""
            << DefenderEvent{actions[slot], b.reading}.name() << "\"];\n";
  for (std::uint32_t t = 0; t < obs.intermediate_count(); ++t)
    for (const auto& e : obs.observations(t))
      out << "  T" << t << " -> S" << e.target << " [label=\"" << e.obs.name() << "\"];\n";
  out << "}\n";
}

}  // namespace sentinel
