#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sentinel/model.hpp"

namespace sentinel {

inline constexpr std::size_t kDefaultStateBudget = std::size_t{1} << 20;

/// Defender event of the expanded alphabet. Sense carries the level it reads,
/// so the automaton stays deterministic.
struct DefenderEvent {
  DefenderAction action;
  std::optional<Level> reading;  // set iff action is a sense

  static DefenderEvent plain(DefenderAction d) { return {d, std::nullopt}; }
  static DefenderEvent expanded_sense(int i, Level z) { return {DefenderAction::sense(i), z}; }

  std::string name() const {
    if (reading) return action.name() + "." + level_char(*reading);
    return action.name();
  }

  friend auto operator<=>(const DefenderEvent&, const DefenderEvent&) = default;
};

inline DefenderEvent parse_defender_event(std::string_view text) {
  auto dot = text.find('.');
  if (dot == std::string_view::npos) return DefenderEvent::plain(parse_defender_action(text));
  auto d = parse_defender_action(text.substr(0, dot));
  auto rest = text.substr(dot + 1);
  if (d.kind != DefenderAction::Kind::sense || rest.size() != 1 || !parse_level(rest[0]))
    throw ParseError("bad defender event \"" + std::string(text) + "\"");
  return DefenderEvent::expanded_sense(d.computer, *parse_level(rest[0]));
}

struct DefenderEdge {
  DefenderEvent event;
  std::uint32_t target;  // intermediate state index

  friend bool operator==(const DefenderEdge&, const DefenderEdge&) = default;
};

struct AttackerEdge {
  AttackerEvent event;
  std::uint32_t target;  // decision state index

  friend bool operator==(const AttackerEdge&, const AttackerEdge&) = default;
};

/// Bipartite system automaton: 4^K decision states where the defender moves
/// and 4^K intermediate states where the attacker moves. State i on either
/// side is the system state with canonical index i.
class SystemAutomaton {
 public:
  SystemAutomaton(int k, ModelFlags flags,
                  std::vector<std::vector<DefenderEdge>> defender_edges,
                  std::vector<std::vector<AttackerEdge>> attacker_edges)
      : k_(k),
        flags_(flags),
        defender_edges_(std::move(defender_edges)),
        attacker_edges_(std::move(attacker_edges)) {}

  int computers() const noexcept { return k_; }
  const ModelFlags& flags() const noexcept { return flags_; }

  std::uint32_t states_per_phase() const { return state_space_size(k_); }
  std::size_t state_count() const { return 2 * std::size_t{states_per_phase()}; }

  SystemState decision_state(std::uint32_t i) const {
    return SystemState::from_index(k_, i, Phase::decision);
  }
  SystemState intermediate_state(std::uint32_t i) const {
    return SystemState::from_index(k_, i, Phase::intermediate);
  }

  const std::vector<DefenderEdge>& defender_edges(std::uint32_t decision) const {
    return defender_edges_.at(decision);
  }
  const std::vector<AttackerEdge>& attacker_edges(std::uint32_t intermediate) const {
    return attacker_edges_.at(intermediate);
  }

  std::size_t transition_count() const {
    std::size_t n = 0;
    for (const auto& v : defender_edges_) n += v.size();
    for (const auto& v : attacker_edges_) n += v.size();
    return n;
  }

  std::optional<std::uint32_t> defender_successor(std::uint32_t decision,
                                                  const DefenderEvent& e) const {
    for (const auto& edge : defender_edges(decision))
      if (edge.event == e) return edge.target;
    return std::nullopt;
  }

  /// Full alphabet (expanded defender events then attacker events), whether
  /// or not every event labels an edge.
  std::vector<std::string> alphabet() const {
    std::vector<std::string> out{DefenderEvent::plain(DefenderAction::null_action()).name()};
    for (int i = 1; i <= k_; ++i)
      for (Level z : kLevels) out.push_back(DefenderEvent::expanded_sense(i, z).name());
    for (int i = 1; i <= k_; ++i) out.push_back(DefenderAction::reimage(i).name());
    out.push_back(AttackerEvent::null_event().name());
    for (int i = 1; i <= k_; ++i)
      for (int n = 1; n <= 3; ++n) out.push_back(AttackerEvent::boundary(i, n).name());
    for (int i = 1; i <= k_; ++i)
      for (int j = 1; j <= k_; ++j)
        if (i != j) out.push_back(AttackerEvent::network(i, j).name());
    return out;
  }

  // Structural equality; flags only matter through the edges they produce.
  friend bool operator==(const SystemAutomaton& a, const SystemAutomaton& b) {
    return a.k_ == b.k_ && a.defender_edges_ == b.defender_edges_ &&
           a.attacker_edges_ == b.attacker_edges_;
  }

 private:
  int k_;
  ModelFlags flags_;
  std::vector<std::vector<DefenderEdge>> defender_edges_;
  std::vector<std::vector<AttackerEdge>> attacker_edges_;
};

inline SystemAutomaton build_system_automaton(int k, ModelFlags flags = {},
                                              std::size_t state_budget = kDefaultStateBudget) {
  check_computer_count(k);
  const std::uint32_t n = state_space_size(k);
  if (2 * std::size_t{n} > state_budget)
    throw CapacityError("system automaton for K=" + std::to_string(k) + " needs " +
                        std::to_string(2 * std::size_t{n}) + " states, budget is " +
                        std::to_string(state_budget));

  std::vector<std::vector<DefenderEdge>> dedges(n);
  std::vector<std::vector<AttackerEdge>> aedges(n);
  for (std::uint32_t s = 0; s < n; ++s) {
    const SystemState z = SystemState::from_index(k, s, Phase::decision);
    for (const auto& d : defender_actions(k)) {
      DefenderEvent e = d.kind == DefenderAction::Kind::sense
                            ? DefenderEvent::expanded_sense(d.computer, z.level(d.computer))
                            : DefenderEvent::plain(d);
      dedges[s].push_back({e, apply_defender(z, d).index()});
    }
    const SystemState zt = z.with_phase(Phase::intermediate);
    for (const auto& a : admissible_attacker(zt, flags))
      aedges[s].push_back({a, apply_attacker(zt, a, flags).index()});
  }
  return SystemAutomaton(k, flags, std::move(dedges), std::move(aedges));
}

// ---------------------------------------------------------------------------
// Text exports

inline std::string automaton_state_name(const SystemState& z) {
  return (z.phase() == Phase::decision ? "D." : "I.") + z.name();
}

/// Line format:
///   states <n> events <m>
///   state <name> <phase>
///   trans <src> <event> <dst> <c|uc> <o|uo>
inline void write_fsm(const SystemAutomaton& aut, std::ostream& out) {
  const std::uint32_t n = aut.states_per_phase();
  out << "states " << aut.state_count() << " events " << aut.alphabet().size() << '\n';
  for (std::uint32_t i = 0; i < n; ++i)
    out << "state " << automaton_state_name(aut.decision_state(i)) << " decision\n";
  for (std::uint32_t i = 0; i < n; ++i)
    out << "state " << automaton_state_name(aut.intermediate_state(i)) << " intermediate\n";
  for (std::uint32_t i = 0; i < n; ++i)
    for (const auto& e : aut.defender_edges(i))
      out << "trans " << automaton_state_name(aut.decision_state(i)) << ' ' << e.event.name()
          << ' ' << automaton_state_name(aut.intermediate_state(e.target)) << " c o\n";
  for (std::uint32_t i = 0; i < n; ++i)
    for (const auto& e : aut.attacker_edges(i))
      out << "trans " << automaton_state_name(aut.intermediate_state(i)) << ' ' << e.event.name()
          << ' ' << automaton_state_name(aut.decision_state(e.target)) << " uc "
          << (e.event.observable() ? "o" : "uo") << '\n';
}

inline std::string to_fsm(const SystemAutomaton& aut) {
  std::ostringstream os;
  write_fsm(aut, os);
  return os.str();
}

inline SystemState parse_automaton_state_name(std::string_view name) {
  if (name.size() < 3 || name[1] != '.' || (name[0] != 'D' && name[0] != 'I'))
    throw ParseError("bad state name \"" + std::string(name) + "\"");
  return SystemState::parse(name.substr(2), name[0] == 'D' ? Phase::decision : Phase::intermediate);
}

inline SystemAutomaton parse_fsm(std::istream& in) {
  std::string line;
  std::size_t declared_states = 0;
  std::size_t seen_states = 0;
  int k = 0;
  bool header = false;
  std::vector<std::vector<DefenderEdge>> dedges;
  std::vector<std::vector<AttackerEdge>> aedges;
  bool h_on_w = false;
  std::size_t lineno = 0;

  auto fail = [&](const std::string& why) {
    throw ParseError("fsm line " + std::to_string(lineno) + ": " + why);
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "states") {
      std::string ev;
      std::size_t m = 0;
      if (!(ls >> declared_states >> ev >> m) || ev != "events") fail("bad header");
      header = true;
    } else if (tag == "state") {
      std::string name, phase;
      if (!(ls >> name >> phase)) fail("bad state record");
      auto z = parse_automaton_state_name(name);
      if (phase != phase_name(z.phase())) fail("phase tag does not match name " + name);
      if (k == 0) {
        k = z.size();
        dedges.assign(state_space_size(k), {});
        aedges.assign(state_space_size(k), {});
      } else if (z.size() != k) {
        fail("mixed computer counts");
      }
      ++seen_states;
    } else if (tag == "trans") {
      std::string src, ev, dst, c, o;
      if (!(ls >> src >> ev >> dst >> c >> o)) fail("bad transition record");
      if (k == 0) fail("transition before any state");
      auto a = parse_automaton_state_name(src);
      auto b = parse_automaton_state_name(dst);
      if (a.size() != k || b.size() != k || a.phase() == b.phase()) fail("edge is not bipartite");
      if (a.phase() == Phase::decision) {
        if (c != "c" || o != "o") fail("defender events are controllable and observable");
        dedges[a.index()].push_back({parse_defender_event(ev), b.index()});
      } else {
        auto e = parse_attacker_event(ev);
        if (c != "uc" || o != (e.observable() ? "o" : "uo")) fail("bad marks for " + ev);
        if (e.kind == AttackerEvent::Kind::network && a.level(e.second) == Level::W) h_on_w = true;
        aedges[a.index()].push_back({e, b.index()});
      }
    } else {
      fail("unknown record \"" + tag + "\"");
    }
  }
  if (!header) throw ParseError("fsm: missing header");
  if (seen_states != declared_states)
    throw ParseError("fsm: header declares " + std::to_string(declared_states) + " states, found " +
                     std::to_string(seen_states));
  if (k == 0) throw ParseError("fsm: no states");
  // K=1 has no network attacks, so the flag cannot be observed; keep the default.
  ModelFlags flags;
  if (k > 1) flags.h_admissible_on_w = h_on_w;
  return SystemAutomaton(k, flags, std::move(dedges), std::move(aedges));
}

/// Graphviz rendering; boxes are decision states, ellipses intermediate ones.
inline void write_dot(const SystemAutomaton& aut, std::ostream& out) {
  const std::uint32_t n = aut.states_per_phase();
  out << "digraph system {\n  rankdir=LR;\n";
  for (std::uint32_t i = 0; i < n; ++i)
    out << "  \"" << automaton_state_name(aut.decision_state(i)) << "\" [shape=box];\n";
  for (std::uint32_t i = 0; i < n; ++i)
    out << "  \"" << automaton_state_name(aut.intermediate_state(i)) << "\" [shape=ellipse];\n";
  for (std::uint32_t i = 0; i < n; ++i)
    for (const auto& e : aut.defender_edges(i))
      out << "  \"" << automaton_state_name(aut.decision_state(i)) << "\" -> \""
          << automaton_state_name(aut.intermediate_state(e.target)) << "\" [label=\""
          << e.event.name() << "\"];\n";
  for (std::uint32_t i = 0; i < n; ++i)
    for (const auto& e : aut.attacker_edges(i))
      out << "  \"" << automaton_state_name(aut.intermediate_state(i)) << "\" -> \""
          << automaton_state_name(aut.decision_state(e.target)) << "\" [label=\""
          << e.event.name() << "\"" << (e.event.observable() ? "" : ", style=dashed") << "];\n";
  out << "}\n";
}

inline std::string to_dot(const SystemAutomaton& aut) {
  std::ostringstream os;
  write_dot(aut, os);
  return os.str();
}

}  // namespace sentinel
