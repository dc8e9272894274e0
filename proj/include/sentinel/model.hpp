#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sentinel/errors.hpp"

namespace sentinel {

// Security level of one computer. Each step up crosses one security boundary.
enum class Level : std::uint8_t { N = 0, R = 1, W = 2, F = 3 };

inline constexpr std::array<Level, 4> kLevels = {Level::N, Level::R, Level::W, Level::F};

inline char level_char(Level z) { return "NRWF"[static_cast<int>(z)]; }

inline std::optional<Level> parse_level(char c) {
  switch (c) {
    case 'N': return Level::N;
    case 'R': return Level::R;
    case 'W': return Level::W;
    case 'F': return Level::F;
    default: return std::nullopt;
  }
}

// decision: the defender acts next. intermediate: the attacker acts next.
enum class Phase : std::uint8_t { decision = 0, intermediate = 1 };

inline std::string_view phase_name(Phase p) {
  return p == Phase::decision ? "decision" : "intermediate";
}

// Keeps 4^K inside a 32-bit index.
inline constexpr int kMaxComputers = 15;

inline void check_computer_count(int k) {
  if (k < 1 || k > kMaxComputers)
    throw ModelError("computer count must be in 1.." + std::to_string(kMaxComputers) +
                     ", got " + std::to_string(k));
}

inline std::uint32_t state_space_size(int k) { return std::uint32_t{1} << (2 * k); }

/// Network state: one level per computer plus the phase tag.
///
/// Stored as its canonical index: base 4, computer 1 most significant,
/// digits N=0 R=1 W=2 F=3. Computers are numbered 1..K.
class SystemState {
 public:
  SystemState() = default;

  SystemState(std::span<const Level> levels, Phase phase = Phase::decision)
      : k_(static_cast<std::uint8_t>(levels.size())), phase_(phase) {
    check_computer_count(static_cast<int>(levels.size()));
    for (Level z : levels) code_ = code_ * 4 + static_cast<std::uint32_t>(z);
  }

  SystemState(std::initializer_list<Level> levels, Phase phase = Phase::decision)
      : SystemState(std::span<const Level>(levels.begin(), levels.size()), phase) {}

  static SystemState from_index(int k, std::uint32_t index, Phase phase = Phase::decision) {
    check_computer_count(k);
    if (index >= state_space_size(k))
      throw ModelError("state index " + std::to_string(index) + " out of range for K=" +
                       std::to_string(k));
    SystemState s;
    s.k_ = static_cast<std::uint8_t>(k);
    s.phase_ = phase;
    s.code_ = index;
    return s;
  }

  static SystemState all(int k, Level z, Phase phase = Phase::decision) {
    std::vector<Level> v(static_cast<std::size_t>(k), z);
    return SystemState(v, phase);
  }

  /// Parses a concatenated level string such as "FNR".
  static SystemState parse(std::string_view text, Phase phase = Phase::decision) {
    std::vector<Level> v;
    for (char c : text) {
      auto z = parse_level(c);
      if (!z) throw ParseError("bad level character '" + std::string(1, c) + "' in \"" +
                               std::string(text) + "\"");
      v.push_back(*z);
    }
    if (v.empty()) throw ParseError("empty system state");
    return SystemState(v, phase);
  }

  int size() const noexcept { return k_; }
  Phase phase() const noexcept { return phase_; }
  std::uint32_t index() const noexcept { return code_; }

  Level level(int computer) const {
    check_index(computer);
    return static_cast<Level>((code_ >> shift(computer)) & 3u);
  }

  SystemState with_level(int computer, Level z) const {
    check_index(computer);
    SystemState s = *this;
    const unsigned sh = shift(computer);
    s.code_ = (code_ & ~(3u << sh)) | (static_cast<std::uint32_t>(z) << sh);
    return s;
  }

  SystemState with_phase(Phase p) const {
    SystemState s = *this;
    s.phase_ = p;
    return s;
  }

  std::vector<Level> levels() const {
    std::vector<Level> v;
    v.reserve(k_);
    for (int i = 1; i <= k_; ++i) v.push_back(level(i));
    return v;
  }

  std::string name() const {
    std::string s;
    for (int i = 1; i <= k_; ++i) s += level_char(level(i));
    return s;
  }

  friend bool operator==(const SystemState&, const SystemState&) = default;
  friend auto operator<=>(const SystemState& a, const SystemState& b) {
    if (auto c = a.k_ <=> b.k_; c != 0) return c;
    if (auto c = a.phase_ <=> b.phase_; c != 0) return c;
    return a.code_ <=> b.code_;
  }

 private:
  unsigned shift(int computer) const { return static_cast<unsigned>(2 * (k_ - computer)); }

  void check_index(int computer) const {
    if (computer < 1 || computer > k_)
      throw ModelError("computer index " + std::to_string(computer) + " outside 1.." +
                       std::to_string(k_));
  }

  std::uint8_t k_ = 0;
  Phase phase_ = Phase::decision;
  std::uint32_t code_ = 0;
};

// ---------------------------------------------------------------------------
// Events

struct AttackerEvent {
  enum class Kind : std::uint8_t { null = 0, boundary = 1, network = 2 };

  Kind kind = Kind::null;
  int first = 0;   // boundary: computer; network: source
  int second = 0;  // boundary: boundary number 1..3; network: target

  static AttackerEvent null_event() { return {}; }
  static AttackerEvent boundary(int computer, int n) { return {Kind::boundary, computer, n}; }
  static AttackerEvent network(int source, int target) { return {Kind::network, source, target}; }

  bool observable() const noexcept { return kind == Kind::network; }

  std::string name() const {
    switch (kind) {
      case Kind::null: return "Na";
      case Kind::boundary: return "P" + std::to_string(first) + "." + std::to_string(second);
      case Kind::network: return "H" + std::to_string(first) + "." + std::to_string(second);
    }
    return {};
  }

  friend auto operator<=>(const AttackerEvent&, const AttackerEvent&) = default;
};

struct DefenderAction {
  enum class Kind : std::uint8_t { null = 0, sense = 1, reimage = 2 };

  Kind kind = Kind::null;
  int computer = 0;

  static DefenderAction null_action() { return {}; }
  static DefenderAction sense(int i) { return {Kind::sense, i}; }
  static DefenderAction reimage(int i) { return {Kind::reimage, i}; }

  bool targets_computer() const noexcept { return kind != Kind::null; }

  std::string name() const {
    switch (kind) {
      case Kind::null: return "Nd";
      case Kind::sense: return "E" + std::to_string(computer);
      case Kind::reimage: return "R" + std::to_string(computer);
    }
    return {};
  }

  friend auto operator<=>(const DefenderAction&, const DefenderAction&) = default;
};

inline int parse_small_int(std::string_view text, std::string_view context) {
  if (text.empty()) throw ParseError("missing number in \"" + std::string(context) + "\"");
  int v = 0;
  for (char c : text) {
    if (c < '0' || c > '9') throw ParseError("bad number in \"" + std::string(context) + "\"");
    v = v * 10 + (c - '0');
  }
  return v;
}

/// Parses "Na", "P<i>.<n>" or "H<i>.<j>".
inline AttackerEvent parse_attacker_event(std::string_view text) {
  if (text == "Na") return AttackerEvent::null_event();
  if (text.size() >= 4 && (text[0] == 'P' || text[0] == 'H')) {
    auto dot = text.find('.');
    if (dot == std::string_view::npos) throw ParseError("bad attacker event \"" + std::string(text) + "\"");
    int a = parse_small_int(text.substr(1, dot - 1), text);
    int b = parse_small_int(text.substr(dot + 1), text);
    return text[0] == 'P' ? AttackerEvent::boundary(a, b) : AttackerEvent::network(a, b);
  }
  throw ParseError("bad attacker event \"" + std::string(text) + "\"");
}

inline DefenderAction parse_defender_action(std::string_view text) {
  if (text == "Nd") return DefenderAction::null_action();
  if (text.size() >= 2 && (text[0] == 'E' || text[0] == 'R')) {
    int i = parse_small_int(text.substr(1), text);
    return text[0] == 'E' ? DefenderAction::sense(i) : DefenderAction::reimage(i);
  }
  throw ParseError("bad defender action \"" + std::string(text) + "\"");
}

/// Canonical defender alphabet: Nd, E1..EK, R1..RK. Position in this list is
/// the action's slot.
inline std::vector<DefenderAction> defender_actions(int k) {
  std::vector<DefenderAction> out{DefenderAction::null_action()};
  for (int i = 1; i <= k; ++i) out.push_back(DefenderAction::sense(i));
  for (int i = 1; i <= k; ++i) out.push_back(DefenderAction::reimage(i));
  return out;
}

inline std::size_t action_slot(const DefenderAction& d, int k) {
  switch (d.kind) {
    case DefenderAction::Kind::null: return 0;
    case DefenderAction::Kind::sense: return static_cast<std::size_t>(d.computer);
    case DefenderAction::Kind::reimage: return static_cast<std::size_t>(k + d.computer);
  }
  return 0;
}

/// What the defender sees of an attacker move: X (anything unobservable) or
/// a network attack H(i,j).
struct AttackerObs {
  int source = 0;  // 0 encodes X
  int target = 0;

  static AttackerObs x() { return {}; }
  static AttackerObs h(int i, int j) { return {i, j}; }

  bool is_x() const noexcept { return source == 0; }

  std::string name() const {
    return is_x() ? "X" : "H" + std::to_string(source) + "." + std::to_string(target);
  }

  friend auto operator<=>(const AttackerObs&, const AttackerObs&) = default;
};

struct Observation {
  AttackerObs attacker;
  std::optional<Level> sense_reading;  // present iff the defender sensed

  friend bool operator==(const Observation&, const Observation&) = default;
};

inline AttackerObs observe(const AttackerEvent& a) {
  if (a.kind == AttackerEvent::Kind::network) return AttackerObs::h(a.first, a.second);
  return AttackerObs::x();
}

// ---------------------------------------------------------------------------
// Costs

struct ModelFlags {
  // Whether a network attack may target a computer already at W.
  bool h_admissible_on_w = true;

  friend bool operator==(const ModelFlags&, const ModelFlags&) = default;
};

struct CostModel {
  double c_n = 0.0;
  double c_r = 1.0;
  double c_w = 2.0;
  double c_f = 8.0;
  double cost_null = 0.0;
  std::vector<double> cost_sense;    // per computer, index 0 is computer 1
  std::vector<double> cost_reimage;  // per computer
  double beta = 0.9;

  /// Uniform action costs across k computers.
  static CostModel uniform(int k, double sense, double reimage, double beta = 0.9) {
    CostModel cm;
    cm.cost_sense.assign(static_cast<std::size_t>(k), sense);
    cm.cost_reimage.assign(static_cast<std::size_t>(k), reimage);
    cm.beta = beta;
    return cm;
  }

  int computers() const noexcept { return static_cast<int>(cost_sense.size()); }

  /// All violated invariants, empty when the model is valid.
  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (!(0.0 <= c_n && c_n < c_r && c_r < c_w && c_w < c_f))
      out.push_back("state costs must satisfy 0 <= c_N < c_R < c_W < c_F (got " +
                    std::to_string(c_n) + ", " + std::to_string(c_r) + ", " +
                    std::to_string(c_w) + ", " + std::to_string(c_f) + ")");
    if (cost_sense.size() != cost_reimage.size())
      out.push_back("sense and re-image cost lists differ in length");
    if (!(cost_null >= 0.0)) out.push_back("null action cost must be nonnegative");
    for (std::size_t i = 0; i < std::min(cost_sense.size(), cost_reimage.size()); ++i) {
      if (!(cost_null < cost_sense[i] && cost_sense[i] < cost_reimage[i]))
        out.push_back("action costs for computer " + std::to_string(i + 1) +
                      " must satisfy null < sense < re-image (got " + std::to_string(cost_null) +
                      ", " + std::to_string(cost_sense[i]) + ", " +
                      std::to_string(cost_reimage[i]) + ")");
    }
    if (!(beta > 0.0 && beta < 1.0))
      out.push_back("discount beta must lie in (0,1), got " + std::to_string(beta));
    return out;
  }

  void validate() const {
    if (auto v = violations(); !v.empty()) throw ConfigError(std::move(v));
  }

  double max_action_cost() const {
    double m = cost_null;
    for (double c : cost_sense) m = std::max(m, c);
    for (double c : cost_reimage) m = std::max(m, c);
    return m;
  }

  /// Upper bound on any value function: (max state cost + max action cost) / (1 - beta).
  double value_bound(int k) const {
    return (k * c_f + max_action_cost()) / (1.0 - beta);
  }
};

inline double level_cost(Level z, const CostModel& cm) {
  switch (z) {
    case Level::N: return cm.c_n;
    case Level::R: return cm.c_r;
    case Level::W: return cm.c_w;
    case Level::F: return cm.c_f;
  }
  return 0.0;
}

inline double state_cost(const SystemState& z, const CostModel& cm) {
  double c = 0.0;
  for (int i = 1; i <= z.size(); ++i) c += level_cost(z.level(i), cm);
  return c;
}

inline double action_cost(const DefenderAction& d, const CostModel& cm) {
  auto at = [&](const std::vector<double>& v) {
    if (d.computer < 1 || d.computer > static_cast<int>(v.size()))
      throw ModelError("no action cost for computer " + std::to_string(d.computer));
    return v[static_cast<std::size_t>(d.computer - 1)];
  };
  switch (d.kind) {
    case DefenderAction::Kind::null: return cm.cost_null;
    case DefenderAction::Kind::sense: return at(cm.cost_sense);
    case DefenderAction::Kind::reimage: return at(cm.cost_reimage);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Dynamics

inline bool network_target_ok(Level target, const ModelFlags& flags) {
  return target == Level::N || target == Level::R ||
         (flags.h_admissible_on_w && target == Level::W);
}

/// Attacker events admissible at an intermediate state, in canonical order:
/// null, boundary attacks by computer, network attacks by (source, target).
inline std::vector<AttackerEvent> admissible_attacker(const SystemState& zt,
                                                      const ModelFlags& flags) {
  if (zt.phase() != Phase::intermediate)
    throw ModelError("attacker events require an intermediate state, got " + zt.name());
  const int k = zt.size();
  std::vector<AttackerEvent> out{AttackerEvent::null_event()};
  for (int i = 1; i <= k; ++i) {
    Level z = zt.level(i);
    // Boundary n is crossed from level n-1.
    if (z != Level::F) out.push_back(AttackerEvent::boundary(i, static_cast<int>(z) + 1));
  }
  for (int i = 1; i <= k; ++i) {
    if (zt.level(i) != Level::F) continue;
    for (int j = 1; j <= k; ++j)
      if (j != i && network_target_ok(zt.level(j), flags))
        out.push_back(AttackerEvent::network(i, j));
  }
  return out;
}

inline bool is_admissible(const SystemState& zt, const AttackerEvent& a, const ModelFlags& flags) {
  const int k = zt.size();
  switch (a.kind) {
    case AttackerEvent::Kind::null: return true;
    case AttackerEvent::Kind::boundary:
      return a.first >= 1 && a.first <= k && a.second >= 1 && a.second <= 3 &&
             static_cast<int>(zt.level(a.first)) == a.second - 1;
    case AttackerEvent::Kind::network:
      return a.first >= 1 && a.first <= k && a.second >= 1 && a.second <= k &&
             a.first != a.second && zt.level(a.first) == Level::F &&
             network_target_ok(zt.level(a.second), flags);
  }
  return false;
}

inline SystemState apply_attacker(const SystemState& zt, const AttackerEvent& a,
                                  const ModelFlags& flags) {
  if (zt.phase() != Phase::intermediate)
    throw ModelError("attacker events require an intermediate state, got " + zt.name());
  if (!is_admissible(zt, a, flags))
    throw ModelError("attacker event " + a.name() + " is not admissible at " + zt.name());
  SystemState next = zt.with_phase(Phase::decision);
  switch (a.kind) {
    case AttackerEvent::Kind::null: break;
    case AttackerEvent::Kind::boundary:
      next = next.with_level(a.first, static_cast<Level>(a.second));
      break;
    case AttackerEvent::Kind::network:
      next = next.with_level(a.second, Level::W);
      break;
  }
  return next;
}

inline SystemState apply_defender(const SystemState& z, const DefenderAction& d) {
  if (z.phase() != Phase::decision)
    throw ModelError("defender actions require a decision state, got " + z.name());
  if (d.targets_computer() && (d.computer < 1 || d.computer > z.size()))
    throw ModelError("defender action " + d.name() + " targets a missing computer");
  SystemState next = z.with_phase(Phase::intermediate);
  if (d.kind == DefenderAction::Kind::reimage) next = next.with_level(d.computer, Level::N);
  return next;
}

}  // namespace sentinel
