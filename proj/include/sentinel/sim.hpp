#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "sentinel/solver.hpp"

namespace sentinel {

struct TraceStep {
  std::size_t t = 0;
  SystemState z;                // true state at the decision point
  std::uint32_t s = 0;          // observer state index
  DefenderAction d;
  SystemState z_tilde;          // true state after the defender acts
  AttackerEvent a;
  Observation obs;
  double stage_cost = 0.0;      // C_Z + C(d), undiscounted
};

/// Attacker move that precedes the first decision when the observer starts
/// in the intermediate phase. It carries no cost.
struct PreMove {
  SystemState z0;
  AttackerEvent a;
  AttackerObs obs;
};

struct Trace {
  std::optional<PreMove> pre_move;
  std::vector<TraceStep> steps;
  double discounted_total = 0.0;
  std::size_t horizon = 0;
};

// ---------------------------------------------------------------------------
// Adversaries

/// What an adversary sees when it moves.
struct AdversaryView {
  const ObserverAutomaton& obs;
  std::optional<std::uint32_t> s;  // empty for the pre-move
  DefenderAction d;
  const SystemState& z;
  const SystemState& z_tilde;
};

struct UniformRandom {
  explicit UniformRandom(std::uint64_t seed) : rng(seed) {}
  std::mt19937_64 rng;
};

/// One-step lookahead on a solved value function.
struct WorstCaseGreedy {
  ValueFunction values;
};

/// Replays a fixed list; once exhausted it plays the null event.
struct Scripted {
  std::vector<AttackerEvent> events;
  std::size_t next = 0;
};

using Adversary = std::variant<UniformRandom, WorstCaseGreedy, Scripted>;

/// Event maximizing V* of the induced next observer state. Ties go to the
/// event whose true next state costs most, then to canonical order.
inline AttackerEvent worst_case_greedy_event(const ValueFunction& v, const ObserverAutomaton& obs,
                                             std::uint32_t s, const DefenderAction& d,
                                             const SystemState& z, const SystemState& z_tilde,
                                             const CostModel& cm) {
  std::optional<Level> reading;
  if (d.kind == DefenderAction::Kind::sense) reading = z.level(d.computer);
  AttackerEvent best;
  double best_v = -std::numeric_limits<double>::infinity();
  double best_c = -std::numeric_limits<double>::infinity();
  for (const auto& a : admissible_attacker(z_tilde, obs.flags())) {
    const double nv = v.at(obs.successor(s, d, Observation{observe(a), reading}));
    const double nc = state_cost(apply_attacker(z_tilde, a, obs.flags()), cm);
    if (nv > best_v + kValueTieTolerance ||
        (std::abs(nv - best_v) <= kValueTieTolerance && nc > best_c)) {
      best = a;
      best_v = nv;
      best_c = nc;
    }
  }
  return best;
}

namespace detail {

inline AttackerEvent greedy_pre_move(const ValueFunction& v, const ObserverAutomaton& obs,
                                     const SystemState& z0, const CostModel& cm) {
  AttackerEvent best;
  double best_v = -std::numeric_limits<double>::infinity();
  double best_c = -std::numeric_limits<double>::infinity();
  const auto zt = z0.with_phase(Phase::intermediate);
  for (const auto& a : admissible_attacker(zt, obs.flags())) {
    double nv = -std::numeric_limits<double>::infinity();
    for (const auto& e : obs.observations(0))
      if (e.obs == observe(a)) nv = v.at(e.target);
    const double nc = state_cost(apply_attacker(zt, a, obs.flags()), cm);
    if (nv > best_v + kValueTieTolerance ||
        (std::abs(nv - best_v) <= kValueTieTolerance && nc > best_c)) {
      best = a;
      best_v = nv;
      best_c = nc;
    }
  }
  return best;
}

inline AttackerEvent next_event(Adversary& adv, const AdversaryView& view, const CostModel& cm) {
  return std::visit(
      [&](auto& a) -> AttackerEvent {
        using A = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<A, UniformRandom>) {
          auto events = admissible_attacker(view.z_tilde, view.obs.flags());
          std::uniform_int_distribution<std::size_t> pick(0, events.size() - 1);
          return events[pick(a.rng)];
        } else if constexpr (std::is_same_v<A, WorstCaseGreedy>) {
          if (!view.s) return greedy_pre_move(a.values, view.obs, view.z, cm);
          return worst_case_greedy_event(a.values, view.obs, *view.s, view.d, view.z,
                                         view.z_tilde, cm);
        } else {
          if (a.next >= a.events.size()) return AttackerEvent::null_event();
          return a.events[a.next++];
        }
      },
      adv);
}

inline SystemState checked_attack(const SystemState& zt, const AttackerEvent& a,
                                  const ModelFlags& flags) {
  if (!is_admissible(zt, a, flags))
    throw ProtocolError("adversary played " + a.name() + " which is not admissible at " +
                        zt.name());
  return apply_attacker(zt, a, flags);
}

}  // namespace detail

/// V* at the initial observer state. With an intermediate start the initial
/// set is not a decision state and its value is the worst over the first
/// attacker observation.
inline double initial_value(const ObserverAutomaton& obs, const ValueFunction& v) {
  if (obs.start_phase() == StartPhase::decision) return v.at(*obs.find(obs.initial()));
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& e : obs.observations(0)) m = std::max(m, v.at(e.target));
  return m;
}

/// Closed loop: at every step the defender plays policy[S_t], the adversary
/// answers, the defender observes and updates S_t. Z0 must be a candidate
/// of the initial observer state.
inline Trace simulate(const ObserverAutomaton& obs, std::span<const DefenderAction> policy,
                      Adversary& adversary, const SystemState& z0, std::size_t horizon,
                      const CostModel& cm) {
  if (horizon < 1) throw ModelError("horizon must be at least 1");
  if (policy.size() != obs.size()) throw ModelError("policy does not match the observer automaton");
  if (!obs.initial().contains(z0.with_phase(Phase::decision)))
    throw ModelError("initial true state " + z0.name() + " is not in " + obs.initial().name());
  const auto& flags = obs.flags();

  Trace trace;
  trace.horizon = horizon;
  SystemState z = z0.with_phase(Phase::decision);
  std::uint32_t s = 0;
  ObserverState current = obs.initial();

  if (obs.start_phase() == StartPhase::intermediate) {
    const auto zt = z.with_phase(Phase::intermediate);
    AdversaryView view{obs, std::nullopt, DefenderAction::null_action(), z, zt};
    const AttackerEvent a = detail::next_event(adversary, view, cm);
    const AttackerObs seen = observe(a);
    z = detail::checked_attack(zt, a, flags);
    bool found = false;
    for (const auto& e : obs.observations(0))
      if (e.obs == seen) {
        s = e.target;
        found = true;
      }
    if (!found) throw InconsistentObservation("initial observation " + seen.name() + " impossible");
    current = obs.state(s);
    trace.pre_move = PreMove{z0.with_phase(Phase::decision), a, seen};
  } else {
    s = *obs.find(current);
  }

  double discount = 1.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    if (!current.contains(z))
      throw ModelError("observer unsound at step " + std::to_string(t) + ": " + z.name() +
                       " not in " + current.name());
    TraceStep step;
    step.t = t;
    step.z = z;
    step.s = s;
    step.d = policy[s];
    step.z_tilde = apply_defender(z, step.d);
    AdversaryView view{obs, s, step.d, z, step.z_tilde};
    step.a = detail::next_event(adversary, view, cm);
    const SystemState next = detail::checked_attack(step.z_tilde, step.a, flags);
    step.obs.attacker = observe(step.a);
    if (step.d.kind == DefenderAction::Kind::sense) step.obs.sense_reading = z.level(step.d.computer);
    step.stage_cost = state_cost(z, cm) + action_cost(step.d, cm);
    trace.discounted_total += discount * step.stage_cost;
    discount *= cm.beta;

    s = obs.successor(s, step.d, step.obs);
    current = observer_step(current, step.d, step.obs, flags);
    if (current != obs.state(s))
      throw ModelError("observer automaton disagrees with the direct observer update at step " +
                       std::to_string(t));
    z = next;
    trace.steps.push_back(std::move(step));
  }
  return trace;
}

/// Sum of beta^t times the logged stage costs.
inline double recompute_discounted_total(const Trace& trace, double beta) {
  double total = 0.0;
  for (const auto& st : trace.steps) total += std::pow(beta, static_cast<double>(st.t)) * st.stage_cost;
  return total;
}

/// One JSON object per line.
inline void write_trace(const Trace& trace, std::ostream& out) {
  if (trace.pre_move)
    out << "{\"pre_move\":true,\"z\":\"" << trace.pre_move->z0.name() << "\",\"a\":\""
        << trace.pre_move->a.name() << "\",\"obs\":\"" << trace.pre_move->obs.name() << "\"}\n";
  for (const auto& st : trace.steps) {
    out << "{\"t\":" << st.t << ",\"z\":\"" << st.z.name() << "\",\"s\":" << st.s << ",\"d\":\""
        << st.d.name() << "\",\"z_tilde\":\"" << st.z_tilde.name() << "\",\"a\":\""
        << st.a.name() << "\",\"obs\":\"" << st.obs.attacker.name() << "\",\"reading\":";
    if (st.obs.sense_reading) out << '"' << level_char(*st.obs.sense_reading) << '"';
    else out << "null";
    out << ",\"cost\":" << detail::fmt_double(st.stage_cost) << "}\n";
  }
  out << "{\"horizon\":" << trace.horizon
      << ",\"discounted_total\":" << detail::fmt_double(trace.discounted_total) << "}\n";
}

}  // namespace sentinel
