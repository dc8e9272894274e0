#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "sentinel/experiments.hpp"
#include "sentinel/solver.hpp"

using namespace sentinel;

namespace {

ObserverState example1() { return ObserverState::parse("{FNN,FNR,FRN}"); }

oracle::Mask to_mask(const ObserverState& s) {
  oracle::Mask m = 0;
  for (auto c : s.codes()) m |= 1u << c;
  return m;
}

}  // namespace

TEST(ObserverState, Basics) {
  auto s = ObserverState::parse("{FRN,FNN,FNR,FNN}");
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s.name(), "{FNN,FNR,FRN}");
  EXPECT_TRUE(s.contains(SystemState::parse("FNR")));
  EXPECT_FALSE(s.contains(SystemState::parse("FFF")));
  EXPECT_THROW(ObserverState::parse("{}"), Error);
  EXPECT_THROW(ObserverState::parse("{FN,FNN}"), Error);
}

TEST(ObserverState, Initial) {
  EXPECT_EQ(initial_observer(2).name(), "{NN}");
  EXPECT_EQ(full_observer(1).name(), "{N,R,W,F}");
  EXPECT_EQ(full_observer(1).size(), 4u);
}

TEST(Observer, SensePartitionExample) {
  auto parts = sense_partition(example1(), 2);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0].first, Level::N);
  EXPECT_EQ(parts[0].second.name(), "{FNN,FNR}");
  EXPECT_EQ(parts[1].first, Level::R);
  EXPECT_EQ(parts[1].second.name(), "{FRN}");
}

TEST(Observer, SensePartitionIsAPartition) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<SystemState> zs;
    const int n = 1 + static_cast<int>(rng() % 10);
    for (int j = 0; j < n; ++j) zs.push_back(SystemState::from_index(3, rng() % 64));
    auto s = ObserverState::of(zs);
    const int i = 1 + static_cast<int>(rng() % 3);
    std::set<std::uint32_t> seen;
    for (const auto& [z, part] : sense_partition(s, i))
      for (auto c : part.codes()) {
        EXPECT_EQ(SystemState::from_index(3, c).level(i), z);
        EXPECT_TRUE(seen.insert(c).second);
      }
    EXPECT_EQ(seen.size(), s.size());
    if (s.size() == 1) {
      EXPECT_EQ(sense_partition(s, i).size(), 1u);
    }
  }
}

TEST(Observer, StepExample1) {
  auto next = observer_step(example1(), DefenderAction::sense(2),
                            Observation{AttackerObs::h(1, 2), Level::N}, {});
  EXPECT_EQ(next.name(), "{FWN,FWR}");
}

TEST(Observer, StepFromAllNormal) {
  auto s = ObserverState::parse("{NN}");
  auto next = observer_step(s, DefenderAction::null_action(), Observation{AttackerObs::x(), {}}, {});
  EXPECT_EQ(next.name(), "{NN,NR,RN}");
  EXPECT_THROW(observer_step(s, DefenderAction::null_action(),
                             Observation{AttackerObs::h(1, 2), {}}, {}),
               InconsistentObservation);
  EXPECT_THROW(observer_step(s, DefenderAction::sense(1), Observation{AttackerObs::x(), Level::F},
                             {}),
               InconsistentObservation);
  EXPECT_THROW(observer_step(s, DefenderAction::sense(1), Observation{AttackerObs::x(), {}}, {}),
               InconsistentObservation);
}

TEST(Observer, QExample1) {
  auto q = compute_q(example1(), DefenderAction::sense(2), SystemState::parse("FNR"), {});
  EXPECT_NE(std::find(q.begin(), q.end(), ObserverState::parse("{FWN,FWR}")), q.end());
  // X and H(1,3) are realizable from (F,N,R) as well
  EXPECT_EQ(q.size(), 3u);
  EXPECT_NE(std::find(q.begin(), q.end(), ObserverState::parse("{FNW}")), q.end());
}

TEST(Observer, QSingleComputer) {
  auto q = compute_q(ObserverState::parse("{N}"), DefenderAction::null_action(),
                     SystemState::parse("N"), {});
  ASSERT_EQ(q.size(), 1u);
  EXPECT_EQ(q[0].name(), "{N,R}");
  q = compute_q(ObserverState::parse("{F}"), DefenderAction::reimage(1), SystemState::parse("F"),
                {});
  ASSERT_EQ(q.size(), 1u);
  EXPECT_EQ(q[0].name(), "{N,R}");
  EXPECT_THROW(compute_q(ObserverState::parse("{F}"), DefenderAction::reimage(1),
                         SystemState::parse("N"), {}),
               ModelError);
}

TEST(ObserverAutomaton, TwoComputers) {
  auto obs = build_observer_automaton(2);
  EXPECT_EQ(obs.size(), 87u);
  EXPECT_EQ(obs.transition_count(), 1207u);
  EXPECT_EQ(obs.intermediate_count(), 136u);
  EXPECT_EQ(obs.bipartite_edge_count(), 973u);
}

TEST(ObserverAutomaton, StartPhaseAndFlagVariants) {
  auto d = build_observer_automaton(2, {}, ObserverOptions{StartPhase::decision});
  EXPECT_EQ(d.size(), 88u);
  EXPECT_EQ(d.transition_count(), 1212u);
  auto nw = build_observer_automaton(2, ModelFlags{false});
  EXPECT_EQ(nw.size(), 87u);
  EXPECT_EQ(nw.transition_count(), 1115u);
}

TEST(ObserverAutomaton, Capacity) {
  EXPECT_THROW(build_observer_automaton(2, {}, ObserverOptions{StartPhase::intermediate, 50}),
               CapacityError);
}

TEST(ObserverAutomaton, SingleComputerMatchesPowersetOracle) {
  for (auto start : {StartPhase::intermediate, StartPhase::decision}) {
    auto obs = build_observer_automaton(1, {}, ObserverOptions{start});
    auto ref = oracle::reachable(1u, start == StartPhase::intermediate);
    std::set<oracle::Mask> got;
    for (const auto& s : obs.states()) got.insert(to_mask(s));
    EXPECT_EQ(got, std::set<oracle::Mask>(ref.states.begin(), ref.states.end()));
    EXPECT_EQ(obs.transition_count(), ref.transitions);
    // successors agree state by state
    const auto acts = defender_actions(1);
    for (std::uint32_t s = 0; s < obs.size(); ++s)
      for (int a = 0; a < 3; ++a)
        for (auto z : obs.state(s).candidates()) {
          auto reading = a == oracle::kSense ? std::optional<Level>(z.level(1)) : std::nullopt;
          auto next = obs.successor(s, acts[a], Observation{AttackerObs::x(), reading});
          EXPECT_EQ(to_mask(obs.state(next)),
                    oracle::successor(to_mask(obs.state(s)), a, static_cast<int>(z.index())));
        }
  }
  EXPECT_EQ(build_observer_automaton(1).size(), 7u);
  EXPECT_EQ(build_observer_automaton(1).transition_count(), 31u);
}

// The automaton route and the direct definition of Q agree everywhere.
TEST(ObserverAutomaton, QTwoRoutes) {
  auto obs = build_observer_automaton(2);
  for (std::uint32_t s = 0; s < obs.size(); ++s)
    for (const auto& d : defender_actions(2))
      for (const auto& z : obs.state(s).candidates()) {
        auto direct = compute_q(obs.state(s), d, z, obs.flags());
        std::vector<ObserverState> via;
        for (auto idx : automaton_q(obs, s, d, z)) via.push_back(obs.state(idx));
        std::sort(via.begin(), via.end());
        EXPECT_EQ(via, direct);
      }
}

TEST(ObserverAutomaton, SuccessorMatchesDirectStep) {
  auto obs = build_observer_automaton(2);
  for (std::uint32_t s = 0; s < obs.size(); ++s)
    for (const auto& d : defender_actions(2))
      for (const auto& z : obs.state(s).candidates())
        for (const auto& o : realizable_observations(z, d, obs.flags()))
          EXPECT_EQ(obs.state(obs.successor(s, d, o)), observer_step(obs.state(s), d, o, obs.flags()));
}

TEST(ObserverAutomaton, Deterministic) {
  auto a = build_observer_automaton(2);
  auto b = build_observer_automaton(2);
  EXPECT_EQ(a, b);
  std::ostringstream fa, fb;
  write_observer_fsm(a, fa);
  write_observer_fsm(b, fb);
  EXPECT_EQ(fa.str(), fb.str());
}

TEST(ObserverAutomaton, FullyCompromisedCensus) {
  auto obs = build_observer_automaton(2);
  auto ff = states_containing(obs, SystemState::parse("FF"));
  std::vector<std::uint32_t> tail;
  for (auto s : ff)
    if (s >= 73) tail.push_back(s);
  EXPECT_EQ(tail.size(), 14u);  // 1-based indices 74..87
  EXPECT_EQ(tail.front(), 73u);
  EXPECT_EQ(tail.back(), 86u);
  EXPECT_EQ(ff.size(), 16u);
}
