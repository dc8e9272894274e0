#include <gtest/gtest.h>

#include <sstream>

#include "sentinel/automaton.hpp"

using namespace sentinel;

TEST(Automaton, StateCounts) {
  EXPECT_EQ(build_system_automaton(1).state_count(), 8u);
  EXPECT_EQ(build_system_automaton(2).state_count(), 32u);
  EXPECT_EQ(build_system_automaton(3).state_count(), 128u);
}

TEST(Automaton, SingleComputerDefenderEdges) {
  auto aut = build_system_automaton(1);
  for (std::uint32_t i = 0; i < aut.states_per_phase(); ++i) {
    const auto& edges = aut.defender_edges(i);
    ASSERT_EQ(edges.size(), 3u);
    int expanded = 0;
    for (const auto& e : edges) {
      if (e.event.reading) {
        ++expanded;
        EXPECT_EQ(*e.event.reading, aut.decision_state(i).level(1));
      }
    }
    EXPECT_EQ(expanded, 1);
  }
}

TEST(Automaton, EdgesMatchModelDynamics) {
  for (bool h : {true, false}) {
    auto aut = build_system_automaton(2, ModelFlags{h});
    for (std::uint32_t i = 0; i < aut.states_per_phase(); ++i) {
      auto zt = aut.intermediate_state(i);
      auto events = admissible_attacker(zt, ModelFlags{h});
      ASSERT_EQ(aut.attacker_edges(i).size(), events.size());
      for (std::size_t n = 0; n < events.size(); ++n) {
        EXPECT_EQ(aut.attacker_edges(i)[n].event, events[n]);
        EXPECT_EQ(aut.attacker_edges(i)[n].target, apply_attacker(zt, events[n], ModelFlags{h}).index());
      }
    }
  }
}

TEST(Automaton, CapacityError) {
  EXPECT_THROW(build_system_automaton(3, {}, 100), CapacityError);
}

TEST(Automaton, FsmHasOneRecordPerState) {
  auto text = to_fsm(build_system_automaton(1));
  std::istringstream in(text);
  std::string line;
  int states = 0;
  while (std::getline(in, line)) states += line.rfind("state ", 0) == 0;
  EXPECT_EQ(states, 8);
}

TEST(Automaton, FsmRoundTrip) {
  for (int k = 1; k <= 3; ++k)
    for (bool h : {true, false}) {
      auto aut = build_system_automaton(k, ModelFlags{h});
      std::istringstream in(to_fsm(aut));
      auto back = parse_fsm(in);
      if (k > 1) {
        EXPECT_EQ(back, aut);
      }
      EXPECT_EQ(to_fsm(back), to_fsm(aut));
    }
}

TEST(Automaton, ExportsAreDeterministic) {
  EXPECT_EQ(to_fsm(build_system_automaton(2)), to_fsm(build_system_automaton(2)));
  EXPECT_EQ(to_dot(build_system_automaton(2)), to_dot(build_system_automaton(2)));
}

TEST(Automaton, FsmRejectsBadInput) {
  std::istringstream missing("state D.N decision\n");
  EXPECT_THROW(parse_fsm(missing), ParseError);
  std::istringstream marks(
      "states 2 events 1\nstate D.N decision\nstate I.N intermediate\ntrans I.N Na D.N uc o\n");
  EXPECT_THROW(parse_fsm(marks), ParseError);
  std::istringstream nonbip(
      "states 2 events 1\nstate D.N decision\nstate D.R decision\ntrans D.N Nd D.R c o\n");
  EXPECT_THROW(parse_fsm(nonbip), ParseError);
}

TEST(Automaton, DotShapesAndLabels) {
  auto dot = to_dot(build_system_automaton(1));
  std::size_t boxes = 0, ellipses = 0, pos = 0;
  while ((pos = dot.find("shape=box", pos)) != std::string::npos) ++boxes, ++pos;
  pos = 0;
  while ((pos = dot.find("shape=ellipse", pos)) != std::string::npos) ++ellipses, ++pos;
  EXPECT_EQ(boxes, 4u);
  EXPECT_EQ(ellipses, 4u);
  EXPECT_NE(dot.find("label=\"E1.F\""), std::string::npos);
  EXPECT_NE(dot.find("label=\"P1.1\", style=dashed"), std::string::npos);
}

TEST(Automaton, DefenderEventNames) {
  EXPECT_EQ(DefenderEvent::expanded_sense(2, Level::W).name(), "E2.W");
  EXPECT_EQ(parse_defender_event("E2.W"), DefenderEvent::expanded_sense(2, Level::W));
  EXPECT_EQ(parse_defender_event("R1"), DefenderEvent::plain(DefenderAction::reimage(1)));
}
