// Builds the two-computer observer, solves it at one re-image cost and
// plays the policy against the greedy adversary.

#include <cstdio>

#include "sentinel/sim.hpp"

using namespace sentinel;

int main() {
  auto obs = build_observer_automaton(2);
  std::printf("observer: %zu states, %zu transitions\n", obs.size(), obs.transition_count());

  auto cm = CostModel::uniform(2, 0.1, 10.0);
  auto policy = solve(obs, cm);
  std::printf("value iteration: %zu iterations, residual %.2e\n", policy.iterations,
              policy.residual);

  for (std::uint32_t s = 0; s < 8; ++s)
    std::printf("  %-40s %s\n", obs.state(s).name().c_str(), policy.action[s].name().c_str());

  Adversary adversary = WorstCaseGreedy{policy.value};
  auto trace = simulate(obs, policy.action, adversary, SystemState::parse("NN"), 20, cm);
  for (const auto& st : trace.steps)
    std::printf("t=%2zu Z=%s d=%-3s a=%-5s cost=%.1f\n", st.t, st.z.name().c_str(),
                st.d.name().c_str(), st.a.name().c_str(), st.stage_cost);
  std::printf("discounted cost over 20 steps: %.3f (V* bound %.3f)\n", trace.discounted_total,
              initial_value(obs, policy.value));
}
