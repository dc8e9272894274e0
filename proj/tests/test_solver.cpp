#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "sentinel/solver.hpp"

using namespace sentinel;

namespace {

CostModel fig4(int k, double r) { return CostModel::uniform(k, 0.1, r); }

ObserverAutomaton from_set(const char* set) {
  auto s0 = ObserverState::parse(set);
  return build_observer_automaton(build_system_automaton(s0.computers()), s0,
                                  ObserverOptions{StartPhase::decision});
}

ValueFunction random_values(std::size_t n, std::mt19937_64& rng, double hi) {
  std::uniform_real_distribution<double> u(0.0, hi);
  ValueFunction v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST(Solver, BackupAtAllNormal) {
  auto obs = from_set("{NN}");
  auto cm = fig4(2, 10);
  auto b = bellman_backup(ValueFunction(obs.size(), 0.0), QTable::build(obs, cm), cm);
  EXPECT_DOUBLE_EQ(b.values[0], 0.0);
  EXPECT_EQ(b.minimizers[0].front(), DefenderAction::null_action());
}

TEST(Solver, BackupAtFullyCompromised) {
  auto obs = from_set("{FF}");
  for (double r : {0.5, 3.0, 30.0}) {
    auto cm = fig4(2, r);
    auto b = bellman_backup(ValueFunction(obs.size(), 0.0), QTable::build(obs, cm), cm);
    EXPECT_DOUBLE_EQ(b.values[0], 16.0);
    EXPECT_EQ(b.minimizers[0], std::vector<DefenderAction>{DefenderAction::null_action()});
  }
}

TEST(Solver, BlackwellProperties) {
  auto obs = build_observer_automaton(2);
  auto cm = fig4(2, 10);
  auto table = QTable::build(obs, cm);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> shift(0.0, 50.0);
  for (int trial = 0; trial < 100; ++trial) {
    auto v1 = random_values(obs.size(), rng, 200.0);
    auto v2 = v1;
    for (auto& x : v2) x += shift(rng);
    auto t1 = apply_operator(v1, table, cm);
    auto t2 = apply_operator(v2, table, cm);
    for (std::size_t s = 0; s < obs.size(); ++s) EXPECT_LE(t1[s], t2[s]);

    const double a = shift(rng);
    auto va = v1;
    for (auto& x : va) x += a;
    auto ta = apply_operator(va, table, cm);
    for (std::size_t s = 0; s < obs.size(); ++s) EXPECT_NEAR(ta[s], t1[s] + cm.beta * a, 1e-10);

    auto w = random_values(obs.size(), rng, 200.0);
    auto tw = apply_operator(w, table, cm);
    EXPECT_LE(sup_distance(t1, tw), cm.beta * sup_distance(v1, w) + 1e-12);
  }
}

TEST(Solver, ResidualsContract) {
  auto obs = build_observer_automaton(2);
  auto cm = fig4(2, 10);
  auto vi = value_iteration(QTable::build(obs, cm), cm);
  EXPECT_LE(vi.residual, 1e-9);
  for (std::size_t i = 1; i < vi.residuals.size(); ++i)
    EXPECT_LE(vi.residuals[i], cm.beta * vi.residuals[i - 1] + 1e-12);
  const double bound = (16.0 + 10.0) / (1.0 - cm.beta);
  for (double x : vi.values) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, bound);
  }
}

TEST(Solver, NonConvergenceCarriesResidual) {
  auto obs = build_observer_automaton(2);
  auto cm = fig4(2, 10);
  SolveSettings s;
  s.max_iterations = 3;
  try {
    value_iteration(QTable::build(obs, cm), cm, s);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.residual(), 1e-9);
  }
}

TEST(Solver, WarmStartReachesSameFixedPoint) {
  auto obs = build_observer_automaton(2);
  auto cm = fig4(2, 7);
  auto table = QTable::build(obs, cm);
  auto cold = value_iteration(table, cm);
  SolveSettings warm;
  warm.v0 = ValueFunction(obs.size(), 500.0);
  auto hot = value_iteration(table, cm, warm);
  EXPECT_LE(sup_distance(cold.values, hot.values), 2e-8);
}

TEST(Solver, QTableRejectsForeignCosts) {
  auto obs = build_observer_automaton(1);
  auto table = QTable::build(obs, fig4(1, 5));
  CostModel other = fig4(1, 5);
  other.c_f = 9;
  EXPECT_THROW(apply_operator(ValueFunction(obs.size(), 0.0), table, other), ModelError);
  EXPECT_THROW(apply_operator(ValueFunction(2, 0.0), table, fig4(1, 5)), ModelError);
}

TEST(Solver, ConfidentialityThreat) {
  auto s = ObserverState::parse("{FNN,FNR,FRN}");
  auto cm = fig4(3, 3);
  EXPECT_DOUBLE_EQ(confidentiality_threat(s, 1, cm), 24.0);
  EXPECT_DOUBLE_EQ(confidentiality_threat(s, 2, cm), 1.0);
  EXPECT_DOUBLE_EQ(confidentiality_threat(ObserverState::parse("{NN}"), 2, cm), 0.0);
}

TEST(Solver, TieBreak) {
  auto cm = fig4(2, 3);
  const auto r1 = DefenderAction::reimage(1), r2 = DefenderAction::reimage(2);
  const auto e1 = DefenderAction::sense(1), nd = DefenderAction::null_action();
  std::vector<DefenderAction> both{r1, r2};
  EXPECT_EQ(choose_action(both, ObserverState::parse("{FR,WN}"), cm), r1);
  EXPECT_EQ(choose_action(both, ObserverState::parse("{RF,NW}"), cm), r2);
  EXPECT_EQ(choose_action(both, ObserverState::parse("{FF}"), cm), r1);
  EXPECT_EQ(choose_action(std::vector<DefenderAction>{nd}, ObserverState::parse("{FF}"), cm), nd);
  EXPECT_EQ(choose_action(std::vector<DefenderAction>{nd, e1}, ObserverState::parse("{NN}"), cm), nd);
  EXPECT_EQ(choose_action(std::vector<DefenderAction>{nd, e1}, ObserverState::parse("{RN}"), cm), e1);
  EXPECT_EQ(choose_action(std::vector<DefenderAction>{e1, r1}, ObserverState::parse("{RN}"), cm), e1);
  EXPECT_THROW(choose_action(std::vector<DefenderAction>{}, ObserverState::parse("{NN}"), cm),
               ModelError);
}

TEST(Solver, PolicyChoiceIsOptimal) {
  auto obs = build_observer_automaton(2);
  auto cm = fig4(2, 12);
  auto p = solve(obs, cm);
  for (std::size_t s = 0; s < obs.size(); ++s) {
    const auto& set = p.optimal_set[s];
    EXPECT_NE(std::find(set.begin(), set.end(), p.action[s]), set.end());
  }
}

// Single computer: the DP fixed point against an exhaustive finite-horizon
// game tree written independently of the library.
TEST(SolverOracle, SingleComputerGameTree) {
  struct Setting { double sense, reimage, beta; std::array<double, 4> levels; };
  const std::vector<Setting> settings{{0.1, 5.0, 0.9, {0, 1, 2, 8}},
                                      {0.1, 0.5, 0.9, {0, 1, 2, 8}},
                                      {0.3, 2.0, 0.8, {0, 1, 3, 4}},
                                      {1.0, 20.0, 0.95, {0, 2, 5, 30}},
                                      {0.05, 1.0, 0.5, {0.5, 1, 2, 3}}};
  auto obs = build_observer_automaton(1, {}, ObserverOptions{StartPhase::decision});
  for (const auto& st : settings) {
    CostModel cm = CostModel::uniform(1, st.sense, st.reimage, st.beta);
    cm.c_n = st.levels[0];
    cm.c_r = st.levels[1];
    cm.c_w = st.levels[2];
    cm.c_f = st.levels[3];
    auto p = solve(obs, cm);
    oracle::Costs oc{st.levels, {0.0, st.sense, st.reimage}, st.beta};
    oracle::GameTree tree(oc);
    const double slack = std::pow(st.beta, 200) * cm.value_bound(1) + 1e-6;
    for (std::uint32_t s = 0; s < obs.size(); ++s) {
      oracle::Mask m = 0;
      for (auto c : obs.state(s).codes()) m |= 1u << c;
      EXPECT_NEAR(p.value[s], tree.value(m, 200), slack) << obs.state(s).name();
    }
  }
}

TEST(Solver, PolicyFileRoundTrip) {
  auto obs = build_observer_automaton(2);
  auto cm = fig4(2, 10);
  auto p = solve(obs, cm);
  std::ostringstream out;
  write_policy(obs, cm, p, out);
  std::istringstream in(out.str());
  auto f = read_policy(in);
  EXPECT_EQ(f.k, 2);
  EXPECT_EQ(f.states, obs.states());
  EXPECT_EQ(f.policy.action, p.action);
  EXPECT_EQ(f.policy.optimal_set, p.optimal_set);
  EXPECT_EQ(f.policy.value, p.value);
  EXPECT_EQ(f.costs.cost_reimage, cm.cost_reimage);
  EXPECT_EQ(f.initial, obs.initial());
  std::ostringstream again;
  write_policy(obs, f.costs, f.policy, again);
  EXPECT_EQ(again.str(), out.str());
}

TEST(Solver, PolicyFileRejectsGarbage) {
  std::istringstream junk("hello\n");
  EXPECT_THROW(read_policy(junk), ParseError);
  std::istringstream truncated("sentinel-policy 1\nk 1\nstates 3\n");
  EXPECT_THROW(read_policy(truncated), ParseError);
}
