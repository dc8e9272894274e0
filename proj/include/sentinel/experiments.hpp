#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "sentinel/solver.hpp"

namespace sentinel {

/// Coarse action kinds ranked by cost: null < sense < re-image.
inline int action_rank(const DefenderAction& d) { return static_cast<int>(d.kind); }

inline constexpr std::array<DefenderAction::Kind, 3> kActionKinds = {
    DefenderAction::Kind::null, DefenderAction::Kind::sense, DefenderAction::Kind::reimage};

inline std::string_view action_kind_name(DefenderAction::Kind k) {
  switch (k) {
    case DefenderAction::Kind::null: return "null";
    case DefenderAction::Kind::sense: return "sense";
    case DefenderAction::Kind::reimage: return "reimage";
  }
  return "?";
}

struct SwitchPoint {
  double r = 0.0;  // midpoint between the last old and first new grid value
  DefenderAction from;
  DefenderAction to;
};

struct SweepResult {
  std::vector<double> r_values;
  std::vector<std::vector<DefenderAction>> actions;  // [state][r index]
  std::vector<std::size_t> iterations;               // per r index
  std::vector<double> residuals;                     // per r index

  std::size_t states() const noexcept { return actions.size(); }
};

/// Grid from..to in steps of `step`, endpoints included, values rounded to
/// 1e-9 so repeated additions do not leak into reports.
inline std::vector<double> make_grid(double from, double to, double step) {
  std::vector<std::string> errors;
  if (!(from > 0.0)) errors.push_back("sweep r_from must be positive");
  if (!(to >= from)) errors.push_back("sweep r_to must be at least r_from");
  if (!(step > 0.0)) errors.push_back("sweep r_step must be positive");
  if (!errors.empty()) throw ConfigError(std::move(errors));
  std::vector<double> grid;
  const auto n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i)
    grid.push_back(std::round((from + static_cast<double>(i) * step) * 1e9) / 1e9);
  if (to - grid.back() > 1e-9) grid.push_back(to);
  return grid;
}

/// Cost model with every re-image cost set to r.
inline CostModel with_reimage_cost(const CostModel& base, double r) {
  CostModel cm = base;
  std::fill(cm.cost_reimage.begin(), cm.cost_reimage.end(), r);
  return cm;
}

/// Solves the restricted problem at every grid value of the re-image cost,
/// each from a cold start. Grid points are split across `workers` threads;
/// the result does not depend on the worker count.
inline SweepResult sweep_reimage(const ObserverAutomaton& obs, const CostModel& base,
                                 const std::vector<double>& grid, const SolveSettings& settings = {},
                                 unsigned workers = 1) {
  if (grid.empty()) throw ConfigError({"sweep grid is empty"});
  std::vector<std::string> errors;
  for (double r : grid)
    for (const auto& v : with_reimage_cost(base, r).violations())
      errors.push_back("r=" + detail::fmt_double(r) + ": " + v);
  if (!errors.empty()) throw ConfigError(std::move(errors));

  const QTable table = QTable::build(obs, base);
  SweepResult out;
  out.r_values = grid;
  out.actions.assign(obs.size(), std::vector<DefenderAction>(grid.size()));
  out.iterations.assign(grid.size(), 0);
  out.residuals.assign(grid.size(), 0.0);

  auto run = [&](std::size_t g) {
    const CostModel cm = with_reimage_cost(base, grid[g]);
    const Policy p = solve(obs, table, cm, settings);
    for (std::size_t s = 0; s < obs.size(); ++s) out.actions[s][g] = p.action[s];
    out.iterations[g] = p.iterations;
    out.residuals[g] = p.residual;
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(grid.size())));
  if (workers == 1) {
    for (std::size_t g = 0; g < grid.size(); ++g) run(g);
    return out;
  }
  std::vector<std::exception_ptr> failures(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t g = w; g < grid.size(); g += workers) run(g);
      } catch (...) {
        failures[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
  return out;
}

inline SweepResult sweep_reimage(const ObserverAutomaton& obs, const CostModel& base, double r_from,
                                 double r_to, double r_step, const SolveSettings& settings = {},
                                 unsigned workers = 1) {
  return sweep_reimage(obs, base, make_grid(r_from, r_to, r_step), settings, workers);
}

struct ThresholdReport {
  std::vector<std::vector<SwitchPoint>> switches;  // per state, increasing r
  std::vector<std::size_t> reversals;              // states whose kind rank ever rises
  std::vector<std::size_t> null_left;              // states that leave null once reached
  bool monotone() const noexcept { return reversals.empty() && null_left.empty(); }
};

/// Switch points of every state, and whether action kinds only get cheaper
/// as r grows with null absorbing.
inline ThresholdReport detect_thresholds(const SweepResult& sweep) {
  if (sweep.r_values.empty()) throw ModelError("empty sweep");
  ThresholdReport rep;
  rep.switches.resize(sweep.states());
  for (std::size_t s = 0; s < sweep.states(); ++s) {
    const auto& row = sweep.actions[s];
    bool reversed = false, left_null = false;
    for (std::size_t g = 1; g < row.size(); ++g) {
      if (row[g] == row[g - 1]) continue;
      rep.switches[s].push_back(
          {(sweep.r_values[g - 1] + sweep.r_values[g]) / 2.0, row[g - 1], row[g]});
      if (action_rank(row[g]) > action_rank(row[g - 1])) reversed = true;
      if (row[g - 1].kind == DefenderAction::Kind::null) left_null = true;
    }
    if (reversed) rep.reversals.push_back(s);
    if (left_null) rep.null_left.push_back(s);
  }
  return rep;
}

/// First r at which the state's action stops being a re-image, with the
/// action it switches to. Empty when the state never re-images or never stops.
inline std::optional<SwitchPoint> reimage_exit(const ThresholdReport& rep, std::size_t s) {
  for (const auto& sw : rep.switches.at(s))
    if (sw.from.kind == DefenderAction::Kind::reimage &&
        sw.to.kind != DefenderAction::Kind::reimage)
      return sw;
  return std::nullopt;
}

/// Fraction of observer states choosing each action kind, per r.
inline std::vector<std::array<double, 3>> action_share(const SweepResult& sweep) {
  if (sweep.states() == 0) throw ModelError("empty sweep");
  std::vector<std::array<double, 3>> out(sweep.r_values.size(), {0.0, 0.0, 0.0});
  for (std::size_t g = 0; g < sweep.r_values.size(); ++g) {
    std::array<std::size_t, 3> counts{};
    for (std::size_t s = 0; s < sweep.states(); ++s) ++counts[action_rank(sweep.actions[s][g])];
    for (int k = 0; k < 3; ++k)
      out[g][k] = static_cast<double>(counts[k]) / static_cast<double>(sweep.states());
  }
  return out;
}

/// Indices of observer states having z as a candidate.
inline std::vector<std::uint32_t> states_containing(const ObserverAutomaton& obs,
                                                    const SystemState& z) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t s = 0; s < obs.size(); ++s)
    if (obs.state(s).contains(z)) out.push_back(s);
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string fmt_r(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", r);
  return buf;
}

}  // namespace detail

inline void write_actions_csv(const SweepResult& sweep, std::ostream& out) {
  out << "state_index,r,action\n";
  for (std::size_t s = 0; s < sweep.states(); ++s)
    for (std::size_t g = 0; g < sweep.r_values.size(); ++g)
      out << s << ',' << detail::fmt_r(sweep.r_values[g]) << ',' << sweep.actions[s][g].name()
          << '\n';
}

inline void write_shares_csv(const SweepResult& sweep, std::ostream& out) {
  const auto shares = action_share(sweep);
  out << "r,kind,fraction\n";
  for (std::size_t g = 0; g < shares.size(); ++g)
    for (int k = 0; k < 3; ++k)
      out << detail::fmt_r(sweep.r_values[g]) << ',' << action_kind_name(kActionKinds[k]) << ','
          << detail::fmt_double(shares[g][k]) << '\n';
}

inline void write_thresholds_csv(const ThresholdReport& rep, std::ostream& out) {
  out << "state_index,r_switch,from,to\n";
  for (std::size_t s = 0; s < rep.switches.size(); ++s)
    for (const auto& sw : rep.switches[s])
      out << s << ',' << detail::fmt_r(sw.r) << ',' << sw.from.name() << ',' << sw.to.name()
          << '\n';
}

}  // namespace sentinel
