#pragma once

#include "hydrotwin/twin.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace hydrotwin {

struct LevelBounds {
    double lo = 0.0;
    double hi = 100.0;
};

/// One instance of the throughput scheduling problem: choose x[r][t] so the
/// tank level tracks the target while penalising on/off switches by omega.
struct ScheduleProblem {
    TimeGrid grid;
    std::vector<ReactorSpec> reactors;
    std::vector<bool> initial_status;          // x[r][-1]
    std::vector<int> initial_steps_in_state;   // empty: no min up/down carry-over at t=0
    double initial_level_pct = 50.0;
    double target_level_pct = 50.0;
    std::vector<double> inflow_forecast_pct;   // one entry per step
    double omega = 0.1;
    std::optional<LevelBounds> level_bounds;   // applied to L_1..L_T

    int horizon() const noexcept { return grid.horizon_steps; }
    int reactor_count() const noexcept { return static_cast<int>(reactors.size()); }
    void validate() const;
};

struct ScheduleSolution {
    Schedule schedule;
    double objective = 0.0;
    double deviation_sum = 0.0;
    int switch_count = 0;
    double omega_used = 0.0;
    bool optimal = false;
    std::int64_t nodes_explored = 0;
    std::vector<double> levels;   // L_0..L_T, unclamped
};

struct SolverOptions {
    int max_decision_vars = 96;
    std::optional<std::int64_t> node_budget;
    int beam_width = 256;   // states kept per layer once the budget is spent
};

struct HysteresisPolicy {
    double on_above_pct = 60.0;
    double off_below_pct = 40.0;

    void validate() const;
};

/// Evaluates a fixed schedule. Levels follow the unclamped recursion; the
/// returned solution is never flagged optimal.
ScheduleSolution objective_value(const ScheduleProblem& problem, const Schedule& schedule);

/// True when the schedule satisfies min up/down and the optional level bounds.
bool satisfies_constraints(const ScheduleProblem& problem, const Schedule& schedule);

/// Exact minimiser. Ties resolve to the lexicographically smallest schedule in
/// row-major cell order.
ScheduleSolution solve_exact(const ScheduleProblem& problem, const SolverOptions& options = {});

/// Exhaustive oracle over all 2^(R*T) schedules; R*T must not exceed 24.
ScheduleSolution brute_force(const ScheduleProblem& problem);

Schedule hysteresis_baseline(const ScheduleProblem& problem, const HysteresisPolicy& policy);

/// Two costs closer than this are treated as equal when breaking ties.
bool costs_tie(double a, double b) noexcept;

} // namespace hydrotwin
