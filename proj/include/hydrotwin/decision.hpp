#pragma once

#include "hydrotwin/forecasting.hpp"
#include "hydrotwin/learner.hpp"
#include "hydrotwin/scheduler.hpp"
#include "hydrotwin/twin.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hydrotwin {

/// One axis of the scenario lattice: {min, min+step, ..., <= max}.
struct AxisRange {
    double min = 0.0;
    double max = 0.0;
    double step = 1.0;

    void validate(const char* axis) const;
    std::size_t count() const;
    double value(std::size_t i) const;

    friend bool operator==(const AxisRange&, const AxisRange&) = default;
};

struct ScenarioGrid {
    AxisRange temperature{150.0, 180.0, 2.0};
    AxisRange dry_solids{0.12, 0.20, 0.01};
    AxisRange cycle{20.0, 40.0, 5.0};
    std::size_t cap = 10000;

    void validate() const;
    std::size_t cardinality() const;

    friend bool operator==(const ScenarioGrid&, const ScenarioGrid&) = default;
};

struct QualityPolicy {
    double q_min = 0.9;
    double margin = 0.0;

    void validate() const;
    double threshold() const noexcept { return q_min + margin; }

    friend bool operator==(const QualityPolicy&, const QualityPolicy&) = default;
};

struct CandidateScenario {
    OperatingPoint op_point;
    double predicted_energy = 0.0;
    double predicted_quality = 0.0;
    bool feasible = false;

    friend bool operator==(const CandidateScenario&, const CandidateScenario&) = default;
};

struct Selection {
    CandidateScenario chosen;
    bool quality_risk = false;              // no candidate met the threshold
    std::vector<CandidateScenario> ranked;  // feasible by energy, then infeasible by quality
};

/// Cartesian product of the axis lattices ordered by (temperature, dry
/// solids, cycle).
std::vector<OperatingPoint> enumerate_scenarios(const ScenarioGrid& grid);

/// Cheapest feasible candidate; ties go to lower temperature, then lower
/// cycle, then lower dry solids. Without a feasible candidate the highest
/// predicted quality wins (same tie-break) and quality_risk is set.
Selection select_operating_point(const Model& model, const ScenarioGrid& grid, const QualityPolicy& policy);

struct RecommendationFlags {
    bool quality_risk = false;
    bool not_proven_optimal = false;
    bool level_bound_violation = false;

    friend bool operator==(const RecommendationFlags&, const RecommendationFlags&) = default;
};

struct Recommendation {
    std::string id;
    Timestamp created_at{};
    TimeGrid grid;
    Schedule schedule;
    std::vector<std::optional<OperatingPoint>> op_points;   // present exactly on steps with a reactor ON
    std::vector<double> inflow_forecast_pct;
    std::vector<double> predicted_levels;                   // L_0..L_T
    double predicted_total_energy = 0.0;                    // kWh
    std::optional<double> min_predicted_quality;            // absent when nothing runs
    double objective = 0.0;
    int switch_count = 0;
    double omega = 0.0;
    RecommendationFlags flags;
    std::string forecast_method;
    std::string input_hash;

    friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

struct PlanConfig {
    int horizon_steps = 96;
    double target_level_pct = 50.0;
    double omega = 0.1;
    std::optional<LevelBounds> level_bounds;
    SolverOptions solver{.max_decision_vars = 288, .node_budget = std::nullopt, .beam_width = 256};
    ScenarioGrid grid;
    QualityPolicy policy;
    ForecastMethod forecast_method = ForecastMethod::seasonal_naive;
    int season_period = 96;
    int average_window = 8;
    TrainConfig forecast_learner{.n_trees = 100, .max_depth = 3, .learning_rate = 0.1, .min_samples_leaf = 1, .seed = 7};

    void validate() const;
};

/// Builds the scheduling problem for a plant state and an inflow forecast.
ScheduleProblem make_problem(const Plant& plant, const PlantState& state, const TimeGrid& grid,
                             std::vector<double> inflow_forecast_pct, const PlanConfig& config);

/// Turns a solved schedule into a recommendation: one operating point per
/// active step, predicted energy and quality, flags, id and input hash.
Recommendation assemble_recommendation(const Plant& plant, const PlantState& state, const ScheduleProblem& problem,
                                       const ScheduleSolution& solution, const Model& model,
                                       const PlanConfig& config, const std::string& forecast_method);

/// Forecast, schedule, then pick operating points. The horizon starts one
/// step after the last history sample.
Recommendation plan(const Plant& plant, const PlantState& state, const TimeSeries& inflow_history,
                    const ExogFeatures& exog, const Model& model, const PlanConfig& config);

/// Same pipeline with the forecast supplied by the caller.
Recommendation plan_with_forecast(const Plant& plant, const PlantState& state, const TimeGrid& grid,
                                  std::vector<double> inflow_forecast_pct, const Model& model,
                                  const PlanConfig& config, const std::string& forecast_method = "supplied");

struct ClosedLoopConfig {
    int episodes = 20;
    int steps = 96;
    std::uint64_t seed = 2024;
    double initial_level_lo = 40.0;
    double initial_level_hi = 60.0;
    HysteresisPolicy hysteresis;
    InflowGenerator inflow;
    GroundTruthParams params = GroundTruthParams::noiseless();
    PlanConfig plan;

    void validate() const;
};

struct PolicyMetrics {
    double rms_deviation = 0.0;
    int switches = 0;
    double objective = 0.0;       // deviation + omega * switches on realized inflows
    double total_energy = 0.0;    // kWh
    std::optional<double> min_quality;
    int overflow_steps = 0;
    int underflow_steps = 0;
};

struct EpisodeComparison {
    int episode = 0;
    double initial_level_pct = 0.0;
    PolicyMetrics plan;
    PolicyMetrics baseline;
};

struct ClosedLoopReport {
    std::vector<EpisodeComparison> episodes;
    PolicyMetrics plan;        // aggregate: rms over every step of every episode, sums otherwise
    PolicyMetrics baseline;

    double rms_ratio() const;
};

/// Replays the plan-based policy and the hysteresis baseline on identical
/// seeded inflows. The plan policy sees the realized inflows as its forecast;
/// the baseline runs at the plant's default operating point.
ClosedLoopReport evaluate_closed_loop(const Plant& plant, const Model& model, const ClosedLoopConfig& config);

} // namespace hydrotwin
