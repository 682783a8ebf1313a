#pragma once

#include "hydrotwin/config.hpp"
#include "hydrotwin/datastore.hpp"
#include "hydrotwin/decision.hpp"
#include "hydrotwin/learner.hpp"

#include <cstdint>
#include <vector>

namespace hydrotwin {

struct SimulatedOperation {
    std::vector<HistorianRecord> historian;
    std::vector<WeatherRecord> weather;
};

/// Synthetic plant history: weather-driven inflow, reactors run by the
/// deadband policy, operating points drawn every 16 steps, noisy energy and
/// quality readings on active steps. Each row at time t describes step t;
/// tank_level_pct is the level at the end of that step.
SimulatedOperation simulate_operation(const SystemConfig& config, int steps, std::uint64_t seed, Timestamp start);

struct TrainingResult {
    Model model;
    std::vector<CandidateScore> ranking;
    std::size_t rows = 0;
    std::vector<OutputMetrics> in_sample;
};

/// Mean predictor, GBT and kNN, in that order.
std::vector<Candidate> training_candidates(const TrainingOptions& options);

TrainingResult train_from_dataset(const Dataset& data, const TrainingOptions& options);
TrainingResult train_from_records(const std::vector<HistorianRecord>& historian, const SystemConfig& config);

struct PlanningInputs {
    PlantState state;
    TimeSeries inflow;         // percent of capacity per step
    ExogFeatures exog;         // empty unless the feature forecaster is configured
};

PlanningInputs planning_inputs(const std::vector<HistorianRecord>& historian,
                               const std::vector<WeatherRecord>& weather, const SystemConfig& config);

Recommendation plan_from_records(const std::vector<HistorianRecord>& historian,
                                 const std::vector<WeatherRecord>& weather, const Model& model,
                                 const SystemConfig& config);

ClosedLoopConfig closed_loop_config(const SystemConfig& config, int episodes, int steps);

} // namespace hydrotwin
