#pragma once

#include "hydrotwin/decision.hpp"
#include "hydrotwin/learner.hpp"
#include "hydrotwin/scheduler.hpp"
#include "hydrotwin/twin.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace hydrotwin {

struct TrainingOptions {
    TrainConfig gbt;   // 200 trees, depth 3, lr 0.1
    KnnConfig knn;
    int k_folds = 5;
    std::uint64_t selection_seed = 7;
    bool include_mean_baseline = true;

    friend bool operator==(const TrainingOptions&, const TrainingOptions&) = default;
};

/// Everything a deployment fixes up front. Loaded from JSON; absent keys keep
/// the defaults below.
struct SystemConfig {
    Plant plant = Plant::default_plant();
    double initial_level_pct = 50.0;
    Timestamp clock_start{std::chrono::sys_days{std::chrono::year{2024} / 3 / 1}};   // used when no history is loaded
    int step_minutes = 15;
    PlanConfig plan;
    HysteresisPolicy hysteresis;
    GroundTruthParams ground_truth;
    InflowGenerator inflow;
    double rain_inflow_pct_per_mm = 0.05;   // extra inflow per step per mm of daily rain
    std::uint64_t sim_seed = 1;
    TrainingOptions training;
    int fill_limit = 3;
    std::string model_path;           // empty: no model preloaded
    std::string historian_path;       // empty: no history preloaded
    std::string weather_path;
    std::string run_log_path;         // empty: runs kept in memory only

    void validate() const;
};

void to_json(nlohmann::json& j, const PlanConfig& v);
void from_json(const nlohmann::json& j, PlanConfig& v);
void to_json(nlohmann::json& j, const TrainingOptions& v);
void from_json(const nlohmann::json& j, TrainingOptions& v);
void to_json(nlohmann::json& j, const SystemConfig& v);
void from_json(const nlohmann::json& j, SystemConfig& v);

/// Relative paths inside the file resolve against the file's directory.
SystemConfig load_config(const std::filesystem::path& path);

/// Reads HYDROTWIN_CONFIG when set, else defaults.
SystemConfig config_from_environment();

/// HYDROTWIN_PORT or 8080.
int port_from_environment();

} // namespace hydrotwin
