#include "hydrotwin/config.hpp"

#include "hydrotwin/errors.hpp"
#include "hydrotwin/serialization.hpp"
#include "hydrotwin/timeutil.hpp"

#include <cstdlib>

namespace hydrotwin {

namespace {

template <class T>
void read(const Json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::validation, std::string("config field '") + key + "': " + e.what());
    }
}

std::string resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (base / p).lexically_normal().string();
}

} // namespace

void SystemConfig::validate() const {
    plant.validate();
    if (!(initial_level_pct >= 0.0 && initial_level_pct <= 100.0))
        fail(ErrorCode::validation, "initial_level_pct must lie in [0, 100]");
    if (step_minutes < 1) fail(ErrorCode::validation, "step_minutes must be >= 1");
    plan.validate();
    hysteresis.validate();
    ground_truth.validate();
    inflow.validate();
    if (!(rain_inflow_pct_per_mm >= 0.0)) fail(ErrorCode::validation, "rain_inflow_pct_per_mm must be >= 0");
    training.gbt.validate();
    if (training.knn.k < 1) fail(ErrorCode::validation, "knn k must be >= 1");
    if (training.k_folds < 2) fail(ErrorCode::validation, "k_folds must be >= 2");
    if (fill_limit < 0) fail(ErrorCode::validation, "fill_limit must be >= 0");
}

void to_json(Json& j, const PlanConfig& v) {
    j = {{"horizon_steps", v.horizon_steps},
         {"target_level_pct", v.target_level_pct},
         {"omega", v.omega},
         {"level_bounds", v.level_bounds ? Json(*v.level_bounds) : Json(nullptr)},
         {"solver", v.solver},
         {"grid", v.grid},
         {"policy", v.policy},
         {"forecast_method", to_string(v.forecast_method)},
         {"season_period", v.season_period},
         {"average_window", v.average_window},
         {"forecast_learner", v.forecast_learner}};
}

void from_json(const Json& j, PlanConfig& v) {
    read(j, "horizon_steps", v.horizon_steps);
    read(j, "target_level_pct", v.target_level_pct);
    read(j, "omega", v.omega);
    if (j.contains("level_bounds"))
        v.level_bounds = j.at("level_bounds").is_null() ? std::nullopt
                                                         : std::optional(j.at("level_bounds").get<LevelBounds>());
    read(j, "solver", v.solver);
    read(j, "grid", v.grid);
    read(j, "policy", v.policy);
    if (j.contains("forecast_method"))
        v.forecast_method = forecast_method_from_string(j.at("forecast_method").get<std::string>());
    read(j, "season_period", v.season_period);
    read(j, "average_window", v.average_window);
    read(j, "forecast_learner", v.forecast_learner);
}

void to_json(Json& j, const TrainingOptions& v) {
    j = {{"gbt", v.gbt},
         {"knn", v.knn},
         {"k_folds", v.k_folds},
         {"selection_seed", v.selection_seed},
         {"include_mean_baseline", v.include_mean_baseline}};
}

void from_json(const Json& j, TrainingOptions& v) {
    read(j, "gbt", v.gbt);
    read(j, "knn", v.knn);
    read(j, "k_folds", v.k_folds);
    read(j, "selection_seed", v.selection_seed);
    read(j, "include_mean_baseline", v.include_mean_baseline);
}

void to_json(Json& j, const SystemConfig& v) {
    j = {{"plant", v.plant},
         {"initial_level_pct", v.initial_level_pct},
         {"clock_start", format_rfc3339(v.clock_start)},
         {"step_minutes", v.step_minutes},
         {"plan", v.plan},
         {"hysteresis", v.hysteresis},
         {"ground_truth", v.ground_truth},
         {"inflow", v.inflow},
         {"rain_inflow_pct_per_mm", v.rain_inflow_pct_per_mm},
         {"sim_seed", v.sim_seed},
         {"training", v.training},
         {"fill_limit", v.fill_limit},
         {"model_path", v.model_path},
         {"historian_path", v.historian_path},
         {"weather_path", v.weather_path},
         {"run_log_path", v.run_log_path}};
}

void from_json(const Json& j, SystemConfig& v) {
    if (!j.is_object()) fail(ErrorCode::validation, "config must be a JSON object");
    read(j, "plant", v.plant);
    read(j, "initial_level_pct", v.initial_level_pct);
    if (j.contains("clock_start")) {
        const auto ts = parse_rfc3339(j.at("clock_start").get<std::string>());
        if (!ts) fail(ErrorCode::validation, "clock_start must be an RFC 3339 UTC time");
        v.clock_start = *ts;
    }
    read(j, "step_minutes", v.step_minutes);
    read(j, "plan", v.plan);
    read(j, "hysteresis", v.hysteresis);
    read(j, "ground_truth", v.ground_truth);
    read(j, "inflow", v.inflow);
    read(j, "rain_inflow_pct_per_mm", v.rain_inflow_pct_per_mm);
    read(j, "sim_seed", v.sim_seed);
    read(j, "training", v.training);
    read(j, "fill_limit", v.fill_limit);
    read(j, "model_path", v.model_path);
    read(j, "historian_path", v.historian_path);
    read(j, "weather_path", v.weather_path);
    read(j, "run_log_path", v.run_log_path);
}

SystemConfig load_config(const std::filesystem::path& path) {
    auto doc = load_document(path);
    // The envelope is optional for hand-written config files.
    if (doc.is_object() && doc.contains("schema_version")) doc = open_document(doc, "config");
    SystemConfig cfg = doc.get<SystemConfig>();
    const auto base = path.parent_path();
    cfg.model_path = resolve(base, cfg.model_path);
    cfg.historian_path = resolve(base, cfg.historian_path);
    cfg.weather_path = resolve(base, cfg.weather_path);
    cfg.run_log_path = resolve(base, cfg.run_log_path);
    cfg.validate();
    return cfg;
}

SystemConfig config_from_environment() {
    const char* path = std::getenv("HYDROTWIN_CONFIG");
    if (path == nullptr || *path == '\0') {
        SystemConfig cfg;
        cfg.validate();
        return cfg;
    }
    return load_config(path);
}

int port_from_environment() {
    const char* text = std::getenv("HYDROTWIN_PORT");
    if (text == nullptr || *text == '\0') return 8080;
    char* end = nullptr;
    const long port = std::strtol(text, &end, 10);
    if (*end != '\0' || port < 0 || port > 65535) fail(ErrorCode::validation, "HYDROTWIN_PORT must be a port number");
    return static_cast<int>(port);
}

} // namespace hydrotwin
