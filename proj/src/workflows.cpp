#include "hydrotwin/workflows.hpp"

#include "hydrotwin/errors.hpp"

#include <cmath>
#include <random>

namespace hydrotwin {

namespace {

double round_to(double v, double unit) { return std::round(v / unit) * unit; }

// Rounds through a decimal scale so the stored double is the one nearest the
// short decimal, e.g. 0.145 rather than 0.14500000000000002.
double decimal(double v, int places) {
    const double scale = std::pow(10.0, places);
    return std::round(v * scale) / scale;
}

} // namespace

SimulatedOperation simulate_operation(const SystemConfig& config, int steps, std::uint64_t seed, Timestamp start) {
    config.validate();
    if (steps < 1) fail(ErrorCode::validation, "simulation needs at least one step");
    const Plant& plant = config.plant;
    if (plant.reactor_count() > 3) fail(ErrorCode::validation, "the historian schema records at most three reactors");

    std::mt19937_64 rng(seed);
    SimulatedOperation out;

    // Daily weather covering every step.
    const std::chrono::minutes step{config.step_minutes};
    const Date first_day = date_of(start);
    const Date last_day = date_of(start + step * (steps - 1));
    std::bernoulli_distribution rainy(0.35);
    std::exponential_distribution<double> rain_amount(1.0 / 8.0);
    std::normal_distribution<double> tmax(28.0, 3.0);
    std::uniform_real_distribution<double> spread(6.0, 12.0);
    for (Date d = first_day; d <= last_day; d += std::chrono::days{1}) {
        const bool wet = rainy(rng);
        const double amount = rain_amount(rng);
        const double hi = decimal(tmax(rng), 1);
        const double lo = decimal(hi - spread(rng), 1);
        out.weather.push_back({d, wet ? decimal(amount, 1) : 0.0, hi, lo});
    }

    std::vector<double> inflows = config.inflow.generate(0, steps, rng);
    for (int t = 0; t < steps; ++t) {
        const Timestamp ts = start + step * t;
        const auto& w = out.weather[static_cast<std::size_t>((date_of(ts) - first_day).count())];
        inflows[static_cast<std::size_t>(t)] = decimal(inflows[static_cast<std::size_t>(t)] +
                                                           config.rain_inflow_pct_per_mm * w.rainfall_mm, 4);
    }

    std::uniform_real_distribution<double> temp(OperatingPoint::temp_min, OperatingPoint::temp_max);
    std::uniform_real_distribution<double> ds(OperatingPoint::ds_min, OperatingPoint::ds_max);
    std::uniform_real_distribution<double> cycle(OperatingPoint::cycle_min, OperatingPoint::cycle_max);
    std::vector<std::optional<OperatingPoint>> ops(static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; t += 16) {
        const OperatingPoint op{round_to(temp(rng), 0.5), decimal(ds(rng), 3), round_to(cycle(rng), 1.0)};
        for (int k = t; k < std::min(t + 16, steps); ++k) ops[static_cast<std::size_t>(k)] = op;
    }

    const PlantState initial = initial_state(plant, config.initial_level_pct);
    ScheduleProblem problem;
    problem.grid.start = start;
    problem.grid.step_minutes = config.step_minutes;
    problem.grid.horizon_steps = steps;
    problem.reactors = plant.reactors;
    problem.initial_status.assign(plant.reactors.size(), false);
    problem.initial_level_pct = config.initial_level_pct;
    problem.target_level_pct = config.plan.target_level_pct;
    problem.inflow_forecast_pct = inflows;
    const Schedule schedule = hysteresis_baseline(problem, config.hysteresis);
    const auto episode = simulate_episode(plant, initial, inflows, schedule, ops, config.ground_truth);

    std::mt19937_64 sensor(config.ground_truth.seed ^ seed);
    for (int t = 0; t < steps; ++t) {
        const auto i = static_cast<std::size_t>(t);
        const Timestamp ts = start + step * t;
        out.historian.push_back({ts, Tag::tank_level_pct, decimal(episode.steps[i].next_state.tank.level_pct, 4)});
        out.historian.push_back({ts, Tag::inflow_m3, decimal(inflows[i] * plant.capacity_m3 / 100.0, 4)});
        for (int r = 0; r < 3; ++r) {
            const bool on = r < plant.reactor_count() && schedule.on(r, t);
            out.historian.push_back({ts, reactor_status_tag(r), on ? 1.0 : 0.0});
        }
        out.historian.push_back({ts, Tag::temp_setpoint_c, ops[i]->temp_setpoint_c});
        out.historian.push_back({ts, Tag::dry_solids_frac, ops[i]->dry_solids_frac});
        out.historian.push_back({ts, Tag::cycle_minutes, ops[i]->cycle_minutes});
        if (schedule.any_on(t)) {
            const auto obs = sample_observation(*ops[i], config.ground_truth, sensor);
            out.historian.push_back({ts, Tag::energy_kwh_m3, decimal(obs.energy, 4)});
            out.historian.push_back({ts, Tag::quality_index, decimal(obs.quality, 6)});
        }
    }
    return out;
}

std::vector<Candidate> training_candidates(const TrainingOptions& options) {
    std::vector<Candidate> out;
    if (options.include_mean_baseline) {
        // Depth-0 trees fit the zero residual mean, leaving the initial mean.
        TrainConfig mean;
        mean.n_trees = 1;
        mean.max_depth = 0;
        out.push_back({"mean", mean});
    }
    out.push_back({"gbt", options.gbt});
    out.push_back({"knn", options.knn});
    return out;
}

TrainingResult train_from_dataset(const Dataset& data, const TrainingOptions& options) {
    auto report = model_selection(data, training_candidates(options), options.k_folds, options.selection_seed);
    TrainingResult out;
    out.in_sample = evaluate(report.best_model, data);
    out.model = std::move(report.best_model);
    out.ranking = std::move(report.ranking);
    out.rows = data.size();
    return out;
}

TrainingResult train_from_records(const std::vector<HistorianRecord>& historian, const SystemConfig& config) {
    const auto grid = grid_covering(historian, config.step_minutes);
    // Filling would duplicate readings onto idle steps; train on observed steps only.
    const auto aligned = align_to_grid(historian, grid, 0);
    return train_from_dataset(build_training_dataset(aligned), config.training);
}

PlanningInputs planning_inputs(const std::vector<HistorianRecord>& historian,
                               const std::vector<WeatherRecord>& weather, const SystemConfig& config) {
    const auto grid = grid_covering(historian, config.step_minutes);
    const auto aligned = align_to_grid(historian, grid, config.fill_limit);
    PlanningInputs in;
    in.state = latest_plant_state(aligned, config.plant);
    in.inflow = inflow_history(aligned, config.plant.capacity_m3);
    if (config.plan.forecast_method == ForecastMethod::feature_model)
        in.exog = exog_from_weather(weather, in.inflow.timestamps.front(), in.inflow.step_minutes,
                                    in.inflow.size() + static_cast<std::size_t>(config.plan.horizon_steps));
    return in;
}

Recommendation plan_from_records(const std::vector<HistorianRecord>& historian,
                                 const std::vector<WeatherRecord>& weather, const Model& model,
                                 const SystemConfig& config) {
    const auto in = planning_inputs(historian, weather, config);
    return plan(config.plant, in.state, in.inflow, in.exog, model, config.plan);
}

ClosedLoopConfig closed_loop_config(const SystemConfig& config, int episodes, int steps) {
    ClosedLoopConfig c;
    c.episodes = episodes;
    c.steps = steps;
    c.seed = config.sim_seed;
    c.hysteresis = config.hysteresis;
    c.inflow = config.inflow;
    c.params = config.ground_truth;
    c.plan = config.plan;
    return c;
}

} // namespace hydrotwin
