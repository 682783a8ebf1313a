#include "hydrotwin/decision.hpp"

#include "hydrotwin/errors.hpp"
#include "hydrotwin/serialization.hpp"
#include "hydrotwin/timeutil.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace hydrotwin {

namespace {

// Lattice values are snapped to nine decimals so 0.12 + 3 * 0.01 lands on the
// double nearest 0.15 instead of accumulating representation error.
double snap(double v) { return std::round(v * 1e9) / 1e9; }

// A fresh reactor has no switching history; it may switch immediately.
constexpr int settled_steps = 1 << 20;

bool tie_break_less(const OperatingPoint& a, const OperatingPoint& b) {
    if (a.temp_setpoint_c != b.temp_setpoint_c) return a.temp_setpoint_c < b.temp_setpoint_c;
    if (a.cycle_minutes != b.cycle_minutes) return a.cycle_minutes < b.cycle_minutes;
    return a.dry_solids_frac < b.dry_solids_frac;
}

bool cheaper(const CandidateScenario& a, const CandidateScenario& b) {
    if (a.predicted_energy != b.predicted_energy) return a.predicted_energy < b.predicted_energy;
    return tie_break_less(a.op_point, b.op_point);
}

bool better_quality(const CandidateScenario& a, const CandidateScenario& b) {
    if (a.predicted_quality != b.predicted_quality) return a.predicted_quality > b.predicted_quality;
    return tie_break_less(a.op_point, b.op_point);
}

bool ranked_before(const CandidateScenario& a, const CandidateScenario& b) {
    if (a.feasible != b.feasible) return a.feasible;
    return a.feasible ? cheaper(a, b) : better_quality(a, b);
}

double sum_sq_dev(std::span<const double> levels, double target) {
    double s = 0.0;
    for (std::size_t t = 1; t < levels.size(); ++t) s += (levels[t] - target) * (levels[t] - target);
    return s;
}

} // namespace

void AxisRange::validate(const char* axis) const {
    if (!std::isfinite(min) || !std::isfinite(max) || !std::isfinite(step))
        fail(ErrorCode::validation, std::string(axis) + " range must be finite");
    if (min > max) fail(ErrorCode::validation, std::string(axis) + " range needs min <= max");
    if (!(step > 0.0)) fail(ErrorCode::validation, std::string(axis) + " step must be positive");
}

std::size_t AxisRange::count() const {
    return static_cast<std::size_t>(std::floor((max - min) / step + 1e-9)) + 1;
}

double AxisRange::value(std::size_t i) const {
    return std::min(snap(min + static_cast<double>(i) * step), max);
}

void ScenarioGrid::validate() const {
    temperature.validate("temperature");
    dry_solids.validate("dry solids");
    cycle.validate("cycle");
    const OperatingPoint lo{temperature.min, dry_solids.min, cycle.min};
    const OperatingPoint hi{temperature.max, dry_solids.max, cycle.max};
    if (!lo.in_bounds() || !hi.in_bounds())
        fail(ErrorCode::domain, "scenario grid must stay inside the operating envelope");
    const double n = std::floor((temperature.max - temperature.min) / temperature.step + 1e-9 + 1) *
                     std::floor((dry_solids.max - dry_solids.min) / dry_solids.step + 1e-9 + 1) *
                     std::floor((cycle.max - cycle.min) / cycle.step + 1e-9 + 1);
    if (n > static_cast<double>(cap))
        fail(ErrorCode::size_guard, "scenario grid has " + std::to_string(static_cast<long long>(n)) +
                                        " points, cap is " + std::to_string(cap));
}

std::size_t ScenarioGrid::cardinality() const { return temperature.count() * dry_solids.count() * cycle.count(); }

void QualityPolicy::validate() const {
    if (!(q_min > 0.0 && q_min < 1.0)) fail(ErrorCode::validation, "q_min must lie in (0, 1)");
    if (!(margin >= 0.0) || !std::isfinite(margin)) fail(ErrorCode::validation, "margin must be >= 0");
}

std::vector<OperatingPoint> enumerate_scenarios(const ScenarioGrid& grid) {
    grid.validate();
    std::vector<OperatingPoint> out;
    out.reserve(grid.cardinality());
    for (std::size_t i = 0; i < grid.temperature.count(); ++i)
        for (std::size_t j = 0; j < grid.dry_solids.count(); ++j)
            for (std::size_t k = 0; k < grid.cycle.count(); ++k)
                out.push_back({grid.temperature.value(i), grid.dry_solids.value(j), grid.cycle.value(k)});
    return out;
}

Selection select_operating_point(const Model& model, const ScenarioGrid& grid, const QualityPolicy& policy) {
    policy.validate();
    if (target_count(model) < 2) fail(ErrorCode::untrained, "model is not trained");
    if (feature_count(model) != 3)
        fail(ErrorCode::dimension, "model expects " + std::to_string(feature_count(model)) +
                                       " features, operating points have 3");
    const auto points = enumerate_scenarios(grid);

    Matrix features(0, 3);
    for (const auto& p : points) {
        const double row[] = {p.temp_setpoint_c, p.dry_solids_frac, p.cycle_minutes};
        features.push_row(row);
    }
    const Matrix predicted = predict(model, features);

    Selection sel;
    sel.ranked.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double q = predicted(i, 1);
        sel.ranked.push_back({points[i], predicted(i, 0), q, q >= policy.threshold()});
    }

    // Single pass scan; the sorted list must agree with it.
    const CandidateScenario* best = nullptr;
    for (const auto& c : sel.ranked)
        if (best == nullptr || ranked_before(c, *best)) best = &c;
    sel.chosen = *best;
    sel.quality_risk = !best->feasible;

    std::stable_sort(sel.ranked.begin(), sel.ranked.end(), ranked_before);
    if (!(sel.ranked.front() == sel.chosen)) fail(ErrorCode::validation, "selection scan and ranking disagree");
    return sel;
}

void PlanConfig::validate() const {
    if (horizon_steps < 1) fail(ErrorCode::validation, "horizon_steps must be >= 1");
    if (!(target_level_pct >= 0.0 && target_level_pct <= 100.0))
        fail(ErrorCode::validation, "target level must lie in [0, 100]");
    if (!(omega >= 0.0) || !std::isfinite(omega)) fail(ErrorCode::validation, "omega must be >= 0");
    if (season_period < 1) fail(ErrorCode::validation, "season_period must be >= 1");
    if (average_window < 1) fail(ErrorCode::validation, "average_window must be >= 1");
    grid.validate();
    policy.validate();
    forecast_learner.validate();
}

ScheduleProblem make_problem(const Plant& plant, const PlantState& state, const TimeGrid& grid,
                             std::vector<double> inflow_forecast_pct, const PlanConfig& config) {
    plant.validate();
    if (state.reactors.size() != plant.reactors.size())
        fail(ErrorCode::dimension, "plant state reactor count does not match plant");
    ScheduleProblem p;
    p.grid = grid;
    p.reactors = plant.reactors;
    for (const auto& r : state.reactors) {
        p.initial_status.push_back(r.running);
        p.initial_steps_in_state.push_back(r.steps_in_state > 0 ? r.steps_in_state : settled_steps);
    }
    p.initial_level_pct = state.tank.level_pct;
    p.target_level_pct = config.target_level_pct;
    p.inflow_forecast_pct = std::move(inflow_forecast_pct);
    p.omega = config.omega;
    p.level_bounds = config.level_bounds;
    p.validate();
    return p;
}

Recommendation assemble_recommendation(const Plant& plant, const PlantState& state, const ScheduleProblem& problem,
                                       const ScheduleSolution& solution, const Model& model,
                                       const PlanConfig& config, const std::string& forecast_method) {
    const int T = problem.horizon();
    const int R = problem.reactor_count();
    if (solution.schedule.steps() != T || solution.schedule.reactors() != R)
        fail(ErrorCode::dimension, "solution schedule does not match the problem");

    Recommendation rec;
    rec.grid = problem.grid;
    rec.created_at = problem.grid.start;
    rec.schedule = solution.schedule;
    rec.inflow_forecast_pct = problem.inflow_forecast_pct;
    rec.predicted_levels = solution.levels;
    rec.objective = solution.objective;
    rec.switch_count = solution.switch_count;
    rec.omega = problem.omega;
    rec.forecast_method = forecast_method;
    rec.flags.not_proven_optimal = !solution.optimal;
    rec.op_points.assign(static_cast<std::size_t>(T), std::nullopt);

    bool any_active = false;
    for (int t = 0; t < T && !any_active; ++t) any_active = solution.schedule.any_on(t);
    if (any_active) {
        // The operating point does not depend on the step, so one selection
        // serves every active step.
        const auto sel = select_operating_point(model, config.grid, config.policy);
        rec.flags.quality_risk = sel.quality_risk;
        for (int t = 0; t < T; ++t) {
            if (!solution.schedule.any_on(t)) continue;
            rec.op_points[static_cast<std::size_t>(t)] = sel.chosen.op_point;
            double throughput_pct = 0.0;
            for (int r = 0; r < R; ++r)
                if (solution.schedule.on(r, t)) throughput_pct += plant.reactors[static_cast<std::size_t>(r)].rate_pct_per_step;
            rec.predicted_total_energy += throughput_pct * plant.capacity_m3 / 100.0 * sel.chosen.predicted_energy;
        }
        rec.min_predicted_quality = sel.chosen.predicted_quality;
    }

    const double lo = problem.level_bounds ? std::max(0.0, problem.level_bounds->lo) : 0.0;
    const double hi = problem.level_bounds ? std::min(100.0, problem.level_bounds->hi) : 100.0;
    for (std::size_t t = 1; t < rec.predicted_levels.size(); ++t)
        if (rec.predicted_levels[t] < lo - 1e-9 || rec.predicted_levels[t] > hi + 1e-9)
            rec.flags.level_bound_violation = true;

    Json inputs{{"plant", plant},
                {"state", state},
                {"problem", problem},
                {"grid", config.grid},
                {"policy", config.policy},
                {"solver", config.solver},
                {"forecast_method", forecast_method},
                {"model", model}};
    rec.input_hash = sha256_hex(inputs.dump());
    rec.id = "rec-" + rec.input_hash.substr(0, 16);
    return rec;
}

Recommendation plan_with_forecast(const Plant& plant, const PlantState& state, const TimeGrid& grid,
                                  std::vector<double> inflow_forecast_pct, const Model& model,
                                  const PlanConfig& config, const std::string& forecast_method) {
    config.validate();
    if (target_count(model) < 2) fail(ErrorCode::untrained, "model is not trained");
    const auto problem = make_problem(plant, state, grid, std::move(inflow_forecast_pct), config);
    const auto solution = solve_exact(problem, config.solver);
    return assemble_recommendation(plant, state, problem, solution, model, config, forecast_method);
}

Recommendation plan(const Plant& plant, const PlantState& state, const TimeSeries& inflow_history,
                    const ExogFeatures& exog, const Model& model, const PlanConfig& config) {
    config.validate();
    if (target_count(model) < 2) fail(ErrorCode::untrained, "model is not trained");
    inflow_history.validate();
    if (inflow_history.size() == 0) fail(ErrorCode::insufficient_history, "no inflow history");

    const int H = config.horizon_steps;
    ForecastResult forecast;
    switch (config.forecast_method) {
    case ForecastMethod::seasonal_naive:
        forecast = seasonal_naive(inflow_history, config.season_period, H);
        break;
    case ForecastMethod::moving_average:
        forecast = moving_average(inflow_history, config.average_window, H);
        break;
    case ForecastMethod::feature_model:
        forecast = feature_forecast(inflow_history, exog, H, config.forecast_learner, config.season_period);
        break;
    }
    for (auto& v : forecast.values) v = std::max(v, 0.0);

    TimeGrid grid;
    grid.step_minutes = inflow_history.step_minutes;
    grid.horizon_steps = H;
    grid.start = inflow_history.timestamps.back() + std::chrono::minutes(inflow_history.step_minutes);
    return plan_with_forecast(plant, state, grid, std::move(forecast.values), model, config,
                              to_string(config.forecast_method));
}

void ClosedLoopConfig::validate() const {
    if (episodes < 1) fail(ErrorCode::validation, "closed loop needs at least one episode");
    if (steps < 1) fail(ErrorCode::validation, "closed loop needs at least one step");
    if (!(initial_level_lo <= initial_level_hi) || initial_level_lo < 0.0 || initial_level_hi > 100.0)
        fail(ErrorCode::validation, "initial level range must lie inside [0, 100]");
    hysteresis.validate();
    inflow.validate();
    params.validate();
    plan.validate();
}

double ClosedLoopReport::rms_ratio() const {
    return baseline.rms_deviation > 0.0 ? plan.rms_deviation / baseline.rms_deviation : 0.0;
}

ClosedLoopReport evaluate_closed_loop(const Plant& plant, const Model& model, const ClosedLoopConfig& config) {
    config.validate();
    plant.validate();
    PlanConfig pc = config.plan;
    pc.horizon_steps = config.steps;
    pc.solver.max_decision_vars = std::max(pc.solver.max_decision_vars, plant.reactor_count() * config.steps);

    ClosedLoopReport report;
    double plan_sq = 0.0, base_sq = 0.0;
    std::size_t total_steps = 0;

    auto metrics = [&](const ScheduleProblem& problem, const Schedule& schedule, const EpisodeResult& ep,
                       double& sq_acc) {
        PolicyMetrics m;
        const auto levels = ep.levels();
        const double sq = sum_sq_dev(levels, problem.target_level_pct);
        sq_acc += sq;
        m.rms_deviation = std::sqrt(sq / static_cast<double>(problem.horizon()));
        const auto ex_post = objective_value(problem, schedule);
        m.switches = ex_post.switch_count;
        m.objective = ex_post.objective;
        m.total_energy = ep.total_energy();
        for (const auto& q : ep.quality)
            if (q && (!m.min_quality || *q < *m.min_quality)) m.min_quality = q;
        for (const auto& s : ep.steps) {
            m.overflow_steps += s.overflow ? 1 : 0;
            m.underflow_steps += s.underflow ? 1 : 0;
        }
        return m;
    };
    auto accumulate = [](PolicyMetrics& into, const PolicyMetrics& m) {
        into.switches += m.switches;
        into.objective += m.objective;
        into.total_energy += m.total_energy;
        if (m.min_quality && (!into.min_quality || *m.min_quality < *into.min_quality)) into.min_quality = m.min_quality;
        into.overflow_steps += m.overflow_steps;
        into.underflow_steps += m.underflow_steps;
    };

    for (int e = 0; e < config.episodes; ++e) {
        std::mt19937_64 rng(config.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(e + 1));
        std::uniform_real_distribution<double> level_dist(config.initial_level_lo, config.initial_level_hi);
        const double level0 = level_dist(rng);
        const int phase = static_cast<int>(rng() % static_cast<std::uint64_t>(config.inflow.steps_per_day));
        const auto inflows = config.inflow.generate(phase, config.steps, rng);

        const PlantState start = initial_state(plant, level0);
        TimeGrid grid;
        grid.horizon_steps = config.steps;
        grid.start = Timestamp{} + std::chrono::minutes(static_cast<std::int64_t>(grid.step_minutes) * phase);

        const auto problem = make_problem(plant, start, grid, inflows, pc);
        const auto solution = solve_exact(problem, pc.solver);
        const auto rec = assemble_recommendation(plant, start, problem, solution, model, pc, "realized");
        const auto plan_ep = simulate_episode(plant, start, inflows, rec.schedule, rec.op_points, config.params);

        const Schedule base = hysteresis_baseline(problem, config.hysteresis);
        const std::vector<std::optional<OperatingPoint>> manual(static_cast<std::size_t>(config.steps),
                                                                start.op_point);
        const auto base_ep = simulate_episode(plant, start, inflows, base, manual, config.params);

        EpisodeComparison cmp;
        cmp.episode = e;
        cmp.initial_level_pct = level0;
        cmp.plan = metrics(problem, rec.schedule, plan_ep, plan_sq);
        cmp.baseline = metrics(problem, base, base_ep, base_sq);
        accumulate(report.plan, cmp.plan);
        accumulate(report.baseline, cmp.baseline);
        total_steps += static_cast<std::size_t>(config.steps);
        report.episodes.push_back(std::move(cmp));
    }
    report.plan.rms_deviation = std::sqrt(plan_sq / static_cast<double>(total_steps));
    report.baseline.rms_deviation = std::sqrt(base_sq / static_cast<double>(total_steps));
    return report;
}

} // namespace hydrotwin
