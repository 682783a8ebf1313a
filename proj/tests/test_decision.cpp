#include <doctest.h>

#include "hydrotwin/decision.hpp"
#include "hydrotwin/errors.hpp"
#include "hydrotwin/timeutil.hpp"

#include <cmath>
#include <limits>
#include <tuple>

using namespace hydrotwin;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Independent exhaustive scan with the stated tie-break, used as the oracle.
CandidateScenario scan(const Model& model, const ScenarioGrid& grid, const QualityPolicy& policy, bool& risk) {
    std::optional<CandidateScenario> best_feasible, best_quality;
    auto key = [](const OperatingPoint& p) { return std::tuple(p.temp_setpoint_c, p.cycle_minutes, p.dry_solids_frac); };
    for (const auto& p : enumerate_scenarios(grid)) {
        const double x[] = {p.temp_setpoint_c, p.dry_solids_frac, p.cycle_minutes};
        const auto y = predict_row(model, x);
        const CandidateScenario c{p, y[0], y[1], y[1] >= policy.q_min + policy.margin};
        if (c.feasible && (!best_feasible || c.predicted_energy < best_feasible->predicted_energy ||
                           (c.predicted_energy == best_feasible->predicted_energy && key(p) < key(best_feasible->op_point))))
            best_feasible = c;
        if (!best_quality || c.predicted_quality > best_quality->predicted_quality ||
            (c.predicted_quality == best_quality->predicted_quality && key(p) < key(best_quality->op_point)))
            best_quality = c;
    }
    risk = !best_feasible;
    return best_feasible ? *best_feasible : *best_quality;
}

Model trained_gbt() {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> t(150, 180), d(0.12, 0.20), c(20, 40);
    Dataset data;
    data.features = Matrix(0, 3);
    data.targets = Matrix(0, 2);
    const auto params = GroundTruthParams::noiseless();
    for (int i = 0; i < 400; ++i) {
        const OperatingPoint op{t(rng), d(rng), c(rng)};
        const double x[] = {op.temp_setpoint_c, op.dry_solids_frac, op.cycle_minutes};
        const double y[] = {true_energy(op, params), true_quality(op, params)};
        data.features.push_row(x);
        data.targets.push_row(y);
    }
    TrainConfig cfg;
    cfg.n_trees = 60;
    return fit_gbt(data, cfg);
}

} // namespace

TEST_CASE("scenario enumeration") {
    ScenarioGrid grid;
    const auto all = enumerate_scenarios(grid);
    CHECK(all.size() == 720);
    CHECK(grid.cardinality() == 720);
    CHECK(all.front() == OperatingPoint{150, 0.12, 20});
    CHECK(all.back() == OperatingPoint{180, 0.20, 40});
    CHECK(all[1] == OperatingPoint{150, 0.12, 25});
    CHECK(all[5] == OperatingPoint{150, 0.13, 20});
    for (const auto& p : all) CHECK(p.in_bounds());
    // Lattice values land on the nearest double to the decimal.
    CHECK(all[3 * 5].dry_solids_frac == 0.15);

    ScenarioGrid small;
    small.temperature = {150, 152, 2};
    small.dry_solids = {0.12, 0.13, 0.01};
    small.cycle = {30, 30, 5};
    CHECK(enumerate_scenarios(small).size() == 4);

    ScenarioGrid single;
    single.temperature = {170, 170, 1};
    single.dry_solids = {0.15, 0.15, 0.01};
    single.cycle = {25, 25, 1};
    CHECK(enumerate_scenarios(single).size() == 1);

    ScenarioGrid huge;
    huge.temperature.step = 0.01;
    try {
        enumerate_scenarios(huge);
        FAIL("expected size guard");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::size_guard);
    }
    ScenarioGrid outside;
    outside.temperature.max = 190;
    CHECK_THROWS_AS(enumerate_scenarios(outside), Error);
    ScenarioGrid zero_step;
    zero_step.cycle.step = 0;
    CHECK_THROWS_AS(zero_step.validate(), Error);
}

TEST_CASE("selection with the ground-truth oracle") {
    const Model oracle = OracleModel{};
    const auto sel = select_operating_point(oracle, ScenarioGrid{}, QualityPolicy{});
    CHECK(sel.chosen.op_point == OperatingPoint{164, 0.20, 40});
    CHECK(std::fabs(sel.chosen.predicted_energy - 39.44) <= 1e-6);
    CHECK(std::fabs(sel.chosen.predicted_quality - sigmoid(2.5)) <= 1e-9);
    CHECK(sel.chosen.feasible);
    CHECK_FALSE(sel.quality_risk);
    CHECK(sel.ranked.size() == 720);
    CHECK(sel.ranked.front() == sel.chosen);

    bool risk = true;
    CHECK(scan(oracle, ScenarioGrid{}, QualityPolicy{}, risk) == sel.chosen);
    CHECK_FALSE(risk);
}

TEST_CASE("infeasible quality falls back to the best quality point") {
    const Model oracle = OracleModel{};
    const auto sel = select_operating_point(oracle, ScenarioGrid{}, QualityPolicy{0.999, 0.0});
    CHECK(sel.quality_risk);
    CHECK_FALSE(sel.chosen.feasible);
    CHECK(sel.chosen.op_point == OperatingPoint{180, 0.12, 40});
    CHECK(sel.chosen.predicted_quality == doctest::Approx(sigmoid(6.5)).epsilon(1e-12));
    for (const auto& c : sel.ranked) CHECK_FALSE(c.feasible);
}

TEST_CASE("single-point grid returns that point") {
    ScenarioGrid single;
    single.temperature = {178, 178, 1};
    single.dry_solids = {0.13, 0.13, 0.01};
    single.cycle = {35, 35, 1};
    const auto sel = select_operating_point(OracleModel{}, single, QualityPolicy{});
    CHECK(sel.chosen.op_point == OperatingPoint{178, 0.13, 35});
}

TEST_CASE("selection matches an exhaustive scan for trained models") {
    const Model gbt = trained_gbt();
    for (double q : {0.5, 0.8, 0.9, 0.95, 0.99, 0.9999}) {
        for (double margin : {0.0, 0.02}) {
            const QualityPolicy policy{q, margin};
            const auto sel = select_operating_point(gbt, ScenarioGrid{}, policy);
            bool risk = false;
            CHECK(scan(gbt, ScenarioGrid{}, policy, risk) == sel.chosen);
            CHECK(risk == sel.quality_risk);
        }
    }
}

TEST_CASE("increasing the margin never lowers the selected quality") {
    const Model gbt = trained_gbt();
    for (const Model* model : {&gbt}) {
        double previous = -1.0;
        for (double margin = 0.0; margin <= 0.09; margin += 0.01) {
            const auto sel = select_operating_point(*model, ScenarioGrid{}, QualityPolicy{0.9, margin});
            CHECK(sel.chosen.predicted_quality >= previous);
            previous = sel.chosen.predicted_quality;
        }
    }
    const Model oracle = OracleModel{};
    double previous = -1.0;
    for (double margin = 0.0; margin <= 0.09; margin += 0.01) {
        const auto sel = select_operating_point(oracle, ScenarioGrid{}, QualityPolicy{0.9, margin});
        CHECK(sel.chosen.predicted_quality >= previous);
        previous = sel.chosen.predicted_quality;
    }
}

TEST_CASE("selection rejects mismatched or untrained models") {
    Dataset d;
    d.features = Matrix(0, 2);
    d.targets = Matrix(0, 2);
    for (int i = 0; i < 4; ++i) {
        const double x[] = {double(i), double(i * i)};
        const double y[] = {double(i), 1.0};
        d.features.push_row(x);
        d.targets.push_row(y);
    }
    TrainConfig cfg;
    cfg.n_trees = 2;
    const Model wrong = fit_gbt(d, cfg);
    try {
        select_operating_point(wrong, ScenarioGrid{}, QualityPolicy{});
        FAIL("expected dimension error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::dimension);
    }
    const Model empty = GbtModel{};
    try {
        select_operating_point(empty, ScenarioGrid{}, QualityPolicy{});
        FAIL("expected untrained error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::untrained);
    }
    CHECK_THROWS_AS(QualityPolicy({1.0, 0.0}).validate(), Error);
    CHECK_THROWS_AS(QualityPolicy({0.9, -0.1}).validate(), Error);
}

TEST_CASE("plan with zero inflow at target stays off") {
    const Plant plant = Plant::default_plant();
    const PlantState state = initial_state(plant, 50.0);
    PlanConfig cfg;
    cfg.horizon_steps = 8;
    TimeGrid grid;
    grid.horizon_steps = 8;
    const auto rec = plan_with_forecast(plant, state, grid, std::vector<double>(8, 0.0), OracleModel{}, cfg);
    for (int t = 0; t < 8; ++t) CHECK_FALSE(rec.schedule.any_on(t));
    for (const auto& op : rec.op_points) CHECK_FALSE(op.has_value());
    CHECK(rec.predicted_total_energy == 0.0);
    CHECK_FALSE(rec.min_predicted_quality.has_value());
    CHECK_FALSE(rec.flags.quality_risk);
    CHECK_FALSE(rec.flags.not_proven_optimal);
}

TEST_CASE("forced single active step gets the oracle point") {
    const Plant plant = Plant::default_plant();
    const PlantState state = initial_state(plant, 50.0);
    PlanConfig cfg;
    TimeGrid grid;
    grid.horizon_steps = 4;
    const auto problem = make_problem(plant, state, grid, {1, 1, 1, 1}, cfg);
    Schedule forced(3, 4);
    forced.set(1, 2, true);
    const auto solution = objective_value(problem, forced);
    const auto rec = assemble_recommendation(plant, state, problem, solution, OracleModel{}, cfg, "supplied");
    for (int t = 0; t < 4; ++t) CHECK(rec.op_points[static_cast<std::size_t>(t)].has_value() == (t == 2));
    CHECK(*rec.op_points[2] == OperatingPoint{164, 0.20, 40});
    // 4 % of a 500 m3 tank at 39.44 kWh per m3.
    CHECK(rec.predicted_total_energy == doctest::Approx(20.0 * 39.44).epsilon(1e-12));
    CHECK(rec.flags.not_proven_optimal);
}

TEST_CASE("recommendation invariants and determinism") {
    const Plant plant = Plant::default_plant();
    const PlantState state = initial_state(plant, 70.0);
    PlanConfig cfg;
    cfg.horizon_steps = 24;
    TimeGrid grid;
    grid.start = *parse_rfc3339("2024-03-01T06:00:00Z");
    grid.horizon_steps = 24;
    std::mt19937_64 rng(5);
    const auto inflows = InflowGenerator{}.generate(0, 24, rng);
    const auto a = plan_with_forecast(plant, state, grid, inflows, OracleModel{}, cfg);
    const auto b = plan_with_forecast(plant, state, grid, inflows, OracleModel{}, cfg);
    CHECK(a == b);
    CHECK(a.input_hash.size() == 64);
    CHECK(a.id == "rec-" + a.input_hash.substr(0, 16));
    CHECK(a.created_at == grid.start);
    CHECK(a.predicted_levels.size() == 25);
    for (int t = 0; t < 24; ++t) CHECK(a.op_points[static_cast<std::size_t>(t)].has_value() == a.schedule.any_on(t));

    auto other = cfg;
    other.omega = 0.2;
    CHECK(plan_with_forecast(plant, state, grid, inflows, OracleModel{}, other).input_hash != a.input_hash);
}

TEST_CASE("the schedule does not depend on the energy model") {
    const Plant plant = Plant::default_plant();
    const PlantState state = initial_state(plant, 65.0);
    PlanConfig cfg;
    cfg.horizon_steps = 16;
    TimeGrid grid;
    grid.horizon_steps = 16;
    std::mt19937_64 rng(6);
    const auto inflows = InflowGenerator{}.generate(10, 16, rng);
    OracleModel skewed;
    skewed.params.a_temp = -3.0;
    skewed.params.e0 = 80.0;
    const auto a = plan_with_forecast(plant, state, grid, inflows, OracleModel{}, cfg);
    const auto b = plan_with_forecast(plant, state, grid, inflows, skewed, cfg);
    const auto c = plan_with_forecast(plant, state, grid, inflows, trained_gbt(), cfg);
    CHECK(a.schedule == b.schedule);
    CHECK(a.schedule == c.schedule);
}

TEST_CASE("plan from history uses the forecast and starts after the last sample") {
    const Plant plant = Plant::default_plant();
    const PlantState state = initial_state(plant, 50.0);
    std::vector<double> history;
    for (int i = 0; i < 192; ++i) history.push_back(i % 96 < 48 ? 9.0 : 3.0);
    const auto series = TimeSeries::regular(*parse_rfc3339("2024-03-01T00:00:00Z"), 15, history);
    PlanConfig cfg;
    cfg.horizon_steps = 96;
    const auto rec = plan(plant, state, series, {}, OracleModel{}, cfg);
    CHECK(rec.forecast_method == "seasonal_naive");
    CHECK(format_rfc3339(rec.created_at) == "2024-03-03T00:00:00Z");
    CHECK(rec.inflow_forecast_pct == std::vector<double>(history.end() - 96, history.end()));
    CHECK_FALSE(rec.flags.not_proven_optimal);

    cfg.forecast_method = ForecastMethod::moving_average;
    cfg.average_window = 4;
    const auto ma = plan(plant, state, series, {}, OracleModel{}, cfg);
    CHECK(ma.inflow_forecast_pct == std::vector<double>(96, 3.0));

    cfg.forecast_method = ForecastMethod::seasonal_naive;
    try {
        plan(plant, state, series, {}, GbtModel{}, cfg);
        FAIL("expected untrained error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::untrained);
    }
    const auto short_series = TimeSeries::regular(*parse_rfc3339("2024-03-01T00:00:00Z"), 15, {1, 2, 3});
    try {
        plan(plant, state, short_series, {}, OracleModel{}, cfg);
        FAIL("expected insufficient history");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::insufficient_history);
    }
}

TEST_CASE("scheduler infeasibility propagates through plan") {
    Plant plant;
    plant.reactors = {{1, 10.0, 3, 0}};
    PlantState state = initial_state(plant, 58.0);
    state.reactors[0] = {false, 5};
    PlanConfig cfg;
    cfg.horizon_steps = 2;
    cfg.target_level_pct = 55.0;
    cfg.level_bounds = LevelBounds{50.0, 60.0};
    TimeGrid grid;
    grid.horizon_steps = 2;
    try {
        plan_with_forecast(plant, state, grid, {4.0, 0.0}, OracleModel{}, cfg);
        FAIL("expected infeasible");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::infeasible);
    }
}

TEST_CASE("closed loop with identical policies is deterministic") {
    ClosedLoopConfig cfg;
    cfg.episodes = 2;
    cfg.steps = 24;
    const auto a = evaluate_closed_loop(Plant::default_plant(), OracleModel{}, cfg);
    const auto b = evaluate_closed_loop(Plant::default_plant(), OracleModel{}, cfg);
    REQUIRE(a.episodes.size() == 2);
    CHECK(a.plan.rms_deviation == b.plan.rms_deviation);
    CHECK(a.baseline.rms_deviation == b.baseline.rms_deviation);
    CHECK(a.plan.total_energy == b.plan.total_energy);
    for (const auto& e : a.episodes) CHECK(e.plan.objective <= e.baseline.objective + 1e-9);
}

TEST_CASE("closed loop: planned levels are steadier than the deadband baseline") {
    ClosedLoopConfig cfg;
    const auto report = evaluate_closed_loop(Plant::default_plant(), OracleModel{}, cfg);
    REQUIRE(report.episodes.size() == 20);
    MESSAGE("rms plan " << report.plan.rms_deviation << " baseline " << report.baseline.rms_deviation << " ratio "
                        << report.rms_ratio());
    CHECK(report.rms_ratio() <= 0.6);
    for (const auto& e : report.episodes) {
        CHECK(e.plan.objective <= e.baseline.objective + 1e-9);
        REQUIRE(e.plan.min_quality);
        CHECK(*e.plan.min_quality >= 0.9);
    }
}
