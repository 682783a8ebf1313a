#include <doctest.h>

#include "hydrotwin/errors.hpp"
#include "hydrotwin/forecasting.hpp"
#include "hydrotwin/timeutil.hpp"

#include <cmath>
#include <random>

using namespace hydrotwin;

namespace {

const Timestamp t0 = *parse_rfc3339("2024-03-04T00:00:00Z");   // a Monday

TimeSeries series_of(std::vector<double> v) { return TimeSeries::regular(t0, 15, std::move(v)); }

ExogFeatures exog_for(std::size_t rows, const std::vector<double>& rain) {
    ExogFeatures ex;
    for (std::size_t i = 0; i < rows; ++i)
        ex.rows.push_back({static_cast<int>((i / 96) % 7), rain[i], 25.0});
    return ex;
}

double stddev(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

} // namespace

TEST_CASE("seasonal naive replicates the last season") {
    CHECK(seasonal_naive(series_of({1, 2, 3, 1, 2, 3}), 3, 3).values == std::vector<double>{1, 2, 3});
    CHECK(seasonal_naive(series_of({5, 5, 5, 5}), 2, 2).values == std::vector<double>{5, 5});
    CHECK(seasonal_naive(series_of({1, 2, 3, 4}), 1, 3).values == std::vector<double>{4, 4, 4});
    CHECK(seasonal_naive(series_of({1, 2, 3, 4, 5}), 2, 5).values == std::vector<double>{4, 5, 4, 5, 4});
    try {
        seasonal_naive(series_of({1, 2}), 3, 1);
        FAIL("expected insufficient history");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::insufficient_history);
    }
}

TEST_CASE("seasonal naive with period one equals last-value naive") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(static_cast<std::size_t>(3 + trial));
        for (auto& x : v) x = u(rng);
        const auto f = seasonal_naive(series_of(v), 1, 7);
        CHECK(f.values.size() == 7);
        for (double x : f.values) CHECK(x == v.back());
    }
}

TEST_CASE("moving average") {
    CHECK(moving_average(series_of({2, 4, 6}), 3, 2).values == std::vector<double>{4, 4});
    CHECK(moving_average(series_of({2, 4, 6}), 1, 2).values == std::vector<double>{6, 6});
    CHECK(moving_average(series_of({10, 0, 10, 0}), 4, 1).values == std::vector<double>{5});
    CHECK(moving_average(series_of({1, 2}), 1, 1).method == ForecastMethod::moving_average);
    CHECK_THROWS_AS(moving_average(series_of({1}), 2, 1), Error);
}

TEST_CASE("evaluate_forecast") {
    const std::vector<double> a{1, 2, 3}, train{1, 2, 3, 2, 1, 2};
    const auto perfect = evaluate_forecast(a, a, train, 1);
    CHECK(perfect.mae == 0.0);
    CHECK(perfect.rmse == 0.0);
    REQUIRE(perfect.mase);

    const std::vector<double> actual{0, 2}, pred{1, 1};
    const auto r = evaluate_forecast(actual, pred, train, 1);
    CHECK(r.mae == 1.0);
    CHECK(r.rmse == 1.0);
    REQUIRE(r.mase);
    CHECK(*r.mase == doctest::Approx(1.0));

    const std::vector<double> periodic{1, 2, 3, 1, 2, 3};
    CHECK_FALSE(evaluate_forecast(actual, pred, periodic, 3).mase.has_value());
    const std::vector<double> one{1};
    CHECK_THROWS_AS(evaluate_forecast(one, pred, train, 1), Error);
}

TEST_CASE("rmse is never below mae") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0, 3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(10), p(10);
        for (auto& x : a) x = n(rng);
        for (auto& x : p) x = n(rng);
        const auto r = evaluate_forecast(a, p, a, 1);
        CHECK(r.rmse >= r.mae - 1e-12);
    }
}

TEST_CASE("seasonal naive on a periodic hold-out has zero error") {
    std::vector<double> v;
    for (int d = 0; d < 4; ++d)
        for (int h = 0; h < 24; ++h) v.push_back(5.0 + 3.0 * std::sin(h / 24.0 * 6.283185307179586));
    const auto train = series_of({v.begin(), v.begin() + 72});
    const auto f = seasonal_naive(train, 24, 24);
    const auto r = evaluate_forecast(std::span(v).subspan(72), f.values, train.values, 24);
    CHECK(r.mae == 0.0);
}

TEST_CASE("feature forecast tracks a rainfall-driven series") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> rain_steps(0, 100);
    const std::size_t n = 600, horizon = 48;
    std::vector<double> rain(n + horizon), y(n + horizon);
    for (std::size_t i = 0; i < rain.size(); ++i) {
        rain[i] = 0.2 * rain_steps(rng);
        y[i] = 1.5 + 0.5 * rain[i];
    }
    const auto history = series_of({y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n)});
    TrainConfig cfg;
    cfg.n_trees = 300;
    cfg.max_depth = 4;
    const auto f = feature_forecast(history, exog_for(n + horizon, rain), static_cast<int>(horizon), cfg, 24);
    CHECK(f.values.size() == horizon);
    CHECK(f.method == ForecastMethod::feature_model);
    const auto r = evaluate_forecast(std::span(y).subspan(n), f.values, history.values, 24);
    CHECK(r.mae <= 0.05 * stddev(y));

    const auto again = feature_forecast(history, exog_for(n + horizon, rain), static_cast<int>(horizon), cfg, 24);
    CHECK(again.values == f.values);
}

TEST_CASE("feature forecast of a constant series is constant") {
    const std::vector<double> rain(200, 1.0);
    std::vector<double> flat(150, 4.25);
    TrainConfig cfg;
    cfg.n_trees = 10;
    const auto f = feature_forecast(series_of(flat), exog_for(200, rain), 50, cfg, 24);
    for (double v : f.values) CHECK(v == doctest::Approx(4.25).epsilon(1e-12));
}

TEST_CASE("feature forecast never reads future targets") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 10);
    std::vector<double> rain(300), y(300);
    for (std::size_t i = 0; i < 300; ++i) {
        rain[i] = u(rng);
        y[i] = u(rng) + rain[i];
    }
    TrainConfig cfg;
    cfg.n_trees = 20;
    const auto history = series_of({y.begin(), y.begin() + 250});
    const auto a = feature_forecast(history, exog_for(300, rain), 50, cfg, 24);
    auto poisoned = y;
    for (std::size_t i = 250; i < 300; ++i) poisoned[i] = 1e9;   // sentinels beyond the cut
    const auto b = feature_forecast(series_of({poisoned.begin(), poisoned.begin() + 250}), exog_for(300, rain), 50,
                                    cfg, 24);
    CHECK(a.values == b.values);
}

TEST_CASE("feature forecast guards") {
    const std::vector<double> rain(100, 0.0);
    TrainConfig cfg;
    cfg.n_trees = 2;
    try {
        feature_forecast(series_of(std::vector<double>(60, 1.0)), exog_for(70, rain), 20, cfg, 24);
        FAIL("expected coverage error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::coverage);
    }
    try {
        feature_forecast(series_of(std::vector<double>(30, 1.0)), exog_for(100, rain), 5, cfg, 24);
        FAIL("expected insufficient history");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::insufficient_history);
    }
}

TEST_CASE("time series validation") {
    auto s = series_of({1, 2, 3});
    s.timestamps[2] += std::chrono::minutes(1);
    CHECK_THROWS_AS(s.validate(), Error);
    auto bad = series_of({1, std::nan(""), 3});
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("rfc3339 and date helpers") {
    const auto ts = parse_rfc3339("2024-03-01T06:15:00Z");
    REQUIRE(ts);
    CHECK(format_rfc3339(*ts) == "2024-03-01T06:15:00Z");
    CHECK(parse_rfc3339("2024-03-01T06:15:00+00:00") == ts);
    CHECK_FALSE(parse_rfc3339("2024-03-01 06:15:00Z"));
    CHECK_FALSE(parse_rfc3339("2024-02-30T06:15:00Z"));
    CHECK_FALSE(parse_rfc3339("2024-03-01T06:15:00+10:00"));
    CHECK_FALSE(parse_rfc3339("2024-03-01T06:15:00.5Z"));
    CHECK(day_of_week(*ts) == 4);   // Friday
    CHECK(format_date(*parse_date("2024-02-29")) == "2024-02-29");
    CHECK_FALSE(parse_date("2023-02-29"));
}
