#include "hydrotwin/forecasting.hpp"

#include "hydrotwin/errors.hpp"

#include <cmath>
#include <numeric>

namespace hydrotwin {

void TimeSeries::validate() const {
    if (step_minutes < 1) fail(ErrorCode::validation, "series step must be >= 1 minute");
    if (timestamps.size() != values.size()) fail(ErrorCode::dimension, "timestamps and values differ in length");
    const std::chrono::minutes step{step_minutes};
    for (std::size_t i = 1; i < timestamps.size(); ++i)
        if (timestamps[i] - timestamps[i - 1] != step)
            fail(ErrorCode::validation, "series timestamps must be equally spaced by step_minutes");
    for (double v : values)
        if (!std::isfinite(v)) fail(ErrorCode::validation, "series values must be finite");
}

TimeSeries TimeSeries::tail(std::size_t count) const {
    count = std::min(count, size());
    const auto first = static_cast<std::ptrdiff_t>(size() - count);
    return {{timestamps.begin() + first, timestamps.end()}, {values.begin() + first, values.end()}, step_minutes};
}

TimeSeries TimeSeries::head(std::size_t count) const {
    count = std::min(count, size());
    const auto last = static_cast<std::ptrdiff_t>(count);
    return {{timestamps.begin(), timestamps.begin() + last}, {values.begin(), values.begin() + last}, step_minutes};
}

TimeSeries TimeSeries::regular(Timestamp start, int step_minutes, std::vector<double> values) {
    TimeSeries s;
    s.step_minutes = step_minutes;
    s.values = std::move(values);
    for (std::size_t i = 0; i < s.values.size(); ++i)
        s.timestamps.push_back(start + std::chrono::minutes(static_cast<std::int64_t>(step_minutes) * static_cast<std::int64_t>(i)));
    return s;
}

std::string to_string(ForecastMethod method) {
    switch (method) {
    case ForecastMethod::seasonal_naive: return "seasonal_naive";
    case ForecastMethod::moving_average: return "moving_average";
    case ForecastMethod::feature_model: return "feature_model";
    }
    return "seasonal_naive";
}

ForecastMethod forecast_method_from_string(const std::string& name) {
    if (name == "seasonal_naive") return ForecastMethod::seasonal_naive;
    if (name == "moving_average") return ForecastMethod::moving_average;
    if (name == "feature_model") return ForecastMethod::feature_model;
    fail(ErrorCode::validation, "unknown forecast method '" + name + "'");
}

ForecastResult seasonal_naive(const TimeSeries& series, int period, int horizon) {
    series.validate();
    if (period < 1 || horizon < 1) fail(ErrorCode::validation, "period and horizon must be >= 1");
    const auto n = series.size();
    if (n < static_cast<std::size_t>(period))
        fail(ErrorCode::insufficient_history, "series shorter than the seasonal period");
    ForecastResult out{{}, ForecastMethod::seasonal_naive};
    out.values.reserve(static_cast<std::size_t>(horizon));
    for (int h = 0; h < horizon; ++h)
        out.values.push_back(series.values[n - static_cast<std::size_t>(period) + static_cast<std::size_t>(h % period)]);
    return out;
}

ForecastResult moving_average(const TimeSeries& series, int window, int horizon) {
    series.validate();
    if (window < 1 || horizon < 1) fail(ErrorCode::validation, "window and horizon must be >= 1");
    const auto n = series.size();
    if (n < static_cast<std::size_t>(window))
        fail(ErrorCode::insufficient_history, "series shorter than the averaging window");
    const double sum = std::accumulate(series.values.end() - window, series.values.end(), 0.0);
    return {std::vector<double>(static_cast<std::size_t>(horizon), sum / window), ForecastMethod::moving_average};
}

namespace {

void design_row(double lag1, double lag_period, const ExogRow& exog, std::vector<double>& row) {
    row.assign(forecast_feature_width, 0.0);
    row[0] = lag1;
    row[1] = lag_period;
    row[2 + static_cast<std::size_t>(exog.day_of_week % 7)] = 1.0;
    row[9] = exog.rainfall_mm;
    row[10] = exog.temp_max_c;
}

} // namespace

ForecastResult feature_forecast(const TimeSeries& series, const ExogFeatures& exog, int horizon,
                                const TrainConfig& learner_config, int period) {
    series.validate();
    if (period < 1 || horizon < 1) fail(ErrorCode::validation, "period and horizon must be >= 1");
    const std::size_t n = series.size();
    const auto p = static_cast<std::size_t>(period);
    if (n < 2 * p) fail(ErrorCode::insufficient_history, "feature forecast needs at least two seasonal periods");
    if (exog.rows.size() < n + static_cast<std::size_t>(horizon))
        fail(ErrorCode::coverage, "exogenous features must cover history and horizon");

    Dataset train;
    train.target_names = {"value"};
    std::vector<double> row;
    for (std::size_t i = p; i < n; ++i) {
        design_row(series.values[i - 1], series.values[i - p], exog.rows[i], row);
        train.features.push_row(row);
        const double y[] = {series.values[i]};
        train.targets.push_row(y);
    }
    const Model model = fit_gbt(train, learner_config);

    std::vector<double> path(series.values);
    ForecastResult out{{}, ForecastMethod::feature_model};
    for (int h = 0; h < horizon; ++h) {
        const std::size_t i = n + static_cast<std::size_t>(h);
        design_row(path[i - 1], path[i - p], exog.rows[i], row);
        const double next = predict_row(model, row)[0];
        path.push_back(next);
        out.values.push_back(next);
    }
    return out;
}

AccuracyReport evaluate_forecast(std::span<const double> actual, std::span<const double> predicted,
                                 std::span<const double> train_values, int period) {
    if (actual.size() != predicted.size()) fail(ErrorCode::dimension, "actual and predicted lengths differ");
    if (actual.empty()) fail(ErrorCode::empty_dataset, "nothing to evaluate");
    if (period < 1) fail(ErrorCode::validation, "period must be >= 1");
    AccuracyReport r;
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double e = actual[i] - predicted[i];
        abs_sum += std::fabs(e);
        sq_sum += e * e;
    }
    const auto n = static_cast<double>(actual.size());
    r.mae = abs_sum / n;
    r.rmse = std::sqrt(sq_sum / n);

    const auto p = static_cast<std::size_t>(period);
    if (train_values.size() > p) {
        double naive = 0.0;
        for (std::size_t t = p; t < train_values.size(); ++t) naive += std::fabs(train_values[t] - train_values[t - p]);
        naive /= static_cast<double>(train_values.size() - p);
        if (naive > 0.0) r.mase = r.mae / naive;
    }
    return r;
}

} // namespace hydrotwin
