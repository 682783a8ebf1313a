#pragma once

#include "hydrotwin/learner.hpp"
#include "hydrotwin/twin.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hydrotwin {

/// Equally spaced series of finite values.
struct TimeSeries {
    std::vector<Timestamp> timestamps;
    std::vector<double> values;
    int step_minutes = 15;

    std::size_t size() const noexcept { return values.size(); }
    void validate() const;
    TimeSeries tail(std::size_t count) const;
    TimeSeries head(std::size_t count) const;

    static TimeSeries regular(Timestamp start, int step_minutes, std::vector<double> values);
};

struct ExogRow {
    int day_of_week = 0;   // 0 = Monday
    double rainfall_mm = 0.0;
    double temp_max_c = 25.0;
};

/// Covariates for the history and the forecast horizon, one row per step.
struct ExogFeatures {
    std::vector<ExogRow> rows;
};

enum class ForecastMethod { seasonal_naive, moving_average, feature_model };

std::string to_string(ForecastMethod method);
ForecastMethod forecast_method_from_string(const std::string& name);

struct ForecastResult {
    std::vector<double> values;
    ForecastMethod method = ForecastMethod::seasonal_naive;
};

struct AccuracyReport {
    double mae = 0.0;
    double rmse = 0.0;
    std::optional<double> mase;
};

ForecastResult seasonal_naive(const TimeSeries& series, int period, int horizon);
ForecastResult moving_average(const TimeSeries& series, int window, int horizon);

/// Boosted-tree model over (lag-1, lag-period, day-of-week one-hot, rainfall,
/// max temperature), applied recursively over the horizon.
ForecastResult feature_forecast(const TimeSeries& series, const ExogFeatures& exog, int horizon,
                                const TrainConfig& learner_config, int period);

AccuracyReport evaluate_forecast(std::span<const double> actual, std::span<const double> predicted,
                                 std::span<const double> train_values, int period);

/// Width of a feature_forecast design row.
inline constexpr std::size_t forecast_feature_width = 11;

} // namespace hydrotwin
