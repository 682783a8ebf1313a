#pragma once

#include "hydrotwin/decision.hpp"
#include "hydrotwin/forecasting.hpp"
#include "hydrotwin/learner.hpp"
#include "hydrotwin/timeutil.hpp"
#include "hydrotwin/twin.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hydrotwin {

enum class Tag {
    tank_level_pct,
    inflow_m3,
    reactor1_status,
    reactor2_status,
    reactor3_status,
    temp_setpoint_c,
    dry_solids_frac,
    cycle_minutes,
    energy_kwh_m3,
    quality_index,
};

inline constexpr Tag all_tags[] = {Tag::tank_level_pct,  Tag::inflow_m3,       Tag::reactor1_status,
                                   Tag::reactor2_status, Tag::reactor3_status, Tag::temp_setpoint_c,
                                   Tag::dry_solids_frac, Tag::cycle_minutes,   Tag::energy_kwh_m3,
                                   Tag::quality_index};

std::string_view to_string(Tag tag);
std::optional<Tag> tag_from_string(std::string_view name);
bool is_status_tag(Tag tag);
/// reactor1_status for index 0, and so on.
Tag reactor_status_tag(int reactor_index);

struct HistorianRecord {
    Timestamp timestamp{};
    Tag tag = Tag::tank_level_pct;
    double value = 0.0;

    friend bool operator==(const HistorianRecord&, const HistorianRecord&) = default;
};

struct WeatherRecord {
    Date date{};
    double rainfall_mm = 0.0;
    double temp_max_c = 0.0;
    double temp_min_c = 0.0;

    friend bool operator==(const WeatherRecord&, const WeatherRecord&) = default;
};

struct RowIssue {
    int line = 0;   // 1-based, header is line 1
    std::string message;

    friend bool operator==(const RowIssue&, const RowIssue&) = default;
};

struct HistorianParse {
    std::vector<HistorianRecord> records;   // sorted by (timestamp, tag)
    std::vector<RowIssue> errors;
};

struct WeatherParse {
    std::vector<WeatherRecord> records;     // sorted by date, one per date
    std::vector<RowIssue> errors;
    std::vector<RowIssue> warnings;
};

/// A wrong or missing header is fatal (parse error); bad rows are reported
/// and skipped. Blank lines are ignored.
HistorianParse parse_historian_csv(std::string_view text);
WeatherParse parse_weather_csv(std::string_view text);

std::string format_historian_csv(const std::vector<HistorianRecord>& records);
std::string format_weather_csv(const std::vector<WeatherRecord>& records);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double value);

struct AlignedSeries {
    Tag tag = Tag::tank_level_pct;
    std::vector<std::optional<double>> values;   // one per grid step
    std::vector<int> observations;               // records inside each window
    std::vector<bool> filled;                    // forward-filled steps
    std::vector<int> missing_steps;              // unresolved after filling
};

struct Alignment {
    TimeGrid grid;
    std::map<Tag, AlignedSeries> series;
    std::vector<Tag> absent_tags;   // requested but without a single record in range

    const AlignedSeries* find(Tag tag) const;
};

/// Window t covers [start + t*step, start + (t+1)*step). Continuous tags
/// average their records, status tags keep the last one. Gaps are filled
/// forward for at most fill_limit steps; anything longer stays missing.
Alignment align_to_grid(const std::vector<HistorianRecord>& records, const TimeGrid& grid, int fill_limit = 3,
                        const std::vector<Tag>& tags = {std::begin(all_tags), std::end(all_tags)});

/// Rows where the three operating-point tags and both targets are present
/// and at least one reactor runs.
Dataset build_training_dataset(const Alignment& aligned);

/// Inflow in percent of tank capacity per step; every step must be present.
TimeSeries inflow_history(const Alignment& aligned, double capacity_m3);

/// Latest fully observed plant state: tank level, reactor statuses with
/// their run lengths, and operating point.
PlantState latest_plant_state(const Alignment& aligned, const Plant& plant);

/// One covariate row per step from daily weather; every date touched by the
/// steps must be present.
ExogFeatures exog_from_weather(const std::vector<WeatherRecord>& weather, Timestamp first, int step_minutes,
                               std::size_t count);

/// Earliest-to-latest grid spanning the records, for a given step length.
TimeGrid grid_covering(const std::vector<HistorianRecord>& records, int step_minutes);

struct ScheduleEdit {
    int reactor = 0;   // 0-based
    int step = 0;
    bool on = false;

    friend bool operator==(const ScheduleEdit&, const ScheduleEdit&) = default;
};

enum class ActionKind { accept, override_schedule };

std::string_view to_string(ActionKind kind);
ActionKind action_kind_from_string(std::string_view name);

struct OperatorAction {
    ActionKind kind = ActionKind::accept;
    std::vector<ScheduleEdit> schedule_edits;
    std::string actor;
    Timestamp at{};

    friend bool operator==(const OperatorAction&, const OperatorAction&) = default;
};

struct RunRecord {
    std::int64_t id = 0;
    Timestamp created_at{};
    Recommendation recommendation;
    std::optional<OperatorAction> operator_action;

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// Applies schedule edits to a copy of the schedule; out-of-range cells are
/// a validation error.
Schedule apply_edits(const Schedule& schedule, const std::vector<ScheduleEdit>& edits);

/// Append-only run log. With a path, every append writes one JSON line
/// (a "run" line or an "action" line) and flushes before returning; existing
/// lines are never rewritten.
class RunStore {
public:
    RunStore() = default;
    explicit RunStore(std::filesystem::path path);

    RunRecord append(const Recommendation& recommendation, Timestamp created_at);
    RunRecord record_action(std::int64_t run_id, const OperatorAction& action);

    std::optional<RunRecord> get(std::int64_t id) const;
    /// Newest first.
    std::vector<RunRecord> list(std::size_t limit, std::size_t offset = 0) const;
    std::size_t size() const;

private:
    void write_line(const std::string& line);

    mutable std::mutex mutex_;
    std::optional<std::filesystem::path> path_;
    std::vector<RunRecord> records_;   // ascending id
};

} // namespace hydrotwin
