#include "hydrotwin/datastore.hpp"

#include "hydrotwin/errors.hpp"
#include "hydrotwin/serialization.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

namespace hydrotwin {

namespace {

constexpr std::string_view tag_names[] = {"tank_level_pct",  "inflow_m3",       "reactor1_status", "reactor2_status",
                                          "reactor3_status", "temp_setpoint_c", "dry_solids_frac", "cycle_minutes",
                                          "energy_kwh_m3",   "quality_index"};

struct Line {
    int number;
    std::string_view text;
};

// Splits on LF, dropping a trailing CR and the empty piece after a final LF.
std::vector<Line> split_lines(std::string_view text) {
    std::vector<Line> lines;
    int number = 1;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back({number++, line});
        if (nl == std::string_view::npos) break;
        text.remove_prefix(nl + 1);
    }
    return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::optional<double> parse_number(std::string_view text) {
    if (text.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string_view strip_bom(std::string_view text) {
    if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    return text;
}

} // namespace

std::string_view to_string(Tag tag) { return tag_names[static_cast<std::size_t>(tag)]; }

std::optional<Tag> tag_from_string(std::string_view name) {
    for (std::size_t i = 0; i < std::size(tag_names); ++i)
        if (tag_names[i] == name) return static_cast<Tag>(i);
    return std::nullopt;
}

bool is_status_tag(Tag tag) {
    return tag == Tag::reactor1_status || tag == Tag::reactor2_status || tag == Tag::reactor3_status;
}

Tag reactor_status_tag(int reactor_index) {
    if (reactor_index < 0 || reactor_index > 2) fail(ErrorCode::validation, "historian carries three reactor status tags");
    return static_cast<Tag>(static_cast<int>(Tag::reactor1_status) + reactor_index);
}

HistorianParse parse_historian_csv(std::string_view text) {
    const auto lines = split_lines(strip_bom(text));
    if (lines.empty() || lines[0].text != "timestamp,tag,value")
        fail(ErrorCode::parse, "historian CSV header must be exactly 'timestamp,tag,value'");
    HistorianParse out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto [number, line] = lines[i];
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != 3) {
            out.errors.push_back({number, "expected 3 fields, found " + std::to_string(fields.size())});
            continue;
        }
        const auto ts = parse_rfc3339(fields[0]);
        if (!ts) {
            out.errors.push_back({number, "invalid RFC 3339 UTC timestamp '" + std::string(fields[0]) + "'"});
            continue;
        }
        const auto tag = tag_from_string(fields[1]);
        if (!tag) {
            out.errors.push_back({number, "unknown tag '" + std::string(fields[1]) + "'"});
            continue;
        }
        const auto value = parse_number(fields[2]);
        if (!value) {
            out.errors.push_back({number, "value '" + std::string(fields[2]) + "' is not a finite number"});
            continue;
        }
        if (is_status_tag(*tag) && *value != 0.0 && *value != 1.0) {
            out.errors.push_back({number, "status tag value must be 0 or 1"});
            continue;
        }
        out.records.push_back({*ts, *tag, *value});
    }
    std::stable_sort(out.records.begin(), out.records.end(), [](const auto& a, const auto& b) {
        return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.tag < b.tag;
    });
    return out;
}

WeatherParse parse_weather_csv(std::string_view text) {
    const auto lines = split_lines(strip_bom(text));
    if (lines.empty() || lines[0].text != "date,rainfall_mm,temp_max_c,temp_min_c")
        fail(ErrorCode::parse, "weather CSV header must be exactly 'date,rainfall_mm,temp_max_c,temp_min_c'");
    WeatherParse out;
    std::map<Date, std::pair<WeatherRecord, int>> by_date;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto [number, line] = lines[i];
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != 4) {
            out.errors.push_back({number, "expected 4 fields, found " + std::to_string(fields.size())});
            continue;
        }
        const auto date = parse_date(fields[0]);
        if (!date) {
            out.errors.push_back({number, "invalid date '" + std::string(fields[0]) + "'"});
            continue;
        }
        const auto rain = parse_number(fields[1]);
        const auto tmax = parse_number(fields[2]);
        const auto tmin = parse_number(fields[3]);
        if (!rain || !tmax || !tmin) {
            out.errors.push_back({number, "rainfall and temperatures must be finite numbers"});
            continue;
        }
        if (*rain < 0.0) {
            out.errors.push_back({number, "rainfall_mm must be >= 0"});
            continue;
        }
        if (*tmin > *tmax) {
            out.errors.push_back({number, "temp_min_c exceeds temp_max_c"});
            continue;
        }
        const WeatherRecord rec{*date, *rain, *tmax, *tmin};
        const auto [it, inserted] = by_date.try_emplace(*date, rec, number);
        if (!inserted) {
            out.warnings.push_back({number, "duplicate date " + format_date(*date) + " replaces line " +
                                                std::to_string(it->second.second)});
            it->second = {rec, number};
        }
    }
    for (const auto& [date, entry] : by_date) out.records.push_back(entry.first);
    return out;
}

std::string format_number(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) fail(ErrorCode::validation, "cannot format number");
    return {buf, ptr};
}

std::string format_historian_csv(const std::vector<HistorianRecord>& records) {
    std::string out = "timestamp,tag,value\n";
    for (const auto& r : records) {
        out += format_rfc3339(r.timestamp);
        out += ',';
        out += to_string(r.tag);
        out += ',';
        out += format_number(r.value);
        out += '\n';
    }
    return out;
}

std::string format_weather_csv(const std::vector<WeatherRecord>& records) {
    std::string out = "date,rainfall_mm,temp_max_c,temp_min_c\n";
    for (const auto& r : records)
        out += format_date(r.date) + ',' + format_number(r.rainfall_mm) + ',' + format_number(r.temp_max_c) + ',' +
               format_number(r.temp_min_c) + '\n';
    return out;
}

const AlignedSeries* Alignment::find(Tag tag) const {
    const auto it = series.find(tag);
    return it == series.end() ? nullptr : &it->second;
}

Alignment align_to_grid(const std::vector<HistorianRecord>& records, const TimeGrid& grid, int fill_limit,
                        const std::vector<Tag>& tags) {
    grid.validate();
    if (fill_limit < 0) fail(ErrorCode::validation, "fill limit must be >= 0");
    const auto T = static_cast<std::size_t>(grid.horizon_steps);
    const std::chrono::seconds step{static_cast<std::int64_t>(grid.step_minutes) * 60};

    Alignment out;
    out.grid = grid;
    std::map<Tag, std::vector<double>> sums;
    for (Tag tag : tags) {
        AlignedSeries s;
        s.tag = tag;
        s.values.assign(T, std::nullopt);
        s.observations.assign(T, 0);
        s.filled.assign(T, false);
        out.series.emplace(tag, std::move(s));
        sums[tag].assign(T, 0.0);
    }

    // Records arrive sorted by time, so "last" means last in that order.
    auto ordered = records;
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    for (const auto& r : ordered) {
        const auto it = out.series.find(r.tag);
        if (it == out.series.end() || r.timestamp < grid.start) continue;
        const auto idx = static_cast<std::size_t>((r.timestamp - grid.start) / step);
        if (idx >= T) continue;
        auto& s = it->second;
        ++s.observations[idx];
        if (is_status_tag(r.tag)) s.values[idx] = r.value;
        else sums[r.tag][idx] += r.value;
    }

    for (auto& [tag, s] : out.series) {
        bool any = false;
        for (std::size_t t = 0; t < T; ++t) {
            if (s.observations[t] == 0) continue;
            any = true;
            if (!is_status_tag(tag)) s.values[t] = sums[tag][t] / s.observations[t];
        }
        if (!any) {
            out.absent_tags.push_back(tag);
            for (std::size_t t = 0; t < T; ++t) s.missing_steps.push_back(static_cast<int>(t));
            continue;
        }
        std::optional<double> last;
        int gap = 0;
        for (std::size_t t = 0; t < T; ++t) {
            if (s.observations[t] > 0) {
                last = s.values[t];
                gap = 0;
                continue;
            }
            ++gap;
            if (last && gap <= fill_limit) {
                s.values[t] = last;
                s.filled[t] = true;
            } else {
                s.missing_steps.push_back(static_cast<int>(t));
            }
        }
    }
    return out;
}

Dataset build_training_dataset(const Alignment& aligned) {
    const Tag inputs[] = {Tag::temp_setpoint_c, Tag::dry_solids_frac, Tag::cycle_minutes};
    const Tag outputs[] = {Tag::energy_kwh_m3, Tag::quality_index};
    Dataset d;
    d.features = Matrix(0, 3);
    d.targets = Matrix(0, 2);
    d.feature_names = {"temp_setpoint_c", "dry_solids_frac", "cycle_minutes"};
    d.target_names = {"energy_kwh_m3", "quality_index"};

    const auto T = static_cast<std::size_t>(aligned.grid.horizon_steps);
    auto value_at = [&](Tag tag, std::size_t t) -> std::optional<double> {
        const auto* s = aligned.find(tag);
        return s ? s->values[t] : std::nullopt;
    };
    for (std::size_t t = 0; t < T; ++t) {
        bool running = false;
        for (int r = 0; r < 3; ++r) running = running || value_at(reactor_status_tag(r), t) == 1.0;
        if (!running) continue;
        double x[3], y[2];
        bool complete = true;
        for (std::size_t i = 0; i < 3 && complete; ++i) {
            const auto v = value_at(inputs[i], t);
            complete = v.has_value();
            if (complete) x[i] = *v;
        }
        for (std::size_t i = 0; i < 2 && complete; ++i) {
            const auto v = value_at(outputs[i], t);
            complete = v.has_value();
            if (complete) y[i] = *v;
        }
        if (!complete) continue;
        d.features.push_row(x);
        d.targets.push_row(y);
    }
    if (d.size() == 0) fail(ErrorCode::empty_dataset, "no aligned step has a running reactor and every training tag");
    return d;
}

TimeSeries inflow_history(const Alignment& aligned, double capacity_m3) {
    if (!(capacity_m3 > 0.0)) fail(ErrorCode::validation, "capacity must be positive");
    const auto* s = aligned.find(Tag::inflow_m3);
    if (s == nullptr || s->values.empty() || !s->missing_steps.empty())
        fail(ErrorCode::coverage, "inflow history has missing steps");
    std::vector<double> pct;
    for (const auto& v : s->values) pct.push_back(*v / capacity_m3 * 100.0);
    return TimeSeries::regular(aligned.grid.start, aligned.grid.step_minutes, std::move(pct));
}

PlantState latest_plant_state(const Alignment& aligned, const Plant& plant) {
    PlantState state = initial_state(plant, 50.0);
    const int T = aligned.grid.horizon_steps;
    const auto* level = aligned.find(Tag::tank_level_pct);
    if (level == nullptr || !level->values.back())
        fail(ErrorCode::coverage, "no tank level at the last aligned step");
    state.tank.level_pct = std::clamp(*level->values.back(), 0.0, 100.0);
    state.t_index = T;

    for (int r = 0; r < plant.reactor_count() && r < 3; ++r) {
        const auto* s = aligned.find(reactor_status_tag(r));
        if (s == nullptr || !s->values.back()) continue;
        const bool running = *s->values.back() == 1.0;
        int run = 0;
        for (int t = T - 1; t >= 0 && s->values[static_cast<std::size_t>(t)] &&
                            (*s->values[static_cast<std::size_t>(t)] == 1.0) == running;
             --t)
            ++run;
        state.reactors[static_cast<std::size_t>(r)] = {running, run};
    }

    const Tag op_tags[] = {Tag::temp_setpoint_c, Tag::dry_solids_frac, Tag::cycle_minutes};
    double op[3] = {state.op_point.temp_setpoint_c, state.op_point.dry_solids_frac, state.op_point.cycle_minutes};
    for (std::size_t i = 0; i < 3; ++i) {
        const auto* s = aligned.find(op_tags[i]);
        if (s == nullptr) continue;
        for (auto it = s->values.rbegin(); it != s->values.rend(); ++it)
            if (*it) {
                op[i] = **it;
                break;
            }
    }
    const OperatingPoint candidate{op[0], op[1], op[2]};
    if (candidate.in_bounds()) state.op_point = candidate;
    return state;
}

ExogFeatures exog_from_weather(const std::vector<WeatherRecord>& weather, Timestamp first, int step_minutes,
                               std::size_t count) {
    std::map<Date, const WeatherRecord*> by_date;
    for (const auto& w : weather) by_date[w.date] = &w;
    ExogFeatures ex;
    ex.rows.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const Timestamp ts = first + std::chrono::minutes(static_cast<std::int64_t>(step_minutes) * static_cast<std::int64_t>(i));
        const auto it = by_date.find(date_of(ts));
        if (it == by_date.end()) fail(ErrorCode::coverage, "no weather record for " + format_date(date_of(ts)));
        ex.rows.push_back({day_of_week(ts), it->second->rainfall_mm, it->second->temp_max_c});
    }
    return ex;
}

TimeGrid grid_covering(const std::vector<HistorianRecord>& records, int step_minutes) {
    if (records.empty()) fail(ErrorCode::empty_dataset, "no historian records");
    if (step_minutes < 1) fail(ErrorCode::validation, "step_minutes must be >= 1");
    const auto [lo, hi] = std::minmax_element(records.begin(), records.end(),
                                              [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    const std::chrono::seconds step{static_cast<std::int64_t>(step_minutes) * 60};
    TimeGrid grid;
    grid.step_minutes = step_minutes;
    grid.start = Timestamp{std::chrono::floor<std::chrono::minutes>(lo->timestamp)};
    grid.start -= (grid.start.time_since_epoch() % step);
    grid.horizon_steps = static_cast<int>((hi->timestamp - grid.start) / step) + 1;
    return grid;
}

std::string_view to_string(ActionKind kind) { return kind == ActionKind::accept ? "accept" : "override"; }

ActionKind action_kind_from_string(std::string_view name) {
    if (name == "accept") return ActionKind::accept;
    if (name == "override") return ActionKind::override_schedule;
    fail(ErrorCode::validation, "action kind must be 'accept' or 'override'");
}

Schedule apply_edits(const Schedule& schedule, const std::vector<ScheduleEdit>& edits) {
    Schedule out = schedule;
    for (const auto& e : edits) {
        if (e.reactor < 0 || e.reactor >= out.reactors() || e.step < 0 || e.step >= out.steps())
            fail(ErrorCode::validation, "schedule edit (" + std::to_string(e.reactor) + ", " + std::to_string(e.step) +
                                            ") is outside the schedule");
        out.set(e.reactor, e.step, e.on);
    }
    return out;
}

RunStore::RunStore(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(*path_);
    if (!in) return;   // a fresh log
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        const Json doc = parse_json(line);
        const auto type = doc.value("kind", std::string{});
        if (type == "run") {
            auto rec = from_document<RunRecord>(doc, "run");
            if (!records_.empty() && rec.id <= records_.back().id)
                fail(ErrorCode::validation, "run log line " + std::to_string(number) + " breaks id order");
            rec.operator_action.reset();
            records_.push_back(std::move(rec));
        } else if (type == "action") {
            const Json body = open_document(doc, "action");
            const auto id = body.at("run_id").get<std::int64_t>();
            const auto it = std::find_if(records_.begin(), records_.end(), [id](const auto& r) { return r.id == id; });
            if (it == records_.end() || it->operator_action)
                fail(ErrorCode::validation, "run log line " + std::to_string(number) + " has an orphan action");
            it->operator_action = body.at("action").get<OperatorAction>();
        } else {
            fail(ErrorCode::validation, "run log line " + std::to_string(number) + " has an unknown kind");
        }
    }
}

void RunStore::write_line(const std::string& line) {
    if (!path_) return;
    std::ofstream out(*path_, std::ios::app | std::ios::binary);
    if (!out) fail(ErrorCode::io, "cannot append to " + path_->string());
    out << line << '\n';
    out.flush();
    if (!out) fail(ErrorCode::io, "failed appending to " + path_->string());
}

RunRecord RunStore::append(const Recommendation& recommendation, Timestamp created_at) {
    std::lock_guard lock(mutex_);
    RunRecord rec;
    rec.id = records_.empty() ? 1 : records_.back().id + 1;
    rec.created_at = created_at;
    rec.recommendation = recommendation;
    write_line(to_document("run", rec).dump());
    records_.push_back(rec);
    return rec;
}

RunRecord RunStore::record_action(std::int64_t run_id, const OperatorAction& action) {
    std::lock_guard lock(mutex_);
    const auto it =
        std::find_if(records_.begin(), records_.end(), [run_id](const auto& r) { return r.id == run_id; });
    if (it == records_.end()) fail(ErrorCode::not_found, "run " + std::to_string(run_id) + " does not exist");
    if (it->operator_action) fail(ErrorCode::conflict, "run " + std::to_string(run_id) + " already has an action");
    if (action.kind == ActionKind::override_schedule) apply_edits(it->recommendation.schedule, action.schedule_edits);
    write_line(make_document("action", {{"run_id", run_id}, {"action", action}}).dump());
    it->operator_action = action;
    return *it;
}

std::optional<RunRecord> RunStore::get(std::int64_t id) const {
    std::lock_guard lock(mutex_);
    for (const auto& r : records_)
        if (r.id == id) return r;
    return std::nullopt;
}

std::vector<RunRecord> RunStore::list(std::size_t limit, std::size_t offset) const {
    std::lock_guard lock(mutex_);
    std::vector<RunRecord> out;
    for (auto it = records_.rbegin(); it != records_.rend() && out.size() < limit; ++it) {
        if (offset > 0) {
            --offset;
            continue;
        }
        out.push_back(*it);
    }
    return out;
}

std::size_t RunStore::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

} // namespace hydrotwin
