#include "hydrotwin/service.hpp"

#include "hydrotwin/serialization.hpp"
#include "hydrotwin/timeutil.hpp"
#include "hydrotwin/workflows.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <condition_variable>
#include <deque>

namespace hydrotwin {

namespace {

constexpr std::size_t trajectory_limit = 4096;
constexpr int max_tick_steps = 10000;

Json point_json(const TrajectoryPoint& p) {
    return {{"t_index", p.t_index},
            {"time", format_rfc3339(p.time)},
            {"level_pct", p.level_pct},
            {"inflow_pct", p.inflow_pct},
            {"running", p.running},
            {"op_point", p.op_point ? Json(*p.op_point) : Json(nullptr)},
            {"overflow", p.overflow},
            {"underflow", p.underflow}};
}

void require_object(const Json& j, const char* what) {
    if (!j.is_object()) fail(ErrorCode::validation, std::string(what) + " must be a JSON object");
}

// Every historian row describing one executed step, as the plant would log it.
void log_step(std::vector<HistorianRecord>& history, Timestamp ts, const Plant& plant, double level_pct,
              double inflow_pct, const std::vector<bool>& running, const OperatingPoint& op,
              const std::optional<Observation>& obs) {
    history.push_back({ts, Tag::tank_level_pct, level_pct});
    history.push_back({ts, Tag::inflow_m3, inflow_pct * plant.capacity_m3 / 100.0});
    for (int r = 0; r < 3; ++r) {
        const bool on = r < static_cast<int>(running.size()) && running[static_cast<std::size_t>(r)];
        history.push_back({ts, reactor_status_tag(r), on ? 1.0 : 0.0});
    }
    history.push_back({ts, Tag::temp_setpoint_c, op.temp_setpoint_c});
    history.push_back({ts, Tag::dry_solids_frac, op.dry_solids_frac});
    history.push_back({ts, Tag::cycle_minutes, op.cycle_minutes});
    if (obs) {
        history.push_back({ts, Tag::energy_kwh_m3, obs->energy});
        history.push_back({ts, Tag::quality_index, obs->quality});
    }
}

} // namespace

Json ApiError::to_json() const { return {{"error", {{"code", code}, {"message", message}}}}; }

ApiError api_error(ErrorCode code, const std::string& message) {
    int status = 400;
    switch (code) {
    case ErrorCode::not_found: status = 404; break;
    case ErrorCode::conflict:
    case ErrorCode::untrained: status = 409; break;
    case ErrorCode::infeasible:
    case ErrorCode::insufficient_history:
    case ErrorCode::coverage: status = 422; break;
    case ErrorCode::io: status = 500; break;
    default: break;
    }
    return {status, std::string(to_string(code)), message};
}

ApiError api_error(const Error& e) { return api_error(e.code(), e.what()); }

std::string StreamEvent::to_sse() const {
    const Json body = {{"type", type}, {"payload", payload}, {"state_version", state_version}};
    return "event: " + type + "\ndata: " + body.dump() + "\n\n";
}

TwinService::TwinService(SystemConfig config)
    : config_(std::move(config)),
      inflow_rng_(config_.sim_seed),
      sensor_rng_(config_.ground_truth.seed ^ config_.sim_seed) {
    config_.validate();
    plant_state_ = initial_state(config_.plant, config_.initial_level_pct);
    next_time_ = config_.clock_start;
    runs_ = config_.run_log_path.empty() ? std::make_unique<RunStore>()
                                         : std::make_unique<RunStore>(config_.run_log_path);
}

void TwinService::set_model(Model model) {
    std::lock_guard lock(mutex_);
    model_ = std::move(model);
}

void TwinService::load_history(const std::vector<HistorianRecord>& historian, std::vector<WeatherRecord> weather) {
    std::lock_guard lock(mutex_);
    history_ = historian;
    std::stable_sort(history_.begin(), history_.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    weather_ = std::move(weather);
    adopt_history_locked();
}

// The historian is the plant's own record, so the twin follows its last step.
void TwinService::adopt_history_locked() {
    if (history_.empty()) return;
    const auto grid = grid_covering(history_, config_.step_minutes);
    const auto aligned = align_to_grid(history_, grid, config_.fill_limit);
    plant_state_ = latest_plant_state(aligned, config_.plant);
    next_time_ = grid.time_at(grid.horizon_steps);

    trajectory_.clear();
    const auto* level = aligned.find(Tag::tank_level_pct);
    const auto* inflow = aligned.find(Tag::inflow_m3);
    const int first = std::max(0, grid.horizon_steps - static_cast<int>(trajectory_limit));
    for (int t = first; t < grid.horizon_steps; ++t) {
        const auto i = static_cast<std::size_t>(t);
        if (level == nullptr || !level->values[i]) continue;
        TrajectoryPoint p;
        p.t_index = t - grid.horizon_steps + plant_state_.t_index + 1;
        p.time = grid.time_at(t);
        p.level_pct = *level->values[i];
        if (inflow != nullptr && inflow->values[i]) p.inflow_pct = *inflow->values[i] / config_.plant.capacity_m3 * 100.0;
        for (int r = 0; r < config_.plant.reactor_count(); ++r) {
            const auto* s = aligned.find(reactor_status_tag(r));
            p.running.push_back(s != nullptr && s->values[i] && *s->values[i] > 0.5);
        }
        trajectory_.push_back(std::move(p));
    }
}

std::uint64_t TwinService::state_version() const {
    std::lock_guard lock(mutex_);
    return version_;
}

Json TwinService::state_locked() const {
    Json active = nullptr;
    if (active_) {
        Json ops = Json::array();
        for (const auto& op : active_->op_points) ops.push_back(op ? Json(*op) : Json(nullptr));
        active = {{"run_id", active_->run_id},
                  {"start", format_rfc3339(active_->start)},
                  {"schedule", active_->schedule},
                  {"op_points", std::move(ops)}};
    }
    return {{"plant_state", plant_state_},
            {"time", format_rfc3339(next_time_)},
            {"target_level_pct", config_.plan.target_level_pct},
            {"latest_recommendation", latest_ ? Json(*latest_) : Json(nullptr)},
            {"active_schedule", active},
            {"model", model_ ? Json{{"trained", true}, {"type", model_kind(*model_)}}
                             : Json{{"trained", false}, {"type", nullptr}}},
            {"history_rows", history_.size()},
            {"run_count", runs_->size()},
            {"state_version", version_}};
}

Json TwinService::state() const {
    std::lock_guard lock(mutex_);
    return state_locked();
}

StreamEvent TwinService::snapshot_locked() const {
    Json payload = state_locked();
    Json points = Json::array();
    for (const auto& p : trajectory_) points.push_back(point_json(p));
    payload["trajectory"] = std::move(points);
    return {"snapshot", std::move(payload), version_};
}

void TwinService::emit_locked(const std::string& type, Json payload) {
    const StreamEvent event{type, std::move(payload), version_};
    for (const auto& [id, listener] : listeners_) listener(event);
}

std::pair<std::uint64_t, StreamEvent> TwinService::subscribe(Listener listener) {
    std::lock_guard lock(mutex_);
    const auto id = next_listener_++;
    listeners_.emplace_back(id, std::move(listener));
    return {id, snapshot_locked()};
}

void TwinService::unsubscribe(std::uint64_t id) {
    std::lock_guard lock(mutex_);
    std::erase_if(listeners_, [id](const auto& l) { return l.first == id; });
}

Json TwinService::ingest_historian(const std::string& csv) {
    auto parsed = parse_historian_csv(csv);
    Json errors = Json::array();
    for (const auto& e : parsed.errors) errors.push_back({{"line", e.line}, {"message", e.message}});

    std::lock_guard lock(mutex_);
    bool state_updated = false;
    if (!parsed.records.empty()) {
        history_.insert(history_.end(), parsed.records.begin(), parsed.records.end());
        std::stable_sort(history_.begin(), history_.end(),
                         [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
        try {
            adopt_history_locked();
            state_updated = true;
        } catch (const Error&) {
            // Rows stay in history; the twin keeps its state until a complete step arrives.
        }
        ++version_;
        emit_locked("state", state_locked());
    }
    return {{"accepted_rows", parsed.records.size()},
            {"row_errors", std::move(errors)},
            {"state_updated", state_updated},
            {"state_version", version_}};
}

Json TwinService::plan(const Json& request) {
    require_object(request, "plan request");
    static const char* const overridable[] = {"horizon_steps", "omega", "grid", "policy", "target_level_pct",
                                              "level_bounds", "forecast_method"};
    for (const auto& [key, value] : request.items()) {
        if (std::find_if(std::begin(overridable), std::end(overridable), [&](const char* k) { return key == k; }) ==
            std::end(overridable))
            fail(ErrorCode::validation, "unknown plan field '" + key + "'");
    }

    std::lock_guard plan_lock(plan_mutex_);
    SystemConfig config = config_;
    std::optional<Model> model;
    std::vector<HistorianRecord> history;
    std::vector<WeatherRecord> weather;
    PlantState state;
    {
        std::lock_guard lock(mutex_);
        model = model_;
        history = history_;
        weather = weather_;
        state = plant_state_;
    }

    Json merged = config.plan;
    merged.merge_patch(request);
    from_json(merged, config.plan);
    config.plan.validate();
    if (!model) fail(ErrorCode::untrained, "model not trained");
    if (history.empty()) fail(ErrorCode::insufficient_history, "no plant history loaded");

    auto inputs = planning_inputs(history, weather, config);
    inputs.state = state;
    const Recommendation rec = hydrotwin::plan(config.plant, inputs.state, inputs.inflow, inputs.exog, *model,
                                               config.plan);

    std::lock_guard lock(mutex_);
    const RunRecord run = runs_->append(rec, rec.created_at);
    latest_ = rec;
    ++version_;
    emit_locked("recommendation", {{"run_id", run.id}, {"recommendation", rec}});
    return {{"run_id", run.id}, {"state_version", version_}, {"recommendation", rec}};
}

Json TwinService::whatif(const Json& request) const {
    require_object(request, "what-if request");
    if (!request.contains("op_point")) fail(ErrorCode::validation, "what-if request needs op_point");
    const auto op = request.at("op_point").get<OperatingPoint>();
    op.validate();

    std::optional<Model> model;
    {
        std::lock_guard lock(mutex_);
        model = model_;
    }
    if (!model) fail(ErrorCode::untrained, "model not trained");
    const double x[3] = {op.temp_setpoint_c, op.dry_solids_frac, op.cycle_minutes};
    const auto y = predict_row(*model, x);
    const double threshold = config_.plan.policy.threshold();
    return {{"op_point", op},
            {"predicted_energy", y.at(0)},
            {"predicted_quality", y.at(1)},
            {"quality_threshold", threshold},
            {"feasible", y.at(1) >= threshold}};
}

Json TwinService::operator_action(const Json& request) {
    require_object(request, "operator action");
    if (!request.contains("run_id") || !request.at("run_id").is_number_integer())
        fail(ErrorCode::validation, "operator action needs an integer run_id");
    if (!request.contains("kind") || !request.at("kind").is_string())
        fail(ErrorCode::validation, "operator action needs kind accept or override");
    OperatorAction action;
    action.kind = action_kind_from_string(request.at("kind").get<std::string>());
    if (request.contains("schedule_edits"))
        action.schedule_edits = request.at("schedule_edits").get<std::vector<ScheduleEdit>>();
    if (action.kind == ActionKind::accept && !action.schedule_edits.empty())
        fail(ErrorCode::validation, "schedule_edits require kind override");
    action.actor = request.value("actor", std::string("operator"));
    const auto run_id = request.at("run_id").get<std::int64_t>();

    std::lock_guard lock(mutex_);
    action.at = next_time_;
    const RunRecord run = runs_->record_action(run_id, action);
    const auto& rec = run.recommendation;
    active_ = ActiveSchedule{run.id, apply_edits(rec.schedule, action.schedule_edits), rec.op_points, rec.grid.start};
    ++version_;
    emit_locked("action", {{"run", run}, {"active_schedule_run_id", run.id}});
    return run;
}

Json TwinService::sim_tick(const Json& request) {
    require_object(request, "tick request");
    const Json steps_field = request.value("steps", Json(1));
    if (!steps_field.is_number_integer()) fail(ErrorCode::validation, "steps must be an integer");
    const int steps = steps_field.get<int>();
    if (steps < 1) fail(ErrorCode::validation, "steps must be >= 1");
    if (steps > max_tick_steps) fail(ErrorCode::size_guard, "at most 10000 steps per tick");
    std::vector<double> supplied;
    if (request.contains("inflows_pct")) {
        supplied = request.at("inflows_pct").get<std::vector<double>>();
        if (supplied.size() != static_cast<std::size_t>(steps))
            fail(ErrorCode::dimension, "inflows_pct must have one value per step");
        for (double v : supplied)
            if (!(std::isfinite(v) && v >= 0.0)) fail(ErrorCode::domain, "inflows must be finite and non-negative");
    }

    const Plant& plant = config_.plant;
    const std::chrono::minutes step{config_.step_minutes};
    std::lock_guard lock(mutex_);
    Json points = Json::array();
    bool overflow = false;
    bool underflow = false;
    bool unscheduled = false;
    for (int i = 0; i < steps; ++i) {
        const Timestamp now = next_time_;
        double inflow = 0.0;
        if (supplied.empty()) {
            const auto since_midnight = now - std::chrono::floor<std::chrono::days>(now);
            const int phase = static_cast<int>(since_midnight / step);
            inflow = config_.inflow.generate(phase, 1, inflow_rng_).front();
        } else {
            inflow = supplied[static_cast<std::size_t>(i)];
        }

        std::vector<bool> decisions(plant.reactors.size(), false);
        OperatingPoint op = plant_state_.op_point;
        bool scheduled = false;
        if (active_ && now >= active_->start && (now - active_->start) % step == std::chrono::minutes{0}) {
            const auto k = static_cast<int>((now - active_->start) / step);
            if (k < active_->schedule.steps()) {
                decisions = active_->schedule.column(k);
                if (const auto& p = active_->op_points[static_cast<std::size_t>(k)]) op = *p;
                scheduled = true;
            }
        }
        unscheduled = unscheduled || !scheduled;

        StepResult result = step_dynamics(plant, plant_state_, inflow, decisions);
        const bool running = std::find(decisions.begin(), decisions.end(), true) != decisions.end();
        std::optional<Observation> obs;
        if (running) {
            result.next_state.op_point = op;
            obs = sample_observation(op, config_.ground_truth, sensor_rng_);
        }
        log_step(history_, now, plant, result.next_state.tank.level_pct, inflow, decisions,
                 result.next_state.op_point, obs);
        plant_state_ = result.next_state;
        next_time_ = now + step;
        ++version_;

        TrajectoryPoint point{plant_state_.t_index, now, plant_state_.tank.level_pct, inflow, decisions,
                              running ? std::optional(op) : std::nullopt, result.overflow, result.underflow};
        Json pj = point_json(point);
        pj["scheduled"] = scheduled;
        trajectory_.push_back(std::move(point));
        if (trajectory_.size() > trajectory_limit) trajectory_.erase(trajectory_.begin());
        overflow = overflow || result.overflow;
        underflow = underflow || result.underflow;

        emit_locked("state", {{"plant_state", plant_state_}, {"time", format_rfc3339(next_time_)}, {"point", pj}});
        if (result.overflow || result.underflow)
            emit_locked("violation", {{"kind", result.overflow ? "overflow" : "underflow"}, {"point", pj}});
        points.push_back(std::move(pj));
    }

    Json warnings = Json::array();
    if (unscheduled) warnings.push_back("no active schedule for some steps; reactors held OFF");
    return {{"plant_state", plant_state_},
            {"time", format_rfc3339(next_time_)},
            {"state_version", version_},
            {"steps", std::move(points)},
            {"overflow", overflow},
            {"underflow", underflow},
            {"warnings", std::move(warnings)}};
}

Json TwinService::runs(std::size_t limit, std::size_t offset) const {
    Json list = Json::array();
    for (const auto& r : runs_->list(limit, offset)) list.push_back(r);
    return {{"total", runs_->size()}, {"limit", limit}, {"offset", offset}, {"runs", std::move(list)}};
}

Json TwinService::run(std::int64_t id) const {
    const auto r = runs_->get(id);
    if (!r) fail(ErrorCode::not_found, "run " + std::to_string(id) + " does not exist");
    return *r;
}

// ---------------------------------------------------------------- HTTP

struct HttpServer::Subscriber {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<std::string> queue;
    bool closed = false;
    std::uint64_t listener = 0;
};

namespace {

void write_error(httplib::Response& res, const ApiError& e) {
    res.status = e.status;
    res.set_content(e.to_json().dump(), "application/json");
}

template <class F>
void respond(httplib::Response& res, F&& handler) {
    try {
        const Json body = handler();
        res.status = 200;
        res.set_content(body.dump(), "application/json");
    } catch (const Error& e) {
        write_error(res, api_error(e));
    } catch (const nlohmann::json::exception& e) {
        write_error(res, api_error(ErrorCode::validation, std::string("malformed request: ") + e.what()));
    } catch (const std::exception&) {
        write_error(res, {500, "internal", "internal error"});
    }
}

Json body_json(const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    return parse_json(req.body);
}

std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback) {
    if (!req.has_param(key)) return fallback;
    const std::string text = req.get_param_value(key);
    std::size_t value = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size())
        fail(ErrorCode::validation, std::string(key) + " must be a non-negative integer");
    return value;
}

} // namespace

HttpServer::HttpServer(TwinService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
    auto& s = *server_;
    // Stream clients hold a worker each; leave room for ordinary requests.
    s.new_task_queue = [] { return new httplib::ThreadPool(32); };
    s.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

    s.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
    s.Get("/api/v1/state", [this](const httplib::Request&, httplib::Response& res) {
        respond(res, [&] { return service_.state(); });
    });
    s.Post("/api/v1/ingest/historian", [this](const httplib::Request& req, httplib::Response& res) {
        respond(res, [&] { return service_.ingest_historian(req.body); });
    });
    s.Post("/api/v1/plan", [this](const httplib::Request& req, httplib::Response& res) {
        respond(res, [&] { return service_.plan(body_json(req)); });
    });
    s.Post("/api/v1/whatif", [this](const httplib::Request& req, httplib::Response& res) {
        respond(res, [&] { return service_.whatif(body_json(req)); });
    });
    s.Post("/api/v1/operator/action", [this](const httplib::Request& req, httplib::Response& res) {
        respond(res, [&] { return service_.operator_action(body_json(req)); });
    });
    s.Post("/api/v1/sim/tick", [this](const httplib::Request& req, httplib::Response& res) {
        respond(res, [&] { return service_.sim_tick(body_json(req)); });
    });
    s.Get("/api/v1/runs", [this](const httplib::Request& req, httplib::Response& res) {
        respond(res, [&] { return service_.runs(query_size(req, "limit", 50), query_size(req, "offset", 0)); });
    });
    s.Get(R"(/api/v1/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        respond(res, [&] {
            const std::string text = req.matches[1];
            std::int64_t id = 0;
            const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), id);
            if (ec != std::errc{} || end != text.data() + text.size())
                fail(ErrorCode::not_found, "run " + text + " does not exist");
            return service_.run(id);
        });
    });
    s.Get("/api/v1/stream", [this](const httplib::Request&, httplib::Response& res) {
        auto sub = std::make_shared<Subscriber>();
        {
            std::lock_guard lock(subscribers_mutex_);
            if (stopping_) {
                write_error(res, {503, "unavailable", "server is stopping"});
                return;
            }
            subscribers_.push_back(sub);
        }
        auto [id, snapshot] = service_.subscribe([sub](const StreamEvent& event) {
            std::lock_guard lock(sub->mutex);
            sub->queue.push_back(event.to_sse());
            sub->cv.notify_one();
        });
        {
            std::lock_guard lock(sub->mutex);
            sub->listener = id;
            sub->queue.push_front(snapshot.to_sse());
        }
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream",
            [sub](std::size_t, httplib::DataSink& sink) {
                std::unique_lock lock(sub->mutex);
                sub->cv.wait_for(lock, std::chrono::seconds(15), [&] { return sub->closed || !sub->queue.empty(); });
                if (sub->closed) {
                    lock.unlock();
                    sink.done();
                    return true;
                }
                std::deque<std::string> batch;
                batch.swap(sub->queue);
                lock.unlock();
                if (batch.empty()) batch.push_back(": keepalive\n\n");
                for (const auto& chunk : batch)
                    if (!sink.write(chunk.data(), chunk.size())) return false;
                return true;
            },
            [this, sub](bool) {
                service_.unsubscribe(sub->listener);
                std::lock_guard lock(subscribers_mutex_);
                std::erase(subscribers_, sub);
            });
    });

    s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return;
        if (res.status == 404)
            write_error(res, {404, "not_found", "no such endpoint"});
        else
            write_error(res, {res.status, "http_error", httplib::status_message(res.status)});
    });
    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
        write_error(res, {500, "internal", "internal error"});
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = server_->bind_to_any_port(host);
        if (bound < 0) fail(ErrorCode::io, "cannot bind " + host);
        return bound;
    }
    if (!server_->bind_to_port(host, port)) fail(ErrorCode::io, "cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() {
    {
        std::lock_guard lock(subscribers_mutex_);
        stopping_ = true;
        for (const auto& sub : subscribers_) {
            std::lock_guard sub_lock(sub->mutex);
            sub->closed = true;
            sub->cv.notify_all();
        }
    }
    if (server_) server_->stop();
}

} // namespace hydrotwin
