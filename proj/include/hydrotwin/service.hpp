#pragma once

#include "hydrotwin/config.hpp"
#include "hydrotwin/datastore.hpp"
#include "hydrotwin/decision.hpp"
#include "hydrotwin/errors.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace httplib {
class Server;
}

namespace hydrotwin {

/// HTTP status and wire code for an error category.
struct ApiError {
    int status = 500;
    std::string code;
    std::string message;

    nlohmann::json to_json() const;
};

ApiError api_error(const Error& e);
ApiError api_error(ErrorCode code, const std::string& message);

struct StreamEvent {
    std::string type;   // snapshot | state | recommendation | action | violation
    nlohmann::json payload;
    std::uint64_t state_version = 0;

    /// "event: <type>\ndata: <json>\n\n"
    std::string to_sse() const;
};

/// One executed twin step, kept for chart history.
struct TrajectoryPoint {
    int t_index = 0;
    Timestamp time{};
    double level_pct = 0.0;
    double inflow_pct = 0.0;
    std::vector<bool> running;
    std::optional<OperatingPoint> op_point;
    bool overflow = false;
    bool underflow = false;
};

/// The authoritative twin state and every operation the API exposes. Mutations
/// are serialized; reads copy a snapshot under the lock. Planning runs on a
/// snapshot outside the lock so it never blocks readers.
class TwinService {
public:
    explicit TwinService(SystemConfig config);

    void set_model(Model model);
    /// Seeds history and plant state from records (the last aligned step).
    void load_history(const std::vector<HistorianRecord>& historian, std::vector<WeatherRecord> weather);

    nlohmann::json state() const;
    nlohmann::json ingest_historian(const std::string& csv);
    nlohmann::json plan(const nlohmann::json& request);
    nlohmann::json whatif(const nlohmann::json& request) const;
    nlohmann::json operator_action(const nlohmann::json& request);
    nlohmann::json sim_tick(const nlohmann::json& request);
    nlohmann::json runs(std::size_t limit, std::size_t offset) const;
    nlohmann::json run(std::int64_t id) const;

    std::uint64_t state_version() const;

    using Listener = std::function<void(const StreamEvent&)>;
    /// Registers a listener and returns the snapshot event it should send
    /// first; no event can slip between the snapshot and the subscription.
    std::pair<std::uint64_t, StreamEvent> subscribe(Listener listener);
    void unsubscribe(std::uint64_t id);

private:
    nlohmann::json state_locked() const;
    StreamEvent snapshot_locked() const;
    void emit_locked(const std::string& type, nlohmann::json payload);
    void adopt_history_locked();

    SystemConfig config_;
    mutable std::mutex mutex_;
    std::mutex plan_mutex_;   // one plan at a time; readers are not blocked
    std::uint64_t version_ = 0;
    PlantState plant_state_;
    Timestamp next_time_{};   // start of the next step the twin will execute
    std::optional<Model> model_;
    std::vector<HistorianRecord> history_;
    std::vector<WeatherRecord> weather_;
    std::optional<Recommendation> latest_;
    struct ActiveSchedule {
        std::int64_t run_id = 0;
        Schedule schedule;
        std::vector<std::optional<OperatingPoint>> op_points;
        Timestamp start{};
    };
    std::optional<ActiveSchedule> active_;
    std::vector<TrajectoryPoint> trajectory_;
    std::unique_ptr<RunStore> runs_;
    std::mt19937_64 inflow_rng_;
    std::mt19937_64 sensor_rng_;
    std::uint64_t next_listener_ = 1;
    std::vector<std::pair<std::uint64_t, Listener>> listeners_;
};

/// Binds the HTTP routes of a TwinService onto a cpp-httplib server.
class HttpServer {
public:
    explicit HttpServer(TwinService& service);
    ~HttpServer();

    /// Binds to host:port (port 0 picks a free one) and returns the port.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void listen();
    void stop();

private:
    struct Subscriber;
    TwinService& service_;
    std::unique_ptr<httplib::Server> server_;
    std::mutex subscribers_mutex_;
    std::vector<std::shared_ptr<Subscriber>> subscribers_;
    bool stopping_ = false;
};

} // namespace hydrotwin
