#include <doctest.h>

#include "hydrotwin/serialization.hpp"
#include "hydrotwin/service.hpp"

#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

using namespace hydrotwin;
namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path sample(const char* name) { return fs::path(HYDROTWIN_DATA_DIR) / "sample" / name; }

SystemConfig sample_config() { return load_config(sample("config.json")); }

void load_sample(TwinService& service) {
    service.set_model(from_document<Model>(load_document(sample("model.json")), "model"));
    service.load_history(parse_historian_csv(read_text(sample("historian.csv"))).records,
                         parse_weather_csv(read_text(sample("weather.csv"))).records);
}

// A service bound to an ephemeral loopback port for the lifetime of a test.
struct LiveServer {
    TwinService service;
    HttpServer http{service};
    int port = 0;
    std::thread thread;

    explicit LiveServer(SystemConfig config = {}) : service(std::move(config)) {}

    void start() {
        port = http.bind("127.0.0.1", 0);
        thread = std::thread([this] { http.listen(); });
    }
    ~LiveServer() {
        http.stop();
        if (thread.joinable()) thread.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(30, 0);
        return c;
    }
};

struct Reply {
    int status = 0;
    Json body;
};

Reply get(const LiveServer& s, const std::string& path) {
    auto res = s.client().Get(path);
    REQUIRE(res);
    return {res->status, Json::parse(res->body)};
}

Reply post(const LiveServer& s, const std::string& path, const std::string& body,
           const char* type = "application/json") {
    auto res = s.client().Post(path, body, type);
    REQUIRE(res);
    return {res->status, Json::parse(res->body)};
}

Reply post(const LiveServer& s, const std::string& path, const Json& body) { return post(s, path, body.dump()); }

void check_error(const Reply& r, int status, const std::string& code) {
    CHECK(r.status == status);
    REQUIRE(r.body.contains("error"));
    CHECK(r.body["error"]["code"] == code);
    CHECK(r.body["error"]["message"].is_string());
}

// Collects parsed SSE events until the predicate on the list says stop.
std::vector<Json> read_stream(const LiveServer& s, const std::function<bool(const std::vector<Json>&)>& done) {
    std::vector<Json> events;
    std::string buffer;
    auto c = s.client();
    c.Get("/api/v1/stream", [&](const char* data, std::size_t len) {
        buffer.append(data, len);
        for (auto end = buffer.find("\n\n"); end != std::string::npos; end = buffer.find("\n\n")) {
            std::istringstream block(buffer.substr(0, end));
            buffer.erase(0, end + 2);
            for (std::string line; std::getline(block, line);)
                if (line.rfind("data: ", 0) == 0) events.push_back(Json::parse(line.substr(6)));
        }
        return !done(events);
    });
    return events;
}

const char* historian_header = "timestamp,tag,value\n";

} // namespace

TEST_CASE("error categories map to HTTP statuses") {
    CHECK(api_error(ErrorCode::not_found, "x").status == 404);
    CHECK(api_error(ErrorCode::conflict, "x").status == 409);
    CHECK(api_error(ErrorCode::untrained, "x").status == 409);
    CHECK(api_error(ErrorCode::infeasible, "x").status == 422);
    CHECK(api_error(ErrorCode::insufficient_history, "x").status == 422);
    CHECK(api_error(ErrorCode::coverage, "x").status == 422);
    CHECK(api_error(ErrorCode::validation, "x").status == 400);
    CHECK(api_error(ErrorCode::domain, "x").status == 400);
    CHECK(api_error(ErrorCode::parse, "x").status == 400);
    CHECK(api_error(ErrorCode::io, "x").status == 500);
    const auto j = api_error(ErrorCode::infeasible, "no schedule").to_json();
    CHECK(j == Json{{"error", {{"code", "infeasible"}, {"message", "no schedule"}}}});
}

TEST_CASE("fresh service state") {
    LiveServer s;
    s.start();
    const auto r = get(s, "/api/v1/state");
    CHECK(r.status == 200);
    CHECK(r.body["state_version"] == 0);
    CHECK(r.body["latest_recommendation"].is_null());
    CHECK(r.body["active_schedule"].is_null());
    CHECK(r.body["model"]["trained"] == false);
    CHECK(r.body["plant_state"]["tank"]["level_pct"] == 50.0);
    CHECK(r.body["time"] == "2024-03-01T00:00:00Z");
}

TEST_CASE("historian ingestion over HTTP") {
    LiveServer s;
    s.start();
    const std::string good = std::string(historian_header) +
                             "2024-03-01T00:00:00Z,tank_level_pct,40\n"
                             "2024-03-01T00:00:00Z,inflow_m3,10\n"
                             "2024-03-01T00:00:00Z,reactor1_status,1\n";
    auto r = post(s, "/api/v1/ingest/historian", good, "text/csv");
    CHECK(r.status == 200);
    CHECK(r.body["accepted_rows"] == 3);
    CHECK(r.body["row_errors"].empty());
    CHECK(r.body["state_version"] == 1);

    const std::string mixed = std::string(historian_header) +
                              "2024-03-01T00:15:00Z,tank_level_pct,41\n"
                              "2024-03-01T00:15:00Z,inflow_m3,9\n"
                              "2024-03-01T00:15:00Z,bogus_tag,1\n";
    r = post(s, "/api/v1/ingest/historian", mixed, "text/csv");
    CHECK(r.body["accepted_rows"] == 2);
    REQUIRE(r.body["row_errors"].size() == 1);
    CHECK(r.body["row_errors"][0]["line"] == 4);

    check_error(post(s, "/api/v1/ingest/historian", "", "text/csv"), 400, "parse_error");
    check_error(post(s, "/api/v1/ingest/historian", "when,what\n1,2\n", "text/csv"), 400, "parse_error");
    CHECK(get(s, "/api/v1/state").body["history_rows"] == 5);
}

TEST_CASE("plan guards") {
    SUBCASE("untrained") {
        LiveServer s;
        s.start();
        check_error(post(s, "/api/v1/plan", Json{{"horizon_steps", 8}}), 409, "model_not_trained");
    }
    SUBCASE("no history") {
        LiveServer s;
        s.service.set_model(OracleModel{});
        s.start();
        check_error(post(s, "/api/v1/plan", Json{{"horizon_steps", 8}}), 422, "insufficient_history");
    }
    SUBCASE("validation") {
        LiveServer s(sample_config());
        load_sample(s.service);
        s.start();
        check_error(post(s, "/api/v1/plan", Json{{"horizon_steps", 0}}), 400, "validation_error");
        check_error(post(s, "/api/v1/plan", Json{{"horizon", 8}}), 400, "validation_error");
        check_error(post(s, "/api/v1/plan", std::string("{not json")), 400, "parse_error");
        CHECK(get(s, "/api/v1/state").body["state_version"] == 0);
    }
    SUBCASE("infeasible bounds") {
        LiveServer s(sample_config());
        load_sample(s.service);
        s.start();
        const Json body = {{"horizon_steps", 4}, {"level_bounds", {{"lo", 99.0}, {"hi", 100.0}}}};
        check_error(post(s, "/api/v1/plan", body), 422, "infeasible");
    }
}

TEST_CASE("plan on the sample data matches the committed golden recommendation") {
    LiveServer s(sample_config());
    load_sample(s.service);
    s.start();
    const auto golden = open_document(parse_json(read_text(sample("golden_recommendation.json"))), "recommendation");

    const auto first = post(s, "/api/v1/plan", Json{{"horizon_steps", 96}});
    REQUIRE(first.status == 200);
    CHECK(first.body["recommendation"] == golden);
    const auto second = post(s, "/api/v1/plan", Json{{"horizon_steps", 96}});
    CHECK(second.body["recommendation"] == first.body["recommendation"]);
    CHECK(second.body["run_id"] != first.body["run_id"]);
    CHECK(second.body["state_version"] == 2);

    auto runs = get(s, "/api/v1/runs");
    CHECK(runs.body["total"] == 2);
    REQUIRE(runs.body["runs"].size() == 2);
    CHECK(runs.body["runs"][0]["id"] == second.body["run_id"]);   // newest first
    runs = get(s, "/api/v1/runs?limit=1");
    CHECK(runs.body["runs"].size() == 1);
    runs = get(s, "/api/v1/runs?limit=1&offset=1");
    CHECK(runs.body["runs"][0]["id"] == first.body["run_id"]);
    check_error(get(s, "/api/v1/runs?limit=-1"), 400, "validation_error");

    const auto one = get(s, "/api/v1/runs/" + first.body["run_id"].dump());
    CHECK(one.status == 200);
    CHECK(one.body["recommendation"] == golden);
    CHECK(one.body["operator_action"].is_null());
    check_error(get(s, "/api/v1/runs/999"), 404, "not_found");
    check_error(get(s, "/api/v1/runs/abc"), 404, "not_found");
    CHECK(get(s, "/api/v1/state").body["latest_recommendation"] == golden);
}

TEST_CASE("plan overrides reach the planner") {
    LiveServer s(sample_config());
    load_sample(s.service);
    s.start();
    const auto base = post(s, "/api/v1/plan", Json{{"horizon_steps", 16}});
    const auto sticky = post(s, "/api/v1/plan", Json{{"horizon_steps", 16}, {"omega", 10.0}});
    REQUIRE(base.status == 200);
    REQUIRE(sticky.status == 200);
    CHECK(sticky.body["recommendation"]["omega"] == 10.0);
    CHECK(sticky.body["recommendation"]["switch_count"].get<int>() <=
          base.body["recommendation"]["switch_count"].get<int>());
    const Json grid = {{"temperature", {{"min", 170.0}, {"max", 170.0}, {"step", 1.0}}}};
    const auto pinned = post(s, "/api/v1/plan", Json{{"horizon_steps", 16}, {"grid", grid}});
    REQUIRE(pinned.status == 200);
    for (const auto& op : pinned.body["recommendation"]["op_points"])
        if (!op.is_null()) CHECK(op["temp_setpoint_c"] == 170.0);
}

TEST_CASE("what-if probes are read-only") {
    LiveServer s;
    s.start();
    const Json probe = {{"op_point", {{"temp_setpoint_c", 164.0}, {"dry_solids_frac", 0.20}, {"cycle_minutes", 40.0}}}};
    check_error(post(s, "/api/v1/whatif", probe), 409, "model_not_trained");

    s.service.set_model(OracleModel{});
    const auto a = post(s, "/api/v1/whatif", probe);
    REQUIRE(a.status == 200);
    CHECK(a.body["predicted_energy"].get<double>() == doctest::Approx(39.44).epsilon(1e-12));
    CHECK(a.body["feasible"] == true);
    const auto b = post(s, "/api/v1/whatif", probe);
    CHECK(a.body == b.body);
    CHECK(get(s, "/api/v1/state").body["state_version"] == 0);

    const Json cold = {{"op_point", {{"temp_setpoint_c", 150.0}, {"dry_solids_frac", 0.20}, {"cycle_minutes", 20.0}}}};
    CHECK(post(s, "/api/v1/whatif", cold).body["feasible"] == false);

    Json hot = probe;
    hot["op_point"]["temp_setpoint_c"] = 181.0;
    check_error(post(s, "/api/v1/whatif", hot), 400, "out_of_domain");
    check_error(post(s, "/api/v1/whatif", Json::object()), 400, "validation_error");
}

TEST_CASE("operator actions") {
    LiveServer s(sample_config());
    load_sample(s.service);
    s.start();
    const auto p1 = post(s, "/api/v1/plan", Json{{"horizon_steps", 8}});
    const auto p2 = post(s, "/api/v1/plan", Json{{"horizon_steps", 8}});
    const auto id1 = p1.body["run_id"].get<std::int64_t>();
    const auto id2 = p2.body["run_id"].get<std::int64_t>();

    check_error(post(s, "/api/v1/operator/action", Json{{"run_id", 99}, {"kind", "accept"}}), 404, "not_found");
    check_error(post(s, "/api/v1/operator/action", Json{{"run_id", id1}, {"kind", "approve"}}), 400, "validation_error");

    auto r = post(s, "/api/v1/operator/action", Json{{"run_id", id1}, {"kind", "accept"}, {"actor", "shift-a"}});
    REQUIRE(r.status == 200);
    CHECK(r.body["operator_action"]["kind"] == "accept");
    CHECK(r.body["operator_action"]["actor"] == "shift-a");
    auto state = get(s, "/api/v1/state").body;
    CHECK(state["active_schedule"]["run_id"] == id1);
    CHECK(state["active_schedule"]["schedule"] == p1.body["recommendation"]["schedule"]);
    check_error(post(s, "/api/v1/operator/action", Json{{"run_id", id1}, {"kind", "accept"}}), 409, "conflict");

    const bool was_on = p2.body["recommendation"]["schedule"][0][3].get<int>() == 1;
    const Json edit = {{"reactor", 0}, {"step", 3}, {"on", !was_on}};
    check_error(post(s, "/api/v1/operator/action",
                     Json{{"run_id", id2}, {"kind", "override"}, {"schedule_edits", {{{"reactor", 7}, {"step", 0}, {"on", true}}}}}),
                400, "validation_error");
    r = post(s, "/api/v1/operator/action", Json{{"run_id", id2}, {"kind", "override"}, {"schedule_edits", {edit}}});
    REQUIRE(r.status == 200);
    CHECK(r.body["operator_action"]["kind"] == "override");
    state = get(s, "/api/v1/state").body;
    const auto& proposed = p2.body["recommendation"]["schedule"];
    const auto& active = state["active_schedule"]["schedule"];
    int differing = 0;
    for (std::size_t i = 0; i < proposed.size(); ++i)
        for (std::size_t t = 0; t < proposed[i].size(); ++t)
            if (proposed[i][t] != active[i][t]) {
                ++differing;
                CHECK(i == 0);
                CHECK(t == 3);
            }
    CHECK(differing == 1);
    CHECK(get(s, "/api/v1/runs/" + std::to_string(id2)).body["operator_action"]["schedule_edits"][0] == edit);
}

TEST_CASE("simulation ticks") {
    LiveServer s(sample_config());
    load_sample(s.service);
    s.start();
    const double start_level = get(s, "/api/v1/state").body["plant_state"]["tank"]["level_pct"];

    SUBCASE("idle plant with no inflow keeps its level and warns") {
        const auto r = post(s, "/api/v1/sim/tick", Json{{"steps", 1}, {"inflows_pct", {0.0}}});
        REQUIRE(r.status == 200);
        CHECK(r.body["plant_state"]["tank"]["level_pct"] == start_level);
        CHECK(r.body["warnings"].size() == 1);
        CHECK(r.body["state_version"] == 1);
    }
    SUBCASE("inflow matching scheduled throughput keeps the level") {
        const auto p = post(s, "/api/v1/plan", Json{{"horizon_steps", 8}});
        post(s, "/api/v1/operator/action", Json{{"run_id", p.body["run_id"]}, {"kind", "accept"}});
        const auto plant = sample_config().plant;
        const auto& schedule = p.body["recommendation"]["schedule"];
        double throughput = 0.0;
        for (std::size_t r = 0; r < schedule.size(); ++r)
            if (schedule[r][0] == 1) throughput += plant.reactors[r].rate_pct_per_step;
        const auto r = post(s, "/api/v1/sim/tick", Json{{"steps", 1}, {"inflows_pct", {throughput}}});
        CHECK(r.body["plant_state"]["tank"]["level_pct"].get<double>() == doctest::Approx(start_level).epsilon(1e-12));
        CHECK(r.body["warnings"].empty());
        CHECK(r.body["steps"][0]["scheduled"] == true);
    }
    SUBCASE("version counts steps") {
        const auto before = get(s, "/api/v1/state").body["state_version"].get<int>();
        const auto r = post(s, "/api/v1/sim/tick", Json{{"steps", 3}});
        CHECK(r.body["state_version"] == before + 3);
        CHECK(r.body["steps"].size() == 3);
        CHECK(get(s, "/api/v1/state").body["history_rows"].get<std::size_t>() > 0);
    }
    SUBCASE("overflow is flagged") {
        const auto r = post(s, "/api/v1/sim/tick", Json{{"steps", 1}, {"inflows_pct", {80.0}}});
        CHECK(r.body["overflow"] == true);
        CHECK(r.body["steps"][0]["overflow"] == true);
        CHECK(r.body["plant_state"]["tank"]["level_pct"] == 100.0);
    }
    SUBCASE("bad requests") {
        check_error(post(s, "/api/v1/sim/tick", Json{{"steps", 0}}), 400, "validation_error");
        check_error(post(s, "/api/v1/sim/tick", Json{{"steps", 2}, {"inflows_pct", {1.0}}}), 400, "dimension_mismatch");
        check_error(post(s, "/api/v1/sim/tick", Json{{"steps", 1}, {"inflows_pct", {-1.0}}}), 400, "out_of_domain");
        CHECK(get(s, "/api/v1/state").body["state_version"] == 0);
    }
}

TEST_CASE("ticks feed the planner's history") {
    LiveServer s(sample_config());
    load_sample(s.service);
    s.start();
    const auto before = post(s, "/api/v1/plan", Json{{"horizon_steps", 8}});
    post(s, "/api/v1/sim/tick", Json{{"steps", 4}});
    const auto after = post(s, "/api/v1/plan", Json{{"horizon_steps", 8}});
    REQUIRE(after.status == 200);
    const auto start = [](const Reply& r) { return r.body["recommendation"]["grid"]["start"].get<std::string>(); };
    CHECK(start(before) == "2024-03-08T00:00:00Z");
    CHECK(start(after) == "2024-03-08T01:00:00Z");
}

TEST_CASE("unknown routes and read-only endpoints") {
    LiveServer s;
    s.start();
    check_error(get(s, "/api/v1/nothing"), 404, "not_found");
    get(s, "/api/v1/state");
    get(s, "/api/v1/runs");
    CHECK(get(s, "/api/v1/state").body["state_version"] == 0);
}

TEST_CASE("event stream") {
    LiveServer s(sample_config());
    load_sample(s.service);
    s.start();
    post(s, "/api/v1/sim/tick", Json{{"steps", 2}});

    std::atomic<bool> ticked{false};
    std::thread driver([&] {
        // Mutate only once the client is subscribed.
        while (true) {
            if (get(s, "/api/v1/state").body["state_version"] == 2 && ticked.load()) break;
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        post(s, "/api/v1/sim/tick", Json{{"steps", 1}, {"inflows_pct", {90.0}}});
        const auto p = post(s, "/api/v1/plan", Json{{"horizon_steps", 4}});
        post(s, "/api/v1/operator/action", Json{{"run_id", p.body["run_id"]}, {"kind", "accept"}});
    });
    const auto events = read_stream(s, [&](const std::vector<Json>& ev) {
        if (!ev.empty()) ticked = true;
        return !ev.empty() && ev.back()["type"] == "action";
    });
    driver.join();

    REQUIRE(events.size() == 5);
    CHECK(events[0]["type"] == "snapshot");
    CHECK(events[0]["state_version"] == 2);
    // History from the loaded data plus the two ticks.
    CHECK(events[0]["payload"]["trajectory"].size() == 672 + 2);
    CHECK(events[1]["type"] == "state");
    CHECK(events[1]["state_version"] == 3);
    CHECK(events[1]["payload"]["point"]["overflow"] == true);
    CHECK(events[2]["type"] == "violation");
    CHECK(events[2]["payload"]["kind"] == "overflow");
    CHECK(events[3]["type"] == "recommendation");
    CHECK(events[3]["state_version"] == 4);
    CHECK(events[4]["type"] == "action");
    CHECK(events[4]["state_version"] == 5);

    // A client joining later receives the current snapshot first.
    const auto late = read_stream(s, [](const std::vector<Json>& ev) { return !ev.empty(); });
    CHECK(late[0]["type"] == "snapshot");
    CHECK(late[0]["state_version"] == 5);
    CHECK(late[0]["payload"]["trajectory"].size() == 672 + 3);
    CHECK(late[0]["payload"]["active_schedule"]["run_id"] == events[4]["payload"]["run"]["id"]);
}

TEST_CASE("concurrent readers see monotonic versions") {
    LiveServer s(sample_config());
    load_sample(s.service);
    s.start();
    std::atomic<bool> done{false};
    std::atomic<int> violations{0};
    std::vector<std::thread> readers;
    for (int i = 0; i < 3; ++i)
        readers.emplace_back([&] {
            auto c = s.client();
            std::uint64_t last = 0;
            while (!done) {
                auto res = c.Get("/api/v1/state");
                if (!res) continue;
                const auto body = Json::parse(res->body);
                const auto v = body["state_version"].get<std::uint64_t>();
                if (v < last) ++violations;
                last = v;
            }
        });
    for (int i = 0; i < 20; ++i) post(s, "/api/v1/sim/tick", Json{{"steps", 1}});
    done = true;
    for (auto& t : readers) t.join();
    CHECK(violations == 0);
    CHECK(get(s, "/api/v1/state").body["state_version"] == 20);
}

TEST_CASE("run log survives a restart") {
    const auto dir = fs::temp_directory_path() / "hydrotwin_service_runs";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto config = sample_config();
    config.run_log_path = (dir / "runs.jsonl").string();
    std::int64_t id = 0;
    {
        TwinService service(config);
        load_sample(service);
        id = service.plan(Json{{"horizon_steps", 4}})["run_id"].get<std::int64_t>();
        service.operator_action(Json{{"run_id", id}, {"kind", "accept"}});
    }
    TwinService reopened(config);
    const auto run = reopened.run(id);
    CHECK(run["operator_action"]["kind"] == "accept");
    CHECK_THROWS_AS(reopened.operator_action(Json{{"run_id", id}, {"kind", "accept"}}), Error);
    fs::remove_all(dir);
}
