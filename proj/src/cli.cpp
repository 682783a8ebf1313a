#include "hydrotwin/cli.hpp"

#include "hydrotwin/config.hpp"
#include "hydrotwin/errors.hpp"
#include "hydrotwin/serialization.hpp"
#include "hydrotwin/service.hpp"
#include "hydrotwin/timeutil.hpp"
#include "hydrotwin/workflows.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace hydrotwin {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text) || !out.flush()) fail(ErrorCode::io, "cannot write " + path.string());
}

std::vector<HistorianRecord> read_historian(const std::string& path, std::ostream& err) {
    if (path.empty()) fail(ErrorCode::validation, "no historian data given (--data or historian_path in the config)");
    auto parsed = parse_historian_csv(read_file(path));
    for (const auto& e : parsed.errors) err << path << ":" << e.line << ": skipped: " << e.message << "\n";
    return std::move(parsed.records);
}

std::vector<WeatherRecord> read_weather(const std::string& path, std::ostream& err) {
    if (path.empty()) return {};
    auto parsed = parse_weather_csv(read_file(path));
    for (const auto& e : parsed.errors) err << path << ":" << e.line << ": skipped: " << e.message << "\n";
    for (const auto& w : parsed.warnings) err << path << ":" << w.line << ": warning: " << w.message << "\n";
    return std::move(parsed.records);
}

Model read_model(const std::string& path) {
    if (path.empty() || !std::filesystem::exists(path))
        fail(ErrorCode::untrained, "model not trained" + (path.empty() ? std::string() : " (no model at " + path + ")"));
    return from_document<Model>(load_document(path), "model");
}

Json issues_json(const std::vector<RowIssue>& issues) {
    Json out = Json::array();
    for (const auto& e : issues) out.push_back({{"line", e.line}, {"message", e.message}});
    return out;
}

std::string episode_name(const char* stem, int episode) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%03d.csv", stem, episode);
    return buf;
}

void print_table(std::ostream& out, const ClosedLoopReport& report) {
    auto row = [&](const char* name, const PolicyMetrics& m) {
        out << std::left << std::setw(10) << name << std::right << std::fixed << std::setprecision(4) << std::setw(12)
            << m.rms_deviation << std::setw(10) << m.switches << std::setw(14) << m.objective << std::setw(14)
            << m.total_energy << std::setw(12) << (m.min_quality ? *m.min_quality : 0.0) << std::setw(10)
            << m.overflow_steps << std::setw(10) << m.underflow_steps << "\n";
    };
    out << std::left << std::setw(10) << "policy" << std::right << std::setw(12) << "rms_dev" << std::setw(10)
        << "switches" << std::setw(14) << "objective" << std::setw(14) << "energy_kwh" << std::setw(12) << "min_q"
        << std::setw(10) << "overflow" << std::setw(10) << "underflow" << "\n";
    row("plan", report.plan);
    row("baseline", report.baseline);
    out << "rms ratio (plan / baseline): " << std::setprecision(4) << report.rms_ratio() << "\n";
}

// SIGINT and SIGTERM are blocked in every thread and collected by one waiter,
// which can then stop the server outside signal context.
int serve(const SystemConfig& config, const std::string& host, int port, std::ostream& out, std::ostream& err) {
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    TwinService service(config);
    if (!config.model_path.empty() && std::filesystem::exists(config.model_path))
        service.set_model(read_model(config.model_path));
    else
        err << "no trained model loaded; /plan and /whatif answer 409 until one is configured\n";
    if (!config.historian_path.empty())
        service.load_history(read_historian(config.historian_path, err), read_weather(config.weather_path, err));

    HttpServer server(service);
    const int bound = server.bind(host, port);
    out << Json{{"listening", host + ":" + std::to_string(bound)}}.dump() << std::endl;

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });
    server.listen();
    // Wake the waiter if the server stopped for any other reason.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Digital twin and decision support for a biosolids thermal-hydrolysis train", "hydrotwin"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "System config JSON (default: $HYDROTWIN_CONFIG)");

    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    std::string host = "0.0.0.0";
    int port = -1;
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--port", port, "Port (default: $HYDROTWIN_PORT or 8080)")->check(CLI::Range(0, 65535));

    auto* simulate_cmd = app.add_subcommand("simulate", "Write synthetic historian and weather CSVs");
    int sim_episodes = 1;
    int sim_steps = 96;
    std::string sim_out = ".";
    std::optional<std::uint64_t> sim_seed;
    std::string sim_start;
    simulate_cmd->add_option("--episodes", sim_episodes, "Episode count")->required()->check(CLI::Range(1, 10000));
    simulate_cmd->add_option("--steps", sim_steps, "Steps per episode")->required()->check(CLI::Range(1, 1000000));
    simulate_cmd->add_option("--out", sim_out, "Output directory");
    simulate_cmd->add_option("--seed", sim_seed, "Base seed (default: sim_seed from the config)");
    simulate_cmd->add_option("--start", sim_start, "First timestamp, RFC 3339 UTC (default: clock_start)");

    auto* train_cmd = app.add_subcommand("train", "Fit and select the energy/quality model");
    std::string train_data;
    std::string train_model;
    train_cmd->add_option("--data", train_data, "Historian CSV")->required();
    train_cmd->add_option("--model", train_model, "Where to write the model (default: model_path or model.json)");

    auto* plan_cmd = app.add_subcommand("plan", "Print a recommendation for the next horizon");
    int horizon = 0;
    std::string plan_model;
    std::string plan_data;
    std::string plan_weather;
    plan_cmd->add_option("--horizon", horizon, "Horizon in steps")->required();
    plan_cmd->add_option("--model", plan_model, "Model file (default: model_path)");
    plan_cmd->add_option("--data", plan_data, "Historian CSV (default: historian_path)");
    plan_cmd->add_option("--weather", plan_weather, "Weather CSV (default: weather_path)");

    auto* evaluate_cmd = app.add_subcommand("evaluate", "Compare the planner with the deadband baseline");
    int eval_episodes = 20;
    int eval_steps = 96;
    std::string eval_model;
    bool eval_table = false;
    evaluate_cmd->add_option("--episodes", eval_episodes, "Episode count")->required()->check(CLI::Range(1, 10000));
    evaluate_cmd->add_option("--steps", eval_steps, "Steps per episode")->check(CLI::Range(1, 100000));
    evaluate_cmd->add_option("--model", eval_model, "Model file (default: the noise-free plant formulas)");
    evaluate_cmd->add_flag("--table", eval_table, "Print a text table instead of JSON");

    auto* ingest_cmd = app.add_subcommand("ingest", "Validate a historian or weather CSV");
    std::string ingest_file;
    std::string ingest_out;
    bool ingest_weather = false;
    ingest_cmd->add_option("--file", ingest_file, "CSV file")->required();
    ingest_cmd->add_flag("--weather", ingest_weather, "The file is a daily weather CSV");
    ingest_cmd->add_option("--out", ingest_out, "Write the accepted rows, normalized, to this file");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
    }

    try {
        const SystemConfig config = config_path.empty() ? config_from_environment() : load_config(config_path);

        if (*serve_cmd) return serve(config, host, port >= 0 ? port : port_from_environment(), out, err);

        if (*simulate_cmd) {
            Timestamp start = config.clock_start;
            if (!sim_start.empty()) {
                const auto ts = parse_rfc3339(sim_start);
                if (!ts) fail(ErrorCode::validation, "--start must be an RFC 3339 UTC time");
                start = *ts;
            }
            const std::uint64_t base = sim_seed.value_or(config.sim_seed);
            Json episodes = Json::array();
            for (int e = 0; e < sim_episodes; ++e) {
                const auto sim = simulate_operation(config, sim_steps, base + static_cast<std::uint64_t>(e), start);
                const auto hist = std::filesystem::path(sim_out) / episode_name("historian", e + 1);
                const auto weather = std::filesystem::path(sim_out) / episode_name("weather", e + 1);
                write_file(hist, format_historian_csv(sim.historian));
                write_file(weather, format_weather_csv(sim.weather));
                episodes.push_back({{"episode", e + 1},
                                    {"seed", base + static_cast<std::uint64_t>(e)},
                                    {"historian", hist.string()},
                                    {"weather", weather.string()},
                                    {"historian_rows", sim.historian.size()},
                                    {"weather_rows", sim.weather.size()}});
            }
            out << Json{{"episodes", std::move(episodes)}}.dump(2) << "\n";
            return 0;
        }

        if (*train_cmd) {
            const auto records = read_historian(train_data, err);
            const auto result = train_from_records(records, config);
            const std::string path =
                !train_model.empty() ? train_model : (!config.model_path.empty() ? config.model_path : "model.json");
            save_document(path, to_document("model", result.model));
            Json ranking = Json::array();
            for (const auto& c : result.ranking)
                ranking.push_back({{"name", c.name}, {"mean_rmse", c.mean_rmse}, {"output_rmse", c.output_rmse}});
            Json in_sample = Json::array();
            for (const auto& m : result.in_sample) in_sample.push_back(m);
            out << Json{{"model_path", path},
                        {"selected", result.ranking.front().name},
                        {"model_type", model_kind(result.model)},
                        {"rows", result.rows},
                        {"ranking", std::move(ranking)},
                        {"in_sample", std::move(in_sample)}}
                       .dump(2)
                << "\n";
            return 0;
        }

        if (*plan_cmd) {
            SystemConfig c = config;
            c.plan.horizon_steps = horizon;
            c.plan.validate();
            const Model model = read_model(plan_model.empty() ? config.model_path : plan_model);
            const auto history = read_historian(plan_data.empty() ? config.historian_path : plan_data, err);
            const auto weather = read_weather(plan_weather.empty() ? config.weather_path : plan_weather, err);
            const auto rec = plan_from_records(history, weather, model, c);
            out << dump_document(to_document("recommendation", rec));
            return 0;
        }

        if (*evaluate_cmd) {
            const Model model = eval_model.empty() ? Model(OracleModel{GroundTruthParams::noiseless()}) : read_model(eval_model);
            const auto report = evaluate_closed_loop(config.plant, model, closed_loop_config(config, eval_episodes, eval_steps));
            if (eval_table)
                print_table(out, report);
            else
                out << Json(report).dump(2) << "\n";
            return 0;
        }

        if (*ingest_cmd) {
            const std::string text = read_file(ingest_file);
            Json report;
            if (ingest_weather) {
                const auto parsed = parse_weather_csv(text);
                report = {{"accepted_rows", parsed.records.size()},
                          {"row_errors", issues_json(parsed.errors)},
                          {"warnings", issues_json(parsed.warnings)}};
                if (!ingest_out.empty()) write_file(ingest_out, format_weather_csv(parsed.records));
            } else {
                const auto parsed = parse_historian_csv(text);
                report = {{"accepted_rows", parsed.records.size()}, {"row_errors", issues_json(parsed.errors)}};
                if (!parsed.records.empty()) {
                    const auto grid = grid_covering(parsed.records, config.step_minutes);
                    const auto aligned = align_to_grid(parsed.records, grid, config.fill_limit);
                    Json missing = Json::object();
                    for (const auto& [tag, series] : aligned.series)
                        missing[std::string(to_string(tag))] = series.missing_steps.size();
                    Json absent = Json::array();
                    for (Tag t : aligned.absent_tags) absent.push_back(std::string(to_string(t)));
                    report["grid"] = grid;
                    report["missing_steps"] = std::move(missing);
                    report["absent_tags"] = std::move(absent);
                }
                if (!ingest_out.empty()) write_file(ingest_out, format_historian_csv(parsed.records));
            }
            out << report.dump(2) << "\n";
            return 0;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace hydrotwin
