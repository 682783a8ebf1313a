// Values cross the boundary as JSON text; the Python package turns them into
// dicts. Long-running calls release the GIL.
#include "hydrotwin/config.hpp"
#include "hydrotwin/serialization.hpp"
#include "hydrotwin/service.hpp"
#include "hydrotwin/workflows.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace hydrotwin;

namespace {

SystemConfig config_from(const std::string& text) {
    SystemConfig cfg;
    if (!text.empty()) {
        auto j = parse_json(text);
        if (j.is_object() && j.contains("schema_version")) j = open_document(j, "config");
        from_json(j, cfg);
    }
    cfg.validate();
    return cfg;
}

Model model_from(const std::string& text) {
    const auto j = parse_json(text);
    return j.contains("schema_version") ? from_document<Model>(j, "model") : j.get<Model>();
}

std::string simulate(const std::string& config, int steps, std::uint64_t seed, const std::string& start) {
    const auto cfg = config_from(config);
    Timestamp t0 = cfg.clock_start;
    if (!start.empty()) {
        const auto ts = parse_rfc3339(start);
        if (!ts) fail(ErrorCode::validation, "start must be an RFC 3339 UTC time");
        t0 = *ts;
    }
    py::gil_scoped_release release;
    const auto sim = simulate_operation(cfg, steps, seed, t0);
    return Json{{"historian_csv", format_historian_csv(sim.historian)},
                {"weather_csv", format_weather_csv(sim.weather)}}
        .dump();
}

std::string train(const std::string& historian_csv, const std::string& config) {
    const auto cfg = config_from(config);
    py::gil_scoped_release release;
    const auto records = parse_historian_csv(historian_csv).records;
    const auto result = train_from_records(records, cfg);
    Json ranking = Json::array();
    for (const auto& c : result.ranking)
        ranking.push_back({{"name", c.name}, {"mean_rmse", c.mean_rmse}, {"output_rmse", c.output_rmse}});
    return Json{{"model", to_document("model", result.model)}, {"ranking", ranking}, {"rows", result.rows}}.dump();
}

std::string plan_records(const std::string& historian_csv, const std::string& weather_csv, const std::string& model,
                         const std::string& config) {
    const auto cfg = config_from(config);
    const auto m = model_from(model);
    py::gil_scoped_release release;
    const auto history = parse_historian_csv(historian_csv).records;
    const auto weather = weather_csv.empty() ? std::vector<WeatherRecord>{} : parse_weather_csv(weather_csv).records;
    return to_document("recommendation", plan_from_records(history, weather, m, cfg)).dump();
}

std::string evaluate_loop(const std::string& config, int episodes, int steps, const std::string& model) {
    const auto cfg = config_from(config);
    const Model m = model.empty() ? Model(OracleModel{}) : model_from(model);
    py::gil_scoped_release release;
    return Json(evaluate_closed_loop(cfg.plant, m, closed_loop_config(cfg, episodes, steps))).dump();
}

std::string select_point(const std::string& model, const std::string& grid, const std::string& policy) {
    const auto m = model_from(model);
    ScenarioGrid g;
    if (!grid.empty()) from_json(parse_json(grid), g);
    QualityPolicy p;
    if (!policy.empty()) p = parse_json(policy).get<QualityPolicy>();
    const auto s = select_operating_point(m, g, p);
    return Json{{"chosen", s.chosen}, {"quality_risk", s.quality_risk}, {"candidates", s.ranked.size()}}.dump();
}

std::string solve(const std::string& problem, bool exhaustive) {
    const auto p = parse_json(problem).get<ScheduleProblem>();
    py::gil_scoped_release release;
    return Json(exhaustive ? brute_force(p) : solve_exact(p)).dump();
}

std::string parse_historian(const std::string& text) {
    const auto parsed = parse_historian_csv(text);
    Json errors = Json::array();
    for (const auto& e : parsed.errors) errors.push_back({{"line", e.line}, {"message", e.message}});
    return Json{{"accepted_rows", parsed.records.size()}, {"row_errors", errors}}.dump();
}

// Python-facing service: same operations as the HTTP routes, JSON in and out.
class PyService {
public:
    explicit PyService(const std::string& config) : service_(config_from(config)) {}

    void set_model(const std::string& model) { service_.set_model(model_from(model)); }
    void load_history(const std::string& historian_csv, const std::string& weather_csv) {
        service_.load_history(parse_historian_csv(historian_csv).records,
                              weather_csv.empty() ? std::vector<WeatherRecord>{}
                                                  : parse_weather_csv(weather_csv).records);
    }
    std::string state() const { return service_.state().dump(); }
    std::string plan(const std::string& request) {
        const auto req = parse_json(request);
        py::gil_scoped_release release;
        return service_.plan(req).dump();
    }
    std::string whatif(const std::string& request) const { return service_.whatif(parse_json(request)).dump(); }
    std::string operator_action(const std::string& request) {
        return service_.operator_action(parse_json(request)).dump();
    }
    std::string sim_tick(const std::string& request) { return service_.sim_tick(parse_json(request)).dump(); }
    std::string ingest_historian(const std::string& csv) { return service_.ingest_historian(csv).dump(); }
    std::string runs(std::size_t limit, std::size_t offset) const { return service_.runs(limit, offset).dump(); }
    std::string run(std::int64_t id) const { return service_.run(id).dump(); }

private:
    TwinService service_;
};

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Native core of the hydrotwin digital twin; JSON text in, JSON text out.";

    static py::exception<Error> error_type(m, "HydrotwinError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object code = py::str(std::string(to_string(e.code())));
            py::object exc = py::reinterpret_borrow<py::object>(error_type)(py::str(e.what()));
            exc.attr("code") = code;
            PyErr_SetObject(error_type.ptr(), exc.ptr());
        }
    });

    m.def("true_energy", [](double t, double ds, double c) { return true_energy({t, ds, c}); });
    m.def("true_quality", [](double t, double ds, double c) { return true_quality({t, ds, c}); });
    m.def("oracle_model", [] { return Json(Model(OracleModel{})).dump(); });
    m.def("default_config", [] { return Json(SystemConfig{}).dump(); });
    m.def("simulate", &simulate, py::arg("config"), py::arg("steps"), py::arg("seed"), py::arg("start") = "");
    m.def("train", &train, py::arg("historian_csv"), py::arg("config") = "");
    m.def("plan", &plan_records, py::arg("historian_csv"), py::arg("weather_csv"), py::arg("model"),
          py::arg("config") = "");
    m.def("evaluate", &evaluate_loop, py::arg("config"), py::arg("episodes"), py::arg("steps"), py::arg("model") = "");
    m.def("select_operating_point", &select_point, py::arg("model"), py::arg("grid") = "", py::arg("policy") = "");
    m.def("solve", &solve, py::arg("problem"), py::arg("exhaustive") = false);
    m.def("parse_historian", &parse_historian);

    py::class_<PyService>(m, "Service")
        .def(py::init<const std::string&>(), py::arg("config") = "")
        .def("set_model", &PyService::set_model)
        .def("load_history", &PyService::load_history, py::arg("historian_csv"), py::arg("weather_csv") = "")
        .def("state", &PyService::state)
        .def("plan", &PyService::plan)
        .def("whatif", &PyService::whatif)
        .def("operator_action", &PyService::operator_action)
        .def("sim_tick", &PyService::sim_tick)
        .def("ingest_historian", &PyService::ingest_historian)
        .def("runs", &PyService::runs, py::arg("limit") = 50, py::arg("offset") = 0)
        .def("run", &PyService::run);
}
