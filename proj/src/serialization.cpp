#include "hydrotwin/serialization.hpp"

#include "hydrotwin/errors.hpp"
#include "hydrotwin/timeutil.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>

namespace hydrotwin {

namespace {

const Json& member(const Json& j, const char* key) {
    if (!j.is_object()) fail(ErrorCode::validation, std::string("expected an object holding '") + key + "'");
    const auto it = j.find(key);
    if (it == j.end()) fail(ErrorCode::validation, std::string("missing field '") + key + "'");
    return *it;
}

template <class T>
T field(const Json& j, const char* key) {
    const Json& v = member(j, key);
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::validation, std::string("field '") + key + "': " + e.what());
    }
}

// Config-style readers keep the default when a key is absent.
template <class T>
void optional_field(const Json& j, const char* key, T& out) {
    if (!j.is_object()) fail(ErrorCode::validation, "expected an object");
    if (j.contains(key)) out = field<T>(j, key);
}

Json time_json(Timestamp ts) { return format_rfc3339(ts); }

Timestamp time_from(const Json& j, const char* key) {
    const auto text = field<std::string>(j, key);
    const auto ts = parse_rfc3339(text);
    if (!ts) fail(ErrorCode::validation, std::string("field '") + key + "' is not an RFC 3339 UTC time");
    return *ts;
}

Json matrix_json(const Matrix& m) { return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}}; }

Matrix matrix_from(const Json& j) {
    const auto rows = field<std::size_t>(j, "rows");
    const auto cols = field<std::size_t>(j, "cols");
    const auto data = field<std::vector<double>>(j, "data");
    if (data.size() != rows * cols) fail(ErrorCode::dimension, "matrix data length does not match its shape");
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = data[r * cols + c];
    return m;
}

Json node_json(const RegressionTree& tree, int id) {
    const TreeNode& n = tree.nodes.at(static_cast<std::size_t>(id));
    if (n.is_leaf()) return {{"value", n.value}};
    return {{"feature", n.feature},
            {"threshold", n.threshold},
            {"value", n.value},
            {"left", node_json(tree, n.left)},
            {"right", node_json(tree, n.right)}};
}

// Children are allocated as a pair and then filled depth-first, which is
// exactly how the trainer numbers nodes, so a reload is structurally equal.
void node_from(const Json& j, RegressionTree& tree, std::size_t id) {
    TreeNode node;
    node.value = field<double>(j, "value");
    if (j.contains("feature")) {
        node.feature = field<int>(j, "feature");
        node.threshold = field<double>(j, "threshold");
        node.left = static_cast<int>(tree.nodes.size());
        node.right = node.left + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        tree.nodes[id] = node;
        node_from(member(j, "left"), tree, static_cast<std::size_t>(node.left));
        node_from(member(j, "right"), tree, static_cast<std::size_t>(node.right));
    } else {
        tree.nodes[id] = node;
    }
}

Json tree_json(const RegressionTree& tree) { return tree.nodes.empty() ? Json::object() : node_json(tree, 0); }

RegressionTree tree_from(const Json& j) {
    RegressionTree tree;
    tree.nodes.emplace_back();
    node_from(j, tree, 0);
    tree.validate();
    return tree;
}

template <class T>
Json optional_json(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

template <class T>
std::optional<T> optional_from(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return field<T>(j, key);
}

} // namespace

void to_json(Json& j, const TimeGrid& v) {
    j = {{"start", time_json(v.start)}, {"step_minutes", v.step_minutes}, {"horizon_steps", v.horizon_steps}};
}

void from_json(const Json& j, TimeGrid& v) {
    if (j.contains("start")) v.start = time_from(j, "start");
    optional_field(j, "step_minutes", v.step_minutes);
    optional_field(j, "horizon_steps", v.horizon_steps);
}

void to_json(Json& j, const OperatingPoint& v) {
    j = {{"temp_setpoint_c", v.temp_setpoint_c},
         {"dry_solids_frac", v.dry_solids_frac},
         {"cycle_minutes", v.cycle_minutes}};
}

void from_json(const Json& j, OperatingPoint& v) {
    v.temp_setpoint_c = field<double>(j, "temp_setpoint_c");
    v.dry_solids_frac = field<double>(j, "dry_solids_frac");
    v.cycle_minutes = field<double>(j, "cycle_minutes");
}

void to_json(Json& j, const ReactorSpec& v) {
    j = {{"id", v.id},
         {"rate_pct_per_step", v.rate_pct_per_step},
         {"min_up_steps", v.min_up_steps},
         {"min_down_steps", v.min_down_steps}};
}

void from_json(const Json& j, ReactorSpec& v) {
    v.id = field<int>(j, "id");
    optional_field(j, "rate_pct_per_step", v.rate_pct_per_step);
    optional_field(j, "min_up_steps", v.min_up_steps);
    optional_field(j, "min_down_steps", v.min_down_steps);
}

void to_json(Json& j, const Plant& v) { j = {{"capacity_m3", v.capacity_m3}, {"reactors", v.reactors}}; }

void from_json(const Json& j, Plant& v) {
    v = Plant::default_plant();
    optional_field(j, "capacity_m3", v.capacity_m3);
    optional_field(j, "reactors", v.reactors);
}

void to_json(Json& j, const ReactorStatus& v) {
    j = {{"running", v.running}, {"steps_in_state", v.steps_in_state}};
}

void from_json(const Json& j, ReactorStatus& v) {
    v.running = field<bool>(j, "running");
    v.steps_in_state = field<int>(j, "steps_in_state");
}

void to_json(Json& j, const PlantState& v) {
    j = {{"t_index", v.t_index},
         {"tank", {{"level_pct", v.tank.level_pct}, {"capacity_m3", v.tank.capacity_m3}}},
         {"reactors", v.reactors},
         {"op_point", v.op_point}};
}

void from_json(const Json& j, PlantState& v) {
    v.t_index = field<int>(j, "t_index");
    const Json& tank = member(j, "tank");
    v.tank.level_pct = field<double>(tank, "level_pct");
    v.tank.capacity_m3 = field<double>(tank, "capacity_m3");
    v.reactors = field<std::vector<ReactorStatus>>(j, "reactors");
    v.op_point = field<OperatingPoint>(j, "op_point");
}

void to_json(Json& j, const GroundTruthParams& v) {
    j = {{"e0", v.e0},
         {"a_temp", v.a_temp},
         {"a_cycle", v.a_cycle},
         {"a_ds", v.a_ds},
         {"a_interaction", v.a_interaction},
         {"b_temp", v.b_temp},
         {"b_cycle", v.b_cycle},
         {"noise_sigma_energy", v.noise_sigma_energy},
         {"noise_sigma_quality", v.noise_sigma_quality},
         {"seed", v.seed}};
}

void from_json(const Json& j, GroundTruthParams& v) {
    optional_field(j, "e0", v.e0);
    optional_field(j, "a_temp", v.a_temp);
    optional_field(j, "a_cycle", v.a_cycle);
    optional_field(j, "a_ds", v.a_ds);
    optional_field(j, "a_interaction", v.a_interaction);
    optional_field(j, "b_temp", v.b_temp);
    optional_field(j, "b_cycle", v.b_cycle);
    optional_field(j, "noise_sigma_energy", v.noise_sigma_energy);
    optional_field(j, "noise_sigma_quality", v.noise_sigma_quality);
    optional_field(j, "seed", v.seed);
}

void to_json(Json& j, const InflowGenerator& v) {
    j = {{"mean_pct", v.mean_pct},
         {"diurnal_amplitude_pct", v.diurnal_amplitude_pct},
         {"steps_per_day", v.steps_per_day},
         {"noise_sigma_pct", v.noise_sigma_pct},
         {"storm_probability", v.storm_probability},
         {"storm_pct", v.storm_pct}};
}

void from_json(const Json& j, InflowGenerator& v) {
    optional_field(j, "mean_pct", v.mean_pct);
    optional_field(j, "diurnal_amplitude_pct", v.diurnal_amplitude_pct);
    optional_field(j, "steps_per_day", v.steps_per_day);
    optional_field(j, "noise_sigma_pct", v.noise_sigma_pct);
    optional_field(j, "storm_probability", v.storm_probability);
    optional_field(j, "storm_pct", v.storm_pct);
}

void to_json(Json& j, const Schedule& v) {
    j = Json::array();
    for (int r = 0; r < v.reactors(); ++r) {
        Json row = Json::array();
        for (int t = 0; t < v.steps(); ++t) row.push_back(v.on(r, t) ? 1 : 0);
        j.push_back(std::move(row));
    }
}

void from_json(const Json& j, Schedule& v) {
    if (!j.is_array()) fail(ErrorCode::validation, "schedule must be an array of reactor rows");
    const int R = static_cast<int>(j.size());
    const int T = R == 0 ? 0 : static_cast<int>(j[0].size());
    v = Schedule(R, T);
    for (int r = 0; r < R; ++r) {
        const Json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.size()) != T)
            fail(ErrorCode::dimension, "schedule rows must all have the same length");
        for (int t = 0; t < T; ++t) {
            const Json& cell = row[static_cast<std::size_t>(t)];
            if (!cell.is_number_integer() || (cell.get<int>() != 0 && cell.get<int>() != 1))
                fail(ErrorCode::validation, "schedule cells must be 0 or 1");
            v.set(r, t, cell.get<int>() == 1);
        }
    }
}

void to_json(Json& j, const LevelBounds& v) { j = {{"lo", v.lo}, {"hi", v.hi}}; }

void from_json(const Json& j, LevelBounds& v) {
    v.lo = field<double>(j, "lo");
    v.hi = field<double>(j, "hi");
}

void to_json(Json& j, const ScheduleProblem& v) {
    j = {{"grid", v.grid},
         {"reactors", v.reactors},
         {"initial_status", v.initial_status},
         {"initial_steps_in_state", v.initial_steps_in_state},
         {"initial_level_pct", v.initial_level_pct},
         {"target_level_pct", v.target_level_pct},
         {"inflow_forecast_pct", v.inflow_forecast_pct},
         {"omega", v.omega},
         {"level_bounds", optional_json(v.level_bounds)}};
}

void from_json(const Json& j, ScheduleProblem& v) {
    v.grid = field<TimeGrid>(j, "grid");
    v.reactors = field<std::vector<ReactorSpec>>(j, "reactors");
    v.initial_status = field<std::vector<bool>>(j, "initial_status");
    optional_field(j, "initial_steps_in_state", v.initial_steps_in_state);
    v.initial_level_pct = field<double>(j, "initial_level_pct");
    v.target_level_pct = field<double>(j, "target_level_pct");
    v.inflow_forecast_pct = field<std::vector<double>>(j, "inflow_forecast_pct");
    v.omega = field<double>(j, "omega");
    v.level_bounds = optional_from<LevelBounds>(j, "level_bounds");
}

void to_json(Json& j, const ScheduleSolution& v) {
    j = {{"schedule", v.schedule},
         {"objective", v.objective},
         {"deviation_sum", v.deviation_sum},
         {"switch_count", v.switch_count},
         {"omega_used", v.omega_used},
         {"optimal", v.optimal},
         {"nodes_explored", v.nodes_explored},
         {"levels", v.levels}};
}

void from_json(const Json& j, ScheduleSolution& v) {
    v.schedule = field<Schedule>(j, "schedule");
    v.objective = field<double>(j, "objective");
    v.deviation_sum = field<double>(j, "deviation_sum");
    v.switch_count = field<int>(j, "switch_count");
    v.omega_used = field<double>(j, "omega_used");
    v.optimal = field<bool>(j, "optimal");
    v.nodes_explored = field<std::int64_t>(j, "nodes_explored");
    v.levels = field<std::vector<double>>(j, "levels");
}

void to_json(Json& j, const SolverOptions& v) {
    j = {{"max_decision_vars", v.max_decision_vars},
         {"node_budget", optional_json(v.node_budget)},
         {"beam_width", v.beam_width}};
}

void from_json(const Json& j, SolverOptions& v) {
    optional_field(j, "max_decision_vars", v.max_decision_vars);
    if (j.contains("node_budget")) v.node_budget = optional_from<std::int64_t>(j, "node_budget");
    optional_field(j, "beam_width", v.beam_width);
}

void to_json(Json& j, const HysteresisPolicy& v) {
    j = {{"on_above_pct", v.on_above_pct}, {"off_below_pct", v.off_below_pct}};
}

void from_json(const Json& j, HysteresisPolicy& v) {
    optional_field(j, "on_above_pct", v.on_above_pct);
    optional_field(j, "off_below_pct", v.off_below_pct);
}

void to_json(Json& j, const TrainConfig& v) {
    j = {{"n_trees", v.n_trees},
         {"max_depth", v.max_depth},
         {"learning_rate", v.learning_rate},
         {"min_samples_leaf", v.min_samples_leaf},
         {"seed", v.seed}};
}

void from_json(const Json& j, TrainConfig& v) {
    optional_field(j, "n_trees", v.n_trees);
    optional_field(j, "max_depth", v.max_depth);
    optional_field(j, "learning_rate", v.learning_rate);
    optional_field(j, "min_samples_leaf", v.min_samples_leaf);
    optional_field(j, "seed", v.seed);
}

void to_json(Json& j, const KnnConfig& v) { j = {{"k", v.k}}; }

void from_json(const Json& j, KnnConfig& v) { optional_field(j, "k", v.k); }

void to_json(Json& j, const Model& v) {
    std::visit(
        [&j](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, GbtModel>) {
                Json outputs = Json::array();
                for (const auto& out : m.outputs) {
                    Json trees = Json::array();
                    for (const auto& t : out.trees) trees.push_back(tree_json(t));
                    outputs.push_back({{"init_value", out.init_value}, {"trees", std::move(trees)}});
                }
                j = {{"type", "gbt"},
                     {"config", m.config},
                     {"n_features", m.n_features},
                     {"feature_names", m.feature_names},
                     {"target_names", m.target_names},
                     {"outputs", std::move(outputs)}};
            } else if constexpr (std::is_same_v<M, KnnModel>) {
                j = {{"type", "knn"},
                     {"k", m.k},
                     {"mean", m.mean},
                     {"stddev", m.stddev},
                     {"standardized", matrix_json(m.standardized)},
                     {"targets", matrix_json(m.targets)},
                     {"feature_names", m.feature_names},
                     {"target_names", m.target_names}};
            } else {
                j = {{"type", "oracle"}, {"params", m.params}};
            }
        },
        v);
}

void from_json(const Json& j, Model& v) {
    const auto kind = field<std::string>(j, "type");
    if (kind == "gbt") {
        GbtModel m;
        m.config = field<TrainConfig>(j, "config");
        m.n_features = field<std::size_t>(j, "n_features");
        m.feature_names = field<std::vector<std::string>>(j, "feature_names");
        m.target_names = field<std::vector<std::string>>(j, "target_names");
        for (const auto& out : member(j, "outputs")) {
            GbtOutput o;
            o.init_value = field<double>(out, "init_value");
            for (const auto& t : member(out, "trees")) o.trees.push_back(tree_from(t));
            m.outputs.push_back(std::move(o));
        }
        v = std::move(m);
    } else if (kind == "knn") {
        KnnModel m;
        m.k = field<int>(j, "k");
        m.mean = field<std::vector<double>>(j, "mean");
        m.stddev = field<std::vector<double>>(j, "stddev");
        m.standardized = matrix_from(member(j, "standardized"));
        m.targets = matrix_from(member(j, "targets"));
        m.feature_names = field<std::vector<std::string>>(j, "feature_names");
        m.target_names = field<std::vector<std::string>>(j, "target_names");
        if (m.mean.size() != m.standardized.cols() || m.stddev.size() != m.standardized.cols() ||
            m.targets.rows() != m.standardized.rows())
            fail(ErrorCode::dimension, "knn model parts disagree in shape");
        v = std::move(m);
    } else if (kind == "oracle") {
        OracleModel m;
        m.params = field<GroundTruthParams>(j, "params");
        v = m;
    } else {
        fail(ErrorCode::validation, "unknown model kind '" + kind + "'");
    }
}

void to_json(Json& j, const AxisRange& v) { j = {{"min", v.min}, {"max", v.max}, {"step", v.step}}; }

void from_json(const Json& j, AxisRange& v) {
    v.min = field<double>(j, "min");
    v.max = field<double>(j, "max");
    v.step = field<double>(j, "step");
}

void to_json(Json& j, const ScenarioGrid& v) {
    j = {{"temperature", v.temperature}, {"dry_solids", v.dry_solids}, {"cycle", v.cycle}, {"cap", v.cap}};
}

void from_json(const Json& j, ScenarioGrid& v) {
    optional_field(j, "temperature", v.temperature);
    optional_field(j, "dry_solids", v.dry_solids);
    optional_field(j, "cycle", v.cycle);
    optional_field(j, "cap", v.cap);
}

void to_json(Json& j, const QualityPolicy& v) { j = {{"q_min", v.q_min}, {"margin", v.margin}}; }

void from_json(const Json& j, QualityPolicy& v) {
    optional_field(j, "q_min", v.q_min);
    optional_field(j, "margin", v.margin);
}

void to_json(Json& j, const CandidateScenario& v) {
    j = {{"op_point", v.op_point},
         {"predicted_energy", v.predicted_energy},
         {"predicted_quality", v.predicted_quality},
         {"feasible", v.feasible}};
}

void to_json(Json& j, const Recommendation& v) {
    Json ops = Json::array();
    for (const auto& op : v.op_points) ops.push_back(optional_json(op));
    j = {{"id", v.id},
         {"created_at", time_json(v.created_at)},
         {"grid", v.grid},
         {"schedule", v.schedule},
         {"op_points", std::move(ops)},
         {"inflow_forecast_pct", v.inflow_forecast_pct},
         {"predicted_levels", v.predicted_levels},
         {"predicted_total_energy", v.predicted_total_energy},
         {"min_predicted_quality", optional_json(v.min_predicted_quality)},
         {"objective", v.objective},
         {"switch_count", v.switch_count},
         {"omega", v.omega},
         {"flags",
          {{"quality_risk", v.flags.quality_risk},
           {"not_proven_optimal", v.flags.not_proven_optimal},
           {"level_bound_violation", v.flags.level_bound_violation}}},
         {"forecast_method", v.forecast_method},
         {"input_hash", v.input_hash}};
}

void from_json(const Json& j, Recommendation& v) {
    v.id = field<std::string>(j, "id");
    v.created_at = time_from(j, "created_at");
    v.grid = field<TimeGrid>(j, "grid");
    v.schedule = field<Schedule>(j, "schedule");
    v.op_points.clear();
    for (const auto& op : member(j, "op_points"))
        v.op_points.push_back(op.is_null() ? std::nullopt : std::optional(op.get<OperatingPoint>()));
    v.inflow_forecast_pct = field<std::vector<double>>(j, "inflow_forecast_pct");
    v.predicted_levels = field<std::vector<double>>(j, "predicted_levels");
    v.predicted_total_energy = field<double>(j, "predicted_total_energy");
    v.min_predicted_quality = optional_from<double>(j, "min_predicted_quality");
    v.objective = field<double>(j, "objective");
    v.switch_count = field<int>(j, "switch_count");
    v.omega = field<double>(j, "omega");
    const Json& flags = member(j, "flags");
    v.flags.quality_risk = field<bool>(flags, "quality_risk");
    v.flags.not_proven_optimal = field<bool>(flags, "not_proven_optimal");
    v.flags.level_bound_violation = field<bool>(flags, "level_bound_violation");
    v.forecast_method = field<std::string>(j, "forecast_method");
    v.input_hash = field<std::string>(j, "input_hash");
    if (static_cast<int>(v.op_points.size()) != v.schedule.steps())
        fail(ErrorCode::dimension, "op_points must have one entry per schedule step");
}

void to_json(Json& j, const ScheduleEdit& v) { j = {{"reactor", v.reactor}, {"step", v.step}, {"on", v.on}}; }

void from_json(const Json& j, ScheduleEdit& v) {
    v.reactor = field<int>(j, "reactor");
    v.step = field<int>(j, "step");
    v.on = field<bool>(j, "on");
}

void to_json(Json& j, const OperatorAction& v) {
    j = {{"kind", std::string(to_string(v.kind))},
         {"schedule_edits", v.schedule_edits},
         {"actor", v.actor},
         {"at", time_json(v.at)}};
}

void from_json(const Json& j, OperatorAction& v) {
    v.kind = action_kind_from_string(field<std::string>(j, "kind"));
    optional_field(j, "schedule_edits", v.schedule_edits);
    optional_field(j, "actor", v.actor);
    v.at = time_from(j, "at");
}

void to_json(Json& j, const RunRecord& v) {
    j = {{"id", v.id},
         {"created_at", time_json(v.created_at)},
         {"recommendation", v.recommendation},
         {"operator_action", optional_json(v.operator_action)}};
}

void from_json(const Json& j, RunRecord& v) {
    v.id = field<std::int64_t>(j, "id");
    v.created_at = time_from(j, "created_at");
    v.recommendation = field<Recommendation>(j, "recommendation");
    v.operator_action = optional_from<OperatorAction>(j, "operator_action");
}

void to_json(Json& j, const PolicyMetrics& v) {
    j = {{"rms_deviation", v.rms_deviation},
         {"switches", v.switches},
         {"objective", v.objective},
         {"total_energy_kwh", v.total_energy},
         {"min_quality", optional_json(v.min_quality)},
         {"overflow_steps", v.overflow_steps},
         {"underflow_steps", v.underflow_steps}};
}

void to_json(Json& j, const ClosedLoopReport& v) {
    Json episodes = Json::array();
    for (const auto& e : v.episodes)
        episodes.push_back({{"episode", e.episode},
                            {"initial_level_pct", e.initial_level_pct},
                            {"plan", e.plan},
                            {"baseline", e.baseline}});
    j = {{"episodes", std::move(episodes)},
         {"plan", v.plan},
         {"baseline", v.baseline},
         {"rms_ratio", v.rms_ratio()}};
}

void to_json(Json& j, const OutputMetrics& v) {
    j = {{"name", v.name}, {"rmse", v.rmse}, {"r2", optional_json(v.r2)}};
}

Json make_document(std::string_view kind, Json body) {
    if (!body.is_object()) fail(ErrorCode::validation, "document body must be a JSON object");
    body["schema_version"] = current_schema_version;
    body["kind"] = std::string(kind);
    return body;
}

Json open_document(const Json& document, std::string_view kind) {
    if (!document.is_object()) fail(ErrorCode::validation, "document must be a JSON object");
    const auto it = document.find("schema_version");
    if (it == document.end() || !it->is_number_integer())
        fail(ErrorCode::incompatible_version, "document has no integer schema_version");
    if (it->get<std::int64_t>() != current_schema_version)
        fail(ErrorCode::incompatible_version, "schema_version " + it->dump() + " is not supported (expected " +
                                                  std::to_string(current_schema_version) + ")");
    const auto k = document.find("kind");
    if (k == document.end() || !k->is_string() || k->get<std::string>() != kind)
        fail(ErrorCode::validation, "expected a '" + std::string(kind) + "' document");
    Json body = document;
    body.erase("schema_version");
    body.erase("kind");
    return body;
}

Json parse_json(std::string_view text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::parse, std::string("malformed JSON: ") + e.what());
    }
}

std::string dump_document(const Json& document) { return document.dump(2) + "\n"; }

void save_document(const std::filesystem::path& path, const Json& document) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot open " + path.string() + " for writing");
    out << dump_document(document);
    if (!out) fail(ErrorCode::io, "failed writing " + path.string());
}

Json load_document(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_json(buf.str());
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        fail(ErrorCode::io, "sha256 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

} // namespace hydrotwin
