#pragma once

#include "hydrotwin/datastore.hpp"
#include "hydrotwin/decision.hpp"
#include "hydrotwin/learner.hpp"
#include "hydrotwin/scheduler.hpp"
#include "hydrotwin/twin.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace hydrotwin {

using Json = nlohmann::json;

inline constexpr int current_schema_version = 1;

// Structural converters, found by nlohmann through ADL. Readers throw
// Error(validation) on missing or mistyped fields.
void to_json(Json& j, const TimeGrid& v);
void from_json(const Json& j, TimeGrid& v);
void to_json(Json& j, const OperatingPoint& v);
void from_json(const Json& j, OperatingPoint& v);
void to_json(Json& j, const ReactorSpec& v);
void from_json(const Json& j, ReactorSpec& v);
void to_json(Json& j, const Plant& v);
void from_json(const Json& j, Plant& v);
void to_json(Json& j, const ReactorStatus& v);
void from_json(const Json& j, ReactorStatus& v);
void to_json(Json& j, const PlantState& v);
void from_json(const Json& j, PlantState& v);
void to_json(Json& j, const GroundTruthParams& v);
void from_json(const Json& j, GroundTruthParams& v);
void to_json(Json& j, const InflowGenerator& v);
void from_json(const Json& j, InflowGenerator& v);
void to_json(Json& j, const Schedule& v);
void from_json(const Json& j, Schedule& v);
void to_json(Json& j, const LevelBounds& v);
void from_json(const Json& j, LevelBounds& v);
void to_json(Json& j, const ScheduleProblem& v);
void from_json(const Json& j, ScheduleProblem& v);
void to_json(Json& j, const ScheduleSolution& v);
void from_json(const Json& j, ScheduleSolution& v);
void to_json(Json& j, const SolverOptions& v);
void from_json(const Json& j, SolverOptions& v);
void to_json(Json& j, const HysteresisPolicy& v);
void from_json(const Json& j, HysteresisPolicy& v);
void to_json(Json& j, const TrainConfig& v);
void from_json(const Json& j, TrainConfig& v);
void to_json(Json& j, const KnnConfig& v);
void from_json(const Json& j, KnnConfig& v);
void to_json(Json& j, const Model& v);
void from_json(const Json& j, Model& v);
void to_json(Json& j, const AxisRange& v);
void from_json(const Json& j, AxisRange& v);
void to_json(Json& j, const ScenarioGrid& v);
void from_json(const Json& j, ScenarioGrid& v);
void to_json(Json& j, const QualityPolicy& v);
void from_json(const Json& j, QualityPolicy& v);
void to_json(Json& j, const CandidateScenario& v);
void to_json(Json& j, const Recommendation& v);
void from_json(const Json& j, Recommendation& v);
void to_json(Json& j, const ScheduleEdit& v);
void from_json(const Json& j, ScheduleEdit& v);
void to_json(Json& j, const OperatorAction& v);
void from_json(const Json& j, OperatorAction& v);
void to_json(Json& j, const RunRecord& v);
void from_json(const Json& j, RunRecord& v);
void to_json(Json& j, const PolicyMetrics& v);
void to_json(Json& j, const ClosedLoopReport& v);
void to_json(Json& j, const OutputMetrics& v);

/// Adds schema_version and kind to an object body.
Json make_document(std::string_view kind, Json body);

/// Checks version and kind; returns the body without the envelope fields.
/// A different version is an incompatible_version error.
Json open_document(const Json& document, std::string_view kind);

Json parse_json(std::string_view text);

/// Two-space indented JSON followed by a newline.
std::string dump_document(const Json& document);

void save_document(const std::filesystem::path& path, const Json& document);
Json load_document(const std::filesystem::path& path);

template <class T>
Json to_document(std::string_view kind, const T& value) {
    return make_document(kind, Json(value));
}

template <class T>
T from_document(const Json& document, std::string_view kind) {
    return open_document(document, kind).get<T>();
}

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

} // namespace hydrotwin
