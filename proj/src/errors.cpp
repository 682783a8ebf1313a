#include "hydrotwin/errors.hpp"

namespace hydrotwin {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::dimension: return "dimension_mismatch";
    case ErrorCode::domain: return "out_of_domain";
    case ErrorCode::insufficient_history: return "insufficient_history";
    case ErrorCode::coverage: return "coverage";
    case ErrorCode::infeasible: return "infeasible";
    case ErrorCode::size_guard: return "size_guard";
    case ErrorCode::parse: return "parse_error";
    case ErrorCode::incompatible_version: return "incompatible_version";
    case ErrorCode::empty_dataset: return "empty_dataset";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::validation: return "validation_error";
    case ErrorCode::untrained: return "model_not_trained";
    case ErrorCode::io: return "io_error";
    }
    return "unknown";
}

} // namespace hydrotwin
