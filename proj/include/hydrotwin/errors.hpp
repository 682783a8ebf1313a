#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hydrotwin {

/// Closed set of failure categories shared by every module. The service maps
/// each one onto an HTTP status and a machine-readable code string.
enum class ErrorCode {
    dimension,
    domain,
    insufficient_history,
    coverage,
    infeasible,
    size_guard,
    parse,
    incompatible_version,
    empty_dataset,
    not_found,
    conflict,
    validation,
    untrained,
    io,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace hydrotwin
