#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fdsad {

/// Error categories surfaced by the library. The CLI maps each category to an
/// exit code (see `exit_code_for`).
enum class ErrorCode {
    InvalidParameter,
    TooShort,
    NonConvergence,
    SingularJacobian,
    BoundaryHit,
    SingularCovariance,
    SingularInformation,
    DomainViolation,
    Degenerate,
    SingularTilt,
    InfeasibleTilt,
    DegenerateProposal,
    AllWeightsZero,
    ParseError,
    EmptySeries,
    FormatError,
    MissingYears,
    ConfigError,
};

[[nodiscard]] std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Exit codes: 0 success; 2 config error; 3 data error; 4 numerical
/// non-convergence; 5 unreliable importance sampling (set by the caller).
[[nodiscard]] int exit_code_for(ErrorCode code) noexcept;

}  // namespace fdsad
