#include "fdsad/error.hpp"

namespace fdsad {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidParameter: return "InvalidParameter";
        case ErrorCode::TooShort: return "TooShort";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::SingularJacobian: return "SingularJacobian";
        case ErrorCode::BoundaryHit: return "BoundaryHit";
        case ErrorCode::SingularCovariance: return "SingularCovariance";
        case ErrorCode::SingularInformation: return "SingularInformation";
        case ErrorCode::DomainViolation: return "DomainViolation";
        case ErrorCode::Degenerate: return "Degenerate";
        case ErrorCode::SingularTilt: return "SingularTilt";
        case ErrorCode::InfeasibleTilt: return "InfeasibleTilt";
        case ErrorCode::DegenerateProposal: return "DegenerateProposal";
        case ErrorCode::AllWeightsZero: return "AllWeightsZero";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::EmptySeries: return "EmptySeries";
        case ErrorCode::FormatError: return "FormatError";
        case ErrorCode::MissingYears: return "MissingYears";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

int exit_code_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::ConfigError:
        case ErrorCode::InvalidParameter:
            return 2;
        case ErrorCode::TooShort:
        case ErrorCode::ParseError:
        case ErrorCode::EmptySeries:
        case ErrorCode::FormatError:
        case ErrorCode::MissingYears:
            return 3;
        default:
            return 4;
    }
}

}  // namespace fdsad
