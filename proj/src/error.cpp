#include "lidx/error.hpp"

namespace lidx {

const char *to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::DomainTooSmall: return "DomainTooSmall";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::OracleTooLarge: return "OracleTooLarge";
    case ErrorCode::OutOfRootRange: return "OutOfRootRange";
    case ErrorCode::ClusterTooWide: return "ClusterTooWide";
    case ErrorCode::AmbiguousCalibration: return "AmbiguousCalibration";
    case ErrorCode::AmbiguousArm: return "AmbiguousArm";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    }
    return "Unknown";
}

} // namespace lidx
