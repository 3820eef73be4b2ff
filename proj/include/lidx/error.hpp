#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lidx {

enum class ErrorCode {
    DomainTooSmall,
    InsufficientData,
    FormatError,
    PreconditionViolation,
    OracleTooLarge,
    OutOfRootRange,
    ClusterTooWide,
    AmbiguousCalibration,
    AmbiguousArm,
    BudgetExceeded,
};

const char *to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised while decoding a dataset file; remembers where decoding stopped.
class FormatError : public Error {
public:
    FormatError(const std::string &what, std::uint64_t offset)
        : Error(ErrorCode::FormatError, what + " at byte " + std::to_string(offset)), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

} // namespace lidx
