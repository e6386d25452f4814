#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cellmetry {

enum class ErrorCode {
    AlreadyExists,
    InvalidMeta,
    DuplicateId,
    InvariantViolation,
    NoSuchDataset,
    OutOfRange,
    UnsupportedTiff,
    CorruptFile,
    NotBinary,
    EmptyBoundary,
    DimensionMismatch,
    MalformedXml,
    DanglingEdge,
    EmptyComponent,
    OutOfMemoryBudget,
    EmptyRegion,
    NothingSelected,
    MissingColumn,
    NoAnalysis,
    UnknownTarget,
    Io,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every domain failure surfaces as an Error carrying a stable code; the CLI
// prints it as `ERROR <code>: <message>`.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace cellmetry
