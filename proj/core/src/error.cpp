#include "cellmetry/error.hpp"

namespace cellmetry {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::AlreadyExists: return "AlreadyExists";
        case ErrorCode::InvalidMeta: return "InvalidMeta";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::NoSuchDataset: return "NoSuchDataset";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::UnsupportedTiff: return "UnsupportedTiff";
        case ErrorCode::CorruptFile: return "CorruptFile";
        case ErrorCode::NotBinary: return "NotBinary";
        case ErrorCode::EmptyBoundary: return "EmptyBoundary";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::MalformedXml: return "MalformedXml";
        case ErrorCode::DanglingEdge: return "DanglingEdge";
        case ErrorCode::EmptyComponent: return "EmptyComponent";
        case ErrorCode::OutOfMemoryBudget: return "OutOfMemoryBudget";
        case ErrorCode::EmptyRegion: return "EmptyRegion";
        case ErrorCode::NothingSelected: return "NothingSelected";
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::NoAnalysis: return "NoAnalysis";
        case ErrorCode::UnknownTarget: return "UnknownTarget";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace cellmetry
