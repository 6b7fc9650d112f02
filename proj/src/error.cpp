#include "latticework/error.hpp"

namespace lw {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::EvidenceUnresolved:        return "EvidenceUnresolved";
        case ErrorCode::LayerIndexMismatch:        return "LayerIndexMismatch";
        case ErrorCode::MaxLayersExceeded:         return "MaxLayersExceeded";
        case ErrorCode::NodeNotFound:              return "NodeNotFound";
        case ErrorCode::SchemaVersionUnsupported:  return "SchemaVersionUnsupported";
        case ErrorCode::CorruptPayload:            return "CorruptPayload";
        case ErrorCode::InvalidLattice:            return "InvalidLattice";
        case ErrorCode::InvalidInput:              return "InvalidInput";
        case ErrorCode::MissingThreadId:           return "MissingThreadId";
        case ErrorCode::EmptyWindow:               return "EmptyWindow";
        case ErrorCode::BackendError:              return "BackendError";
        case ErrorCode::TimeoutExceeded:           return "TimeoutExceeded";
        case ErrorCode::SchemaInvalidAfterRetries: return "SchemaInvalidAfterRetries";
        case ErrorCode::EndpointError:             return "EndpointError";
        case ErrorCode::InfeasibleAfterRetry:      return "InfeasibleAfterRetry";
        case ErrorCode::InvalidStatus:             return "InvalidStatus";
        case ErrorCode::EmptyNote:                 return "EmptyNote";
        case ErrorCode::DuplicateTool:             return "DuplicateTool";
        case ErrorCode::ToolError:                 return "ToolError";
        case ErrorCode::SandboxViolation:          return "SandboxViolation";
        case ErrorCode::BudgetExhausted:           return "BudgetExhausted";
        case ErrorCode::MissingPredecessor:        return "MissingPredecessor";
        case ErrorCode::NotFound:                  return "NotFound";
        case ErrorCode::RatingOutOfRange:          return "RatingOutOfRange";
        case ErrorCode::ConfigError:               return "ConfigError";
        case ErrorCode::IoError:                   return "IoError";
    }
    return "Unknown";
}

} // namespace lw
