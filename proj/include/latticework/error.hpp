#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lw {

enum class ErrorCode {
    EvidenceUnresolved,
    LayerIndexMismatch,
    MaxLayersExceeded,
    NodeNotFound,
    SchemaVersionUnsupported,
    CorruptPayload,
    InvalidLattice,
    InvalidInput,
    MissingThreadId,
    EmptyWindow,
    BackendError,
    TimeoutExceeded,
    SchemaInvalidAfterRetries,
    EndpointError,
    InfeasibleAfterRetry,
    InvalidStatus,
    EmptyNote,
    DuplicateTool,
    ToolError,
    SandboxViolation,
    BudgetExhausted,
    MissingPredecessor,
    NotFound,
    RatingOutOfRange,
    ConfigError,
    IoError,
};

std::string_view to_string(ErrorCode code);

// All engine failures carry a machine-readable code. `status` is only
// meaningful for EndpointError (the HTTP status the endpoint returned).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, int status = 0)
        : std::runtime_error(message), code_(code), status_(status) {}

    ErrorCode code() const noexcept { return code_; }
    int status() const noexcept { return status_; }

private:
    ErrorCode code_;
    int status_;
};

} // namespace lw
