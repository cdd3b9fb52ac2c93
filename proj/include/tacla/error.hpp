#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tacla {

enum class ErrorCode {
    UnknownEgoState,
    InvalidArgument,
    DimensionMismatch,
    ZeroVector,
    DuplicateId,
    IoFailure,
    SchemaViolation,
    // Provider failures. TransportError and RateLimited are the retryable pair.
    TransportError,
    RateLimited,
    AuthError,
    ProviderRefusal,
    ScriptExhausted,
    ScheduleExhausted,
    WrongState,
    UnknownScenario,
    NotFound,
    MissingVector,
    EmptyCorpus,
    StructuredOutputFailure,
    EvaluationFailure,
    EmptyInput,
    BatchFailed,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library. The code is what callers branch on;
/// the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code),
          detail_(message) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix.
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

    /// Retryable by the gateway's backoff loop.
    [[nodiscard]] bool transient() const noexcept {
        return code_ == ErrorCode::TransportError || code_ == ErrorCode::RateLimited;
    }

    /// Any failure that originated in talking to a model provider.
    [[nodiscard]] bool from_provider() const noexcept {
        switch (code_) {
            case ErrorCode::TransportError:
            case ErrorCode::RateLimited:
            case ErrorCode::AuthError:
            case ErrorCode::ProviderRefusal:
            case ErrorCode::ScriptExhausted:
                return true;
            default:
                return false;
        }
    }

private:
    ErrorCode code_;
    std::string detail_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::UnknownEgoState: return "UnknownEgoState";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::TransportError: return "TransportError";
        case ErrorCode::RateLimited: return "RateLimited";
        case ErrorCode::AuthError: return "AuthError";
        case ErrorCode::ProviderRefusal: return "ProviderRefusal";
        case ErrorCode::ScriptExhausted: return "ScriptExhausted";
        case ErrorCode::ScheduleExhausted: return "ScheduleExhausted";
        case ErrorCode::WrongState: return "WrongState";
        case ErrorCode::UnknownScenario: return "UnknownScenario";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::MissingVector: return "MissingVector";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::StructuredOutputFailure: return "StructuredOutputFailure";
        case ErrorCode::EvaluationFailure: return "EvaluationFailure";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::BatchFailed: return "BatchFailed";
    }
    return "Unknown";
}

}  // namespace tacla
