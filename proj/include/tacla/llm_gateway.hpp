#pragma once

// Provider-agnostic chat completion and embedding access.
//
// A ModelBackend talks to one provider and reports failures as tacla::Error;
// the Gateway adds request validation and retry with exponential backoff on
// top of any backend, so the retry policy is identical for live and scripted
// providers.

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tacla/ta_domain.hpp"
#include "tacla/vector_index.hpp"

namespace tacla {

enum class AgentRole { Orchestrator, ParentState, AdultState, ChildState, Feedback, Evaluator };

std::string_view to_string(AgentRole role) noexcept;
AgentRole parse_agent_role(std::string_view label);
AgentRole role_for_state(EgoState state) noexcept;

struct ChatTurn {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;

    bool operator==(const ChatTurn&) const = default;
};

struct ChatRequest {
    std::string system_prompt;
    std::vector<ChatTurn> messages;
    double temperature = 0.7;
    int max_output_tokens = 512;
    std::string model_id;
    // Which agent issued the request. Never sent on the wire; used for
    // logging and by scripted responders.
    std::optional<AgentRole> agent_role;

    bool operator==(const ChatRequest&) const = default;
};

/// Throws InvalidArgument when the request breaks its invariants.
void validate_request(const ChatRequest& request);

struct Usage {
    int input_tokens = 0;
    int output_tokens = 0;
};

struct ChatResponse {
    std::string content;
    std::string finish_reason = "stop";
    Usage usage;
};

inline constexpr int kMaxRetriesCap = 5;
inline constexpr int kDialogueMaxTokens = 512;
inline constexpr int kFeedbackMaxTokens = 1500;

struct ProviderConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key_env_var = "OPENAI_API_KEY";
    std::string chat_model_id = "gpt-4.1-mini";
    std::string embed_model_id = "text-embedding-3-small";
    // Judges may run on a different model than the simulation.
    std::string eval_model_id = "gpt-4.1-mini";
    std::chrono::milliseconds timeout{60000};
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{500};
    std::chrono::milliseconds backoff_cap{8000};
};

std::vector<std::string> validate_config(const ProviderConfig& config);

void to_json(json& j, const ProviderConfig& v);
void from_json(const json& j, ProviderConfig& v);

/// Sampling temperature per agent role.
class RolePolicy {
public:
    /// Orchestrator and Adult 0.3, Parent and Child 0.7, Feedback 0.3, Evaluator 0.0.
    RolePolicy();

    [[nodiscard]] double temperature(AgentRole role) const;
    /// Throws InvalidArgument outside [0, 2].
    void set(AgentRole role, double temperature);

    [[nodiscard]] const std::map<AgentRole, double>& values() const noexcept { return values_; }
    bool operator==(const RolePolicy&) const = default;

private:
    std::map<AgentRole, double> values_;
};

void to_json(json& j, const RolePolicy& v);
/// Missing roles keep their defaults.
void from_json(const json& j, RolePolicy& v);

class ModelBackend {
public:
    virtual ~ModelBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
    virtual std::vector<Embedding> embed(const std::vector<std::string>& texts,
                                         const std::string& model_id) = 0;
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds base{500};
    std::chrono::milliseconds cap{8000};

    /// base * 2^retry, clamped to cap. Non-decreasing in `retry`.
    [[nodiscard]] std::chrono::milliseconds delay(int retry) const noexcept;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Blocks the calling thread.
Sleeper real_sleeper();

class Gateway {
public:
    Gateway(std::shared_ptr<ModelBackend> backend, ProviderConfig config,
            Sleeper sleeper = real_sleeper());

    /// Validates, then calls the backend, retrying transient failures up to
    /// max_retries times. Fills model_id from config when empty.
    ChatResponse chat(ChatRequest request) const;

    /// One unit vector per text. Throws InvalidArgument on empty input or an
    /// empty string, DimensionMismatch if the provider returns ragged sizes.
    std::vector<Embedding> embed(const std::vector<std::string>& texts) const;
    Embedding embed_one(const std::string& text) const;

    [[nodiscard]] const ProviderConfig& config() const noexcept { return config_; }
    [[nodiscard]] ModelBackend& backend() const noexcept { return *backend_; }

private:
    template <class Call>
    auto with_retries(Call&& call) const -> decltype(call());

    std::shared_ptr<ModelBackend> backend_;
    ProviderConfig config_;
    RetryPolicy retry_;
    Sleeper sleeper_;
};

}  // namespace tacla
