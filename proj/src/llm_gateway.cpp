#include "tacla/llm_gateway.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <thread>
#include <utility>

namespace tacla {

namespace {

constexpr std::array<std::pair<AgentRole, std::string_view>, 6> kRoleNames{{
    {AgentRole::Orchestrator, "Orchestrator"},
    {AgentRole::ParentState, "ParentState"},
    {AgentRole::AdultState, "AdultState"},
    {AgentRole::ChildState, "ChildState"},
    {AgentRole::Feedback, "Feedback"},
    {AgentRole::Evaluator, "Evaluator"},
}};

void check_temperature(double t) {
    if (!(t >= 0.0 && t <= 2.0)) {
        throw Error(ErrorCode::InvalidArgument,
                    "temperature " + std::to_string(t) + " outside [0, 2]");
    }
}

}  // namespace

std::string_view to_string(AgentRole role) noexcept {
    for (const auto& [r, name] : kRoleNames) {
        if (r == role) return name;
    }
    return "?";
}

AgentRole parse_agent_role(std::string_view label) {
    for (const auto& [r, name] : kRoleNames) {
        if (name == label) return r;
    }
    throw Error(ErrorCode::SchemaViolation, "unknown agent role '" + std::string(label) + "'");
}

AgentRole role_for_state(EgoState state) noexcept {
    switch (state) {
        case EgoState::Parent: return AgentRole::ParentState;
        case EgoState::Adult: return AgentRole::AdultState;
        case EgoState::Child: return AgentRole::ChildState;
    }
    return AgentRole::AdultState;
}

void validate_request(const ChatRequest& request) {
    if (request.messages.empty()) {
        throw Error(ErrorCode::InvalidArgument, "chat request needs at least one message");
    }
    for (const ChatTurn& turn : request.messages) {
        if (turn.role != "system" && turn.role != "user" && turn.role != "assistant") {
            throw Error(ErrorCode::InvalidArgument, "bad message role '" + turn.role + "'");
        }
    }
    check_temperature(request.temperature);
    if (request.max_output_tokens <= 0) {
        throw Error(ErrorCode::InvalidArgument, "max_output_tokens must be positive");
    }
}

std::vector<std::string> validate_config(const ProviderConfig& config) {
    std::vector<std::string> violations;
    if (config.base_url.empty()) violations.emplace_back("base_url empty");
    if (config.chat_model_id.empty()) violations.emplace_back("chat_model_id empty");
    if (config.embed_model_id.empty()) violations.emplace_back("embed_model_id empty");
    if (config.max_retries < 0 || config.max_retries > kMaxRetriesCap) {
        violations.emplace_back("max_retries must be within [0, 5]");
    }
    if (config.timeout.count() <= 0) violations.emplace_back("timeout must be positive");
    return violations;
}

void to_json(json& j, const ProviderConfig& v) {
    j = json{{"base_url", v.base_url},
             {"api_key_env_var", v.api_key_env_var},
             {"chat_model_id", v.chat_model_id},
             {"embed_model_id", v.embed_model_id},
             {"eval_model_id", v.eval_model_id},
             {"timeout_ms", v.timeout.count()},
             {"max_retries", v.max_retries},
             {"backoff_base_ms", v.backoff_base.count()},
             {"backoff_cap_ms", v.backoff_cap.count()}};
}

void from_json(const json& j, ProviderConfig& v) {
    if (j.contains("api_key")) {
        throw Error(ErrorCode::SchemaViolation,
                    "API keys are read from the environment; name the variable in api_key_env_var");
    }
    const ProviderConfig d;
    v.base_url = j.value("base_url", d.base_url);
    v.api_key_env_var = j.value("api_key_env_var", d.api_key_env_var);
    v.chat_model_id = j.value("chat_model_id", d.chat_model_id);
    v.embed_model_id = j.value("embed_model_id", d.embed_model_id);
    v.eval_model_id = j.value("eval_model_id", v.chat_model_id);
    v.timeout = std::chrono::milliseconds(j.value("timeout_ms", d.timeout.count()));
    v.max_retries = j.value("max_retries", d.max_retries);
    v.backoff_base = std::chrono::milliseconds(j.value("backoff_base_ms", d.backoff_base.count()));
    v.backoff_cap = std::chrono::milliseconds(j.value("backoff_cap_ms", d.backoff_cap.count()));
}

RolePolicy::RolePolicy()
    : values_{{AgentRole::Orchestrator, 0.3}, {AgentRole::ParentState, 0.7},
              {AgentRole::AdultState, 0.3},   {AgentRole::ChildState, 0.7},
              {AgentRole::Feedback, 0.3},     {AgentRole::Evaluator, 0.0}} {}

double RolePolicy::temperature(AgentRole role) const { return values_.at(role); }

void RolePolicy::set(AgentRole role, double temperature) {
    check_temperature(temperature);
    values_[role] = temperature;
}

void to_json(json& j, const RolePolicy& v) {
    j = json::object();
    for (const auto& [role, t] : v.values()) j[std::string(to_string(role))] = t;
}

void from_json(const json& j, RolePolicy& v) {
    v = RolePolicy{};
    for (const auto& [key, value] : j.items()) v.set(parse_agent_role(key), value.get<double>());
}

std::chrono::milliseconds RetryPolicy::delay(int retry) const noexcept {
    const double scaled = static_cast<double>(base.count()) * std::pow(2.0, std::max(retry, 0));
    const double capped = std::min(scaled, static_cast<double>(cap.count()));
    return std::chrono::milliseconds(static_cast<std::chrono::milliseconds::rep>(capped));
}

Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

Gateway::Gateway(std::shared_ptr<ModelBackend> backend, ProviderConfig config, Sleeper sleeper)
    : backend_(std::move(backend)), config_(std::move(config)), sleeper_(std::move(sleeper)) {
    if (!backend_) throw Error(ErrorCode::InvalidArgument, "gateway needs a backend");
    const auto violations = validate_config(config_);
    if (!violations.empty()) throw Error(ErrorCode::InvalidArgument, violations.front());
    retry_ = RetryPolicy{config_.max_retries, config_.backoff_base, config_.backoff_cap};
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds) {};
}

template <class Call>
auto Gateway::with_retries(Call&& call) const -> decltype(call()) {
    for (int retry = 0;; ++retry) {
        try {
            return call();
        } catch (const Error& e) {
            if (!e.transient() || retry >= retry_.max_retries) throw;
            sleeper_(retry_.delay(retry));
        }
    }
}

ChatResponse Gateway::chat(ChatRequest request) const {
    if (request.model_id.empty()) request.model_id = config_.chat_model_id;
    validate_request(request);
    ChatResponse response = with_retries([&] { return backend_->complete(request); });
    if (response.finish_reason == "stop" && response.content.empty()) {
        throw Error(ErrorCode::ProviderRefusal, "empty completion");
    }
    return response;
}

std::vector<Embedding> Gateway::embed(const std::vector<std::string>& texts) const {
    if (texts.empty()) throw Error(ErrorCode::InvalidArgument, "embed needs at least one text");
    for (const auto& t : texts) {
        if (t.empty()) throw Error(ErrorCode::InvalidArgument, "embed text empty");
    }
    auto vectors = with_retries([&] { return backend_->embed(texts, config_.embed_model_id); });
    if (vectors.size() != texts.size()) {
        throw Error(ErrorCode::TransportError, "provider returned " +
                                                   std::to_string(vectors.size()) +
                                                   " embeddings for " +
                                                   std::to_string(texts.size()) + " texts");
    }
    for (auto& v : vectors) {
        if (v.size() != vectors.front().size()) {
            throw Error(ErrorCode::DimensionMismatch, "ragged embedding batch");
        }
        v = normalized(v);
    }
    return vectors;
}

Embedding Gateway::embed_one(const std::string& text) const {
    return std::move(embed({text}).front());
}

}  // namespace tacla
