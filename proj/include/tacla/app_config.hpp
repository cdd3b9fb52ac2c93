#pragma once

// Operator configuration shared by the CLI and the HTTP service.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

#include "tacla/llm_gateway.hpp"
#include "tacla/scripted_provider.hpp"

namespace tacla {

struct ProviderSettings {
    // "openai" for any OpenAI-compatible endpoint, "scripted" for the
    // deterministic provider.
    std::string kind = "openai";
    ProviderConfig connection;
    // Scripted only: queued replies, served before the offline model.
    std::filesystem::path script;
    bool offline_fallback = true;
};

struct AppConfig {
    ProviderSettings provider;
    RolePolicy role_policy;
    std::filesystem::path scenarios_dir = "scenarios";
    std::filesystem::path corpus_dir = "corpus";
    std::filesystem::path data_dir = "data";
    std::string bind_address = "127.0.0.1:8080";
    std::filesystem::path static_dir;
    int max_teacher_turns = 10;
    std::size_t feedback_k = 6;
};

/// Relative paths are resolved against `base_dir`. Throws SchemaViolation.
AppConfig app_config_from_json(const json& j, const std::filesystem::path& base_dir = {});
json app_config_to_json(const AppConfig& config);
/// Throws IoFailure or SchemaViolation.
AppConfig load_app_config(const std::filesystem::path& path);

struct HostPort {
    std::string host;
    int port = 0;
};
/// "host:port". Throws InvalidArgument.
HostPort parse_bind_address(const std::string& address);

struct Backend {
    std::shared_ptr<ModelBackend> backend;
    // Non-null when the backend is the scripted provider, for request logs.
    std::shared_ptr<ScriptedProvider> scripted;
};

/// Records every chat request passed to the wrapped backend, in order, for
/// request logs. Requests never carry credentials.
class RecordingBackend : public ModelBackend {
public:
    explicit RecordingBackend(std::shared_ptr<ModelBackend> inner) : inner_(std::move(inner)) {}

    ChatResponse complete(const ChatRequest& request) override;
    std::vector<Embedding> embed(const std::vector<std::string>& texts,
                                 const std::string& model_id) override;

    [[nodiscard]] json log_json() const;

private:
    std::shared_ptr<ModelBackend> inner_;
    mutable std::mutex mutex_;
    std::vector<ChatRequest> requests_;
};

/// Throws InvalidArgument for an unknown kind, IoFailure/SchemaViolation for a bad script.
Backend make_backend(const ProviderSettings& settings);

}  // namespace tacla
