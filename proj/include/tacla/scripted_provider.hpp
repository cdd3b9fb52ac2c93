#pragma once

// Deterministic stand-in for a model provider. Chat calls pop queued
// responses in order and every call is recorded for assertions; embeddings
// are derived from a stable hash of the text, independent of the chat queue.

#include <cstddef>
#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "tacla/llm_gateway.hpp"

namespace tacla {

inline constexpr std::size_t kScriptedEmbeddingDimension = 256;

/// Unit vector derived from the text: signed feature hashing of lower-cased
/// word tokens plus a small whole-text component, so equal texts map to equal
/// vectors, texts sharing words are similar, and distinct texts differ.
Embedding hash_embedding(std::string_view text,
                         std::size_t dimension = kScriptedEmbeddingDimension);

struct ScriptEntry {
    enum class Kind { Text, TransientFailure, RateLimited, AuthFailure, Refusal };

    Kind kind = Kind::Text;
    std::string text;

    static ScriptEntry reply(std::string text) { return {Kind::Text, std::move(text)}; }
    static ScriptEntry transient() { return {Kind::TransientFailure, {}}; }
};

/// Script file entries are either a string (reply) or {"fail": "transient" |
/// "rate_limit" | "auth" | "refusal"}.
ScriptEntry script_entry_from_json(const json& j);
std::vector<ScriptEntry> load_script(const json& j);

struct CallRecord {
    enum class Kind { Chat, Embed };

    Kind kind = Kind::Chat;
    ChatRequest request;             // Chat only
    std::vector<std::string> texts;  // Embed only
};

class ScriptedProvider : public ModelBackend {
public:
    /// Produces a reply when the queue is empty. Without one, an empty
    /// queue raises ScriptExhausted.
    using Responder = std::function<std::string(const ChatRequest&)>;

    explicit ScriptedProvider(std::vector<ScriptEntry> script = {},
                              std::size_t embedding_dimension = kScriptedEmbeddingDimension);

    void push(ScriptEntry entry);
    void push_reply(std::string text) { push(ScriptEntry::reply(std::move(text))); }
    void set_fallback(Responder responder);

    ChatResponse complete(const ChatRequest& request) override;
    std::vector<Embedding> embed(const std::vector<std::string>& texts,
                                 const std::string& model_id) override;

    [[nodiscard]] std::vector<CallRecord> call_log() const;
    /// Chat attempts only, in order, including failed ones.
    [[nodiscard]] std::vector<ChatRequest> chat_log() const;
    [[nodiscard]] std::size_t remaining() const;
    void clear_log();

    /// Chat requests as JSON for offline inspection. Contains no credentials
    /// because the scripted provider never holds any.
    [[nodiscard]] json chat_log_json() const;

private:
    mutable std::mutex mutex_;
    std::deque<ScriptEntry> queue_;
    Responder fallback_;
    std::size_t dimension_;
    std::vector<CallRecord> log_;
};

json chat_request_to_json(const ChatRequest& request);

}  // namespace tacla
