#pragma once

#include <string>

#include "tacla/llm_gateway.hpp"

namespace tacla {

/// Chat-completions style HTTP backend.
///
/// POST {base}/chat/completions  {model, messages:[{role, content}], temperature, max_tokens}
///   -> {choices:[{message:{content}, finish_reason}], usage}
/// POST {base}/embeddings        {model, input:[...]} -> {data:[{index, embedding}]}
///
/// The API key is read from the configured environment variable on every
/// call and never stored. Status mapping: 401/403 AuthError; 408, 409, 429
/// RateLimited; 5xx and connection failures TransportError; other 4xx
/// ProviderRefusal.
class HttpProvider : public ModelBackend {
public:
    explicit HttpProvider(ProviderConfig config);

    ChatResponse complete(const ChatRequest& request) override;
    std::vector<Embedding> embed(const std::vector<std::string>& texts,
                                 const std::string& model_id) override;

private:
    json post(const std::string& path, const json& body) const;

    ProviderConfig config_;
    std::string origin_;       // scheme://host[:port]
    std::string path_prefix_;  // e.g. "/v1"
};

/// Wire body for a chat request; the system prompt travels as the first
/// message with role "system".
json chat_request_body(const ChatRequest& request);
ChatResponse parse_chat_response(const json& body);

}  // namespace tacla
