#include "tacla/http_provider.hpp"

#include <algorithm>
#include <cstdlib>

#include "httplib.h"

namespace tacla {

namespace {

struct SplitUrl {
    std::string origin;
    std::string prefix;
};

SplitUrl split_base_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::InvalidArgument, "base_url needs a scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    SplitUrl out;
    out.origin = url.substr(0, path_start);
    out.prefix = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
    return out;
}

[[noreturn]] void throw_for_status(int status, const std::string& body) {
    const std::string detail = "HTTP " + std::to_string(status) + ": " + body.substr(0, 300);
    if (status == 401 || status == 403) throw Error(ErrorCode::AuthError, detail);
    if (status == 408 || status == 409 || status == 429) throw Error(ErrorCode::RateLimited, detail);
    if (status >= 500) throw Error(ErrorCode::TransportError, detail);
    throw Error(ErrorCode::ProviderRefusal, detail);
}

}  // namespace

json chat_request_body(const ChatRequest& request) {
    json messages = json::array();
    if (!request.system_prompt.empty()) {
        messages.push_back(json{{"role", "system"}, {"content", request.system_prompt}});
    }
    for (const auto& m : request.messages) {
        messages.push_back(json{{"role", m.role}, {"content", m.content}});
    }
    return json{{"model", request.model_id},
                {"messages", std::move(messages)},
                {"temperature", request.temperature},
                {"max_tokens", request.max_output_tokens}};
}

ChatResponse parse_chat_response(const json& body) {
    try {
        const json& choice = body.at("choices").at(0);
        ChatResponse out;
        const json& content = choice.at("message").at("content");
        out.content = content.is_null() ? "" : content.get<std::string>();
        out.finish_reason = choice.value("finish_reason", std::string("stop"));
        if (body.contains("usage") && body.at("usage").is_object()) {
            const json& usage = body.at("usage");
            out.usage.input_tokens = usage.value("input_tokens", usage.value("prompt_tokens", 0));
            out.usage.output_tokens =
                usage.value("output_tokens", usage.value("completion_tokens", 0));
        }
        if (out.finish_reason == "content_filter") {
            throw Error(ErrorCode::ProviderRefusal, "completion blocked by content filter");
        }
        return out;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::TransportError, std::string("malformed chat response: ") + e.what());
    }
}

HttpProvider::HttpProvider(ProviderConfig config) : config_(std::move(config)) {
    const SplitUrl parts = split_base_url(config_.base_url);
    origin_ = parts.origin;
    path_prefix_ = parts.prefix;
}

json HttpProvider::post(const std::string& path, const json& body) const {
    httplib::Client client(origin_);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto micros =
        std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env_var.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const auto result = client.Post(path_prefix_ + path, headers, body.dump(), "application/json");
    if (!result) {
        throw Error(ErrorCode::TransportError,
                    "request to " + origin_ + path_prefix_ + path + " failed: " +
                        httplib::to_string(result.error()));
    }
    if (result->status < 200 || result->status >= 300) throw_for_status(result->status, result->body);
    try {
        return json::parse(result->body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::TransportError, std::string("response is not JSON: ") + e.what());
    }
}

ChatResponse HttpProvider::complete(const ChatRequest& request) {
    return parse_chat_response(post("/chat/completions", chat_request_body(request)));
}

std::vector<Embedding> HttpProvider::embed(const std::vector<std::string>& texts,
                                           const std::string& model_id) {
    const json body = post("/embeddings", json{{"model", model_id}, {"input", texts}});
    try {
        std::vector<std::pair<std::size_t, Embedding>> indexed;
        std::size_t position = 0;
        for (const json& item : body.at("data")) {
            indexed.emplace_back(item.value("index", position++),
                                 item.at("embedding").get<Embedding>());
        }
        std::stable_sort(indexed.begin(), indexed.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<Embedding> out;
        for (auto& [_, v] : indexed) out.push_back(std::move(v));
        return out;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::TransportError,
                    std::string("malformed embedding response: ") + e.what());
    }
}

}  // namespace tacla
