#include "tacla/scripted_provider.hpp"

#include <cctype>
#include <cmath>

#include "tacla/hashing.hpp"

namespace tacla {

namespace {

constexpr double kWholeTextWeight = 0.15;

// Uniform in [-1, 1).
double unit_uniform(std::uint64_t& state) {
    return static_cast<double>(splitmix64(state) >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

}  // namespace

Embedding hash_embedding(std::string_view text, std::size_t dimension) {
    if (dimension == 0) throw Error(ErrorCode::InvalidArgument, "dimension must be positive");
    Embedding words(dimension, 0.0);
    std::string token;
    const auto flush = [&] {
        if (token.empty()) return;
        const std::uint64_t h = fnv1a64(token);
        words[h % dimension] += (h >> 63) != 0 ? -1.0 : 1.0;
        token.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c) != 0 || c >= 0x80) {
            token.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();

    Embedding whole(dimension);
    std::uint64_t state = fnv1a64(text, 0x84222325cbf29ce4ULL);
    for (double& x : whole) x = unit_uniform(state);

    const double word_norm = l2_norm(words);
    const double whole_norm = l2_norm(whole);
    Embedding out(dimension);
    for (std::size_t i = 0; i < dimension; ++i) {
        const double w = word_norm > 0.0 ? words[i] / word_norm : 0.0;
        out[i] = w + kWholeTextWeight * whole[i] / whole_norm;
    }
    return normalized(out);
}

ScriptEntry script_entry_from_json(const json& j) {
    if (j.is_string()) return ScriptEntry::reply(j.get<std::string>());
    if (j.is_object() && j.contains("fail")) {
        const auto kind = j.at("fail").get<std::string>();
        if (kind == "transient") return {ScriptEntry::Kind::TransientFailure, {}};
        if (kind == "rate_limit") return {ScriptEntry::Kind::RateLimited, {}};
        if (kind == "auth") return {ScriptEntry::Kind::AuthFailure, {}};
        if (kind == "refusal") return {ScriptEntry::Kind::Refusal, {}};
        throw Error(ErrorCode::SchemaViolation, "unknown failure kind '" + kind + "'");
    }
    throw Error(ErrorCode::SchemaViolation, "script entry must be a string or {\"fail\": ...}");
}

std::vector<ScriptEntry> load_script(const json& j) {
    const json& entries = j.is_object() ? j.at("chat") : j;
    if (!entries.is_array()) throw Error(ErrorCode::SchemaViolation, "script must be an array");
    std::vector<ScriptEntry> out;
    for (const json& e : entries) out.push_back(script_entry_from_json(e));
    return out;
}

ScriptedProvider::ScriptedProvider(std::vector<ScriptEntry> script, std::size_t embedding_dimension)
    : queue_(script.begin(), script.end()), dimension_(embedding_dimension) {}

void ScriptedProvider::push(ScriptEntry entry) {
    std::lock_guard lock(mutex_);
    queue_.push_back(std::move(entry));
}

void ScriptedProvider::set_fallback(Responder responder) {
    std::lock_guard lock(mutex_);
    fallback_ = std::move(responder);
}

ChatResponse ScriptedProvider::complete(const ChatRequest& request) {
    std::unique_lock lock(mutex_);
    log_.push_back(CallRecord{CallRecord::Kind::Chat, request, {}});
    if (queue_.empty()) {
        if (!fallback_) throw Error(ErrorCode::ScriptExhausted, "no scripted response left");
        Responder responder = fallback_;
        lock.unlock();
        return ChatResponse{responder(request), "stop", {}};
    }
    ScriptEntry entry = std::move(queue_.front());
    queue_.pop_front();
    switch (entry.kind) {
        case ScriptEntry::Kind::Text:
            return ChatResponse{std::move(entry.text), "stop", {}};
        case ScriptEntry::Kind::TransientFailure:
            throw Error(ErrorCode::TransportError, "scripted transient failure");
        case ScriptEntry::Kind::RateLimited:
            throw Error(ErrorCode::RateLimited, "scripted rate limit");
        case ScriptEntry::Kind::AuthFailure:
            throw Error(ErrorCode::AuthError, "scripted auth failure");
        case ScriptEntry::Kind::Refusal:
            throw Error(ErrorCode::ProviderRefusal, "scripted refusal");
    }
    throw Error(ErrorCode::ProviderRefusal, "unreachable script entry");
}

std::vector<Embedding> ScriptedProvider::embed(const std::vector<std::string>& texts,
                                               const std::string& /*model_id*/) {
    {
        std::lock_guard lock(mutex_);
        log_.push_back(CallRecord{CallRecord::Kind::Embed, {}, texts});
    }
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(hash_embedding(t, dimension_));
    return out;
}

std::vector<CallRecord> ScriptedProvider::call_log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

std::vector<ChatRequest> ScriptedProvider::chat_log() const {
    std::lock_guard lock(mutex_);
    std::vector<ChatRequest> out;
    for (const auto& r : log_) {
        if (r.kind == CallRecord::Kind::Chat) out.push_back(r.request);
    }
    return out;
}

std::size_t ScriptedProvider::remaining() const {
    std::lock_guard lock(mutex_);
    return queue_.size();
}

void ScriptedProvider::clear_log() {
    std::lock_guard lock(mutex_);
    log_.clear();
}

json chat_request_to_json(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back(json{{"role", m.role}, {"content", m.content}});
    }
    json j{{"model", request.model_id},
           {"system_prompt", request.system_prompt},
           {"messages", std::move(messages)},
           {"temperature", request.temperature},
           {"max_tokens", request.max_output_tokens}};
    j["agent_role"] = request.agent_role ? json(std::string(to_string(*request.agent_role)))
                                         : json(nullptr);
    return j;
}

json ScriptedProvider::chat_log_json() const {
    json out = json::array();
    for (const auto& request : chat_log()) out.push_back(chat_request_to_json(request));
    return out;
}

}  // namespace tacla
