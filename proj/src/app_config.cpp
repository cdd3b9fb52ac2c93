#include "tacla/app_config.hpp"

#include "tacla/http_provider.hpp"
#include "tacla/io.hpp"
#include "tacla/offline_model.hpp"

namespace tacla {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
    std::filesystem::path p(value);
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

}  // namespace

AppConfig app_config_from_json(const json& j, const std::filesystem::path& base_dir) {
    try {
        if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, "config must be a JSON object");
        AppConfig c;
        if (j.contains("provider")) {
            const json& p = j.at("provider");
            p.get_to(c.provider.connection);
            c.provider.kind = p.value("kind", c.provider.kind);
            if (p.contains("script")) c.provider.script = resolve(base_dir, p.at("script").get<std::string>());
            c.provider.offline_fallback = p.value("offline_fallback", c.provider.offline_fallback);
        }
        if (j.contains("role_policy")) j.at("role_policy").get_to(c.role_policy);
        if (j.contains("scenarios_dir")) c.scenarios_dir = resolve(base_dir, j.at("scenarios_dir").get<std::string>());
        else c.scenarios_dir = resolve(base_dir, c.scenarios_dir.string());
        if (j.contains("corpus_dir")) c.corpus_dir = resolve(base_dir, j.at("corpus_dir").get<std::string>());
        else c.corpus_dir = resolve(base_dir, c.corpus_dir.string());
        if (j.contains("data_dir")) c.data_dir = resolve(base_dir, j.at("data_dir").get<std::string>());
        else c.data_dir = resolve(base_dir, c.data_dir.string());
        if (j.contains("static_dir")) c.static_dir = resolve(base_dir, j.at("static_dir").get<std::string>());
        c.bind_address = j.value("bind_address", c.bind_address);
        c.max_teacher_turns = j.value("max_teacher_turns", c.max_teacher_turns);
        c.feedback_k = j.value("feedback_k", c.feedback_k);
        if (c.max_teacher_turns < 1) throw Error(ErrorCode::SchemaViolation, "max_teacher_turns must be >= 1");
        if (c.feedback_k < 1) throw Error(ErrorCode::SchemaViolation, "feedback_k must be >= 1");
        if (const auto problems = validate_config(c.provider.connection); !problems.empty()) {
            throw Error(ErrorCode::SchemaViolation, "provider: " + problems.front());
        }
        parse_bind_address(c.bind_address);
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("config: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::SchemaViolation) throw;
        throw Error(ErrorCode::SchemaViolation, std::string("config: ") + e.what());
    }
}

json app_config_to_json(const AppConfig& c) {
    json provider = c.provider.connection;
    provider["kind"] = c.provider.kind;
    if (!c.provider.script.empty()) provider["script"] = c.provider.script.generic_string();
    provider["offline_fallback"] = c.provider.offline_fallback;
    json j{{"provider", std::move(provider)},
           {"role_policy", c.role_policy},
           {"scenarios_dir", c.scenarios_dir.generic_string()},
           {"corpus_dir", c.corpus_dir.generic_string()},
           {"data_dir", c.data_dir.generic_string()},
           {"bind_address", c.bind_address},
           {"max_teacher_turns", c.max_teacher_turns},
           {"feedback_k", c.feedback_k}};
    if (!c.static_dir.empty()) j["static_dir"] = c.static_dir.generic_string();
    return j;
}

AppConfig load_app_config(const std::filesystem::path& path) {
    return app_config_from_json(read_json_file(path), path.parent_path());
}

HostPort parse_bind_address(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
        throw Error(ErrorCode::InvalidArgument, "bind address must be host:port, got " + address);
    }
    HostPort out;
    out.host = address.substr(0, colon);
    try {
        std::size_t used = 0;
        out.port = std::stoi(address.substr(colon + 1), &used);
        if (used != address.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "bad port in bind address " + address);
    }
    if (out.port < 0 || out.port > 65535) {
        throw Error(ErrorCode::InvalidArgument, "port out of range in " + address);
    }
    return out;
}

ChatResponse RecordingBackend::complete(const ChatRequest& request) {
    {
        std::lock_guard lock(mutex_);
        requests_.push_back(request);
    }
    return inner_->complete(request);
}

std::vector<Embedding> RecordingBackend::embed(const std::vector<std::string>& texts,
                                               const std::string& model_id) {
    return inner_->embed(texts, model_id);
}

json RecordingBackend::log_json() const {
    std::lock_guard lock(mutex_);
    json out = json::array();
    for (const auto& r : requests_) out.push_back(chat_request_to_json(r));
    return out;
}

Backend make_backend(const ProviderSettings& settings) {
    Backend out;
    if (settings.kind == "openai") {
        out.backend = std::make_shared<HttpProvider>(settings.connection);
    } else if (settings.kind == "scripted") {
        std::vector<ScriptEntry> script;
        if (!settings.script.empty()) script = load_script(read_json_file(settings.script));
        out.scripted = std::make_shared<ScriptedProvider>(std::move(script));
        if (settings.offline_fallback) out.scripted->set_fallback(offline_reply);
        out.backend = out.scripted;
    } else {
        throw Error(ErrorCode::InvalidArgument,
                    "unknown provider kind \"" + settings.kind + "\" (expected openai or scripted)");
    }
    return out;
}

}  // namespace tacla
