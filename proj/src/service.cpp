#include "tacla/service.hpp"

#include <algorithm>
#include <ctime>
#include <random>

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "tacla/hashing.hpp"
#include "tacla/io.hpp"

namespace tacla {

namespace fs = std::filesystem;

namespace {

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string random_id() {
    static std::mutex mutex;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mutex);
    return hex64(rng()) + hex64(rng());
}

std::uint64_t random_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

bool has_teacher_turn(const Transcript& t) {
    return std::any_of(t.turns.begin(), t.turns.end(),
                       [](const Turn& turn) { return turn.message.role == Role::Teacher; });
}

const char* kind_for_status(int status) {
    switch (status) {
        case 404: return "NotFound";
        case 409: return "Conflict";
        case 422: return "ValidationError";
        case 502: return "UpstreamError";
        case 503: return "Unavailable";
        default: return "InternalError";
    }
}

}  // namespace

std::string_view to_string(SessionStatus status) noexcept {
    switch (status) {
        case SessionStatus::Active: return "active";
        case SessionStatus::AwaitingTeacher: return "awaiting_teacher";
        case SessionStatus::Finished: return "finished";
    }
    return "active";
}

SessionStatus parse_session_status(std::string_view label) {
    for (auto s : {SessionStatus::Active, SessionStatus::AwaitingTeacher, SessionStatus::Finished}) {
        if (label == to_string(s)) return s;
    }
    throw Error(ErrorCode::SchemaViolation, "unknown session status " + std::string(label));
}

json public_turn_json(const Turn& turn, const SpeakerNames& names, bool debug) {
    json j = turn.message;
    j["speaker_name"] = display_name(names, turn.message.speaker_id);
    if (debug && turn.annotation) j["annotation"] = *turn.annotation;
    return j;
}

struct SessionService::Entry {
    std::mutex mutex;
    std::string session_id;
    std::string scenario_id;
    std::string created_at;
    SessionStatus status = SessionStatus::Active;
    std::uint64_t seed = 0;
    int teacher_turns = 0;
    SpeakerNames names;
    // Persisted state; `session` is rebuilt from it on demand after a restart.
    Transcript transcript;
    std::size_t cursor = 0;
    std::optional<SimulationSession> session;
};

SessionService::SessionService(AppConfig config, std::shared_ptr<const Gateway> gateway)
    : config_(std::move(config)), gateway_(std::move(gateway)) {
    if (!gateway_) throw Error(ErrorCode::InvalidArgument, "service needs a gateway");
    load_scenarios();
    load_persisted();
}

SessionService::~SessionService() = default;

void SessionService::load_scenarios() {
    std::error_code ec;
    if (!fs::is_directory(config_.scenarios_dir, ec)) {
        spdlog::warn("scenarios directory {} does not exist", config_.scenarios_dir.string());
        return;
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(config_.scenarios_dir, ec)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        try {
            Scenario s = load_scenario(file);
            if (scenarios_.count(s.id)) {
                spdlog::warn("skipping {}: scenario id {} already loaded", file.string(), s.id);
                continue;
            }
            std::string id = s.id;
            scenarios_.emplace(std::move(id), std::move(s));
        } catch (const Error& e) {
            spdlog::warn("skipping malformed scenario {}: {}", file.string(), e.what());
        }
    }
}

json SessionService::list_scenarios() const {
    json out = json::array();
    for (const auto& [id, s] : scenarios_) {
        json students = json::array();
        for (const auto& p : s.personas) {
            students.push_back(json{{"id", p.id}, {"display_name", p.display_name}});
        }
        out.push_back(json{{"id", s.id},
                           {"title", s.title},
                           {"setting_description", s.setting_description},
                           {"teacher_name", s.teacher_name},
                           {"students", std::move(students)},
                           {"intervention_presets", s.intervention_presets}});
    }
    return out;
}

const Scenario& SessionService::scenario(const std::string& scenario_id) const {
    const auto it = scenarios_.find(scenario_id);
    if (it == scenarios_.end()) {
        throw Error(ErrorCode::UnknownScenario, "unknown scenario \"" + scenario_id + "\"");
    }
    return it->second;
}

const SeededMemories& SessionService::memories_for(const Scenario& s) {
    std::lock_guard lock(memories_mutex_);
    auto it = memories_.find(s.id);
    if (it == memories_.end()) it = memories_.emplace(s.id, seed_memories(s, *gateway_)).first;
    return it->second;
}

const CorpusIndex& SessionService::corpus() {
    std::lock_guard lock(corpus_mutex_);
    if (corpus_) return *corpus_;
    const fs::path index_path = config_.data_dir / "corpus_index.json";
    std::optional<CorpusIndex> previous;
    std::error_code ec;
    if (fs::exists(index_path, ec)) {
        try {
            previous = load_corpus(index_path);
        } catch (const Error& e) {
            spdlog::warn("ignoring unreadable corpus index {}: {}", index_path.string(), e.what());
        }
    }
    CorpusIndex fresh;
    try {
        fresh = ingest_corpus({config_.corpus_dir}, *gateway_, {}, previous ? &*previous : nullptr);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DimensionMismatch || !previous) throw;
        fresh = ingest_corpus({config_.corpus_dir}, *gateway_);
    }
    save_corpus(fresh, index_path);
    corpus_ = std::move(fresh);
    return *corpus_;
}

SessionOptions SessionService::session_options(std::uint64_t seed) const {
    SessionOptions o;
    o.seed = seed;
    o.cyclic = true;
    return o;
}

SimulationSession& SessionService::live_session(Entry& entry) {
    if (!entry.session) {
        const Scenario& s = scenario(entry.scenario_id);
        SimulationSession session =
            make_session(s, memories_for(s), config_.role_policy, session_options(entry.seed));
        session.restore(entry.transcript, entry.cursor);
        entry.session.emplace(std::move(session));
    }
    return *entry.session;
}

fs::path SessionService::session_path(const std::string& session_id) const {
    return config_.data_dir / "sessions" / (session_id + ".json");
}

void SessionService::persist(const Entry& e) const {
    const json j{{"session_id", e.session_id},
                 {"scenario_id", e.scenario_id},
                 {"created_at", e.created_at},
                 {"status", to_string(e.status)},
                 {"seed", e.seed},
                 {"teacher_turns", e.teacher_turns},
                 {"cursor", e.cursor},
                 {"speaker_names", e.names},
                 {"transcript", e.transcript}};
    write_file_atomic(session_path(e.session_id), dump_json(j));
}

void SessionService::load_persisted() {
    const fs::path dir = config_.data_dir / "sessions";
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) return;
    for (const auto& file : fs::directory_iterator(dir, ec)) {
        if (!file.is_regular_file() || file.path().extension() != ".json") continue;
        try {
            const json j = read_json_file(file.path());
            auto entry = std::make_shared<Entry>();
            entry->session_id = j.at("session_id").get<std::string>();
            entry->scenario_id = j.at("scenario_id").get<std::string>();
            entry->created_at = j.value("created_at", "");
            entry->status = parse_session_status(j.at("status").get<std::string>());
            entry->seed = j.at("seed").get<std::uint64_t>();
            entry->teacher_turns = j.at("teacher_turns").get<int>();
            entry->cursor = j.at("cursor").get<std::size_t>();
            entry->names = j.at("speaker_names").get<SpeakerNames>();
            j.at("transcript").get_to(entry->transcript);
            if (const auto v = validate_transcript(entry->transcript); !v.empty()) {
                throw Error(ErrorCode::SchemaViolation, v.front());
            }
            if (!scenarios_.count(entry->scenario_id)) {
                throw Error(ErrorCode::UnknownScenario, "scenario " + entry->scenario_id + " is gone");
            }
            // A crash mid-request leaves the last committed state on disk.
            if (entry->status == SessionStatus::Active) entry->status = SessionStatus::AwaitingTeacher;
            sessions_.emplace(entry->session_id, std::move(entry));
        } catch (const std::exception& e) {
            spdlog::warn("skipping session file {}: {}", file.path().string(), e.what());
        }
    }
    if (!sessions_.empty()) spdlog::info("restored {} session(s)", sessions_.size());
}

std::shared_ptr<SessionService::Entry> SessionService::find(const std::string& session_id) const {
    std::lock_guard lock(sessions_mutex_);
    const auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "no session " + session_id);
    return it->second;
}

std::size_t SessionService::session_count() const {
    std::lock_guard lock(sessions_mutex_);
    return sessions_.size();
}

json SessionService::session_json(const Entry& e, bool debug) const {
    json turns = json::array();
    for (const Turn& t : e.transcript.turns) turns.push_back(public_turn_json(t, e.names, debug));
    const auto it = scenarios_.find(e.scenario_id);
    return json{{"session_id", e.session_id},
                {"scenario_id", e.scenario_id},
                {"title", it != scenarios_.end() ? it->second.title : ""},
                {"created_at", e.created_at},
                {"status", to_string(e.status)},
                {"teacher_turns", e.teacher_turns},
                {"max_teacher_turns", config_.max_teacher_turns},
                {"transcript", std::move(turns)}};
}

json SessionService::create_session(const std::string& scenario_id, bool debug) {
    const Scenario& s = scenario(scenario_id);
    auto entry = std::make_shared<Entry>();
    entry->scenario_id = s.id;
    entry->created_at = utc_timestamp();
    entry->seed = random_seed();
    SimulationSession session = start_session(s, memories_for(s), config_.role_policy,
                                              session_options(entry->seed), *gateway_);
    entry->names = session.speaker_names();
    entry->transcript = session.transcript();
    entry->cursor = session.cursor();
    entry->status = session.awaiting_teacher() ? SessionStatus::AwaitingTeacher : SessionStatus::Finished;
    entry->session.emplace(std::move(session));
    {
        std::lock_guard lock(sessions_mutex_);
        do {
            entry->session_id = random_id();
        } while (sessions_.count(entry->session_id));
        sessions_.emplace(entry->session_id, entry);
    }
    std::lock_guard lock(entry->mutex);
    persist(*entry);
    spdlog::info("session {} created for {}", entry->session_id, s.id);
    return session_json(*entry, debug);
}

json SessionService::teacher_message(const std::string& session_id, const std::string& text,
                                     bool debug) {
    const auto entry = find(session_id);
    if (trim(text).empty()) throw Error(ErrorCode::InvalidArgument, "text must not be empty");
    std::lock_guard lock(entry->mutex);
    if (entry->status != SessionStatus::AwaitingTeacher) {
        throw Error(ErrorCode::WrongState,
                    "session is " + std::string(to_string(entry->status)) + ", not awaiting_teacher");
    }
    // Work on a copy so a provider failure leaves the committed session untouched.
    SimulationSession working = live_session(*entry);
    entry->status = SessionStatus::Active;
    std::vector<Turn> turns;
    try {
        turns = working.advance(text, *gateway_);
    } catch (...) {
        entry->status = SessionStatus::AwaitingTeacher;
        throw;
    }
    entry->teacher_turns += 1;
    entry->transcript = working.transcript();
    entry->cursor = working.cursor();
    entry->session.emplace(std::move(working));
    entry->status = entry->teacher_turns >= config_.max_teacher_turns || !entry->session->awaiting_teacher()
                        ? SessionStatus::Finished
                        : SessionStatus::AwaitingTeacher;
    persist(*entry);

    json out_turns = json::array();
    for (const Turn& t : turns) out_turns.push_back(public_turn_json(t, entry->names, debug));
    return json{{"session_id", entry->session_id},
                {"status", to_string(entry->status)},
                {"turns", std::move(out_turns)}};
}

json SessionService::transcript(const std::string& session_id, bool debug) {
    const auto entry = find(session_id);
    std::lock_guard lock(entry->mutex);
    return session_json(*entry, debug);
}

json SessionService::feedback(const std::string& session_id, bool debug) {
    const auto entry = find(session_id);
    std::lock_guard lock(entry->mutex);
    if (!has_teacher_turn(entry->transcript)) {
        throw Error(ErrorCode::WrongState, "feedback is available after the first teacher message");
    }
    FeedbackOptions options;
    options.k = config_.feedback_k;
    options.temperature = config_.role_policy.temperature(AgentRole::Feedback);
    const FeedbackReport report =
        generate_feedback(entry->transcript, entry->names, corpus(), *gateway_, options);
    json out = report;
    if (!debug) out.erase("engine_annotations");
    return out;
}

int http_status_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NotFound:
        case ErrorCode::UnknownScenario:
            return 404;
        case ErrorCode::WrongState:
        case ErrorCode::ScheduleExhausted:
            return 409;
        case ErrorCode::InvalidArgument:
        case ErrorCode::SchemaViolation:
        case ErrorCode::UnknownEgoState:
        case ErrorCode::EmptyInput:
            return 422;
        case ErrorCode::TransportError:
        case ErrorCode::RateLimited:
        case ErrorCode::AuthError:
        case ErrorCode::ProviderRefusal:
        case ErrorCode::ScriptExhausted:
        case ErrorCode::StructuredOutputFailure:
        case ErrorCode::EvaluationFailure:
            return 502;
        case ErrorCode::EmptyCorpus:
            return 503;
        default:
            return 500;
    }
}

json error_body(const Error& error) {
    const int status = http_status_for(error.code());
    return json{{"error", kind_for_status(status)},
                {"code", to_string(error.code())},
                {"message", error.detail()}};
}

namespace {

bool debug_flag(const httplib::Request& req) {
    if (!req.has_param("debug")) return false;
    const std::string v = ascii_lower(req.get_param_value("debug"));
    return v == "true" || v == "1" || v == "yes";
}

json body_json(const httplib::Request& req) {
    if (trim(req.body).empty()) return json::object();
    try {
        json j = json::parse(req.body);
        if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("request body is not JSON: ") + e.what());
    }
}

std::string string_field(const json& body, const char* key) {
    if (!body.contains(key) || !body.at(key).is_string()) {
        throw Error(ErrorCode::InvalidArgument, std::string("\"") + key + "\" must be a string");
    }
    return body.at(key).get<std::string>();
}

template <class Fn>
httplib::Server::Handler wrap(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            const json out = fn(req);
            res.status = 200;
            res.set_content(out.dump(), "application/json");
        } catch (const Error& e) {
            res.status = http_status_for(e.code());
            res.set_content(error_body(e).dump(), "application/json");
            if (res.status >= 500) spdlog::error("{} {}: {}", req.method, req.path, e.what());
        } catch (const std::exception& e) {
            res.status = 500;
            res.set_content(json{{"error", "InternalError"}, {"code", "Internal"}, {"message", e.what()}}.dump(),
                            "application/json");
            spdlog::error("{} {}: {}", req.method, req.path, e.what());
        }
    };
}

}  // namespace

HttpServer::HttpServer(std::shared_ptr<SessionService> service, fs::path static_dir)
    : service_(std::move(service)), server_(std::make_unique<httplib::Server>()) {
    auto svc = service_;
    httplib::Server& s = *server_;

    s.Get("/health", wrap([](const httplib::Request&) { return json{{"status", "ok"}}; }));
    const auto list = wrap([svc](const httplib::Request&) { return svc->list_scenarios(); });
    s.Post("/scenarios/list", list);
    s.Get("/scenarios", list);
    s.Post("/sessions", wrap([svc](const httplib::Request& req) {
        return svc->create_session(string_field(body_json(req), "scenario_id"), debug_flag(req));
    }));
    s.Post("/sessions/:id/teacher-message", wrap([svc](const httplib::Request& req) {
        const json body = body_json(req);
        return svc->teacher_message(req.path_params.at("id"), string_field(body, "text"),
                                    debug_flag(req));
    }));
    s.Get("/sessions/:id/transcript", wrap([svc](const httplib::Request& req) {
        return svc->transcript(req.path_params.at("id"), debug_flag(req));
    }));
    s.Post("/sessions/:id/feedback", wrap([svc](const httplib::Request& req) {
        return svc->feedback(req.path_params.at("id"), debug_flag(req));
    }));

    s.set_logger([](const httplib::Request& req, const httplib::Response& res) {
        spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
    });
    if (!static_dir.empty()) {
        if (!s.set_mount_point("/", static_dir.string())) {
            spdlog::warn("static directory {} not found; serving the API only", static_dir.string());
        }
    }
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = server_->bind_to_any_port(host);
        if (bound <= 0) throw Error(ErrorCode::IoFailure, "cannot bind " + host);
        return bound;
    }
    if (!server_->bind_to_port(host, port)) {
        throw Error(ErrorCode::IoFailure, "cannot bind " + host + ":" + std::to_string(port));
    }
    return port;
}

void HttpServer::serve() { server_->listen_after_bind(); }

void HttpServer::stop() { server_->stop(); }

}  // namespace tacla
