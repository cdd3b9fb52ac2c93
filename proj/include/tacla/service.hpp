#pragma once

// Live training sessions over HTTP+JSON. SessionService holds the logic and
// is usable without a socket; HttpServer maps routes and errors onto it.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tacla/app_config.hpp"
#include "tacla/feedback_rag.hpp"
#include "tacla/scenario.hpp"
#include "tacla/simulation.hpp"

namespace httplib {
class Server;
}

namespace tacla {

enum class SessionStatus { Active, AwaitingTeacher, Finished };
std::string_view to_string(SessionStatus status) noexcept;
SessionStatus parse_session_status(std::string_view label);

/// Turn as shown to clients: message fields plus the speaker's display name,
/// and the annotation only when `debug` is set.
json public_turn_json(const Turn& turn, const SpeakerNames& names, bool debug);

class SessionService {
public:
    /// Loads scenarios (malformed files are skipped with a warning) and any
    /// sessions persisted under data_dir.
    SessionService(AppConfig config, std::shared_ptr<const Gateway> gateway);
    ~SessionService();

    [[nodiscard]] json list_scenarios() const;
    /// Throws UnknownScenario.
    json create_session(const std::string& scenario_id, bool debug = false);
    /// Throws NotFound, InvalidArgument for blank text, WrongState unless awaiting the teacher.
    json teacher_message(const std::string& session_id, const std::string& text, bool debug);
    json transcript(const std::string& session_id, bool debug);
    /// Throws WrongState before the first teacher turn.
    json feedback(const std::string& session_id, bool debug);

    [[nodiscard]] std::size_t session_count() const;
    [[nodiscard]] const AppConfig& config() const noexcept { return config_; }
    [[nodiscard]] std::filesystem::path session_path(const std::string& session_id) const;

private:
    struct Entry;

    std::shared_ptr<Entry> find(const std::string& session_id) const;
    const Scenario& scenario(const std::string& scenario_id) const;
    const SeededMemories& memories_for(const Scenario& scenario);
    const CorpusIndex& corpus();
    SimulationSession& live_session(Entry& entry);
    void persist(const Entry& entry) const;
    json session_json(const Entry& entry, bool debug) const;
    void load_scenarios();
    void load_persisted();
    SessionOptions session_options(std::uint64_t seed) const;

    AppConfig config_;
    std::shared_ptr<const Gateway> gateway_;
    std::map<std::string, Scenario> scenarios_;

    mutable std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;

    std::mutex memories_mutex_;
    std::map<std::string, SeededMemories> memories_;

    std::mutex corpus_mutex_;
    std::optional<CorpusIndex> corpus_;
};

/// HTTP status for a library error.
int http_status_for(ErrorCode code) noexcept;
json error_body(const Error& error);

class HttpServer {
public:
    explicit HttpServer(std::shared_ptr<SessionService> service,
                        std::filesystem::path static_dir = {});
    ~HttpServer();

    /// Binds without serving; port 0 picks a free port. Returns the port or
    /// throws IoFailure.
    int bind(const std::string& host, int port);
    /// Serves until stop(). Requires bind().
    void serve();
    void stop();

private:
    std::shared_ptr<SessionService> service_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace tacla
