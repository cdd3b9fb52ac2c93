#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include "httplib.h"
#include "tacla/offline_model.hpp"
#include "tacla/service.hpp"
#include "test_support.hpp"

using namespace tacla;
using tacla_test::Scripted;
using tacla_test::TempDir;

namespace {

AppConfig config_in(const TempDir& dir) {
    AppConfig c;
    c.scenarios_dir = tacla_test::source_dir() / "scenarios";
    c.corpus_dir = tacla_test::source_dir() / "corpus";
    c.data_dir = dir / "data";
    c.max_teacher_turns = 3;
    return c;
}

std::shared_ptr<Gateway> offline_gateway(std::function<std::string(const ChatRequest&)> responder = offline_reply) {
    auto provider = std::make_shared<ScriptedProvider>();
    provider->set_fallback(std::move(responder));
    return std::make_shared<Gateway>(provider, ProviderConfig{}, [](auto) {});
}

class Running {
public:
    explicit Running(std::shared_ptr<SessionService> service)
        : server_(std::move(service)), port_(server_.bind("127.0.0.1", 0)),
          thread_([this] { server_.serve(); }), client_("127.0.0.1", port_) {
        client_.set_read_timeout(30, 0);
    }
    ~Running() {
        server_.stop();
        thread_.join();
    }
    httplib::Client& client() { return client_; }

private:
    HttpServer server_;
    int port_;
    std::thread thread_;
    httplib::Client client_;
};

std::size_t count_key(const json& j, const std::string& key) {
    std::size_t n = 0;
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) n += (k == key) + count_key(v, key);
    } else if (j.is_array()) {
        for (const auto& v : j) n += count_key(v, key);
    }
    return n;
}

}  // namespace

TEST(HttpStatus, Mapping) {
    EXPECT_EQ(http_status_for(ErrorCode::NotFound), 404);
    EXPECT_EQ(http_status_for(ErrorCode::UnknownScenario), 404);
    EXPECT_EQ(http_status_for(ErrorCode::WrongState), 409);
    EXPECT_EQ(http_status_for(ErrorCode::InvalidArgument), 422);
    EXPECT_EQ(http_status_for(ErrorCode::TransportError), 502);
    EXPECT_EQ(http_status_for(ErrorCode::StructuredOutputFailure), 502);
    EXPECT_EQ(http_status_for(ErrorCode::EmptyCorpus), 503);
    EXPECT_EQ(http_status_for(ErrorCode::IoFailure), 500);
    const json body = error_body(Error(ErrorCode::WrongState, "busy"));
    EXPECT_EQ(body, (json{{"error", "Conflict"}, {"code", "WrongState"}, {"message", "busy"}}));
}

TEST(Service, ListsScenariosSkippingMalformed) {
    TempDir dir;
    std::filesystem::create_directories(dir / "scenarios");
    std::filesystem::copy_file(tacla_test::source_dir() / "scenarios" / "solar_system.json",
                               dir / "scenarios" / "solar_system.json");
    std::ofstream(dir / "scenarios" / "broken.json") << "{\"id\": ";
    AppConfig c = config_in(dir);
    c.scenarios_dir = dir / "scenarios";
    SessionService service(c, offline_gateway());
    const json list = service.list_scenarios();
    ASSERT_EQ(list.size(), 1u);
    EXPECT_EQ(list[0]["id"], "solar_system");
    EXPECT_EQ(list[0]["teacher_name"], "Mrs. Jones");
    EXPECT_EQ(list[0]["students"].size(), 2u);
    EXPECT_EQ(list[0]["intervention_presets"].size(), 2u);

    c.scenarios_dir = dir / "empty";
    std::filesystem::create_directories(c.scenarios_dir);
    EXPECT_TRUE(SessionService(c, offline_gateway()).list_scenarios().empty());
}

TEST(Service, HttpRoundTrip) {
    TempDir dir;
    auto service = std::make_shared<SessionService>(config_in(dir), offline_gateway());
    Running server(service);
    auto& cli = server.client();

    auto health = cli.Get("/health");
    ASSERT_TRUE(health);
    EXPECT_EQ(health->status, 200);

    auto listed = cli.Post("/scenarios/list", "", "application/json");
    ASSERT_TRUE(listed);
    EXPECT_EQ(json::parse(listed->body).at(0).at("id"), "solar_system");

    auto missing = cli.Post("/sessions", R"({"scenario_id": "mars"})", "application/json");
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 404);
    EXPECT_EQ(json::parse(missing->body).at("error"), "NotFound");

    auto created = cli.Post("/sessions", R"({"scenario_id": "solar_system"})", "application/json");
    ASSERT_TRUE(created);
    ASSERT_EQ(created->status, 200) << created->body;
    const json session = json::parse(created->body);
    const std::string id = session.at("session_id");
    EXPECT_EQ(session.at("status"), "awaiting_teacher");
    EXPECT_EQ(session.at("transcript").at(0).at("text").get<std::string>().rfind("I can't believe this.", 0), 0u);
    EXPECT_EQ(session.at("transcript").at(0).at("speaker_name"), "Emma");
    EXPECT_EQ(count_key(session, "annotation"), 0u);

    auto other = cli.Post("/sessions", R"({"scenario_id": "solar_system"})", "application/json");
    EXPECT_NE(json::parse(other->body).at("session_id"), id);

    auto early = cli.Post("/sessions/" + id + "/feedback", "", "application/json");
    EXPECT_EQ(early->status, 409);

    auto blank = cli.Post("/sessions/" + id + "/teacher-message", R"({"text": "   "})", "application/json");
    EXPECT_EQ(blank->status, 422);
    auto wrong_type = cli.Post("/sessions/" + id + "/teacher-message", R"({"text": 3})", "application/json");
    EXPECT_EQ(wrong_type->status, 422);
    auto unknown = cli.Post("/sessions/nope/teacher-message", R"({"text": "hi"})", "application/json");
    EXPECT_EQ(unknown->status, 404);

    auto reply = cli.Post("/sessions/" + id + "/teacher-message",
                          R"({"text": "Let's pause the blame. Jacob, what part is hard?"})", "application/json");
    ASSERT_EQ(reply->status, 200) << reply->body;
    const json turns = json::parse(reply->body).at("turns");
    ASSERT_EQ(turns.size(), 5u);
    EXPECT_EQ(turns[0].at("role"), "teacher");
    EXPECT_EQ(count_key(turns, "annotation"), 0u);

    auto debug = cli.Get("/sessions/" + id + "/transcript?debug=true");
    const json debug_json = json::parse(debug->body);
    EXPECT_EQ(count_key(debug_json, "annotation"), 8u);
    EXPECT_EQ(debug_json.at("teacher_turns"), 1);
    auto plain = cli.Get("/sessions/" + id + "/transcript");
    EXPECT_EQ(count_key(json::parse(plain->body), "annotation"), 0u);

    auto fb = cli.Post("/sessions/" + id + "/feedback", "", "application/json");
    ASSERT_EQ(fb->status, 200) << fb->body;
    const json report = json::parse(fb->body);
    for (const char* key : {"per_turn_states", "transactions", "games", "alternatives", "cited_chunks"}) {
        EXPECT_TRUE(report.contains(key)) << key;
    }
    EXPECT_FALSE(report.contains("engine_annotations"));
    auto fb_debug = cli.Post("/sessions/" + id + "/feedback?debug=1", "", "application/json");
    EXPECT_TRUE(json::parse(fb_debug->body).contains("engine_annotations"));

    // max_teacher_turns = 3
    cli.Post("/sessions/" + id + "/teacher-message", R"({"text": "Good."})", "application/json");
    auto last = cli.Post("/sessions/" + id + "/teacher-message", R"({"text": "Thanks."})", "application/json");
    EXPECT_EQ(json::parse(last->body).at("status"), "finished");
    auto over = cli.Post("/sessions/" + id + "/teacher-message", R"({"text": "More?"})", "application/json");
    EXPECT_EQ(over->status, 409);
}

TEST(Service, FeedbackUpstreamFailureIs502) {
    TempDir dir;
    auto gateway = offline_gateway([](const ChatRequest& r) {
        return r.agent_role == AgentRole::Feedback ? std::string("no json at all") : offline_reply(r);
    });
    auto service = std::make_shared<SessionService>(config_in(dir), gateway);
    const std::string id = service->create_session("solar_system").at("session_id");
    service->teacher_message(id, "Emma, that's enough!", false);
    Running server(service);
    auto fb = server.client().Post("/sessions/" + id + "/feedback", "", "application/json");
    ASSERT_TRUE(fb);
    EXPECT_EQ(fb->status, 502);
    EXPECT_EQ(json::parse(fb->body).at("code"), "StructuredOutputFailure");
}

TEST(Service, EmptyCorpusIs503) {
    TempDir dir;
    AppConfig c = config_in(dir);
    c.corpus_dir = dir / "no-docs";
    std::filesystem::create_directories(c.corpus_dir);
    auto service = std::make_shared<SessionService>(c, offline_gateway());
    const std::string id = service->create_session("solar_system").at("session_id");
    service->teacher_message(id, "Let's look at the facts.", false);
    try {
        service->feedback(id, false);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(http_status_for(e.code()), 503);
    }
}

TEST(Service, ProviderFailureLeavesSessionUntouched) {
    TempDir dir;
    bool fail = false;
    auto gateway = offline_gateway([&](const ChatRequest& r) -> std::string {
        if (fail) throw Error(ErrorCode::AuthError, "revoked");
        return offline_reply(r);
    });
    SessionService service(config_in(dir), gateway);
    const std::string id = service.create_session("solar_system").at("session_id");
    const json before = service.transcript(id, true);
    fail = true;
    EXPECT_THROW(service.teacher_message(id, "Hello?", false), Error);
    EXPECT_EQ(service.transcript(id, true), before);
    fail = false;
    EXPECT_EQ(service.teacher_message(id, "Hello?", false).at("turns").size(), 5u);
}

TEST(Service, SessionsSurviveRestart) {
    TempDir dir;
    std::string id;
    json before;
    {
        SessionService service(config_in(dir), offline_gateway());
        id = service.create_session("solar_system").at("session_id");
        service.teacher_message(id, "Jacob, what specific part is giving you trouble?", false);
        before = service.transcript(id, true);
    }
    EXPECT_TRUE(std::filesystem::exists(dir / "data" / "sessions" / (id + ".json")));
    SessionService restarted(config_in(dir), offline_gateway());
    EXPECT_EQ(restarted.session_count(), 1u);
    EXPECT_EQ(restarted.transcript(id, true), before);
    const json more = restarted.teacher_message(id, "What would help most?", false);
    EXPECT_EQ(more.at("turns").at(0).at("turn_index"), 9);
}
