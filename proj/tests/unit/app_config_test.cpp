#include <gtest/gtest.h>

#include "tacla/app_config.hpp"
#include "tacla/io.hpp"
#include "test_support.hpp"

using namespace tacla;
using tacla_test::TempDir;

TEST(AppConfig, DefaultsAndRelativePaths) {
    const AppConfig c = app_config_from_json(json::object(), "/etc/tacla");
    EXPECT_EQ(c.provider.kind, "openai");
    EXPECT_EQ(c.scenarios_dir, std::filesystem::path("/etc/tacla/scenarios"));
    EXPECT_EQ(c.max_teacher_turns, 10);
    EXPECT_EQ(c.feedback_k, 6u);
    EXPECT_DOUBLE_EQ(c.role_policy.temperature(AgentRole::ChildState), 0.7);

    const AppConfig abs = app_config_from_json(json{{"data_dir", "/var/tacla"}}, "/etc/tacla");
    EXPECT_EQ(abs.data_dir, std::filesystem::path("/var/tacla"));
}

TEST(AppConfig, ShippedConfigsLoad) {
    const auto dir = tacla_test::source_dir() / "config";
    const AppConfig offline = load_app_config(dir / "offline.json");
    EXPECT_EQ(offline.provider.kind, "scripted");
    EXPECT_TRUE(std::filesystem::exists(offline.scenarios_dir / "solar_system.json"));
    const AppConfig live = load_app_config(dir / "tacla.example.json");
    EXPECT_EQ(live.provider.kind, "openai");
    EXPECT_EQ(live.provider.connection.api_key_env_var, "OPENAI_API_KEY");
}

TEST(AppConfig, Rejections) {
    for (const char* bad : {R"([])", R"({"max_teacher_turns": 0})", R"({"bind_address": "nohost"})",
                            R"({"provider": {"api_key": "sk-123"}})", R"({"provider": {"max_retries": 9}})",
                            R"({"role_policy": {"Narrator": 0.5}})", R"({"role_policy": {"Evaluator": 3.0}})",
                            R"({"feedback_k": "six"})"}) {
        try {
            app_config_from_json(json::parse(bad));
            FAIL() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::SchemaViolation) << bad;
        }
    }
}

TEST(AppConfig, RoundTrip) {
    AppConfig c = app_config_from_json(json{{"max_teacher_turns", 4}, {"role_policy", {{"ParentState", 0.9}}}}, "/x");
    const AppConfig back = app_config_from_json(app_config_to_json(c), "/elsewhere");
    EXPECT_EQ(back.max_teacher_turns, 4);
    EXPECT_DOUBLE_EQ(back.role_policy.temperature(AgentRole::ParentState), 0.9);
    EXPECT_EQ(back.corpus_dir, c.corpus_dir);
}

TEST(BindAddress, Parse) {
    const HostPort hp = parse_bind_address("0.0.0.0:9000");
    EXPECT_EQ(hp.host, "0.0.0.0");
    EXPECT_EQ(hp.port, 9000);
    for (const char* bad : {"9000", ":9000", "host:", "host:abc", "host:70000", "host:80x"}) {
        EXPECT_THROW(parse_bind_address(bad), Error) << bad;
    }
}

TEST(MakeBackend, KindsAndScript) {
    TempDir dir;
    write_file_atomic(dir / "script.json", R"(["queued reply"])");
    ProviderSettings settings;
    settings.kind = "scripted";
    settings.script = dir / "script.json";
    Backend b = make_backend(settings);
    ASSERT_TRUE(b.scripted);
    Gateway g(b.backend, ProviderConfig{});
    ChatRequest r;
    r.messages.push_back({"user", "hi"});
    EXPECT_EQ(g.chat(r).content, "queued reply");
    EXPECT_FALSE(g.chat(r).content.empty());  // offline fallback

    settings.kind = "openai";
    EXPECT_FALSE(make_backend(settings).scripted);
    settings.kind = "carrier-pigeon";
    EXPECT_THROW(make_backend(settings), Error);
}

TEST(RecordingBackend, LogsRequestsWithoutSecrets) {
    auto inner = std::make_shared<ScriptedProvider>();
    inner->push_reply("x");
    auto recorder = std::make_shared<RecordingBackend>(inner);
    Gateway g(recorder, ProviderConfig{});
    ChatRequest r;
    r.messages.push_back({"user", "hi"});
    r.agent_role = AgentRole::ChildState;
    r.temperature = 0.7;
    g.chat(r);
    const json log = recorder->log_json();
    ASSERT_EQ(log.size(), 1u);
    EXPECT_EQ(log[0].at("agent_role"), "ChildState");
    EXPECT_DOUBLE_EQ(log[0].at("temperature").get<double>(), 0.7);
}
