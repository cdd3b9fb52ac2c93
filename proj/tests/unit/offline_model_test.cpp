#include <gtest/gtest.h>

#include "tacla/eval_harness.hpp"
#include "tacla/feedback_rag.hpp"
#include "tacla/offline_model.hpp"
#include "tacla/scenario.hpp"
#include "tacla/simulation.hpp"
#include "test_support.hpp"

using namespace tacla;
using tacla_test::Scripted;

namespace {

SimulationRecord offline_run(const std::string& intervention) {
    Scripted s;
    s.provider->set_fallback(offline_reply);
    const Scenario scenario = builtin_solar_system();
    return run_simulation(scenario, find_intervention(scenario, intervention),
                          seed_memories(scenario, *s.gateway), RolePolicy{}, SessionOptions{}, *s.gateway);
}

}  // namespace

TEST(OfflineModel, OrchestratorRepliesParse) {
    const Scenario scenario = builtin_solar_system();
    for (const auto& persona : scenario.personas) {
        for (const char* incoming : {"Emma, that's enough!", "What part is hard?", "Fine."}) {
            ChatRequest r;
            r.agent_role = AgentRole::Orchestrator;
            r.system_prompt = orchestrator_prompt(persona);
            r.messages.push_back({"user", std::string("Incoming message from Mrs. Jones: \"") + incoming +
                                              "\"\n\nWhich ego state?"});
            EXPECT_TRUE(parse_selection(offline_reply(r))) << persona.id << ": " << incoming;
        }
    }
}

TEST(OfflineModel, ReactProtocol) {
    ChatRequest r;
    r.agent_role = AgentRole::AdultState;
    r.system_prompt = "You are Jacob.";
    r.messages.push_back({"user", "Mrs. Jones just said: \"What part is hard?\"\nRespond as Jacob."});
    const auto first = parse_react_reply(offline_reply(r));
    EXPECT_TRUE(first.tool_argument);
    r.messages.push_back({"assistant", "..."});
    r.messages.push_back({"user", "Observation: recall_patterns[Adult] returned 0 patterns"});
    const auto second = parse_react_reply(offline_reply(r));
    ASSERT_TRUE(second.final_text);
    EXPECT_FALSE(second.final_text->empty());
}

TEST(OfflineModel, JudgesAndFeedbackFollowSchemas) {
    const SimulationRecord rec = offline_run("adult_adult");
    Scripted s;
    s.provider->set_fallback(offline_reply);
    const auto conflict = score_conflict(rec.transcript, rec.speaker_names, *s.gateway);
    EXPECT_GE(conflict.value, 1);
    EXPECT_LE(conflict.value, 5);
    const auto realism = score_realism(rec.transcript, rec.speaker_names, *s.gateway);
    EXPECT_GE(realism.value, 1);
    EXPECT_LE(realism.value, 10);

    ChatRequest fr;
    fr.agent_role = AgentRole::Feedback;
    fr.system_prompt = feedback_system_prompt();
    fr.messages.push_back({"user", feedback_user_prompt(rec.transcript, rec.speaker_names, {})});
    const FeedbackReport report = parse_feedback_reply(offline_reply(fr), rec.transcript);
    EXPECT_EQ(report.per_turn_states.size(), rec.transcript.size());
    EXPECT_FALSE(report.transactions.empty());
}

// The canned model keeps the expected direction so offline demos look sane.
TEST(OfflineModel, InterventionsSteerStudents) {
    const SimulationRecord adult = offline_run("adult_adult");
    const SimulationRecord parent = offline_run("controlling_parent");
    auto child_turns = [](const SimulationRecord& r) {
        int n = 0;
        for (const auto& [_, c] : post_intervention_counts(r.transcript, {"emma", "jacob"})) n += c.at(EgoState::Child);
        return n;
    };
    EXPECT_LT(child_turns(adult), child_turns(parent));
}
