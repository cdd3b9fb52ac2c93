#include <gtest/gtest.h>

#include <fstream>

#include "tacla/io.hpp"
#include "tacla/scenario.hpp"
#include "tacla/simulation.hpp"
#include "test_support.hpp"

using namespace tacla;
using tacla_test::Scripted;
using tacla_test::TempDir;

TEST(BuiltinScenario, ValidAndMatchesShippedFile) {
    const Scenario s = builtin_solar_system();
    EXPECT_TRUE(validate_scenario(s).empty());
    const Scenario shipped = load_scenario(tacla_test::source_dir() / "scenarios" / "solar_system.json");
    EXPECT_EQ(shipped, s);
}

TEST(BuiltinScenario, FixedContent) {
    const Scenario s = builtin_solar_system();
    ASSERT_EQ(s.opening_turns.size(), 4u);
    EXPECT_EQ(s.opening_turns[0].speaker_id, "emma");
    EXPECT_EQ(s.opening_turns[0].text,
              "I can't believe this. We agreed on these deadlines weeks ago, and Mercury is still "
              "missing? You clearly never cared about this project.");
    EXPECT_EQ(s.opening_turns[1].text.rfind("I know, I'm really sorry.", 0), 0u);
    EXPECT_EQ(find_intervention(s, "controlling_parent").text,
              "Emma, that's enough! You can't talk to your classmate like that.");
    EXPECT_EQ(find_intervention(s, "adult_adult").text,
              "I can see this project deadline is creating stress for both of you. Let's pause "
              "the blame and focus on solutions. Jacob, what specific part is giving you trouble?");
    const auto& emma = find_persona(s, "emma");
    EXPECT_EQ(emma.dominant_state, EgoState::Parent);
    EXPECT_EQ(emma.life_position, LifePosition::IOkYouNotOk);
    EXPECT_EQ(find_persona(s, "jacob").dominant_state, EgoState::Child);
    EXPECT_EQ(find_persona(s, "jacob").life_position, LifePosition::INotOkYouOk);
}

TEST(BuiltinScenario, LookupsThrowNotFound) {
    const Scenario s = builtin_solar_system();
    try {
        find_intervention(s, "shouting");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotFound);
    }
    EXPECT_THROW(find_persona(s, "zed"), Error);
}

TEST(ScenarioValidation, ReportsFieldPaths) {
    Scenario s = builtin_solar_system();
    s.turn_schedule.push_back("zed");
    s.opening_turns.push_back({"emma", "   ", EgoState::Adult});
    s.intervention_presets.push_back(s.intervention_presets.front());
    s.personas[1].id = "emma";
    const auto v = validate_scenario(s);
    auto has = [&](const std::string& needle) {
        return std::any_of(v.begin(), v.end(),
                           [&](const std::string& x) { return x.find(needle) != std::string::npos; });
    };
    EXPECT_TRUE(has("turn_schedule[5] unknown speaker zed"));
    EXPECT_TRUE(has("opening_turns[4] text empty"));
    EXPECT_TRUE(has("intervention_presets[2] duplicate id"));
    EXPECT_TRUE(has("personas[1] duplicate id emma"));
}

TEST(ScenarioFiles, RoundTripAndErrors) {
    TempDir dir;
    save_scenario(builtin_solar_system(), dir / "s.json");
    EXPECT_EQ(load_scenario(dir / "s.json"), builtin_solar_system());

    std::ofstream(dir / "bad.json") << "{\"id\": \"x\"";
    try {
        load_scenario(dir / "bad.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
    }
    json j = builtin_solar_system();
    j["personas"][0]["dominant_state"] = "Rebellious Child";
    EXPECT_THROW(scenario_from_json(j), Error);
    try {
        load_scenario(dir / "missing.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IoFailure);
    }
}

TEST(SeedMemories, OneStorePerStateWithEmbeddings) {
    Scripted s;
    const Scenario scenario = builtin_solar_system();
    const SeededMemories m = seed_memories(scenario, *s.gateway);
    ASSERT_EQ(m.size(), 2u);
    for (const auto& persona : scenario.personas) {
        for (EgoState state : kAllEgoStates) {
            const PatternStore& store = m.at(persona.id).at(state);
            EXPECT_EQ(store.ego_state(), state);
            EXPECT_EQ(store.dimension(), kScriptedEmbeddingDimension);
            EXPECT_EQ(store.size(), persona.pattern_seeds.at(state).size());
        }
    }
}

TEST(SpeakerNamesTest, IncludesTeacher) {
    const auto names = speaker_names(builtin_solar_system());
    EXPECT_EQ(names.at("teacher"), "Mrs. Jones");
    EXPECT_EQ(names.at("emma"), "Emma");
}

namespace {

void push_student_turn(Scripted& s, const std::string& state, const std::string& text) {
    s.provider->push_reply("{\"ego_state\": \"" + state + "\"}");
    s.provider->push_reply("Final: " + text);
}

}  // namespace

TEST(Simulation, ScriptedOpeningThenIntervention) {
    Scripted s;
    const Scenario scenario = builtin_solar_system();
    const auto memories = seed_memories(scenario, *s.gateway);
    for (int i = 0; i < 4; ++i) push_student_turn(s, i % 2 ? "Child" : "Adult", "line " + std::to_string(i));
    SessionOptions options;
    options.seed = 9;
    const SimulationRecord rec =
        run_simulation(scenario, find_intervention(scenario, "adult_adult"), memories, RolePolicy{},
                       options, *s.gateway);
    const auto& turns = rec.transcript.turns;
    ASSERT_EQ(turns.size(), 9u);
    EXPECT_EQ(turns[0].message.text, scenario.opening_turns[0].text);
    EXPECT_EQ(turns[0].annotation->rationale, kScriptedOpeningRationale);
    EXPECT_EQ(turns[1].annotation->selected_state, EgoState::Child);
    EXPECT_EQ(turns[4].message.role, Role::Teacher);
    EXPECT_EQ(turns[5].message.speaker_id, "emma");
    EXPECT_EQ(turns[5].annotation->selected_state, EgoState::Adult);
    EXPECT_EQ(turns[8].message.text, "line 3");
    for (const auto& t : turns) {
        EXPECT_EQ(t.annotation.has_value(), t.message.role == Role::Student);
    }
    EXPECT_EQ(s.provider->remaining(), 0u);

    const std::string dialogue = render_dialogue(rec.transcript, rec.speaker_names);
    EXPECT_EQ(dialogue.rfind("Emma: I can't believe this.", 0), 0u);
    EXPECT_NE(dialogue.find("\nMrs. Jones: I can see"), std::string::npos);

    const SimulationRecord back = json(rec).get<SimulationRecord>();
    EXPECT_EQ(back.transcript, rec.transcript);
    EXPECT_EQ(back.speaker_names, rec.speaker_names);
    EXPECT_EQ(back.intervention_id, "adult_adult");
}

TEST(Simulation, RoundsOverrideSchedule) {
    Scripted s;
    const Scenario scenario = builtin_solar_system();
    SessionOptions options;
    options.post_intervention_rounds = 3;
    const auto session = make_session(scenario, seed_memories(scenario, *s.gateway), RolePolicy{}, options);
    const std::vector<std::string> expected{"TEACHER", "emma", "jacob", "emma", "jacob", "emma", "jacob"};
    EXPECT_EQ(session.turn_schedule(), expected);
}

TEST(Simulation, LiveOpeningGeneratesOpening) {
    Scripted s;
    const Scenario scenario = builtin_solar_system();
    const auto memories = seed_memories(scenario, *s.gateway);
    for (int i = 0; i < 4; ++i) push_student_turn(s, "Parent", "open " + std::to_string(i));
    SessionOptions options;
    options.live_opening = true;
    const auto session = start_session(scenario, memories, RolePolicy{}, options, *s.gateway);
    const auto& turns = session.transcript().turns;
    ASSERT_EQ(turns.size(), 5u);
    EXPECT_EQ(turns[0].message.role, Role::System);
    EXPECT_EQ(turns[1].message.text, "open 0");
    EXPECT_NE(turns[1].annotation->rationale, kScriptedOpeningRationale);
    EXPECT_TRUE(session.awaiting_teacher());
}
