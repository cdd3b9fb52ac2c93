#include <gtest/gtest.h>

#include <fstream>

#include "tacla/io.hpp"
#include "tacla/simulation.hpp"
#include "test_support.hpp"

using namespace tacla;
using tacla_test::run_tacla;
using tacla_test::slurp;
using tacla_test::TempDir;

namespace {

std::string offline_config() {
    return "--config '" + (tacla_test::source_dir() / "config" / "offline.json").string() + "'";
}

}  // namespace

TEST(Cli, SimulateWritesDialogue) {
    TempDir dir;
    const auto r = run_tacla(offline_config() + " --seed 3 --out run simulate --intervention adult_adult", dir.path());
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const std::string dialogue = slurp(dir / "run/dialogue.txt");
    EXPECT_EQ(dialogue.rfind("Emma: I can't believe this.", 0), 0u);
    EXPECT_NE(dialogue.find("Mrs. Jones: I can see this project deadline"), std::string::npos);
    const SimulationRecord rec = read_json_file(dir / "run/transcript.json").get<SimulationRecord>();
    EXPECT_EQ(rec.intervention_id, "adult_adult");
    EXPECT_EQ(rec.transcript.size(), 9u);
}

TEST(Cli, SimulateIsByteStable) {
    TempDir dir;
    for (const char* out : {"a", "b"}) {
        const auto r = run_tacla(offline_config() + " --seed 5 --out " + out +
                                     " simulate --intervention controlling_parent --feedback",
                                 dir.path());
        ASSERT_EQ(r.exit_code, 0) << r.err;
    }
    for (const char* f : {"transcript.json", "dialogue.txt", "feedback.json"}) {
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    }
}

TEST(Cli, DebugDialogueTagsStates) {
    TempDir dir;
    const auto r = run_tacla(offline_config() + " --debug --out d simulate --intervention adult_adult", dir.path());
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(slurp(dir / "d/dialogue.txt").rfind("Emma [Parent]: I can't believe this.", 0), 0u);
}

TEST(Cli, ValidationErrorsExitOne) {
    TempDir dir;
    auto r = run_tacla(offline_config() + " simulate --intervention shouting", dir.path());
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.err.find("error: NotFound:"), std::string::npos) << r.err;
    EXPECT_FALSE(std::filesystem::exists(dir / "out"));

    r = run_tacla(offline_config() + " simulate --intervention adult_adult --scenario mars", dir.path());
    EXPECT_EQ(r.exit_code, 1);
    r = run_tacla(offline_config() + " batch-eval --intervention all --n 0", dir.path());
    EXPECT_EQ(r.exit_code, 1);
    r = run_tacla("simulate --intervention adult_adult --bogus", dir.path());
    EXPECT_EQ(r.exit_code, 1);
    r = run_tacla("", dir.path());
    EXPECT_EQ(r.exit_code, 1);
    r = run_tacla("--help", dir.path());
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_NE(r.out.find("batch-eval"), std::string::npos);
}

TEST(Cli, BatchEvalSmall) {
    TempDir dir;
    const auto r = run_tacla(offline_config() + " --seed 1 --out res/nested batch-eval --intervention all --n 2", dir.path());
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const json stats = read_json_file(dir / "res/nested/stats.json");
    EXPECT_EQ(stats.at("total_runs"), 4);
    EXPECT_EQ(stats.at("conditions").size(), 2u);
    EXPECT_EQ(stats.at("conditions").at(0).at("runs"), 2);
    EXPECT_TRUE(std::filesystem::exists(dir / "res/nested/transcripts/adult_adult-002.json"));
    EXPECT_NE(r.out.find("adult_adult: 2 runs, 0 failed"), std::string::npos) << r.out;
}

TEST(Cli, FeedbackCommand) {
    TempDir dir;
    Transcript one;
    one.append({"teacher", Role::Teacher, "Hello", 0});
    write_file_atomic(dir / "short.json", dump_json(json{{"transcript", one}}));
    auto r = run_tacla(offline_config() + " feedback short.json", dir.path());
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.err.find("at least 2 turns"), std::string::npos);

    Transcript two;
    two.append({"emma", Role::Student, "You never cared about this.", 0}, TurnAnnotation{EgoState::Parent, "", {}, {}});
    two.append({"jacob", Role::Student, "Sorry, it's my fault.", 0}, TurnAnnotation{EgoState::Child, "", {}, {}});
    write_file_atomic(dir / "two.json", dump_json(json(two)));
    // The scripted reply mislabels a parallel Parent->Child / Child->Parent pair.
    const json reply{{"per_turn_states", json::array({{{"turn_index", 0}, {"source", "Parent"}, {"addressed", "Child"}},
                                                      {{"turn_index", 1}, {"source", "Child"}, {"addressed", "Parent"}}})},
                     {"transactions", json::array({{{"stimulus_index", 0}, {"response_index", 1}, {"label", "Crossed"}}})},
                     {"games", json::array()},
                     {"alternatives", json::array()}};
    write_file_atomic(dir / "script.json", dump_json(json::array({reply.dump()})));
    r = run_tacla(offline_config() + " --script script.json --out fb feedback two.json", dir.path());
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.out.find("1 transaction label(s) corrected"), std::string::npos);
    const json report = read_json_file(dir / "fb/report.json");
    EXPECT_EQ(report.at("transactions").at(0).at("classification"), "Complementary");
    EXPECT_EQ(report.at("transactions").at(0).at("corrected"), true);
}

TEST(Cli, ValidateScenario) {
    TempDir dir;
    auto r = run_tacla("validate-scenario '" +
                           (tacla_test::source_dir() / "scenarios/solar_system.json").string() + "'",
                       dir.path());
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_EQ(r.out.rfind("ok: solar_system (2 personas, 2 intervention presets)", 0), 0u);

    json bad = builtin_solar_system();
    bad["turn_schedule"].push_back("zed");
    write_file_atomic(dir / "bad.json", dump_json(bad));
    r = run_tacla("validate-scenario bad.json", dir.path());
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.out.find("unknown speaker zed"), std::string::npos);
}

TEST(Cli, IngestCorpus) {
    TempDir dir;
    const auto r = run_tacla(offline_config() + " --out idx ingest-corpus", dir.path());
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.out.find("from 5 documents"), std::string::npos) << r.out;
    const json index = read_json_file(dir / "idx/corpus_index.json");
    EXPECT_EQ(index.at("kind"), "corpus");
    EXPECT_FALSE(index.at("entries").empty());

    const auto sim = run_tacla(offline_config() + " --out s simulate --intervention adult_adult --feedback --index idx/corpus_index.json",
                               dir.path());
    EXPECT_EQ(sim.exit_code, 0) << sim.err;
    EXPECT_TRUE(std::filesystem::exists(dir / "s/feedback.json"));
}

TEST(Cli, RequestLogHasRoleTemperatures) {
    TempDir dir;
    const auto r = run_tacla(offline_config() + " --request-log log.json --out o simulate --intervention adult_adult", dir.path());
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const json log = read_json_file(dir / "log.json");
    ASSERT_FALSE(log.empty());
    for (const auto& entry : log) {
        const std::string role = entry.at("agent_role");
        const double t = entry.at("temperature");
        if (role == "ParentState" || role == "ChildState") EXPECT_DOUBLE_EQ(t, 0.7);
        else EXPECT_DOUBLE_EQ(t, 0.3) << role;
        EXPECT_FALSE(entry.dump().find("api_key") != std::string::npos);
    }
}
