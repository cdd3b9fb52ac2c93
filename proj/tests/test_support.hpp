#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "tacla/agent_engine.hpp"
#include "tacla/llm_gateway.hpp"
#include "tacla/scripted_provider.hpp"

namespace tacla_test {

using namespace tacla;

inline std::filesystem::path source_dir() { return TACLA_SOURCE_DIR; }
inline std::filesystem::path cli_path() { return TACLA_CLI_PATH; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::mt19937_64 rng{std::random_device{}()};
        path_ = std::filesystem::temp_directory_path() /
                ("tacla-test-" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

struct Scripted {
    std::shared_ptr<ScriptedProvider> provider = std::make_shared<ScriptedProvider>();
    std::vector<std::chrono::milliseconds> sleeps;
    std::shared_ptr<Gateway> gateway;

    explicit Scripted(ProviderConfig config = {}) {
        gateway = std::make_shared<Gateway>(
            provider, config, [this](std::chrono::milliseconds d) { sleeps.push_back(d); });
    }
};

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct CommandResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Runs the tacla binary with `args` (already shell-quoted) in `cwd`.
inline CommandResult run_tacla(const std::string& args, const std::filesystem::path& cwd) {
    const auto out_file = cwd / ".stdout";
    const auto err_file = cwd / ".stderr";
    const std::string cmd = "cd '" + cwd.string() + "' && NO_COLOR=1 '" + cli_path().string() +
                            "' " + args + " >'" + out_file.string() + "' 2>'" +
                            err_file.string() + "'";
    const int status = std::system(cmd.c_str());
    CommandResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    std::filesystem::remove(out_file);
    std::filesystem::remove(err_file);
    return r;
}

inline PersonaProfile test_persona(const std::string& id = "ann", EgoState dominant = EgoState::Parent) {
    PersonaProfile p;
    p.id = id;
    p.display_name = id == "ann" ? "Ann" : id;
    p.description = "A careful student.";
    p.life_script = "I must be the best.";
    p.life_position = LifePosition::IOkYouNotOk;
    p.drivers = {Driver::BePerfect};
    p.dominant_state = dominant;
    p.activation_rules = {{EgoState::Parent, "when others fail"},
                          {EgoState::Adult, "when asked a question"},
                          {EgoState::Child, "when scolded"}};
    p.state_style_notes = {{EgoState::Parent, "sharp"}, {EgoState::Adult, "calm"},
                           {EgoState::Child, "hurt"}};
    p.pattern_seeds = {
        {EgoState::Parent, {{id + "-parent-1", "a classmate misses a deadline", "criticises them"}}},
        {EgoState::Adult, {{id + "-adult-1", "the teacher asks a question", "answers with facts"}}},
        {EgoState::Child, {{id + "-child-1", "the teacher scolds her", "sulks and blames others"}}}};
    return p;
}

}  // namespace tacla_test
