#pragma once

// Wiring between scenario content and the engine: building sessions, playing
// the opening, and rendering or persisting one simulated dialogue.

#include <cstdint>
#include <optional>
#include <string>

#include "tacla/agent_engine.hpp"
#include "tacla/scenario.hpp"

namespace tacla {

struct SessionOptions {
    std::uint64_t seed = 0;
    // Generate the opening conflict with the engine instead of replaying
    // the scripted opening turns.
    bool live_opening = false;
    // Replace the scenario schedule by one teacher slot followed by this
    // many rounds of every persona speaking once.
    std::optional<int> post_intervention_rounds;
    bool cyclic = false;
    EngineOptions engine;
};

inline constexpr std::string_view kScriptedOpeningRationale = "scripted opening";

/// Students built from seeded stores and the schedule implied by `options`;
/// nothing is played yet. Used directly when restoring a persisted session.
SimulationSession make_session(const Scenario& scenario, const SeededMemories& memories,
                               const RolePolicy& policy, const SessionOptions& options);

/// make_session, then the opening is played and the session is positioned at
/// the first teacher slot (or the schedule end).
SimulationSession start_session(const Scenario& scenario, const SeededMemories& memories,
                                const RolePolicy& policy, const SessionOptions& options,
                                const Gateway& gateway);

/// "Name: text" per turn, one per line, with a trailing newline.
std::string render_dialogue(const Transcript& transcript, const SpeakerNames& names);

struct SimulationRecord {
    std::string scenario_id;
    std::string intervention_id;
    std::uint64_t seed = 0;
    SpeakerNames speaker_names;
    Transcript transcript;
};

void to_json(json& j, const SimulationRecord& v);
void from_json(const json& j, SimulationRecord& v);

/// Opening, then the intervention at the teacher slot, then the remaining
/// scheduled student turns.
SimulationRecord run_simulation(const Scenario& scenario, const InterventionPreset& intervention,
                                const SeededMemories& memories, const RolePolicy& policy,
                                const SessionOptions& options, const Gateway& gateway);

}  // namespace tacla
