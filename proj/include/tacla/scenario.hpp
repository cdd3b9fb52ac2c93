#pragma once

// Declarative scenario files: personas, the scripted opening conflict, the
// turn schedule and teacher intervention presets.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tacla/agent_engine.hpp"
#include "tacla/llm_gateway.hpp"
#include "tacla/pattern_memory.hpp"
#include "tacla/ta_domain.hpp"

namespace tacla {

struct InterventionPreset {
    std::string id;
    std::string label;
    std::string text;

    bool operator==(const InterventionPreset&) const = default;
};

/// A scripted line played before the session goes live. The ego state is
/// recorded as the turn's annotation.
struct OpeningTurn {
    std::string speaker_id;
    std::string text;
    EgoState ego_state = EgoState::Adult;

    bool operator==(const OpeningTurn&) const = default;
};

struct Scenario {
    std::string id;
    std::string title;
    std::string setting_description;
    std::string teacher_name = "Teacher";
    std::string notes;
    std::vector<PersonaProfile> personas;
    std::vector<OpeningTurn> opening_turns;
    std::vector<std::string> turn_schedule;  // persona ids and "TEACHER" slots
    std::vector<InterventionPreset> intervention_presets;

    bool operator==(const Scenario&) const = default;
};

void to_json(json& j, const InterventionPreset& v);
void from_json(const json& j, InterventionPreset& v);
void to_json(json& j, const OpeningTurn& v);
void from_json(const json& j, OpeningTurn& v);
void to_json(json& j, const Scenario& v);
void from_json(const json& j, Scenario& v);

/// Violations prefixed with their field path; empty means valid.
std::vector<std::string> validate_scenario(const Scenario& scenario);

/// Decodes and validates. Throws SchemaViolation naming the first problem.
Scenario scenario_from_json(const json& j);
/// Throws IoFailure or SchemaViolation.
Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

/// Throws NotFound.
const InterventionPreset& find_intervention(const Scenario& scenario, const std::string& id);
const PersonaProfile& find_persona(const Scenario& scenario, const std::string& id);

/// The two teacher strategies: "adult_adult" and "controlling_parent".
std::vector<InterventionPreset> builtin_interventions();

/// Emma and Jacob building a Solar System model, with Jacob's Mercury missing.
Scenario builtin_solar_system();

/// student id -> ego state -> store.
using SeededMemories = std::map<std::string, StateMap<PatternStore>>;

/// Embeds every seed's context and fills one store per ego state per persona.
SeededMemories seed_memories(const Scenario& scenario, const Gateway& gateway);

/// speaker_id -> display name, including the teacher.
SpeakerNames speaker_names(const Scenario& scenario);

}  // namespace tacla
