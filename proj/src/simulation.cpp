#include "tacla/simulation.hpp"

#include <sstream>

namespace tacla {

SimulationSession make_session(const Scenario& scenario, const SeededMemories& memories,
                               const RolePolicy& policy, const SessionOptions& options) {
    std::vector<StudentAgent> students;
    for (const auto& persona : scenario.personas) {
        const auto it = memories.find(persona.id);
        if (it == memories.end()) {
            throw Error(ErrorCode::InvalidArgument, "no seeded memory for " + persona.id);
        }
        students.push_back(StudentAgent{persona, it->second, policy});
    }

    std::vector<std::string> schedule = scenario.turn_schedule;
    if (options.post_intervention_rounds) {
        if (*options.post_intervention_rounds < 1) {
            throw Error(ErrorCode::InvalidArgument, "post-intervention rounds must be >= 1");
        }
        schedule = {std::string(kTeacherSlot)};
        for (int r = 0; r < *options.post_intervention_rounds; ++r) {
            for (const auto& persona : scenario.personas) schedule.push_back(persona.id);
        }
    }
    if (options.live_opening) {
        std::vector<std::string> opening;
        for (const auto& turn : scenario.opening_turns) opening.push_back(turn.speaker_id);
        schedule.insert(schedule.begin(), opening.begin(), opening.end());
    }

    SimulationSession session(scenario.id, std::move(students), std::move(schedule),
                              speaker_names(scenario), options.seed, options.engine);
    session.set_cyclic(options.cyclic);
    return session;
}

SimulationSession start_session(const Scenario& scenario, const SeededMemories& memories,
                                const RolePolicy& policy, const SessionOptions& options,
                                const Gateway& gateway) {
    SimulationSession session = make_session(scenario, memories, policy, options);
    session.set_cyclic(false);
    if (options.live_opening) {
        const std::string setting =
            scenario.setting_description.empty() ? scenario.title : scenario.setting_description;
        session.append_turn(Message{std::string(kSystemSpeakerId), Role::System, setting, 0},
                            std::nullopt);
        session.advance(std::nullopt, gateway);
    } else {
        for (const auto& turn : scenario.opening_turns) {
            TurnAnnotation annotation;
            annotation.selected_state = turn.ego_state;
            annotation.rationale = std::string(kScriptedOpeningRationale);
            annotation.react_trace = {{ReactStepKind::Final, turn.text}};
            session.append_turn(Message{turn.speaker_id, Role::Student, turn.text, 0},
                                std::move(annotation));
        }
        if (!session.exhausted() && !session.awaiting_teacher()) {
            session.advance(std::nullopt, gateway);
        }
    }
    session.set_cyclic(options.cyclic);
    return session;
}

std::string render_dialogue(const Transcript& transcript, const SpeakerNames& names) {
    std::ostringstream out;
    for (const Turn& turn : transcript.turns) {
        out << display_name(names, turn.message.speaker_id) << ": " << turn.message.text << '\n';
    }
    return out.str();
}

void to_json(json& j, const SimulationRecord& v) {
    j = json{{"scenario_id", v.scenario_id},
             {"intervention_id", v.intervention_id},
             {"seed", v.seed},
             {"speaker_names", v.speaker_names},
             {"transcript", v.transcript}};
}

void from_json(const json& j, SimulationRecord& v) {
    v.scenario_id = j.value("scenario_id", "");
    v.intervention_id = j.value("intervention_id", "");
    v.seed = j.value("seed", std::uint64_t{0});
    v.speaker_names = j.value("speaker_names", SpeakerNames{});
    j.at("transcript").get_to(v.transcript);
}

SimulationRecord run_simulation(const Scenario& scenario, const InterventionPreset& intervention,
                                const SeededMemories& memories, const RolePolicy& policy,
                                const SessionOptions& options, const Gateway& gateway) {
    SimulationSession session = start_session(scenario, memories, policy, options, gateway);
    if (session.exhausted()) {
        throw Error(ErrorCode::InvalidArgument,
                    "scenario " + scenario.id + " has no teacher slot for the intervention");
    }
    session.advance(intervention.text, gateway);
    return SimulationRecord{scenario.id, intervention.id, options.seed, session.speaker_names(),
                            session.transcript()};
}

}  // namespace tacla
