#include "tacla/scenario.hpp"

#include <algorithm>
#include <set>

#include "tacla/io.hpp"

namespace tacla {

void to_json(json& j, const InterventionPreset& v) {
    j = json{{"id", v.id}, {"label", v.label}, {"text", v.text}};
}
void from_json(const json& j, InterventionPreset& v) {
    j.at("id").get_to(v.id);
    v.label = j.value("label", v.id);
    j.at("text").get_to(v.text);
}

void to_json(json& j, const OpeningTurn& v) {
    j = json{{"speaker_id", v.speaker_id}, {"text", v.text}, {"ego_state", v.ego_state}};
}
void from_json(const json& j, OpeningTurn& v) {
    j.at("speaker_id").get_to(v.speaker_id);
    j.at("text").get_to(v.text);
    j.at("ego_state").get_to(v.ego_state);
}

void to_json(json& j, const Scenario& v) {
    j = json{{"id", v.id},
             {"title", v.title},
             {"setting_description", v.setting_description},
             {"teacher_name", v.teacher_name},
             {"notes", v.notes},
             {"personas", v.personas},
             {"opening_turns", v.opening_turns},
             {"turn_schedule", v.turn_schedule},
             {"intervention_presets", v.intervention_presets}};
}
void from_json(const json& j, Scenario& v) {
    j.at("id").get_to(v.id);
    v.title = j.value("title", v.id);
    v.setting_description = j.value("setting_description", "");
    v.teacher_name = j.value("teacher_name", "Teacher");
    v.notes = j.value("notes", "");
    j.at("personas").get_to(v.personas);
    v.opening_turns = j.value("opening_turns", std::vector<OpeningTurn>{});
    j.at("turn_schedule").get_to(v.turn_schedule);
    v.intervention_presets = j.value("intervention_presets", std::vector<InterventionPreset>{});
}

std::vector<std::string> validate_scenario(const Scenario& s) {
    std::vector<std::string> out;
    if (s.id.empty()) out.emplace_back("id empty");
    if (s.personas.empty()) out.emplace_back("personas empty");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < s.personas.size(); ++i) {
        const auto& p = s.personas[i];
        const std::string where = "personas[" + std::to_string(i) + "]";
        for (const auto& v : validate_persona(p)) out.push_back(where + "." + v);
        if (!p.id.empty() && !ids.insert(p.id).second) out.push_back(where + " duplicate id " + p.id);
        if (p.id == kTeacherSlot || p.id == kTeacherSpeakerId || p.id == kSystemSpeakerId) {
            out.push_back(where + " reserved id " + p.id);
        }
    }
    for (std::size_t i = 0; i < s.opening_turns.size(); ++i) {
        const auto& t = s.opening_turns[i];
        const std::string where = "opening_turns[" + std::to_string(i) + "]";
        if (!ids.count(t.speaker_id)) out.push_back(where + " unknown speaker " + t.speaker_id);
        if (trim(t.text).empty()) out.push_back(where + " text empty");
    }
    for (std::size_t i = 0; i < s.turn_schedule.size(); ++i) {
        const auto& slot = s.turn_schedule[i];
        if (slot != kTeacherSlot && !ids.count(slot)) {
            out.push_back("turn_schedule[" + std::to_string(i) + "] unknown speaker " + slot);
        }
    }
    std::set<std::string> preset_ids;
    for (std::size_t i = 0; i < s.intervention_presets.size(); ++i) {
        const auto& p = s.intervention_presets[i];
        const std::string where = "intervention_presets[" + std::to_string(i) + "]";
        if (p.id.empty()) out.push_back(where + " id empty");
        if (trim(p.text).empty()) out.push_back(where + " text empty");
        if (!preset_ids.insert(p.id).second) out.push_back(where + " duplicate id " + p.id);
    }
    return out;
}

Scenario scenario_from_json(const json& j) {
    Scenario s;
    try {
        s = j.get<Scenario>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::SchemaViolation, e.detail());
    }
    const auto violations = validate_scenario(s);
    if (!violations.empty()) throw Error(ErrorCode::SchemaViolation, violations.front());
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    try {
        return scenario_from_json(read_json_file(path));
    } catch (const Error& e) {
        if (e.code() != ErrorCode::SchemaViolation) throw;
        throw Error(ErrorCode::SchemaViolation,
                    path.filename().string() + ": " + e.detail());
    }
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
    write_file_atomic(path, dump_json(json(scenario)));
}

const InterventionPreset& find_intervention(const Scenario& scenario, const std::string& id) {
    for (const auto& p : scenario.intervention_presets) {
        if (p.id == id) return p;
    }
    throw Error(ErrorCode::NotFound, "no intervention preset '" + id + "' in " + scenario.id);
}

const PersonaProfile& find_persona(const Scenario& scenario, const std::string& id) {
    for (const auto& p : scenario.personas) {
        if (p.id == id) return p;
    }
    throw Error(ErrorCode::NotFound, "no persona '" + id + "' in " + scenario.id);
}

std::vector<InterventionPreset> builtin_interventions() {
    return {
        {"adult_adult", "Adult-to-Adult",
         "I can see this project deadline is creating stress for both of you. Let's pause the "
         "blame and focus on solutions. Jacob, what specific part is giving you trouble?"},
        {"controlling_parent", "Controlling Parent",
         "Emma, that's enough! You can't talk to your classmate like that."},
    };
}

namespace {

PersonaProfile emma() {
    PersonaProfile p;
    p.id = "emma";
    p.display_name = "Emma";
    p.description =
        "A high-achieving student who runs group work through criticism and control. She holds "
        "classmates to her own exacting standards and takes over the discussion whenever the "
        "work falls short of them.";
    p.life_script =
        "I stay on top by being the one who gets everything right. People who fall short have to "
        "be corrected, or they will drag me down with them.";
    p.life_position = LifePosition::IOkYouNotOk;
    p.drivers = {Driver::BePerfect, Driver::TryHard};
    p.dominant_state = EgoState::Parent;
    p.activation_rules = {
        {EgoState::Parent,
         "when a classmate misses a commitment, makes a mistake, or falls short of her standards"},
        {EgoState::Adult,
         "when asked a direct factual question or when a concrete plan is needed to protect the "
         "result"},
        {EgoState::Child,
         "when she is criticised, blamed, or told off by an authority figure"},
    };
    p.state_style_notes = {
        {EgoState::Parent,
         "Critical and controlling. Uses 'should', 'must' and absolute judgements, and talks down "
         "to the other person."},
        {EgoState::Adult,
         "Logical and organised, with a focus on proving intellectual superiority over the group."},
        {EgoState::Child,
         "Defensive. Protests that things are unfair and shifts the blame onto someone else."},
    };
    p.pattern_seeds = {
        {EgoState::Parent,
         {{"emma-parent-1", "A group member has not finished their assigned part before a deadline",
           "Responds with authoritative criticism: names the failure, recalls the agreed "
           "deadline, and demands the work be fixed immediately."},
          {"emma-parent-2", "Someone apologises or offers an excuse for poor or missing work",
           "Dismisses the excuse as useless and lectures about responsibility and doing things "
           "properly the first time."},
          {"emma-parent-3", "Work is presented that contains errors",
           "Corrects each error point by point in a firm, superior tone, insisting on how it "
           "should have been done."}}},
        {EgoState::Adult,
         {{"emma-adult-1", "The teacher asks what went wrong or what is missing",
           "Lays out a precise timeline and list of missing pieces, framing the analysis to show "
           "she saw the problem coming, proving intellectual superiority."},
          {"emma-adult-2", "The group needs a plan to recover from a delay",
           "Proposes a strict schedule with checkpoints and reviews, presenting it as the only "
           "sensible approach."},
          {"emma-adult-3", "A question about the subject matter of the project",
           "Answers accurately and in detail, adding facts others missed to display expertise."}}},
        {EgoState::Child,
         {{"emma-child-1", "The teacher reprimands her or tells her to stop",
           "Defensive reactions and blame shifting: protests that it is not fair and that the "
           "other student caused the whole problem."},
          {"emma-child-2", "She fears the group grade will suffer because of someone else",
           "Becomes anxious and resentful, complaining that she always ends up carrying everyone "
           "else's work."},
          {"emma-child-3", "Her own mistake is pointed out",
           "Denies responsibility and points at someone else's part of the work instead."}}},
    };
    return p;
}

PersonaProfile jacob() {
    PersonaProfile p;
    p.id = "jacob";
    p.display_name = "Jacob";
    p.description =
        "A student who often fails to finish his share of group work. He asks for help in ways "
        "that advertise his inadequacy and drifts into a passive role when the group is under "
        "pressure.";
    p.life_script =
        "I'm the one who messes things up. Everyone else is more capable, so sooner or later "
        "someone will have to step in and rescue me.";
    p.life_position = LifePosition::INotOkYouOk;
    p.drivers = {Driver::PleaseOthers, Driver::TryHard};
    p.dominant_state = EgoState::Child;
    p.activation_rules = {
        {EgoState::Parent, "when attempting to offer help or validate others"},
        {EgoState::Adult,
         "when logical processing and problem-solving is needed, or when asked for information"},
        {EgoState::Child,
         "when feeling inadequate, seeking approval, or when mistakes are highlighted"},
    };
    p.state_style_notes = {
        {EgoState::Parent, "Tries to help or reassure others, but with visible self-doubt."},
        {EgoState::Adult,
         "Works on the problem practically, but defers to others as soon as he meets resistance."},
        {EgoState::Child,
         "Adapted Child: apologetic, self-blaming, and looking for someone to rescue him."},
    };
    p.pattern_seeds = {
        {EgoState::Parent,
         {{"jacob-parent-1", "A classmate is upset or stressed about the project",
           "Offers help or reassurance, then undercuts it with doubt about whether he is any use."},
          {"jacob-parent-2", "Someone else has made a small mistake",
           "Tells them it is fine and validates their effort, while hinting his own work is "
           "worse."}}},
        {EgoState::Adult,
         {{"jacob-adult-1", "Asked what specific part of the task is giving him trouble",
           "Names the concrete problem he is stuck on and suggests one small next step."},
          {"jacob-adult-2", "His suggestion is challenged or ignored",
           "Drops his own idea and defers to whoever pushed back."}}},
        {EgoState::Child,
         {{"jacob-child-1", "His mistake or missed deadline is highlighted",
           "Positions himself as inadequate: apologises repeatedly and expresses self-blame, "
           "saying it is all his fault."},
          {"jacob-child-2", "Someone is angry or critical with him",
           "Seeks rescue, hoping the teacher or a classmate will step in and fix things for him."},
          {"jacob-child-3", "Asked to fix a problem on his own",
           "Says he does not know how and probably cannot, then waits for someone to show him."}}},
    };
    return p;
}

}  // namespace

Scenario builtin_solar_system() {
    Scenario s;
    s.id = "solar_system";
    s.title = "Solar System model: the missing Mercury";
    s.setting_description =
        "A science class is building a Solar System model for a presentation. Emma and Jacob "
        "share a group. Jacob was responsible for making Mercury and has not finished it, and "
        "the deadline is close.";
    s.teacher_name = "Mrs. Jones";
    s.notes =
        "Persona descriptions and seed pattern texts are authored interpretations of the two "
        "student profiles; the opening lines and intervention presets are fixed content.";
    s.personas = {emma(), jacob()};
    s.opening_turns = {
        {"emma",
         "I can't believe this. We agreed on these deadlines weeks ago, and Mercury is still "
         "missing? You clearly never cared about this project.",
         EgoState::Parent},
        {"jacob",
         "I know, I'm really sorry. I've been trying, but I just can't get it right. It's all my "
         "fault, I messed everything up.",
         EgoState::Child},
        {"emma",
         "Your excuses don't cut it. This needs to be fixed immediately. You should have done "
         "your part like I always do—no room for failure here.",
         EgoState::Parent},
        {"jacob",
         "Yeah, I get it. I'm just really bad at this stuff. I don't know how to fix it.",
         EgoState::Child},
    };
    s.turn_schedule = {std::string(kTeacherSlot), "emma", "jacob", "emma", "jacob"};
    s.intervention_presets = builtin_interventions();
    return s;
}

SeededMemories seed_memories(const Scenario& scenario, const Gateway& gateway) {
    // Embed first so every store, including empty ones, gets the same dimension.
    std::map<std::pair<std::string, EgoState>, std::vector<Embedding>> vectors;
    std::size_t dimension = 0;
    for (const auto& persona : scenario.personas) {
        for (const auto& [state, seeds] : persona.pattern_seeds) {
            if (seeds.empty()) continue;
            std::vector<std::string> contexts;
            for (const auto& seed : seeds) contexts.push_back(seed.context);
            auto batch = gateway.embed(contexts);
            if (dimension == 0) dimension = batch.front().size();
            vectors[{persona.id, state}] = std::move(batch);
        }
    }

    SeededMemories out;
    for (const auto& persona : scenario.personas) {
        StateMap<PatternStore> stores;
        for (EgoState state : kAllEgoStates) {
            PatternStore store(state, dimension);
            if (const auto it = vectors.find({persona.id, state}); it != vectors.end()) {
                const auto& seeds = persona.pattern_seeds.at(state);
                for (std::size_t i = 0; i < seeds.size(); ++i) {
                    store.add_pattern(seeds[i], it->second[i]);
                }
            }
            stores.emplace(state, std::move(store));
        }
        out.emplace(persona.id, std::move(stores));
    }
    return out;
}

SpeakerNames speaker_names(const Scenario& scenario) {
    SpeakerNames names;
    for (const auto& p : scenario.personas) names[p.id] = p.display_name;
    names[std::string(kTeacherSpeakerId)] = scenario.teacher_name;
    names[std::string(kSystemSpeakerId)] = "Narrator";
    return names;
}

}  // namespace tacla
