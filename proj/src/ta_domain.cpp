#include "tacla/ta_domain.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <utility>

namespace tacla {

namespace {

template <class E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

constexpr NameTable<EgoState, 3> kEgoStateNames{{
    {EgoState::Parent, "Parent"},
    {EgoState::Adult, "Adult"},
    {EgoState::Child, "Child"},
}};

constexpr NameTable<FunctionalMode, 5> kModeNames{{
    {FunctionalMode::ControllingParent, "ControllingParent"},
    {FunctionalMode::NurturingParent, "NurturingParent"},
    {FunctionalMode::Adult, "Adult"},
    {FunctionalMode::AdaptedChild, "AdaptedChild"},
    {FunctionalMode::FreeChild, "FreeChild"},
}};

constexpr NameTable<LifePosition, 4> kPositionNames{{
    {LifePosition::IOkYouOk, "IOkYouOk"},
    {LifePosition::IOkYouNotOk, "IOkYouNotOk"},
    {LifePosition::INotOkYouOk, "INotOkYouOk"},
    {LifePosition::INotOkYouNotOk, "INotOkYouNotOk"},
}};

constexpr NameTable<Driver, 5> kDriverNames{{
    {Driver::BePerfect, "BePerfect"},
    {Driver::TryHard, "TryHard"},
    {Driver::BeStrong, "BeStrong"},
    {Driver::PleaseOthers, "PleaseOthers"},
    {Driver::HurryUp, "HurryUp"},
}};

constexpr NameTable<Role, 3> kRoleNames{{
    {Role::Teacher, "teacher"},
    {Role::Student, "student"},
    {Role::System, "system"},
}};

constexpr NameTable<ReactStepKind, 4> kStepNames{{
    {ReactStepKind::Thought, "thought"},
    {ReactStepKind::ToolCall, "tool_call"},
    {ReactStepKind::Observation, "observation"},
    {ReactStepKind::Final, "final"},
}};

constexpr NameTable<TransactionClass, 2> kClassNames{{
    {TransactionClass::Complementary, "Complementary"},
    {TransactionClass::Crossed, "Crossed"},
}};

template <class E, std::size_t N>
std::string_view name_of(const NameTable<E, N>& table, E value) noexcept {
    for (const auto& [e, name] : table) {
        if (e == value) return name;
    }
    return "?";
}

template <class E, std::size_t N>
E parse_exact(const NameTable<E, N>& table, std::string_view label, std::string_view what) {
    for (const auto& [e, name] : table) {
        if (name == label) return e;
    }
    throw Error(ErrorCode::SchemaViolation,
                "unknown " + std::string(what) + " '" + std::string(label) + "'");
}

template <class E>
void enum_from_json(const json& j, E& out, E (*parse)(std::string_view)) {
    out = parse(j.get<std::string>());
}

template <class T>
json state_map_to_json(const StateMap<T>& map) {
    json j = json::object();
    for (const auto& [state, value] : map) j[std::string(to_string(state))] = value;
    return j;
}

template <class T>
StateMap<T> state_map_from_json(const json& j) {
    StateMap<T> out;
    for (const auto& [key, value] : j.items()) out[parse_ego_state(key)] = value.template get<T>();
    return out;
}

}  // namespace

std::string ascii_lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view text) noexcept {
    const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
    while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
    return text;
}

std::string_view to_string(EgoState state) noexcept { return name_of(kEgoStateNames, state); }

EgoState parse_ego_state(std::string_view label) {
    const std::string lowered = ascii_lower(label);
    if (lowered == "parent") return EgoState::Parent;
    if (lowered == "adult") return EgoState::Adult;
    if (lowered == "child") return EgoState::Child;
    throw Error(ErrorCode::UnknownEgoState, "'" + std::string(label) + "'");
}

std::string_view to_string(FunctionalMode mode) noexcept { return name_of(kModeNames, mode); }
FunctionalMode parse_functional_mode(std::string_view label) {
    return parse_exact(kModeNames, label, "functional mode");
}

std::string_view to_string(LifePosition position) noexcept {
    return name_of(kPositionNames, position);
}
LifePosition parse_life_position(std::string_view label) {
    return parse_exact(kPositionNames, label, "life position");
}
std::string_view describe(LifePosition position) noexcept {
    switch (position) {
        case LifePosition::IOkYouOk: return "I'm OK, You're OK";
        case LifePosition::IOkYouNotOk: return "I'm OK, You're not OK";
        case LifePosition::INotOkYouOk: return "I'm not OK, You're OK";
        case LifePosition::INotOkYouNotOk: return "I'm not OK, You're not OK";
    }
    return "";
}

std::string_view to_string(Driver driver) noexcept { return name_of(kDriverNames, driver); }
Driver parse_driver(std::string_view label) { return parse_exact(kDriverNames, label, "driver"); }
std::string_view describe(Driver driver) noexcept {
    switch (driver) {
        case Driver::BePerfect: return "Be Perfect";
        case Driver::TryHard: return "Try Hard";
        case Driver::BeStrong: return "Be Strong";
        case Driver::PleaseOthers: return "Please Others";
        case Driver::HurryUp: return "Hurry Up";
    }
    return "";
}

std::string_view to_string(Role role) noexcept { return name_of(kRoleNames, role); }
Role parse_role(std::string_view label) { return parse_exact(kRoleNames, label, "role"); }

std::string_view to_string(ReactStepKind kind) noexcept { return name_of(kStepNames, kind); }
ReactStepKind parse_react_step_kind(std::string_view label) {
    return parse_exact(kStepNames, label, "react step kind");
}

std::string_view to_string(TransactionClass cls) noexcept { return name_of(kClassNames, cls); }
TransactionClass parse_transaction_class(std::string_view label) {
    return parse_exact(kClassNames, label, "transaction class");
}

std::vector<std::string> validate_persona(const PersonaProfile& profile) {
    std::vector<std::string> violations;
    if (profile.id.empty()) violations.emplace_back("id empty");
    if (profile.display_name.empty()) violations.emplace_back("display_name empty");
    for (EgoState state : kAllEgoStates) {
        const auto it = profile.activation_rules.find(state);
        if (it == profile.activation_rules.end()) {
            violations.push_back("activation_rules missing " + std::string(to_string(state)));
        } else if (trim(it->second).empty()) {
            violations.push_back("activation_rules empty for " + std::string(to_string(state)));
        }
    }
    for (const auto& [state, seeds] : profile.pattern_seeds) {
        std::set<std::string> ids;
        for (const auto& seed : seeds) {
            const std::string where = "pattern_seeds." + std::string(to_string(state));
            if (seed.id.empty()) violations.push_back(where + " has a seed with empty id");
            if (seed.context.empty()) violations.push_back(where + "." + seed.id + " context empty");
            if (seed.pattern.empty()) violations.push_back(where + "." + seed.id + " pattern empty");
            if (!ids.insert(seed.id).second) {
                violations.push_back(where + " duplicate id " + seed.id);
            }
        }
    }
    return violations;
}

const Turn& Transcript::append(Message message, std::optional<TurnAnnotation> annotation) {
    if (trim(message.text).empty()) {
        throw Error(ErrorCode::InvalidArgument, "message text empty");
    }
    if ((message.role == Role::Student) != annotation.has_value()) {
        throw Error(ErrorCode::InvalidArgument,
                    "annotation must be present exactly on student turns");
    }
    message.turn_index = turns.size();
    turns.push_back(Turn{std::move(message), std::move(annotation)});
    return turns.back();
}

std::vector<std::string> validate_transcript(const Transcript& transcript) {
    std::vector<std::string> violations;
    for (std::size_t i = 0; i < transcript.turns.size(); ++i) {
        const Turn& turn = transcript.turns[i];
        const std::string where = "turns[" + std::to_string(i) + "]";
        if (turn.message.turn_index != i) violations.push_back(where + " turn_index out of order");
        if (trim(turn.message.text).empty()) violations.push_back(where + " text empty");
        if (turn.message.speaker_id.empty()) violations.push_back(where + " speaker_id empty");
        const bool student = turn.message.role == Role::Student;
        if (student && !turn.annotation) violations.push_back(where + " student turn lacks annotation");
        if (!student && turn.annotation) violations.push_back(where + " annotation on non-student turn");
    }
    return violations;
}

void to_json(json& j, EgoState v) { j = std::string(to_string(v)); }
void from_json(const json& j, EgoState& v) { enum_from_json(j, v, &parse_ego_state); }
void to_json(json& j, FunctionalMode v) { j = std::string(to_string(v)); }
void from_json(const json& j, FunctionalMode& v) { enum_from_json(j, v, &parse_functional_mode); }
void to_json(json& j, LifePosition v) { j = std::string(to_string(v)); }
void from_json(const json& j, LifePosition& v) { enum_from_json(j, v, &parse_life_position); }
void to_json(json& j, Driver v) { j = std::string(to_string(v)); }
void from_json(const json& j, Driver& v) { enum_from_json(j, v, &parse_driver); }
void to_json(json& j, Role v) { j = std::string(to_string(v)); }
void from_json(const json& j, Role& v) { enum_from_json(j, v, &parse_role); }
void to_json(json& j, ReactStepKind v) { j = std::string(to_string(v)); }
void from_json(const json& j, ReactStepKind& v) { enum_from_json(j, v, &parse_react_step_kind); }
void to_json(json& j, TransactionClass v) { j = std::string(to_string(v)); }
void from_json(const json& j, TransactionClass& v) {
    enum_from_json(j, v, &parse_transaction_class);
}

void to_json(json& j, const PatternRecord& v) {
    j = json{{"id", v.id}, {"context", v.context}, {"pattern", v.pattern}};
}
void from_json(const json& j, PatternRecord& v) {
    j.at("id").get_to(v.id);
    j.at("context").get_to(v.context);
    j.at("pattern").get_to(v.pattern);
}

void to_json(json& j, const PersonaProfile& v) {
    j = json{{"id", v.id},
             {"display_name", v.display_name},
             {"description", v.description},
             {"life_script", v.life_script},
             {"life_position", v.life_position},
             {"drivers", v.drivers},
             {"dominant_state", v.dominant_state},
             {"activation_rules", state_map_to_json(v.activation_rules)},
             {"state_style_notes", state_map_to_json(v.state_style_notes)},
             {"pattern_seeds", state_map_to_json(v.pattern_seeds)}};
}
void from_json(const json& j, PersonaProfile& v) {
    j.at("id").get_to(v.id);
    j.at("display_name").get_to(v.display_name);
    v.description = j.value("description", "");
    v.life_script = j.value("life_script", "");
    j.at("life_position").get_to(v.life_position);
    j.at("drivers").get_to(v.drivers);
    j.at("dominant_state").get_to(v.dominant_state);
    v.activation_rules = state_map_from_json<std::string>(j.at("activation_rules"));
    v.state_style_notes = j.contains("state_style_notes")
                              ? state_map_from_json<std::string>(j.at("state_style_notes"))
                              : StateMap<std::string>{};
    v.pattern_seeds = j.contains("pattern_seeds")
                          ? state_map_from_json<std::vector<PatternRecord>>(j.at("pattern_seeds"))
                          : StateMap<std::vector<PatternRecord>>{};
}

void to_json(json& j, const Message& v) {
    j = json{{"speaker_id", v.speaker_id},
             {"role", v.role},
             {"text", v.text},
             {"turn_index", v.turn_index}};
}
void from_json(const json& j, Message& v) {
    j.at("speaker_id").get_to(v.speaker_id);
    j.at("role").get_to(v.role);
    j.at("text").get_to(v.text);
    j.at("turn_index").get_to(v.turn_index);
}

void to_json(json& j, const ReactStep& v) { j = json{{"kind", v.kind}, {"content", v.content}}; }
void from_json(const json& j, ReactStep& v) {
    j.at("kind").get_to(v.kind);
    j.at("content").get_to(v.content);
}

void to_json(json& j, const TurnAnnotation& v) {
    j = json{{"selected_state", v.selected_state},
             {"rationale", v.rationale},
             {"retrieved_pattern_ids", v.retrieved_pattern_ids},
             {"react_trace", v.react_trace}};
}
void from_json(const json& j, TurnAnnotation& v) {
    j.at("selected_state").get_to(v.selected_state);
    j.at("rationale").get_to(v.rationale);
    j.at("retrieved_pattern_ids").get_to(v.retrieved_pattern_ids);
    j.at("react_trace").get_to(v.react_trace);
}

void to_json(json& j, const Turn& v) {
    j = v.message;
    if (v.annotation) j["annotation"] = *v.annotation;
}
void from_json(const json& j, Turn& v) {
    v.message = j.get<Message>();
    if (j.contains("annotation") && !j.at("annotation").is_null()) {
        v.annotation = j.at("annotation").get<TurnAnnotation>();
    } else {
        v.annotation.reset();
    }
}

void to_json(json& j, const Transcript& v) { j = json{{"turns", v.turns}}; }
void from_json(const json& j, Transcript& v) { j.at("turns").get_to(v.turns); }

void to_json(json& j, const TransactionVector& v) {
    j = json{{"source", v.source}, {"addressed", v.addressed}};
}
void from_json(const json& j, TransactionVector& v) {
    j.at("source").get_to(v.source);
    j.at("addressed").get_to(v.addressed);
}

json transcript_to_public_json(const Transcript& transcript) {
    json turns = json::array();
    for (const Turn& turn : transcript.turns) turns.push_back(turn.message);
    return json{{"turns", std::move(turns)}};
}

}  // namespace tacla
