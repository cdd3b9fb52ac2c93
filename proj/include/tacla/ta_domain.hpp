#pragma once

// Transactional Analysis vocabulary and the conversation data model shared by
// every other module. All types are plain values; JSON encoding uses
// lower_snake_case field names and PascalCase enum strings.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tacla/error.hpp"

namespace tacla {

using json = nlohmann::json;

enum class EgoState { Parent, Adult, Child };

inline constexpr std::array<EgoState, 3> kAllEgoStates{EgoState::Parent, EgoState::Adult,
                                                      EgoState::Child};

std::string_view to_string(EgoState state) noexcept;

/// Case-insensitive match on "parent", "adult", "child". Anything else,
/// including functional-mode labels such as "Adapted Child", is rejected
/// with ErrorCode::UnknownEgoState.
EgoState parse_ego_state(std::string_view label);

/// Functional subdivisions of the three ego states. Rebellious Child is a
/// descriptive flavour of AdaptedChild, not a separate mode.
enum class FunctionalMode { ControllingParent, NurturingParent, Adult, AdaptedChild, FreeChild };

inline constexpr std::array<FunctionalMode, 5> kAllFunctionalModes{
    FunctionalMode::ControllingParent, FunctionalMode::NurturingParent, FunctionalMode::Adult,
    FunctionalMode::AdaptedChild, FunctionalMode::FreeChild};

constexpr EgoState mode_to_state(FunctionalMode mode) noexcept {
    switch (mode) {
        case FunctionalMode::ControllingParent:
        case FunctionalMode::NurturingParent:
            return EgoState::Parent;
        case FunctionalMode::Adult:
            return EgoState::Adult;
        case FunctionalMode::AdaptedChild:
        case FunctionalMode::FreeChild:
            return EgoState::Child;
    }
    return EgoState::Adult;
}

std::string_view to_string(FunctionalMode mode) noexcept;
FunctionalMode parse_functional_mode(std::string_view label);

enum class LifePosition { IOkYouOk, IOkYouNotOk, INotOkYouOk, INotOkYouNotOk };
std::string_view to_string(LifePosition position) noexcept;
LifePosition parse_life_position(std::string_view label);
/// "I'm OK, You're not OK" style rendering for prompts.
std::string_view describe(LifePosition position) noexcept;

enum class Driver { BePerfect, TryHard, BeStrong, PleaseOthers, HurryUp };
std::string_view to_string(Driver driver) noexcept;
Driver parse_driver(std::string_view label);
/// "Be Perfect" style rendering for prompts.
std::string_view describe(Driver driver) noexcept;

/// One {context, pattern} memory entry. `context` is the embedded text.
struct PatternRecord {
    std::string id;
    std::string context;
    std::string pattern;

    bool operator==(const PatternRecord&) const = default;
};

template <class T>
using StateMap = std::map<EgoState, T>;

struct PersonaProfile {
    std::string id;
    std::string display_name;
    std::string description;
    std::string life_script;
    LifePosition life_position = LifePosition::IOkYouOk;
    std::vector<Driver> drivers;
    EgoState dominant_state = EgoState::Adult;
    StateMap<std::string> activation_rules;
    StateMap<std::string> state_style_notes;
    StateMap<std::vector<PatternRecord>> pattern_seeds;

    bool operator==(const PersonaProfile&) const = default;
};

/// Returns one human-readable violation per broken invariant; empty means valid.
std::vector<std::string> validate_persona(const PersonaProfile& profile);

enum class Role { Teacher, Student, System };
std::string_view to_string(Role role) noexcept;
Role parse_role(std::string_view label);

struct Message {
    std::string speaker_id;
    Role role = Role::Student;
    std::string text;
    std::size_t turn_index = 0;

    bool operator==(const Message&) const = default;
};

enum class ReactStepKind { Thought, ToolCall, Observation, Final };
std::string_view to_string(ReactStepKind kind) noexcept;
ReactStepKind parse_react_step_kind(std::string_view label);

struct ReactStep {
    ReactStepKind kind = ReactStepKind::Thought;
    std::string content;

    bool operator==(const ReactStep&) const = default;
};

struct TurnAnnotation {
    EgoState selected_state = EgoState::Adult;
    std::string rationale;
    std::vector<std::string> retrieved_pattern_ids;
    std::vector<ReactStep> react_trace;

    bool operator==(const TurnAnnotation&) const = default;
};

struct Turn {
    Message message;
    std::optional<TurnAnnotation> annotation;

    bool operator==(const Turn&) const = default;
};

/// Ordered, annotated conversation. `append` assigns turn indices and
/// enforces the per-turn invariants; direct mutation of `turns` is allowed
/// for decoding, after which `validate_transcript` reports problems.
struct Transcript {
    std::vector<Turn> turns;

    const Turn& append(Message message, std::optional<TurnAnnotation> annotation = std::nullopt);

    [[nodiscard]] std::size_t size() const noexcept { return turns.size(); }
    [[nodiscard]] bool empty() const noexcept { return turns.empty(); }

    bool operator==(const Transcript&) const = default;
};

std::vector<std::string> validate_transcript(const Transcript& transcript);

/// Direction of one utterance: the state spoken from and the state addressed
/// in the listener.
struct TransactionVector {
    EgoState source = EgoState::Adult;
    EgoState addressed = EgoState::Adult;

    bool operator==(const TransactionVector&) const = default;
};

enum class TransactionClass { Complementary, Crossed };
std::string_view to_string(TransactionClass cls) noexcept;
TransactionClass parse_transaction_class(std::string_view label);

// JSON codec. Decoders throw nlohmann::json exceptions or tacla::Error;
// file-level loaders convert both into ErrorCode::SchemaViolation.
void to_json(json& j, EgoState v);
void from_json(const json& j, EgoState& v);
void to_json(json& j, FunctionalMode v);
void from_json(const json& j, FunctionalMode& v);
void to_json(json& j, LifePosition v);
void from_json(const json& j, LifePosition& v);
void to_json(json& j, Driver v);
void from_json(const json& j, Driver& v);
void to_json(json& j, Role v);
void from_json(const json& j, Role& v);
void to_json(json& j, ReactStepKind v);
void from_json(const json& j, ReactStepKind& v);
void to_json(json& j, TransactionClass v);
void from_json(const json& j, TransactionClass& v);

void to_json(json& j, const PatternRecord& v);
void from_json(const json& j, PatternRecord& v);
void to_json(json& j, const PersonaProfile& v);
void from_json(const json& j, PersonaProfile& v);
void to_json(json& j, const Message& v);
void from_json(const json& j, Message& v);
void to_json(json& j, const ReactStep& v);
void from_json(const json& j, ReactStep& v);
void to_json(json& j, const TurnAnnotation& v);
void from_json(const json& j, TurnAnnotation& v);
void to_json(json& j, const Turn& v);
void from_json(const json& j, Turn& v);
void to_json(json& j, const Transcript& v);
void from_json(const json& j, Transcript& v);
void to_json(json& j, const TransactionVector& v);
void from_json(const json& j, TransactionVector& v);

/// Transcript encoding without annotations, for anything a trainee or a judge sees.
json transcript_to_public_json(const Transcript& transcript);

/// Lower-case ASCII copy.
std::string ascii_lower(std::string_view text);
/// Strips leading and trailing ASCII whitespace.
std::string_view trim(std::string_view text) noexcept;

}  // namespace tacla
