#pragma once

// The student response cycle: an orchestrator picks exactly one ego state,
// then that ego state's agent runs a short ReAct loop whose only tool recalls
// patterns from its own memory store, and its final answer becomes the turn.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tacla/llm_gateway.hpp"
#include "tacla/pattern_memory.hpp"
#include "tacla/ta_domain.hpp"

namespace tacla {

inline constexpr std::string_view kTeacherSlot = "TEACHER";
inline constexpr std::string_view kTeacherSpeakerId = "teacher";
inline constexpr std::string_view kSystemSpeakerId = "system";
inline constexpr std::string_view kFallbackRationale = "fallback:dominant";
inline constexpr std::string_view kRecallTool = "recall_patterns";

/// speaker_id -> display name used when rendering dialogue.
using SpeakerNames = std::map<std::string, std::string>;

std::string display_name(const SpeakerNames& names, const std::string& speaker_id);

struct EngineOptions {
    std::size_t window = 12;            // transcript turns shown to every prompt
    int max_react_iterations = 3;       // model calls per ego-state turn
    int orchestrator_retries = 2;       // re-asks before falling back to the dominant state
    int max_output_tokens = kDialogueMaxTokens;

    bool operator==(const EngineOptions&) const = default;
};

struct StudentAgent {
    PersonaProfile persona;
    StateMap<PatternStore> stores;
    RolePolicy role_policy;
};

/// Throws InvalidArgument if the persona is invalid or a store is missing or
/// filed under the wrong ego state.
void validate_student(const StudentAgent& agent);

struct Selection {
    EgoState ego_state = EgoState::Adult;
    std::string rationale;
    int attempts = 0;  // orchestrator requests issued
};

/// Parses a strict {"ego_state": ..., "rationale": ...} object, tolerating
/// prose or code fences around it. Returns nullopt on any defect.
std::optional<Selection> parse_selection(std::string_view reply);

/// Dialogue lines "Name: text" for the last `window` turns. When
/// `self_id` is given, that student's own turns are tagged with the ego
/// state it spoke from.
std::string render_window(const Transcript& transcript, const SpeakerNames& names,
                          std::size_t window, const std::string* self_id = nullptr);

/// Orchestrator system prompt, including the persona's activation patterns
/// in the "EGO STATE ACTIVATION PATTERNS:" block format.
std::string orchestrator_prompt(const PersonaProfile& persona);

Selection select_ego_state(const StudentAgent& agent, const Message& incoming,
                           const Transcript& transcript, const Gateway& gateway,
                           const SpeakerNames& names, const EngineOptions& options = {});

/// Base instruction text for one ego state.
std::string_view base_state_prompt(EgoState state) noexcept;

std::string assemble_state_prompt(const StudentAgent& agent, EgoState state,
                                  const std::vector<PatternRecord>& retrieved,
                                  const Transcript& transcript, const SpeakerNames& names,
                                  std::size_t window = 12);

struct ParsedReply {
    std::vector<ReactStep> steps;       // thought and/or one tool_call or final
    std::optional<std::string> final_text;
    std::optional<std::string> tool_argument;
};

/// Reads the "Thought:/Action:/Final:" protocol. An Action naming anything
/// other than recall_patterns is kept as a thought.
ParsedReply parse_react_reply(std::string_view reply);

struct ReactResult {
    std::string response;
    std::vector<ReactStep> trace;
    std::vector<std::string> retrieved_ids;
};

/// At most `max_react_iterations` model calls. The recall tool embeds the
/// incoming message text and searches stores[state] only.
ReactResult run_react(const StudentAgent& agent, EgoState state, const Message& incoming,
                      const Transcript& transcript, const Gateway& gateway,
                      const SpeakerNames& names, const EngineOptions& options = {});

class SimulationSession {
public:
    SimulationSession(std::string scenario_id, std::vector<StudentAgent> students,
                      std::vector<std::string> turn_schedule, SpeakerNames names,
                      std::uint64_t rng_seed, EngineOptions options = {});

    /// Orchestrate and generate one turn for `student_id`, appending it.
    const Turn& generate_student_turn(const std::string& student_id, const Message& incoming,
                                      const Gateway& gateway);

    /// Appends the teacher message (if any) and then lets students speak in
    /// schedule order up to the next teacher slot or the end. Throws
    /// ScheduleExhausted at the end of a non-cyclic schedule and WrongState
    /// when a teacher slot is due but no message was given.
    std::vector<Turn> advance(const std::optional<std::string>& teacher_message,
                              const Gateway& gateway);

    /// Appends a turn produced outside the engine (scripted openings, system notes).
    const Turn& append_turn(Message message, std::optional<TurnAnnotation> annotation);

    [[nodiscard]] bool awaiting_teacher() const noexcept;
    [[nodiscard]] bool exhausted() const noexcept;

    /// Cyclic schedules wrap to the start instead of raising ScheduleExhausted.
    void set_cyclic(bool cyclic) noexcept { cyclic_ = cyclic; }
    [[nodiscard]] bool cyclic() const noexcept { return cyclic_; }

    [[nodiscard]] const std::string& scenario_id() const noexcept { return scenario_id_; }
    [[nodiscard]] const Transcript& transcript() const noexcept { return transcript_; }
    [[nodiscard]] const std::vector<std::string>& turn_schedule() const noexcept {
        return schedule_;
    }
    [[nodiscard]] std::size_t cursor() const noexcept { return cursor_; }
    [[nodiscard]] std::uint64_t rng_seed() const noexcept { return rng_seed_; }
    [[nodiscard]] const SpeakerNames& speaker_names() const noexcept { return names_; }
    [[nodiscard]] const std::vector<StudentAgent>& students() const noexcept { return students_; }
    [[nodiscard]] const StudentAgent& student(const std::string& id) const;
    [[nodiscard]] const EngineOptions& options() const noexcept { return options_; }

    /// Restores persisted progress. Throws InvalidArgument if the transcript
    /// is invalid or the cursor is out of range.
    void restore(Transcript transcript, std::size_t cursor);

private:
    std::string scenario_id_;
    std::vector<StudentAgent> students_;
    std::vector<std::string> schedule_;
    SpeakerNames names_;
    std::uint64_t rng_seed_;
    EngineOptions options_;
    Transcript transcript_;
    std::size_t cursor_ = 0;
    bool cyclic_ = false;
};

}  // namespace tacla
