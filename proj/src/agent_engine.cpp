#include "tacla/agent_engine.hpp"

#include <algorithm>
#include <sstream>

namespace tacla {

namespace {

constexpr std::string_view kRetryInstruction =
    "That answer could not be used. Reply with only the JSON object "
    "{\"ego_state\": \"Parent\" | \"Adult\" | \"Child\", \"rationale\": \"...\"}.";

constexpr std::string_view kContinueInstruction =
    "Continue. When you are ready, reply with a line starting with \"Final:\".";

bool starts_with_ci(std::string_view text, std::string_view prefix) {
    if (text.size() < prefix.size()) return false;
    return ascii_lower(text.substr(0, prefix.size())) == ascii_lower(prefix);
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

std::string join_drivers(const std::vector<Driver>& drivers) {
    std::string out;
    for (Driver d : drivers) {
        if (!out.empty()) out += ", ";
        out += describe(d);
    }
    return out.empty() ? "none" : out;
}

// Last model text with protocol scaffolding removed; used when the loop is
// cut off before a Final line.
std::string forced_final_text(std::string_view reply) {
    std::string out;
    for (std::string_view line : split_lines(reply)) {
        std::string_view t = trim(line);
        if (starts_with_ci(t, "Action:")) continue;
        if (starts_with_ci(t, "Thought:")) t = trim(t.substr(8));
        if (t.empty()) continue;
        if (!out.empty()) out += ' ';
        out += t;
    }
    if (out.empty()) out = std::string(trim(reply));
    return out;
}

std::string render_observation(EgoState state, const std::vector<RetrievedPattern>& hits) {
    std::ostringstream out;
    out << kRecallTool << "[" << to_string(state) << "] returned " << hits.size()
        << (hits.size() == 1 ? " pattern" : " patterns");
    for (const auto& hit : hits) {
        out << "\n- (" << hit.record.id << ") when " << hit.record.context << ": "
            << hit.record.pattern;
    }
    return out.str();
}

}  // namespace

std::string display_name(const SpeakerNames& names, const std::string& speaker_id) {
    const auto it = names.find(speaker_id);
    return it != names.end() ? it->second : speaker_id;
}

void validate_student(const StudentAgent& agent) {
    const auto violations = validate_persona(agent.persona);
    if (!violations.empty()) {
        throw Error(ErrorCode::InvalidArgument,
                    "persona " + agent.persona.id + ": " + violations.front());
    }
    for (EgoState state : kAllEgoStates) {
        const auto it = agent.stores.find(state);
        if (it == agent.stores.end()) {
            throw Error(ErrorCode::InvalidArgument, "student " + agent.persona.id +
                                                        " lacks a " +
                                                        std::string(to_string(state)) + " store");
        }
        if (it->second.ego_state() != state) {
            throw Error(ErrorCode::InvalidArgument, "store filed under the wrong ego state");
        }
    }
}

std::optional<Selection> parse_selection(std::string_view reply) {
    const auto open = reply.find('{');
    const auto close = reply.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
        return std::nullopt;
    }
    try {
        const json j = json::parse(reply.substr(open, close - open + 1));
        if (!j.is_object() || !j.contains("ego_state") || !j.at("ego_state").is_string()) {
            return std::nullopt;
        }
        Selection s;
        s.ego_state = parse_ego_state(j.at("ego_state").get<std::string>());
        if (j.contains("rationale") && j.at("rationale").is_string()) {
            s.rationale = j.at("rationale").get<std::string>();
        }
        return s;
    } catch (const json::exception&) {
        return std::nullopt;
    } catch (const Error&) {
        return std::nullopt;
    }
}

std::string render_window(const Transcript& transcript, const SpeakerNames& names,
                          std::size_t window, const std::string* self_id) {
    const std::size_t n = transcript.turns.size();
    const std::size_t first = n > window ? n - window : 0;
    std::ostringstream out;
    for (std::size_t i = first; i < n; ++i) {
        const Turn& turn = transcript.turns[i];
        if (i != first) out << '\n';
        out << display_name(names, turn.message.speaker_id) << ": " << turn.message.text;
        if (self_id && turn.annotation && turn.message.speaker_id == *self_id) {
            out << "  [you spoke from your " << to_string(turn.annotation->selected_state)
                << " ego state]";
        }
    }
    return out.str();
}

std::string orchestrator_prompt(const PersonaProfile& persona) {
    std::ostringstream out;
    out << "You are the Orchestrator inside " << persona.display_name
        << ", a student in a classroom simulation grounded in Transactional Analysis.\n"
        << "Decide which single ego state (Parent, Adult or Child) " << persona.display_name
        << " responds from in the next turn. Exactly one ego state is active at a time.\n\n"
        << "PERSONA: " << persona.description << "\n"
        << "LIFE SCRIPT: " << persona.life_script << "\n"
        << "LIFE POSITION: " << describe(persona.life_position) << "\n"
        << "DRIVERS: " << join_drivers(persona.drivers) << "\n"
        << "DOMINANT EGO STATE: " << to_string(persona.dominant_state) << "\n\n"
        << "EGO STATE ACTIVATION PATTERNS:\n";
    for (std::size_t i = 0; i < kAllEgoStates.size(); ++i) {
        const EgoState state = kAllEgoStates[i];
        const auto it = persona.activation_rules.find(state);
        const std::string rule = it != persona.activation_rules.end() ? it->second : "";
        out << "- Use " << to_string(state) << " ego state " << rule
            << (i + 1 == kAllEgoStates.size() ? "." : ";") << "\n";
    }
    out << "\nReply with one JSON object and nothing else:\n"
        << "{\"ego_state\": \"Parent\" | \"Adult\" | \"Child\", "
           "\"rationale\": \"<one sentence naming the trigger>\"}";
    return out.str();
}

Selection select_ego_state(const StudentAgent& agent, const Message& incoming,
                           const Transcript& transcript, const Gateway& gateway,
                           const SpeakerNames& names, const EngineOptions& options) {
    const std::string& self = agent.persona.id;
    std::ostringstream user;
    user << "Conversation so far (most recent last):\n"
         << render_window(transcript, names, options.window, &self) << "\n\n"
         << "Incoming message from " << display_name(names, incoming.speaker_id) << ": \""
         << incoming.text << "\"\n\n"
         << "Which ego state does " << agent.persona.display_name << " respond from?";

    ChatRequest request;
    request.system_prompt = orchestrator_prompt(agent.persona);
    request.messages.push_back({"user", user.str()});
    request.temperature = agent.role_policy.temperature(AgentRole::Orchestrator);
    request.max_output_tokens = options.max_output_tokens;
    request.agent_role = AgentRole::Orchestrator;

    const int attempts = 1 + std::max(options.orchestrator_retries, 0);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        const ChatResponse response = gateway.chat(request);
        if (auto selection = parse_selection(response.content)) {
            selection->attempts = attempt;
            return *selection;
        }
        request.messages.push_back({"assistant", response.content.empty() ? "(empty)"
                                                                          : response.content});
        request.messages.push_back({"user", std::string(kRetryInstruction)});
    }
    return Selection{agent.persona.dominant_state, std::string(kFallbackRationale), attempts};
}

std::string_view base_state_prompt(EgoState state) noexcept {
    switch (state) {
        case EgoState::Parent:
            return "You speak from the Parent ego state. Respond based on learned rules, values, "
                   "and an authoritative or nurturing stance.";
        case EgoState::Adult:
            return "You speak from the Adult ego state. Be objective, rational, focus on facts, "
                   "and problem-solve in the present moment.";
        case EgoState::Child:
            return "You speak from the Child ego state. Respond based on feelings, past "
                   "experiences, and impulses; let joy, fear, or curiosity show.";
    }
    return "";
}

std::string assemble_state_prompt(const StudentAgent& agent, EgoState state,
                                  const std::vector<PatternRecord>& retrieved,
                                  const Transcript& transcript, const SpeakerNames& names,
                                  std::size_t window) {
    const PersonaProfile& p = agent.persona;
    std::ostringstream out;
    out << base_state_prompt(state) << "\n\n"
        << "You are " << p.display_name << ". " << p.description << "\n";
    if (const auto it = p.state_style_notes.find(state);
        it != p.state_style_notes.end() && !it->second.empty()) {
        out << "In this ego state: " << it->second << "\n";
    }
    if (!retrieved.empty()) {
        out << "\nPAST BEHAVIOR (how you acted in similar situations):\n";
        for (const auto& r : retrieved) {
            out << "- When " << r.context << ": " << r.pattern << "\n";
        }
    }
    out << "\nCONVERSATION SO FAR:\n" << render_window(transcript, names, window) << "\n\n"
        << "Work in steps. Each reply uses one of these line formats:\n"
        << "Thought: <private reasoning>\n"
        << "Action: " << kRecallTool << ": <situation to look up in your memory>\n"
        << "Final: <what " << p.display_name
        << " says out loud, one to three sentences, in character>";
    return out.str();
}

ParsedReply parse_react_reply(std::string_view reply) {
    ParsedReply parsed;
    const auto lines = split_lines(reply);
    std::string thought;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string_view line = trim(lines[i]);
        if (starts_with_ci(line, "Final:")) {
            std::string text(trim(line.substr(6)));
            for (std::size_t k = i + 1; k < lines.size(); ++k) {
                const auto rest = trim(lines[k]);
                if (rest.empty()) continue;
                if (!text.empty()) text += ' ';
                text += rest;
            }
            if (!thought.empty()) parsed.steps.push_back({ReactStepKind::Thought, thought});
            if (text.empty()) text = "...";
            parsed.steps.push_back({ReactStepKind::Final, text});
            parsed.final_text = std::move(text);
            return parsed;
        }
        if (starts_with_ci(line, "Action:")) {
            const std::string_view action = trim(line.substr(7));
            if (starts_with_ci(action, kRecallTool)) {
                std::string_view arg = trim(action.substr(kRecallTool.size()));
                if (!arg.empty() && (arg.front() == ':' || arg.front() == '(')) {
                    arg = trim(arg.substr(1));
                }
                if (!arg.empty() && arg.back() == ')') arg = trim(arg.substr(0, arg.size() - 1));
                if (!thought.empty()) parsed.steps.push_back({ReactStepKind::Thought, thought});
                parsed.steps.push_back({ReactStepKind::ToolCall,
                                        std::string(kRecallTool) + ": " + std::string(arg)});
                parsed.tool_argument = std::string(arg);
                return parsed;
            }
            // Unknown tool: not fatal, kept as reasoning.
        }
        std::string_view content = line;
        if (starts_with_ci(content, "Thought:")) content = trim(content.substr(8));
        if (content.empty()) continue;
        if (!thought.empty()) thought += ' ';
        thought += content;
    }
    if (!thought.empty()) parsed.steps.push_back({ReactStepKind::Thought, thought});
    return parsed;
}

ReactResult run_react(const StudentAgent& agent, EgoState state, const Message& incoming,
                      const Transcript& transcript, const Gateway& gateway,
                      const SpeakerNames& names, const EngineOptions& options) {
    const PatternStore& store = agent.stores.at(state);
    ReactResult result;
    std::vector<PatternRecord> recalled;

    ChatRequest request;
    request.temperature = agent.role_policy.temperature(role_for_state(state));
    request.max_output_tokens = options.max_output_tokens;
    request.agent_role = role_for_state(state);
    request.messages.push_back(
        {"user", display_name(names, incoming.speaker_id) + " just said: \"" + incoming.text +
                     "\"\nRespond as " + agent.persona.display_name + "."});

    std::string last_reply;
    const int iterations = std::max(options.max_react_iterations, 1);
    for (int i = 0; i < iterations; ++i) {
        request.system_prompt =
            assemble_state_prompt(agent, state, recalled, transcript, names, options.window);
        last_reply = gateway.chat(request).content;
        ParsedReply parsed = parse_react_reply(last_reply);
        for (auto& step : parsed.steps) result.trace.push_back(std::move(step));
        if (parsed.final_text) {
            result.response = *parsed.final_text;
            return result;
        }
        request.messages.push_back({"assistant", last_reply.empty() ? "(empty)" : last_reply});
        if (parsed.tool_argument) {
            std::vector<RetrievedPattern> hits;
            if (!store.empty()) hits = store.retrieve(gateway.embed_one(incoming.text));
            for (const auto& hit : hits) {
                const bool seen = std::any_of(recalled.begin(), recalled.end(),
                                              [&](const auto& r) { return r.id == hit.record.id; });
                if (!seen) {
                    recalled.push_back(hit.record);
                    result.retrieved_ids.push_back(hit.record.id);
                }
            }
            const std::string observation = render_observation(state, hits);
            result.trace.push_back({ReactStepKind::Observation, observation});
            request.messages.push_back({"user", "Observation: " + observation});
        } else {
            request.messages.push_back({"user", std::string(kContinueInstruction)});
        }
    }
    result.response = forced_final_text(last_reply);
    result.trace.push_back({ReactStepKind::Final, result.response});
    return result;
}

SimulationSession::SimulationSession(std::string scenario_id, std::vector<StudentAgent> students,
                                     std::vector<std::string> turn_schedule, SpeakerNames names,
                                     std::uint64_t rng_seed, EngineOptions options)
    : scenario_id_(std::move(scenario_id)),
      students_(std::move(students)),
      schedule_(std::move(turn_schedule)),
      names_(std::move(names)),
      rng_seed_(rng_seed),
      options_(options) {
    for (const auto& s : students_) validate_student(s);
    for (const auto& slot : schedule_) {
        if (slot == kTeacherSlot) continue;
        const bool known = std::any_of(students_.begin(), students_.end(),
                                       [&](const auto& s) { return s.persona.id == slot; });
        if (!known) throw Error(ErrorCode::InvalidArgument, "unknown speaker " + slot);
    }
    for (const auto& s : students_) names_.emplace(s.persona.id, s.persona.display_name);
    names_.emplace(std::string(kTeacherSpeakerId), "Teacher");
}

const StudentAgent& SimulationSession::student(const std::string& id) const {
    for (const auto& s : students_) {
        if (s.persona.id == id) return s;
    }
    throw Error(ErrorCode::NotFound, "no student " + id);
}

const Turn& SimulationSession::append_turn(Message message,
                                           std::optional<TurnAnnotation> annotation) {
    return transcript_.append(std::move(message), std::move(annotation));
}

const Turn& SimulationSession::generate_student_turn(const std::string& student_id,
                                                     const Message& incoming,
                                                     const Gateway& gateway) {
    const StudentAgent& agent = student(student_id);
    const Selection selection =
        select_ego_state(agent, incoming, transcript_, gateway, names_, options_);
    ReactResult react =
        run_react(agent, selection.ego_state, incoming, transcript_, gateway, names_, options_);

    TurnAnnotation annotation;
    annotation.selected_state = selection.ego_state;
    annotation.rationale = selection.rationale;
    annotation.retrieved_pattern_ids = std::move(react.retrieved_ids);
    annotation.react_trace = std::move(react.trace);
    return transcript_.append(Message{student_id, Role::Student, std::move(react.response), 0},
                              std::move(annotation));
}

bool SimulationSession::exhausted() const noexcept {
    return !cyclic_ && cursor_ >= schedule_.size();
}

bool SimulationSession::awaiting_teacher() const noexcept {
    if (schedule_.empty()) return false;
    if (cursor_ < schedule_.size()) return schedule_[cursor_] == kTeacherSlot;
    return cyclic_ && schedule_.front() == kTeacherSlot;
}

std::vector<Turn> SimulationSession::advance(const std::optional<std::string>& teacher_message,
                                             const Gateway& gateway) {
    if (cursor_ >= schedule_.size()) {
        if (!cyclic_ || schedule_.empty()) {
            throw Error(ErrorCode::ScheduleExhausted, "turn schedule has ended");
        }
        cursor_ = 0;
    }
    const std::size_t first_new = transcript_.size();
    if (teacher_message) {
        if (trim(*teacher_message).empty()) {
            throw Error(ErrorCode::InvalidArgument, "teacher message text empty");
        }
        transcript_.append(Message{std::string(kTeacherSpeakerId), Role::Teacher,
                                   *teacher_message, 0});
        if (schedule_[cursor_] == kTeacherSlot) ++cursor_;
    } else if (schedule_[cursor_] == kTeacherSlot) {
        throw Error(ErrorCode::WrongState, "a teacher message is due");
    }
    while (cursor_ < schedule_.size() && schedule_[cursor_] != kTeacherSlot) {
        if (transcript_.empty()) {
            throw Error(ErrorCode::WrongState, "no message for the first student to answer");
        }
        const Message incoming = transcript_.turns.back().message;
        generate_student_turn(schedule_[cursor_], incoming, gateway);
        ++cursor_;
    }
    return {transcript_.turns.begin() + static_cast<std::ptrdiff_t>(first_new),
            transcript_.turns.end()};
}

void SimulationSession::restore(Transcript transcript, std::size_t cursor) {
    const auto violations = validate_transcript(transcript);
    if (!violations.empty()) throw Error(ErrorCode::InvalidArgument, violations.front());
    if (cursor > schedule_.size()) throw Error(ErrorCode::InvalidArgument, "cursor out of range");
    transcript_ = std::move(transcript);
    cursor_ = cursor;
}

}  // namespace tacla
