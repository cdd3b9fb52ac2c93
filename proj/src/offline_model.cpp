#include "tacla/offline_model.hpp"

#include <array>
#include <sstream>

#include "tacla/hashing.hpp"
#include "tacla/transaction_analysis.hpp"

namespace tacla {

namespace {

constexpr std::array<std::string_view, 14> kCriticalCues{
    "that's enough", "enough", "can't believe", "unacceptable", "should have", "you need to",
    "immediately", "detention", "your fault", "useless", "ridiculous", "no excuses", "typical",
    "stop"};
constexpr std::array<std::string_view, 10> kAdultCues{"let's", "what ", "how ", "?", "solution",
                                                     "plan", "together", "options", "we could",
                                                     "missing"};
constexpr std::array<std::string_view, 8> kChildCues{"not fair", "sorry", "blame", "i tried",
                                                    "whatever", "bad at", "nobody", "always get"};

template <std::size_t N>
bool has_cue(const std::string& lower, const std::array<std::string_view, N>& cues) {
    for (auto cue : cues) {
        if (lower.find(cue) != std::string::npos) return true;
    }
    return false;
}

// Text between `open` and the next `close` after the last occurrence of `open`.
std::string between_last(const std::string& text, std::string_view open, std::string_view close) {
    const auto start = text.rfind(open);
    if (start == std::string::npos) return {};
    const auto from = start + open.size();
    const auto end = text.find(close, from);
    return text.substr(from, end == std::string::npos ? std::string::npos : end - from);
}

std::string first_user(const ChatRequest& r) {
    for (const auto& m : r.messages) {
        if (m.role == "user") return m.content;
    }
    return {};
}

bool saw_observation(const ChatRequest& r) {
    for (const auto& m : r.messages) {
        if (m.role == "user" && m.content.rfind("Observation:", 0) == 0) return true;
    }
    return false;
}

EgoState dominant_state(const std::string& system) {
    const std::string label = between_last(system, "DOMINANT EGO STATE: ", "\n");
    try {
        return parse_ego_state(trim(label));
    } catch (const Error&) {
        return EgoState::Adult;
    }
}

std::string orchestrator_reply(const ChatRequest& r) {
    const std::string user = first_user(r);
    const std::string incoming_line = between_last(user, "Incoming message from ", "\"\n\n");
    const auto quote = incoming_line.find(": \"");
    const std::string incoming =
        ascii_lower(quote == std::string::npos ? incoming_line : incoming_line.substr(quote + 3));
    EgoState state = dominant_state(r.system_prompt);
    std::string why = "nothing in the message overrides the usual stance";
    if (has_cue(incoming, kCriticalCues)) {
        // A Parent-dominant student answers criticism in kind unless told to stop outright.
        const bool told_off = incoming.find("enough") != std::string::npos ||
                              incoming.find("stop") != std::string::npos;
        state = state == EgoState::Parent && !told_off ? EgoState::Parent : EgoState::Child;
        why = "the message is critical and controlling";
    } else if (has_cue(incoming, kAdultCues)) {
        state = EgoState::Adult;
        why = "the message invites calm problem solving";
    } else if (has_cue(incoming, kChildCues)) {
        why = "the other student reacts emotionally";
    }
    return json{{"ego_state", to_string(state)}, {"rationale", why}}.dump();
}

std::string state_reply(const ChatRequest& r, EgoState state) {
    const std::string user = first_user(r);
    const std::string incoming = between_last(user, " just said: \"", "\"\n");
    if (!saw_observation(r)) {
        return "Thought: I should remember how I usually react to this.\nAction: recall_patterns: " +
               incoming.substr(0, 80);
    }
    static const StateMap<std::array<std::string_view, 3>> kLines{
        {EgoState::Parent,
         {"You should have checked your part before today. Now we have to fix it.",
          "This is exactly why the work has to be done properly the first time.",
          "Honestly, you need to take this seriously, it affects all of us."}},
        {EgoState::Adult,
         {"Okay. What is still missing, and how long would it take to add it?",
          "Let's split what's left so we can finish before the deadline.",
          "I think we can fix this if we list the missing pieces first."}},
        {EgoState::Child,
         {"It's not fair, I tried my best and nobody even noticed.",
          "Why do I always get blamed? I said I'm sorry, okay?",
          "Whatever, I'm just bad at this anyway."}}};
    const std::string persona = between_last(r.system_prompt, "\n\nYou are ", ".");
    auto pick = fnv1a64(persona + "\x1f" + incoming) % 3;
    if (kLines.at(state)[pick] == incoming) pick = (pick + 1) % 3;  // no parroting
    return "Thought: That is how I feel about it.\nFinal: " + std::string(kLines.at(state)[pick]);
}

std::string judge_reply(const ChatRequest& r) {
    const std::string user = first_user(r);
    std::vector<std::string> lines;
    std::istringstream in(user);
    for (std::string line; std::getline(in, line);) {
        if (!trim(line).empty()) lines.push_back(ascii_lower(line));
    }
    if (r.system_prompt.find("(1-5 Scale)") != std::string::npos) {
        const std::string tail = lines.size() >= 2 ? lines[lines.size() - 2] + lines.back()
                                                   : (lines.empty() ? "" : lines.back());
        if (has_cue(tail, kChildCues) || has_cue(tail, kCriticalCues)) {
            return "2 - the students are still reacting emotionally after the intervention.";
        }
        if (has_cue(tail, kAdultCues)) return "4 - the students move toward solving the problem.";
        return "3 - the conflict is neither resolved nor worse.";
    }
    return lines.size() >= 6 ? "7 - plausible classroom exchange with some stock phrasing."
                             : "6 - short exchange with some stock phrasing.";
}

struct ParsedLine {
    std::size_t index = 0;
    Role role = Role::Student;
    std::string text;
};

TransactionVector infer_vector(const ParsedLine& line) {
    const std::string lower = ascii_lower(line.text);
    if (has_cue(lower, kCriticalCues)) return {EgoState::Parent, EgoState::Child};
    if (line.role == Role::Student && has_cue(lower, kChildCues)) {
        return {EgoState::Child, EgoState::Parent};
    }
    return {EgoState::Adult, EgoState::Adult};
}

std::string feedback_reply(const ChatRequest& r) {
    const std::string user = first_user(r);
    std::vector<ParsedLine> lines;
    std::istringstream in(user);
    for (std::string line; std::getline(in, line);) {
        if (line.rfind("THEORY EXCERPTS:", 0) == 0) break;
        if (line.empty() || line[0] != '[') continue;
        const auto close = line.find("] ");
        const auto role_open = line.find(" (", close);
        const auto role_close = line.find("): ", role_open);
        if (close == std::string::npos || role_open == std::string::npos ||
            role_close == std::string::npos) {
            continue;
        }
        try {
            ParsedLine p;
            p.index = std::stoul(line.substr(1, close - 1));
            p.role = parse_role(line.substr(role_open + 2, role_close - role_open - 2));
            p.text = line.substr(role_close + 3);
            lines.push_back(std::move(p));
        } catch (const std::exception&) {
        }
    }

    json states = json::array();
    json transactions = json::array();
    json games = json::array();
    json alternatives = json::array();
    std::vector<TransactionVector> vectors;
    for (const auto& line : lines) {
        if (line.role == Role::System) {
            vectors.push_back({});
            continue;
        }
        vectors.push_back(infer_vector(line));
        states.push_back(json{{"turn_index", line.index},
                              {"source", vectors.back().source},
                              {"addressed", vectors.back().addressed}});
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i - 1].role == Role::System || lines[i].role == Role::System) continue;
        const TransactionClass cls = classify({vectors[i - 1], vectors[i]});
        transactions.push_back(json{
            {"stimulus_index", lines[i - 1].index},
            {"response_index", lines[i].index},
            {"label", to_string(cls)},
            {"commentary", cls == TransactionClass::Complementary
                               ? "The reply answers from the state that was addressed, so the exchange can continue in the same pattern."
                               : "The reply comes from a different state than the one addressed, which interrupts the pattern."}});
        if (vectors[i - 1].source == EgoState::Parent && vectors[i].source == EgoState::Child &&
            games.empty()) {
            games.push_back(json{{"name", "Kick Me"},
                                 {"evidence", "Criticism is met with self-blame: \"" + lines[i].text + "\""}});
        }
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].role == Role::Teacher && vectors[i].source != EgoState::Adult) {
            alternatives.push_back(json{
                {"turn_index", lines[i].index},
                {"suggested_ego_state", "Adult"},
                {"suggested_wording",
                 "I can see the model isn't finished. Let's look at what is missing and agree on who does what."}});
        }
    }
    return json{{"per_turn_states", states},
                {"transactions", transactions},
                {"games", games},
                {"alternatives", alternatives}}
        .dump(2);
}

}  // namespace

std::string offline_reply(const ChatRequest& request) {
    if (!request.agent_role) return "Okay.";
    switch (*request.agent_role) {
        case AgentRole::Orchestrator:
            return orchestrator_reply(request);
        case AgentRole::ParentState:
            return state_reply(request, EgoState::Parent);
        case AgentRole::AdultState:
            return state_reply(request, EgoState::Adult);
        case AgentRole::ChildState:
            return state_reply(request, EgoState::Child);
        case AgentRole::Evaluator:
            return judge_reply(request);
        case AgentRole::Feedback:
            return feedback_reply(request);
    }
    return "Okay.";
}

}  // namespace tacla
