#include "tacla/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "tacla/hashing.hpp"
#include "tacla/io.hpp"

namespace tacla {

const std::string_view kConflictRubric =
    "Conflict Resolution Effectiveness (1-5 Scale): judge how the teacher's response influenced "
    "the classroom conflict dynamic between the students. Scoring: (5) Complete conflict "
    "extinguishment, (4) Significant de-escalation, (3) Neutral/maintained, (2) Escalation, (1) "
    "Severe escalation.";

const std::string_view kRealismRubric =
    "Conversation Realism (1-10 Scale): judge the overall authenticity and believability of the "
    "classroom conversation. Consider natural language patterns, contextual appropriateness, "
    "emotional authenticity, character consistency, conversational flow, and age-appropriate "
    "language use. Scoring: (1-2) Highly unrealistic, artificial dialogue, (3-4) Somewhat "
    "unrealistic with clear artificial patterns, (5-6) Moderately realistic but with some "
    "unnatural elements, (7-8) Largely realistic with minor artificial elements, (9-10) Highly "
    "realistic, indistinguishable from authentic dialogue.";

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string strip_leading_separators(std::string_view rest) {
    std::size_t i = 0;
    while (i < rest.size()) {
        const unsigned char c = static_cast<unsigned char>(rest[i]);
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '-' || c == ':' || c == '.' ||
            c == ',' || c == ')' || c == '*') {
            ++i;
        } else if (rest.substr(i, 3) == "\xE2\x80\x94" || rest.substr(i, 3) == "\xE2\x80\x93") {
            i += 3;  // em or en dash
        } else {
            break;
        }
    }
    return std::string(trim(rest.substr(i)));
}

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

bool has_teacher_turn(const Transcript& transcript) {
    return std::any_of(transcript.turns.begin(), transcript.turns.end(),
                       [](const Turn& t) { return t.message.role == Role::Teacher; });
}

template <class Score>
Score judge(std::string_view rubric, int lo, int hi, const Transcript& transcript,
            const SpeakerNames& names, const Gateway& gateway, const JudgeOptions& options) {
    ChatRequest request = judge_request(rubric, lo, hi, transcript, names, options, gateway);
    std::string reply = gateway.chat(request).content;
    auto parsed = parse_score(reply, lo, hi);
    if (!parsed) {
        request.messages.push_back({"assistant", reply});
        request.messages.push_back(
            {"user", "Reply with a single integer from " + std::to_string(lo) + " to " +
                         std::to_string(hi) + " first, then a short justification."});
        reply = gateway.chat(request).content;
        parsed = parse_score(reply, lo, hi);
    }
    if (!parsed) {
        throw Error(ErrorCode::EvaluationFailure,
                    "judge gave no score in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                        "] after a retry; last reply: " + reply.substr(0, 120));
    }
    return Score{parsed->value, std::move(parsed->justification)};
}

}  // namespace

std::optional<ParsedScore> parse_score(std::string_view reply, int lo, int hi) {
    std::string_view text = trim(reply);
    if (!text.empty() && text.front() == '{') {
        try {
            const json j = json::parse(text);
            if (!j.contains("score") || !j.at("score").is_number_integer()) return std::nullopt;
            const int value = j.at("score").get<int>();
            if (value < lo || value > hi) return std::nullopt;
            std::string why = j.contains("justification") && j.at("justification").is_string()
                                  ? j.at("justification").get<std::string>()
                                  : std::string();
            return ParsedScore{value, std::move(why)};
        } catch (const json::exception&) {
            return std::nullopt;
        }
    }
    while (!text.empty() && text.front() == '*') text.remove_prefix(1);
    if (ascii_lower(text.substr(0, 6)) == "score:") text = trim(text.substr(6));
    while (!text.empty() && text.front() == '*') text.remove_prefix(1);

    std::size_t digits = 0;
    while (digits < text.size() && digits < 3 && is_digit(text[digits])) ++digits;
    if (digits == 0 || (digits < text.size() && is_digit(text[digits]))) return std::nullopt;
    if (digits + 1 < text.size() && (text[digits] == '.' || text[digits] == ',') &&
        is_digit(text[digits + 1])) {
        return std::nullopt;  // decimals are not scores
    }
    const int value = std::stoi(std::string(text.substr(0, digits)));
    if (value < lo || value > hi) return std::nullopt;
    std::string_view rest = text.substr(digits);
    if (rest.size() >= 2 && rest[0] == '/' && is_digit(rest[1])) {
        std::size_t i = 1;
        while (i < rest.size() && is_digit(rest[i])) ++i;
        rest.remove_prefix(i);
    }
    return ParsedScore{value, strip_leading_separators(rest)};
}

ChatRequest judge_request(std::string_view rubric, int lo, int hi, const Transcript& transcript,
                          const SpeakerNames& names, const JudgeOptions& options,
                          const Gateway& gateway) {
    ChatRequest request;
    request.system_prompt =
        "You evaluate simulated classroom conversations between a teacher and students.\n\n" +
        std::string(rubric) + "\n\nReply with the score as a single integer from " +
        std::to_string(lo) + " to " + std::to_string(hi) +
        " first, followed by one sentence of justification.";
    request.messages.push_back(
        {"user", "CLASSROOM CONVERSATION:\n" + render_dialogue(transcript, names)});
    request.temperature = options.temperature;
    request.max_output_tokens = 200;
    request.model_id = options.model_id.empty() ? gateway.config().eval_model_id : options.model_id;
    request.agent_role = AgentRole::Evaluator;
    return request;
}

ConflictScore score_conflict(const Transcript& transcript, const SpeakerNames& names,
                             const Gateway& gateway, const JudgeOptions& options) {
    if (!has_teacher_turn(transcript)) {
        throw Error(ErrorCode::InvalidArgument, "conflict scoring needs a teacher intervention turn");
    }
    return judge<ConflictScore>(kConflictRubric, 1, 5, transcript, names, gateway, options);
}

RealismScore score_realism(const Transcript& transcript, const SpeakerNames& names,
                           const Gateway& gateway, const JudgeOptions& options) {
    if (transcript.empty()) throw Error(ErrorCode::InvalidArgument, "transcript is empty");
    return judge<RealismScore>(kRealismRubric, 1, 10, transcript, names, gateway, options);
}

std::map<std::string, StateCounts> post_intervention_counts(
    const Transcript& transcript, const std::vector<std::string>& student_ids) {
    std::map<std::string, StateCounts> counts;
    for (const auto& id : student_ids) {
        for (EgoState s : kAllEgoStates) counts[id][s] = 0;
    }
    bool after = false;
    for (const Turn& turn : transcript.turns) {
        if (turn.message.role == Role::Teacher) after = true;
        if (!after || turn.message.role != Role::Student || !turn.annotation) continue;
        auto it = counts.find(turn.message.speaker_id);
        if (it != counts.end()) ++it->second[turn.annotation->selected_state];
    }
    return counts;
}

void to_json(json& j, const RunRecord& v) {
    json counts = json::object();
    for (const auto& [student, states] : v.post_intervention_state_counts) {
        json per = json::object();
        for (const auto& [state, n] : states) per[std::string(to_string(state))] = n;
        counts[student] = std::move(per);
    }
    j = json{{"run_id", v.run_id},
             {"intervention_id", v.intervention_id},
             {"seed", v.seed},
             {"status", v.failed ? "failed" : "ok"},
             {"error", v.error},
             {"speaker_names", v.speaker_names},
             {"transcript", v.transcript},
             {"conflict", v.conflict ? json{{"value", v.conflict->value},
                                            {"justification", v.conflict->justification}}
                                     : json(nullptr)},
             {"realism", v.realism ? json{{"value", v.realism->value},
                                          {"justification", v.realism->justification}}
                                   : json(nullptr)},
             {"post_intervention_state_counts", std::move(counts)}};
}

std::uint64_t run_seed(std::uint64_t batch_seed, std::string_view intervention_id, std::size_t run) {
    std::uint64_t state = fnv1a64(intervention_id, batch_seed ^ 0xcbf29ce484222325ULL) + run;
    return splitmix64(state);
}

std::vector<RunRecord> run_batch(const Scenario& scenario, const InterventionPreset& intervention,
                                 const SeededMemories& memories, const Gateway& gateway,
                                 const BatchOptions& options) {
    if (options.n == 0) throw Error(ErrorCode::InvalidArgument, "batch size n must be >= 1");
    if (options.parallelism == 0) throw Error(ErrorCode::InvalidArgument, "parallelism must be >= 1");

    std::vector<std::string> student_ids;
    for (const auto& p : scenario.personas) student_ids.push_back(p.id);

    JudgeOptions judge_options;
    judge_options.temperature = options.role_policy.temperature(AgentRole::Evaluator);

    std::vector<RunRecord> records(options.n);
    const int width = options.n >= 1000 ? static_cast<int>(std::to_string(options.n).size()) : 3;
    auto one_run = [&](std::size_t i) {
        RunRecord& record = records[i];
        std::string number = std::to_string(i + 1);
        record.run_id = intervention.id + "-" +
                        std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(number.size(), width), '0') +
                        number;
        record.intervention_id = intervention.id;
        record.seed = run_seed(options.seed, intervention.id, i);
        record.speaker_names = speaker_names(scenario);
        try {
            SessionOptions session_options;
            session_options.seed = record.seed;
            session_options.live_opening = options.live_opening;
            session_options.post_intervention_rounds = options.post_intervention_rounds;
            session_options.engine = options.engine;
            SimulationRecord sim = run_simulation(scenario, intervention, memories,
                                                  options.role_policy, session_options, gateway);
            record.transcript = std::move(sim.transcript);
            record.speaker_names = std::move(sim.speaker_names);
            record.post_intervention_state_counts =
                post_intervention_counts(record.transcript, student_ids);
            record.conflict = score_conflict(record.transcript, record.speaker_names, gateway, judge_options);
            record.realism = score_realism(record.transcript, record.speaker_names, gateway, judge_options);
        } catch (const Error& e) {
            record.failed = true;
            record.error = e.what();
            spdlog::warn("run {} failed: {}", record.run_id, record.error);
        }
    };

    const std::size_t workers = std::min(options.parallelism, options.n);
    if (workers == 1) {
        for (std::size_t i = 0; i < options.n; ++i) one_run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < options.n; i = next++) one_run(i);
            });
        }
        for (auto& t : pool) t.join();
    }

    const auto failed = static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const RunRecord& r) { return r.failed; }));
    if (static_cast<double>(failed) > options.max_failure_ratio * static_cast<double>(options.n)) {
        throw Error(ErrorCode::BatchFailed, std::to_string(failed) + " of " +
                                                std::to_string(options.n) + " runs failed for " +
                                                intervention.id);
    }
    return records;
}

std::vector<RunRecord> run_batch(const Scenario& scenario, const InterventionPreset& intervention,
                                 const Gateway& gateway, const BatchOptions& options) {
    return run_batch(scenario, intervention, seed_memories(scenario, gateway), gateway, options);
}

double round3(double value) { return std::round(value * 1000.0) / 1000.0; }

AggregateStats aggregate(const std::vector<RunRecord>& records) {
    if (records.empty()) throw Error(ErrorCode::EmptyInput, "no run records to aggregate");

    struct Acc {
        ConditionStats stats;
        long conflict_sum = 0;
        long realism_sum = 0;
        int scored = 0;
    };
    std::map<std::string, Acc> by_condition;
    long realism_total = 0;
    int scored_total = 0;
    AggregateStats out;

    for (const RunRecord& r : records) {
        Acc& acc = by_condition[r.intervention_id];
        acc.stats.intervention_id = r.intervention_id;
        ++out.total_runs;
        if (r.failed || !r.conflict || !r.realism) {
            ++acc.stats.failed_runs;
            ++out.failed_runs;
            continue;
        }
        ++acc.stats.runs;
        ++acc.scored;
        acc.conflict_sum += r.conflict->value;
        acc.realism_sum += r.realism->value;
        ++acc.stats.conflict_histogram[r.conflict->value];
        ++acc.stats.realism_histogram[r.realism->value];
        realism_total += r.realism->value;
        ++scored_total;
        for (const auto& [student, counts] : r.post_intervention_state_counts) {
            StateDistribution& d = acc.stats.state_distribution[student];
            for (EgoState s : kAllEgoStates) {
                const auto it = counts.find(s);
                const int n = it == counts.end() ? 0 : it->second;
                d.counts[s] += n;
                d.total += n;
            }
        }
    }
    if (scored_total == 0) throw Error(ErrorCode::EmptyInput, "every run failed; nothing to average");

    for (auto& [id, acc] : by_condition) {
        if (acc.scored > 0) {
            acc.stats.mean_conflict = round3(static_cast<double>(acc.conflict_sum) / acc.scored);
            acc.stats.mean_realism = round3(static_cast<double>(acc.realism_sum) / acc.scored);
        }
        for (auto& [student, d] : acc.stats.state_distribution) {
            for (EgoState s : kAllEgoStates) {
                d.proportions[s] = d.total > 0 ? static_cast<double>(d.counts[s]) / d.total : 0.0;
            }
        }
        out.conditions.push_back(std::move(acc.stats));
    }
    out.overall_mean_realism = round3(static_cast<double>(realism_total) / scored_total);
    return out;
}

void to_json(json& j, const StateDistribution& v) {
    json counts = json::object();
    json proportions = json::object();
    for (EgoState s : kAllEgoStates) {
        const std::string key(to_string(s));
        counts[key] = v.counts.count(s) ? v.counts.at(s) : 0;
        proportions[key] = v.proportions.count(s) ? v.proportions.at(s) : 0.0;
    }
    j = json{{"counts", std::move(counts)}, {"proportions", std::move(proportions)}, {"total", v.total}};
}

void to_json(json& j, const ConditionStats& v) {
    auto histogram = [](const std::map<int, int>& h) {
        json out = json::object();
        for (const auto& [score, n] : h) out[std::to_string(score)] = n;
        return out;
    };
    j = json{{"intervention_id", v.intervention_id},
             {"runs", v.runs},
             {"failed_runs", v.failed_runs},
             {"mean_conflict", v.mean_conflict},
             {"conflict_histogram", histogram(v.conflict_histogram)},
             {"mean_realism", v.mean_realism},
             {"realism_histogram", histogram(v.realism_histogram)},
             {"state_distribution", v.state_distribution}};
}

void to_json(json& j, const AggregateStats& v) {
    j = json{{"conditions", v.conditions},
             {"overall_mean_realism", v.overall_mean_realism},
             {"total_runs", v.total_runs},
             {"failed_runs", v.failed_runs}};
}

void emit_report(const AggregateStats& stats, const std::vector<RunRecord>& records,
                 const std::filesystem::path& out_dir) {
    std::vector<const RunRecord*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const RunRecord* a, const RunRecord* b) { return a->run_id < b->run_id; });

    write_file_atomic(out_dir / "stats.json", dump_json(json(stats)));

    std::ostringstream runs;
    runs << "run_id,intervention_id,seed,status,conflict_score,realism_score,"
            "post_intervention_student_turns,error\n";
    for (const RunRecord* r : sorted) {
        int turns = 0;
        for (const auto& [_, counts] : r->post_intervention_state_counts) {
            for (const auto& [__, n] : counts) turns += n;
        }
        runs << csv_field(r->run_id) << ',' << csv_field(r->intervention_id) << ',' << r->seed << ','
             << (r->failed ? "failed" : "ok") << ','
             << (r->conflict ? std::to_string(r->conflict->value) : "") << ','
             << (r->realism ? std::to_string(r->realism->value) : "") << ',' << turns << ','
             << csv_field(r->error) << '\n';
    }
    write_file_atomic(out_dir / "runs.csv", runs.str());

    std::ostringstream dist;
    dist << "run_id,intervention_id,student_id,Parent,Adult,Child,total\n";
    for (const RunRecord* r : sorted) {
        for (const auto& [student, counts] : r->post_intervention_state_counts) {
            int total = 0;
            dist << csv_field(r->run_id) << ',' << csv_field(r->intervention_id) << ','
                 << csv_field(student);
            for (EgoState s : kAllEgoStates) {
                const int n = counts.count(s) ? counts.at(s) : 0;
                total += n;
                dist << ',' << n;
            }
            dist << ',' << total << '\n';
        }
    }
    write_file_atomic(out_dir / "state_distribution.csv", dist.str());

    for (const RunRecord* r : sorted) {
        write_file_atomic(out_dir / "transcripts" / (r->run_id + ".json"), dump_json(json(*r)));
    }
}

DirectionalResult check_direction(const AggregateStats& stats, const std::string& adult_id,
                                  const std::string& parent_id, const std::string& student_id) {
    auto find = [&](const std::string& id) -> const ConditionStats& {
        for (const auto& c : stats.conditions) {
            if (c.intervention_id == id) return c;
        }
        throw Error(ErrorCode::NotFound, "no results for intervention " + id);
    };
    auto child_share = [&](const ConditionStats& c) {
        const auto it = c.state_distribution.find(student_id);
        if (it == c.state_distribution.end()) return 0.0;
        const auto p = it->second.proportions.find(EgoState::Child);
        return p == it->second.proportions.end() ? 0.0 : p->second;
    };
    const ConditionStats& adult = find(adult_id);
    const ConditionStats& parent = find(parent_id);
    DirectionalResult r;
    r.adult_mean_conflict = adult.mean_conflict;
    r.parent_mean_conflict = parent.mean_conflict;
    r.adult_child_share = child_share(adult);
    r.parent_child_share = child_share(parent);
    r.conflict_direction = r.adult_mean_conflict > r.parent_mean_conflict;
    r.child_direction = r.parent_child_share > r.adult_child_share;
    return r;
}

}  // namespace tacla
