#pragma once

// LLM-judge scoring with the two rubrics, the batch protocol (n runs per
// intervention), ego-state distribution statistics and report files.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tacla/agent_engine.hpp"
#include "tacla/llm_gateway.hpp"
#include "tacla/scenario.hpp"
#include "tacla/simulation.hpp"

namespace tacla {

extern const std::string_view kConflictRubric;
extern const std::string_view kRealismRubric;

struct ConflictScore {
    int value = 0;  // 1..5
    std::string justification;

    bool operator==(const ConflictScore&) const = default;
};

struct RealismScore {
    int value = 0;  // 1..10
    std::string justification;

    bool operator==(const RealismScore&) const = default;
};

struct ParsedScore {
    int value = 0;
    std::string justification;
};

/// Accepts a reply that starts with an integer (optionally "Score:" or a
/// {"score": n} object) within [lo, hi]. Words, decimals and out-of-range
/// values are rejected.
std::optional<ParsedScore> parse_score(std::string_view reply, int lo, int hi);

struct JudgeOptions {
    double temperature = 0.0;
    // Empty means the provider's eval_model_id.
    std::string model_id;
};

/// Judge prompt built from dialogue text alone.
ChatRequest judge_request(std::string_view rubric, int lo, int hi, const Transcript& transcript,
                          const SpeakerNames& names, const JudgeOptions& options,
                          const Gateway& gateway);

/// Requires a teacher turn. One retry, then EvaluationFailure.
ConflictScore score_conflict(const Transcript& transcript, const SpeakerNames& names,
                             const Gateway& gateway, const JudgeOptions& options = {});
RealismScore score_realism(const Transcript& transcript, const SpeakerNames& names,
                           const Gateway& gateway, const JudgeOptions& options = {});

using StateCounts = StateMap<int>;

/// Student turns after the first teacher turn, per student in `student_ids`
/// (every state present, zero when unused).
std::map<std::string, StateCounts> post_intervention_counts(
    const Transcript& transcript, const std::vector<std::string>& student_ids);

struct RunRecord {
    std::string run_id;
    std::string intervention_id;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    SpeakerNames speaker_names;
    Transcript transcript;
    std::optional<ConflictScore> conflict;
    std::optional<RealismScore> realism;
    std::map<std::string, StateCounts> post_intervention_state_counts;

    bool operator==(const RunRecord&) const = default;
};

void to_json(json& j, const RunRecord& v);

struct BatchOptions {
    std::size_t n = 30;
    std::uint64_t seed = 0;
    std::size_t parallelism = 1;
    int post_intervention_rounds = 2;
    bool live_opening = false;
    EngineOptions engine;
    RolePolicy role_policy;
    // Whole batch fails when more than this share of runs fail.
    double max_failure_ratio = 0.2;
};

/// Per-run seed derived from the batch seed, intervention and run number.
std::uint64_t run_seed(std::uint64_t batch_seed, std::string_view intervention_id, std::size_t run);

/// n independent sessions of the scenario with the intervention injected at
/// the teacher slot, both judges applied. A run that hits a provider or
/// engine error is recorded as failed; more than max_failure_ratio failures
/// raises BatchFailed.
std::vector<RunRecord> run_batch(const Scenario& scenario, const InterventionPreset& intervention,
                                 const SeededMemories& memories, const Gateway& gateway,
                                 const BatchOptions& options);
std::vector<RunRecord> run_batch(const Scenario& scenario, const InterventionPreset& intervention,
                                 const Gateway& gateway, const BatchOptions& options);

struct StateDistribution {
    StateCounts counts;
    StateMap<double> proportions;
    int total = 0;

    bool operator==(const StateDistribution&) const = default;
};

struct ConditionStats {
    std::string intervention_id;
    int runs = 0;
    int failed_runs = 0;
    double mean_conflict = 0.0;
    std::map<int, int> conflict_histogram;
    double mean_realism = 0.0;
    std::map<int, int> realism_histogram;
    std::map<std::string, StateDistribution> state_distribution;

    bool operator==(const ConditionStats&) const = default;
};

struct AggregateStats {
    std::vector<ConditionStats> conditions;  // sorted by intervention id
    double overall_mean_realism = 0.0;
    int total_runs = 0;
    int failed_runs = 0;

    bool operator==(const AggregateStats&) const = default;
};

/// Rounded half away from zero to 3 decimals.
double round3(double value);

/// Throws EmptyInput when there is no successful run to average.
AggregateStats aggregate(const std::vector<RunRecord>& records);

void to_json(json& j, const StateDistribution& v);
void to_json(json& j, const ConditionStats& v);
void to_json(json& j, const AggregateStats& v);

/// stats.json, runs.csv, state_distribution.csv and transcripts/<run_id>.json.
void emit_report(const AggregateStats& stats, const std::vector<RunRecord>& records,
                 const std::filesystem::path& out_dir);

struct DirectionalResult {
    double adult_mean_conflict = 0.0;
    double parent_mean_conflict = 0.0;
    double adult_child_share = 0.0;
    double parent_child_share = 0.0;
    bool conflict_direction = false;  // adult > parent
    bool child_direction = false;     // parent child share > adult child share
};

/// Compares two conditions for the expected direction of effect.
DirectionalResult check_direction(const AggregateStats& stats, const std::string& adult_id,
                                  const std::string& parent_id, const std::string& student_id);

}  // namespace tacla
