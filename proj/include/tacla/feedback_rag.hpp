#pragma once

// Retrieval-augmented feedback: a chunked, embedded corpus of TA theory and
// the four-part analysis of a transcript (ego states, transactions, games,
// alternatives) produced by the feedback model under a strict JSON schema.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tacla/agent_engine.hpp"
#include "tacla/llm_gateway.hpp"
#include "tacla/ta_domain.hpp"
#include "tacla/vector_index.hpp"

namespace tacla {

struct ChunkerOptions {
    std::size_t target = 800;
    std::size_t overlap = 200;
    std::size_t min_overlap = 150;
    // A remainder up to this size is emitted as the last chunk instead of
    // being split again.
    std::size_t max_chunk = 1200;
};

struct TextSpan {
    std::size_t offset = 0;
    std::size_t length = 0;

    bool operator==(const TextSpan&) const = default;
};

/// Byte spans covering `text`. Breaks prefer a paragraph boundary near the
/// target, then a sentence end, then whitespace; never inside a UTF-8
/// sequence. Consecutive spans overlap by min_overlap..overlap bytes.
std::vector<TextSpan> chunk_text(std::string_view text, const ChunkerOptions& options = {});

struct CorpusChunk {
    std::string id;
    std::string source_doc;
    std::string text;
    Embedding embedding;

    bool operator==(const CorpusChunk&) const = default;
};

/// "chunk-" + 16 hex digits of a hash over the source name and text.
std::string chunk_id(std::string_view source_doc, std::string_view text);

class CorpusIndex {
public:
    /// Throws DuplicateId, DimensionMismatch or ZeroVector.
    void add(CorpusChunk chunk);

    /// Top-k chunks by cosine similarity to an embedded query. Throws EmptyCorpus.
    [[nodiscard]] std::vector<const CorpusChunk*> search(std::span<const double> query,
                                                         std::size_t k) const;

    [[nodiscard]] const std::vector<CorpusChunk>& chunks() const noexcept { return chunks_; }
    [[nodiscard]] std::size_t size() const noexcept { return chunks_.size(); }
    [[nodiscard]] bool empty() const noexcept { return chunks_.empty(); }
    [[nodiscard]] std::size_t dimension() const noexcept { return index_.dimension(); }

private:
    std::vector<CorpusChunk> chunks_;
    VectorIndex index_;
};

json corpus_to_json(const CorpusIndex& corpus);
/// Throws SchemaViolation.
CorpusIndex corpus_from_json(const json& j);
void save_corpus(const CorpusIndex& corpus, const std::filesystem::path& path);
CorpusIndex load_corpus(const std::filesystem::path& path);

/// Documents (.txt/.md) named by `paths`; directories are walked recursively
/// in sorted order. Chunks whose id already appears in `reuse` keep that
/// embedding instead of being embedded again. Throws IoFailure, or
/// EmptyCorpus when nothing has text.
CorpusIndex ingest_corpus(const std::vector<std::filesystem::path>& paths, const Gateway& gateway,
                          const ChunkerOptions& options = {}, const CorpusIndex* reuse = nullptr);

/// Throws EmptyCorpus or InvalidArgument for k == 0 or a blank query.
std::vector<CorpusChunk> retrieve_theory(const CorpusIndex& corpus, const std::string& query,
                                         std::size_t k, const Gateway& gateway);

struct InferredTurnState {
    std::size_t turn_index = 0;
    std::string speaker;
    TransactionVector vector;

    bool operator==(const InferredTurnState&) const = default;
};

struct AnalyzedTransaction {
    std::size_t stimulus_index = 0;
    std::size_t response_index = 0;
    TransactionClass cls = TransactionClass::Complementary;
    std::string commentary;
    // Set when the model's label disagreed with the classifier; the model's
    // original label is kept for display.
    bool corrected = false;
    std::optional<std::string> model_label;

    bool operator==(const AnalyzedTransaction&) const = default;
};

struct GameObservation {
    std::string name;
    std::string evidence;

    bool operator==(const GameObservation&) const = default;
};

struct AlternativeSuggestion {
    std::size_t turn_index = 0;
    EgoState suggested_state = EgoState::Adult;
    std::string suggested_wording;

    bool operator==(const AlternativeSuggestion&) const = default;
};

/// Engine ground truth shown next to the feedback inference.
struct EngineStateNote {
    std::size_t turn_index = 0;
    std::string speaker;
    EgoState selected_state = EgoState::Adult;

    bool operator==(const EngineStateNote&) const = default;
};

struct FeedbackReport {
    std::vector<InferredTurnState> per_turn_states;
    std::vector<AnalyzedTransaction> transactions;
    std::vector<GameObservation> games;
    std::vector<AlternativeSuggestion> alternatives;
    std::vector<std::string> cited_chunks;
    std::vector<EngineStateNote> engine_annotations;

    bool operator==(const FeedbackReport&) const = default;
};

void to_json(json& j, const InferredTurnState& v);
void to_json(json& j, const AnalyzedTransaction& v);
void to_json(json& j, const GameObservation& v);
void to_json(json& j, const AlternativeSuggestion& v);
void to_json(json& j, const EngineStateNote& v);
void to_json(json& j, const FeedbackReport& v);
void from_json(const json& j, FeedbackReport& v);

/// Last teacher turn and the student turns after it; the last four turns
/// when no teacher has spoken.
std::string feedback_query(const Transcript& transcript);

/// Parses the model's reply against the schema and the transcript, then
/// overwrites every transaction label with the classifier's verdict. Throws
/// StructuredOutputFailure with the first defect found.
FeedbackReport parse_feedback_reply(std::string_view reply, const Transcript& transcript);

struct FeedbackOptions {
    std::size_t k = 6;
    double temperature = 0.3;
    int max_output_tokens = kFeedbackMaxTokens;
};

std::string feedback_system_prompt();
/// Dialogue with turn indices and roles, no annotations, then the excerpts.
std::string feedback_user_prompt(const Transcript& transcript, const SpeakerNames& names,
                                 const std::vector<CorpusChunk>& theory);

/// Requires at least 2 turns. One retry on a schema failure, then
/// StructuredOutputFailure.
FeedbackReport generate_feedback(const Transcript& transcript, const SpeakerNames& names,
                                 const CorpusIndex& corpus, const Gateway& gateway,
                                 const FeedbackOptions& options = {});

}  // namespace tacla
