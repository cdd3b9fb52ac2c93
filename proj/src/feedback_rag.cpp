#include "tacla/feedback_rag.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "tacla/hashing.hpp"
#include "tacla/io.hpp"
#include "tacla/transaction_analysis.hpp"

namespace tacla {

namespace {

bool is_space(char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == '\f'; }
bool is_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

bool paragraph_break_at(std::string_view t, std::size_t p) {
    return p >= 2 && t[p - 1] == '\n' && (t[p - 2] == '\n' || (t[p - 2] == '\r' && p >= 3 && t[p - 3] == '\n'));
}

bool sentence_break_at(std::string_view t, std::size_t p) {
    if (p < 2 || !is_space(t[p - 1])) return false;
    const char c = t[p - 2];
    return c == '.' || c == '!' || c == '?' || c == ':' || c == ';';
}

bool space_break_at(std::string_view t, std::size_t p) { return p >= 1 && is_space(t[p - 1]); }

// The allowed break position in [lo, hi] closest to `target`, by preference tier.
std::size_t choose_break(std::string_view t, std::size_t lo, std::size_t target, std::size_t hi) {
    using Pred = bool (*)(std::string_view, std::size_t);
    for (Pred pred : {Pred{paragraph_break_at}, Pred{sentence_break_at}, Pred{space_break_at}}) {
        std::size_t best = 0;
        std::size_t best_distance = std::string_view::npos;
        for (std::size_t p = lo; p <= hi; ++p) {
            if (!pred(t, p)) continue;
            const std::size_t d = p > target ? p - target : target - p;
            if (d < best_distance) {
                best = p;
                best_distance = d;
            }
        }
        if (best_distance != std::string_view::npos) return best;
    }
    std::size_t p = target;
    while (p > lo && is_continuation(t[p])) --p;
    return p;
}

// Start of the next chunk within [lo, hi]: the earliest word start, or a
// character boundary when the window has no whitespace.
std::size_t choose_overlap_start(std::string_view t, std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p <= hi; ++p) {
        if (space_break_at(t, p) && !is_space(t[p])) return p;
    }
    std::size_t p = lo;
    while (p < hi && is_continuation(t[p])) ++p;
    return p;
}

bool is_document(const std::filesystem::path& p) {
    const std::string ext = ascii_lower(p.extension().string());
    return ext == ".md" || ext == ".txt" || ext == ".markdown";
}

struct SourceFile {
    std::filesystem::path path;
    std::string name;
};

std::vector<SourceFile> collect_documents(const std::vector<std::filesystem::path>& paths) {
    namespace fs = std::filesystem;
    std::vector<SourceFile> out;
    for (const fs::path& root : paths) {
        std::error_code ec;
        if (fs::is_directory(root, ec)) {
            std::vector<SourceFile> found;
            for (fs::recursive_directory_iterator it(root, ec), end; !ec && it != end;
                 it.increment(ec)) {
                if (it->is_regular_file() && is_document(it->path())) {
                    found.push_back({it->path(), fs::relative(it->path(), root).generic_string()});
                }
            }
            if (ec) throw Error(ErrorCode::IoFailure, "cannot list " + root.string() + ": " + ec.message());
            std::sort(found.begin(), found.end(),
                      [](const SourceFile& a, const SourceFile& b) { return a.name < b.name; });
            out.insert(out.end(), found.begin(), found.end());
        } else if (fs::is_regular_file(root, ec)) {
            out.push_back({root, root.filename().generic_string()});
        } else {
            throw Error(ErrorCode::IoFailure, "no such document or directory: " + root.string());
        }
    }
    return out;
}

[[noreturn]] void schema_fail(const std::string& why) {
    throw Error(ErrorCode::StructuredOutputFailure, why);
}

const json& require_array(const json& obj, const char* key) {
    if (!obj.contains(key) || !obj.at(key).is_array()) {
        schema_fail(std::string("missing array \"") + key + "\"");
    }
    return obj.at(key);
}

std::size_t require_turn_index(const json& item, const char* key, const Transcript& transcript,
                               const std::string& where) {
    if (!item.contains(key) || !item.at(key).is_number_integer()) {
        schema_fail(where + ": \"" + key + "\" must be an integer");
    }
    const auto value = item.at(key).get<long long>();
    if (value < 0 || static_cast<std::size_t>(value) >= transcript.size()) {
        schema_fail(where + ": turn index " + std::to_string(value) + " is not in the transcript");
    }
    return static_cast<std::size_t>(value);
}

std::string require_string(const json& item, const char* key, const std::string& where,
                           bool allow_empty) {
    if (!item.contains(key) || !item.at(key).is_string()) {
        schema_fail(where + ": \"" + key + "\" must be a string");
    }
    std::string value = item.at(key).get<std::string>();
    if (!allow_empty && trim(value).empty()) schema_fail(where + ": \"" + key + "\" is empty");
    return value;
}

EgoState require_state(const json& item, const char* key, const std::string& where) {
    const std::string label = require_string(item, key, where, false);
    try {
        return parse_ego_state(trim(label));
    } catch (const Error&) {
        schema_fail(where + ": \"" + label + "\" is not Parent, Adult or Child");
    }
}

}  // namespace

std::vector<TextSpan> chunk_text(std::string_view text, const ChunkerOptions& o) {
    if (o.target == 0 || o.overlap >= o.target || o.min_overlap > o.overlap ||
        o.max_chunk < o.target) {
        throw Error(ErrorCode::InvalidArgument, "inconsistent chunker options");
    }
    std::vector<TextSpan> spans;
    const std::size_t n = text.size();
    std::size_t start = 0;
    while (start < n) {
        if (n - start <= o.max_chunk) {
            spans.push_back({start, n - start});
            break;
        }
        const std::size_t lo = start + o.target * 3 / 4;
        const std::size_t hi = start + o.target * 5 / 4;
        const std::size_t end = choose_break(text, lo, start + o.target, hi);
        spans.push_back({start, end - start});
        start = choose_overlap_start(text, end - o.overlap, end - o.min_overlap);
    }
    return spans;
}

std::string chunk_id(std::string_view source_doc, std::string_view text) {
    std::uint64_t h = fnv1a64(source_doc);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(text, h);
    return "chunk-" + hex64(h);
}

void CorpusIndex::add(CorpusChunk chunk) {
    index_.add(chunk.id, chunk.embedding);
    chunk.embedding.assign(index_.vector(index_.size() - 1).begin(),
                           index_.vector(index_.size() - 1).end());
    chunks_.push_back(std::move(chunk));
}

std::vector<const CorpusChunk*> CorpusIndex::search(std::span<const double> query,
                                                    std::size_t k) const {
    if (chunks_.empty()) throw Error(ErrorCode::EmptyCorpus, "the theory corpus is empty");
    std::vector<const CorpusChunk*> out;
    for (const Hit& hit : index_.search(query, k)) out.push_back(&chunks_[hit.index]);
    return out;
}

json corpus_to_json(const CorpusIndex& corpus) {
    json entries = json::array();
    for (const auto& c : corpus.chunks()) {
        entries.push_back(json{{"id", c.id},
                               {"source_doc", c.source_doc},
                               {"text", c.text},
                               {"embedding", c.embedding}});
    }
    return json{{"kind", "corpus"}, {"dimension", corpus.dimension()}, {"entries", std::move(entries)}};
}

CorpusIndex corpus_from_json(const json& j) {
    try {
        const auto dimension = j.at("dimension").get<std::size_t>();
        CorpusIndex corpus;
        for (const json& e : j.at("entries")) {
            CorpusChunk c{e.at("id").get<std::string>(), e.at("source_doc").get<std::string>(),
                          e.at("text").get<std::string>(), e.at("embedding").get<Embedding>()};
            if (c.embedding.size() != dimension) {
                throw Error(ErrorCode::DimensionMismatch, "chunk " + c.id + " has wrong dimension");
            }
            corpus.add(std::move(c));
        }
        return corpus;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("corpus index: ") + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::SchemaViolation, "corpus index: " + e.detail());
    }
}

void save_corpus(const CorpusIndex& corpus, const std::filesystem::path& path) {
    write_file_atomic(path, dump_json(corpus_to_json(corpus)));
}

CorpusIndex load_corpus(const std::filesystem::path& path) {
    return corpus_from_json(read_json_file(path));
}

CorpusIndex ingest_corpus(const std::vector<std::filesystem::path>& paths, const Gateway& gateway,
                          const ChunkerOptions& options, const CorpusIndex* reuse) {
    std::vector<CorpusChunk> pending;
    std::set<std::string> seen;
    for (const SourceFile& doc : collect_documents(paths)) {
        const std::string text = read_file(doc.path);
        for (const TextSpan& span : chunk_text(text, options)) {
            std::string piece = text.substr(span.offset, span.length);
            if (trim(piece).empty()) continue;
            std::string id = chunk_id(doc.name, piece);
            if (!seen.insert(id).second) continue;
            pending.push_back(CorpusChunk{std::move(id), doc.name, std::move(piece), {}});
        }
    }
    if (pending.empty()) throw Error(ErrorCode::EmptyCorpus, "no document text found to ingest");

    std::map<std::string, const CorpusChunk*> known;
    if (reuse) {
        for (const auto& c : reuse->chunks()) known.emplace(c.id, &c);
    }
    std::vector<CorpusChunk*> missing;
    for (auto& c : pending) {
        const auto it = known.find(c.id);
        if (it != known.end() && it->second->text == c.text) {
            c.embedding = it->second->embedding;
        } else {
            missing.push_back(&c);
        }
    }
    constexpr std::size_t kBatch = 64;
    for (std::size_t i = 0; i < missing.size(); i += kBatch) {
        std::vector<std::string> texts;
        for (std::size_t j = i; j < std::min(missing.size(), i + kBatch); ++j) {
            texts.emplace_back(trim(missing[j]->text));
        }
        auto vectors = gateway.embed(texts);
        for (std::size_t j = 0; j < vectors.size(); ++j) missing[i + j]->embedding = std::move(vectors[j]);
    }
    CorpusIndex corpus;
    for (auto& c : pending) corpus.add(std::move(c));
    return corpus;
}

std::vector<CorpusChunk> retrieve_theory(const CorpusIndex& corpus, const std::string& query,
                                         std::size_t k, const Gateway& gateway) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
    if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "the theory corpus is empty");
    if (trim(query).empty()) throw Error(ErrorCode::InvalidArgument, "retrieval query is blank");
    const Embedding q = gateway.embed_one(query);
    std::vector<CorpusChunk> out;
    for (const CorpusChunk* c : corpus.search(q, k)) out.push_back(*c);
    return out;
}

void to_json(json& j, const InferredTurnState& v) {
    j = json{{"turn_index", v.turn_index},
             {"speaker", v.speaker},
             {"source", v.vector.source},
             {"addressed", v.vector.addressed}};
}

void to_json(json& j, const AnalyzedTransaction& v) {
    j = json{{"stimulus_index", v.stimulus_index},
             {"response_index", v.response_index},
             {"classification", v.cls},
             {"commentary", v.commentary},
             {"corrected", v.corrected},
             {"model_label", v.model_label ? json(*v.model_label) : json(nullptr)}};
}

void to_json(json& j, const GameObservation& v) {
    j = json{{"name", v.name}, {"evidence", v.evidence}};
}

void to_json(json& j, const AlternativeSuggestion& v) {
    j = json{{"turn_index", v.turn_index},
             {"suggested_ego_state", v.suggested_state},
             {"suggested_wording", v.suggested_wording}};
}

void to_json(json& j, const EngineStateNote& v) {
    j = json{{"turn_index", v.turn_index}, {"speaker", v.speaker}, {"selected_state", v.selected_state}};
}

void to_json(json& j, const FeedbackReport& v) {
    j = json{{"per_turn_states", v.per_turn_states},
             {"transactions", v.transactions},
             {"games", v.games},
             {"alternatives", v.alternatives},
             {"cited_chunks", v.cited_chunks},
             {"engine_annotations", v.engine_annotations}};
}

void from_json(const json& j, FeedbackReport& v) {
    v = FeedbackReport{};
    for (const json& e : j.at("per_turn_states")) {
        v.per_turn_states.push_back({e.at("turn_index").get<std::size_t>(),
                                     e.at("speaker").get<std::string>(),
                                     {e.at("source").get<EgoState>(), e.at("addressed").get<EgoState>()}});
    }
    for (const json& e : j.at("transactions")) {
        AnalyzedTransaction t;
        t.stimulus_index = e.at("stimulus_index").get<std::size_t>();
        t.response_index = e.at("response_index").get<std::size_t>();
        t.cls = e.at("classification").get<TransactionClass>();
        t.commentary = e.value("commentary", "");
        t.corrected = e.value("corrected", false);
        if (e.contains("model_label") && e.at("model_label").is_string()) {
            t.model_label = e.at("model_label").get<std::string>();
        }
        v.transactions.push_back(std::move(t));
    }
    for (const json& e : j.at("games")) {
        v.games.push_back({e.at("name").get<std::string>(), e.value("evidence", "")});
    }
    for (const json& e : j.at("alternatives")) {
        v.alternatives.push_back({e.at("turn_index").get<std::size_t>(),
                                  e.at("suggested_ego_state").get<EgoState>(),
                                  e.at("suggested_wording").get<std::string>()});
    }
    v.cited_chunks = j.value("cited_chunks", std::vector<std::string>{});
    if (j.contains("engine_annotations")) {
        for (const json& e : j.at("engine_annotations")) {
            v.engine_annotations.push_back({e.at("turn_index").get<std::size_t>(),
                                            e.at("speaker").get<std::string>(),
                                            e.at("selected_state").get<EgoState>()});
        }
    }
}

std::string feedback_query(const Transcript& transcript) {
    const auto& turns = transcript.turns;
    std::size_t from = turns.size();
    for (std::size_t i = turns.size(); i-- > 0;) {
        if (turns[i].message.role == Role::Teacher) {
            from = i;
            break;
        }
    }
    std::vector<const Turn*> picked;
    if (from == turns.size()) {
        for (std::size_t i = turns.size() > 4 ? turns.size() - 4 : 0; i < turns.size(); ++i) {
            picked.push_back(&turns[i]);
        }
    } else {
        picked.push_back(&turns[from]);
        for (std::size_t i = from + 1; i < turns.size(); ++i) {
            if (turns[i].message.role == Role::Student) picked.push_back(&turns[i]);
        }
    }
    std::string query;
    for (const Turn* t : picked) {
        if (!query.empty()) query += '\n';
        query += t->message.text;
    }
    return query;
}

FeedbackReport parse_feedback_reply(std::string_view reply, const Transcript& transcript) {
    const auto open = reply.find('{');
    const auto close = reply.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
        schema_fail("reply contains no JSON object");
    }
    json doc;
    try {
        doc = json::parse(reply.substr(open, close - open + 1));
    } catch (const json::exception& e) {
        schema_fail(std::string("reply is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) schema_fail("reply is not a JSON object");

    FeedbackReport report;
    std::map<std::size_t, TransactionVector> vectors;
    try {
        std::size_t n = 0;
        for (const json& item : require_array(doc, "per_turn_states")) {
            const std::string where = "per_turn_states[" + std::to_string(n++) + "]";
            if (!item.is_object()) schema_fail(where + " is not an object");
            const std::size_t index = require_turn_index(item, "turn_index", transcript, where);
            const TransactionVector vec{require_state(item, "source", where),
                                        require_state(item, "addressed", where)};
            if (!vectors.emplace(index, vec).second) {
                schema_fail(where + ": turn " + std::to_string(index) + " listed twice");
            }
            report.per_turn_states.push_back(
                {index, transcript.turns[index].message.speaker_id, vec});
        }
        std::sort(report.per_turn_states.begin(), report.per_turn_states.end(),
                  [](const auto& a, const auto& b) { return a.turn_index < b.turn_index; });

        n = 0;
        for (const json& item : require_array(doc, "transactions")) {
            const std::string where = "transactions[" + std::to_string(n++) + "]";
            if (!item.is_object()) schema_fail(where + " is not an object");
            AnalyzedTransaction t;
            t.stimulus_index = require_turn_index(item, "stimulus_index", transcript, where);
            t.response_index = require_turn_index(item, "response_index", transcript, where);
            if (t.stimulus_index >= t.response_index) {
                schema_fail(where + ": stimulus must precede response");
            }
            const auto stimulus = vectors.find(t.stimulus_index);
            const auto response = vectors.find(t.response_index);
            if (stimulus == vectors.end() || response == vectors.end()) {
                schema_fail(where + ": both turns need an entry in per_turn_states");
            }
            const std::string label = require_string(item, "label", where, true);
            t.commentary = item.contains("commentary") && item.at("commentary").is_string()
                               ? item.at("commentary").get<std::string>()
                               : std::string();
            t.cls = classify({stimulus->second, response->second});
            std::optional<TransactionClass> claimed;
            try {
                claimed = parse_transaction_class(trim(label));
            } catch (const Error&) {
            }
            if (!claimed || *claimed != t.cls) {
                t.corrected = true;
                t.model_label = label;
            }
            report.transactions.push_back(std::move(t));
        }

        n = 0;
        for (const json& item : require_array(doc, "games")) {
            const std::string where = "games[" + std::to_string(n++) + "]";
            if (!item.is_object()) schema_fail(where + " is not an object");
            report.games.push_back({require_string(item, "name", where, false),
                                    require_string(item, "evidence", where, true)});
        }

        n = 0;
        for (const json& item : require_array(doc, "alternatives")) {
            const std::string where = "alternatives[" + std::to_string(n++) + "]";
            if (!item.is_object()) schema_fail(where + " is not an object");
            AlternativeSuggestion a;
            a.turn_index = require_turn_index(item, "turn_index", transcript, where);
            a.suggested_state = require_state(item, "suggested_ego_state", where);
            a.suggested_wording = require_string(item, "suggested_wording", where, false);
            report.alternatives.push_back(std::move(a));
        }
    } catch (const json::exception& e) {
        schema_fail(std::string("unexpected value: ") + e.what());
    }
    return report;
}

std::string feedback_system_prompt() {
    return R"(You are an experienced Transactional Analysis (TA) practitioner coaching a teacher in training. You will read a classroom dialogue between the teacher and students, together with excerpts of TA theory. Ground your analysis in the excerpts.

Analyse the dialogue in four parts:
1. per_turn_states: for every turn, the ego state the speaker most probably spoke from ("source") and the ego state of the listener they addressed ("addressed"). Use only Parent, Adult or Child.
2. transactions: for consecutive stimulus/response turns, label the transaction "Complementary" or "Crossed" and comment on whether it moved the conflict forward or kept it going.
3. games: psychological games that may be in play, each with the lines that suggest it. Use an empty list if you see none.
4. alternatives: for turns where the teacher could have responded from a different ego state, the ego state to use and an example of what the teacher could have said.

Reply with a single JSON object and nothing else, using exactly this shape:
{
  "per_turn_states": [{"turn_index": 0, "source": "Parent", "addressed": "Child"}],
  "transactions": [{"stimulus_index": 0, "response_index": 1, "label": "Complementary", "commentary": "..."}],
  "games": [{"name": "...", "evidence": "..."}],
  "alternatives": [{"turn_index": 4, "suggested_ego_state": "Adult", "suggested_wording": "..."}]
}
Turn indices refer to the bracketed numbers in the dialogue.)";
}

std::string feedback_user_prompt(const Transcript& transcript, const SpeakerNames& names,
                                 const std::vector<CorpusChunk>& theory) {
    std::ostringstream out;
    out << "DIALOGUE:\n";
    for (const Turn& turn : transcript.turns) {
        out << '[' << turn.message.turn_index << "] "
            << display_name(names, turn.message.speaker_id) << " (" << to_string(turn.message.role)
            << "): " << turn.message.text << '\n';
    }
    out << "\nTHEORY EXCERPTS:\n";
    for (const CorpusChunk& c : theory) {
        out << '[' << c.id << "] (" << c.source_doc << ")\n" << trim(c.text) << "\n\n";
    }
    return out.str();
}

FeedbackReport generate_feedback(const Transcript& transcript, const SpeakerNames& names,
                                 const CorpusIndex& corpus, const Gateway& gateway,
                                 const FeedbackOptions& options) {
    if (transcript.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "feedback needs a transcript of at least 2 turns");
    }
    const std::vector<CorpusChunk> theory =
        retrieve_theory(corpus, feedback_query(transcript), options.k, gateway);

    ChatRequest request;
    request.system_prompt = feedback_system_prompt();
    request.messages.push_back({"user", feedback_user_prompt(transcript, names, theory)});
    request.temperature = options.temperature;
    request.max_output_tokens = options.max_output_tokens;
    request.agent_role = AgentRole::Feedback;

    FeedbackReport report;
    std::string reply = gateway.chat(request).content;
    try {
        report = parse_feedback_reply(reply, transcript);
    } catch (const Error& first) {
        if (first.code() != ErrorCode::StructuredOutputFailure) throw;
        request.messages.push_back({"assistant", reply});
        request.messages.push_back(
            {"user", "That reply did not follow the required schema (" + first.detail() +
                         "). Reply again with only the JSON object."});
        reply = gateway.chat(request).content;
        try {
            report = parse_feedback_reply(reply, transcript);
        } catch (const Error& second) {
            if (second.code() != ErrorCode::StructuredOutputFailure) throw;
            throw Error(ErrorCode::StructuredOutputFailure,
                        "feedback failed the schema twice: " + second.detail());
        }
    }

    for (const CorpusChunk& c : theory) report.cited_chunks.push_back(c.id);
    for (const Turn& turn : transcript.turns) {
        if (turn.annotation) {
            report.engine_annotations.push_back(
                {turn.message.turn_index, turn.message.speaker_id, turn.annotation->selected_state});
        }
    }
    return report;
}

}  // namespace tacla
