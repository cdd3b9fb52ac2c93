#pragma once

// Contextual pattern memory: one store per ego state, holding {context,
// pattern} records whose context text is embedded for cosine retrieval.

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "tacla/ta_domain.hpp"
#include "tacla/vector_index.hpp"

namespace tacla {

inline constexpr std::size_t kDefaultPatternK = 2;

struct RetrievedPattern {
    PatternRecord record;
    double score = 0.0;
};

class PatternStore {
public:
    explicit PatternStore(EgoState state, std::size_t dimension = 0,
                          std::size_t default_k = kDefaultPatternK);

    /// Appends `record` with its normalized embedding.
    /// Throws DuplicateId, DimensionMismatch, ZeroVector, or InvalidArgument
    /// for empty context/pattern text.
    void add_pattern(PatternRecord record, std::span<const double> embedding);

    /// Exact top-k. Returns min(k, size()) entries by descending score, ties
    /// by ascending id.
    [[nodiscard]] std::vector<RetrievedPattern> retrieve(std::span<const double> query,
                                                         std::size_t k) const;
    [[nodiscard]] std::vector<RetrievedPattern> retrieve(std::span<const double> query) const {
        return retrieve(query, default_k_);
    }

    [[nodiscard]] EgoState ego_state() const noexcept { return state_; }
    [[nodiscard]] std::size_t dimension() const noexcept { return index_.dimension(); }
    [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }
    [[nodiscard]] bool empty() const noexcept { return records_.empty(); }
    [[nodiscard]] std::size_t default_k() const noexcept { return default_k_; }
    [[nodiscard]] const std::vector<PatternRecord>& records() const noexcept { return records_; }
    [[nodiscard]] std::span<const double> embedding(std::size_t i) const { return index_.vector(i); }

    friend bool operator==(const PatternStore& a, const PatternStore& b);

    friend json store_to_json(const PatternStore& store);
    friend PatternStore store_from_json(const json& j);

private:
    EgoState state_;
    std::size_t default_k_;
    std::vector<PatternRecord> records_;
    VectorIndex index_;
};

/// {ego_state, dimension, entries:[{id, context, pattern, embedding:[...]}]}
json store_to_json(const PatternStore& store);
/// Throws SchemaViolation on missing fields or inconsistent dimensions.
PatternStore store_from_json(const json& j);

/// Throws IoFailure.
void save_store(const PatternStore& store, const std::filesystem::path& path);
/// Throws IoFailure or SchemaViolation.
PatternStore load_store(const std::filesystem::path& path);

}  // namespace tacla
