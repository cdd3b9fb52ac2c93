#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace tacla {

using Embedding = std::vector<double>;

inline constexpr double kNormTolerance = 1e-6;

/// dot(a,b) / (|a| |b|), clamped to [-1, 1].
/// Throws DimensionMismatch on unequal sizes and ZeroVector if either norm is 0.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

double l2_norm(std::span<const double> v) noexcept;

/// Unit-length copy. Throws ZeroVector for empty or all-zero input.
Embedding normalized(std::span<const double> v);

struct Hit {
    std::size_t index = 0;
    double score = 0.0;
};

/// Exact cosine top-k by linear scan over L2-normalized rows.
///
/// Rows are normalized on insertion and queries at search time, so the score
/// is a plain dot product. Results are ordered by descending score with ties
/// broken by ascending id. The dimension is fixed by the constructor, or by
/// the first insertion when constructed with 0.
class VectorIndex {
public:
    explicit VectorIndex(std::size_t dimension = 0) : dimension_(dimension) {}

    /// Throws DuplicateId, DimensionMismatch or ZeroVector.
    void add(std::string id, std::span<const double> vector);

    /// Stores `unit` verbatim; used when reloading persisted rows so values
    /// survive bit-for-bit. Throws InvalidArgument if |unit| is off by more
    /// than kNormTolerance.
    void add_unit(std::string id, std::span<const double> unit);

    [[nodiscard]] std::vector<Hit> search(std::span<const double> query, std::size_t k) const;

    [[nodiscard]] std::size_t dimension() const noexcept { return dimension_; }
    [[nodiscard]] std::size_t size() const noexcept { return ids_.size(); }
    [[nodiscard]] bool empty() const noexcept { return ids_.empty(); }
    [[nodiscard]] const std::string& id(std::size_t i) const { return ids_.at(i); }
    [[nodiscard]] std::span<const double> vector(std::size_t i) const;
    [[nodiscard]] bool contains(const std::string& id) const;

private:
    std::size_t dimension_;
    std::vector<std::string> ids_;
    std::unordered_set<std::string> id_set_;
    std::vector<double> rows_;  // row-major, size() * dimension_
};

}  // namespace tacla
