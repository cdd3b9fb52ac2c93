#include "tacla/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tacla/error.hpp"

namespace tacla {

namespace {

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

void check_dimension(std::size_t expected, std::size_t actual) {
    if (expected != actual) {
        throw Error(ErrorCode::DimensionMismatch, "expected dimension " + std::to_string(expected) +
                                                      ", got " + std::to_string(actual));
    }
}

}  // namespace

double l2_norm(std::span<const double> v) noexcept { return std::sqrt(dot(v, v)); }

Embedding normalized(std::span<const double> v) {
    const double norm = l2_norm(v);
    if (v.empty() || norm == 0.0 || !std::isfinite(norm)) {
        throw Error(ErrorCode::ZeroVector, "cannot normalize a zero or non-finite vector");
    }
    Embedding out(v.begin(), v.end());
    for (double& x : out) x /= norm;
    return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    check_dimension(a.size(), b.size());
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

void VectorIndex::add(std::string id, std::span<const double> vector) {
    if (dimension_ == 0) {
        if (vector.empty()) throw Error(ErrorCode::ZeroVector, "empty embedding");
    } else {
        check_dimension(dimension_, vector.size());
    }
    if (contains(id)) throw Error(ErrorCode::DuplicateId, id);
    const Embedding unit = normalized(vector);
    if (dimension_ == 0) dimension_ = unit.size();
    id_set_.insert(id);
    ids_.push_back(std::move(id));
    rows_.insert(rows_.end(), unit.begin(), unit.end());
}

void VectorIndex::add_unit(std::string id, std::span<const double> unit) {
    if (dimension_ == 0) {
        if (unit.empty()) throw Error(ErrorCode::ZeroVector, "empty embedding");
    } else {
        check_dimension(dimension_, unit.size());
    }
    if (contains(id)) throw Error(ErrorCode::DuplicateId, id);
    if (std::abs(l2_norm(unit) - 1.0) > kNormTolerance) {
        throw Error(ErrorCode::InvalidArgument, "row '" + id + "' is not unit length");
    }
    if (dimension_ == 0) dimension_ = unit.size();
    id_set_.insert(id);
    ids_.push_back(std::move(id));
    rows_.insert(rows_.end(), unit.begin(), unit.end());
}

std::span<const double> VectorIndex::vector(std::size_t i) const {
    if (i >= size()) throw Error(ErrorCode::NotFound, "row " + std::to_string(i));
    return {rows_.data() + i * dimension_, dimension_};
}

bool VectorIndex::contains(const std::string& id) const {
    return id_set_.count(id) != 0;
}

std::vector<Hit> VectorIndex::search(std::span<const double> query, std::size_t k) const {
    if (dimension_ != 0) check_dimension(dimension_, query.size());
    if (empty() || k == 0) return {};
    const Embedding q = normalized(query);

    std::vector<Hit> hits(size());
    for (std::size_t i = 0; i < size(); ++i) {
        hits[i] = Hit{i, std::clamp(dot(q, vector(i)), -1.0, 1.0)};
    }
    const auto better = [this](const Hit& a, const Hit& b) {
        if (a.score != b.score) return a.score > b.score;
        return ids_[a.index] < ids_[b.index];
    };
    const std::size_t n = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(),
                      better);
    hits.resize(n);
    return hits;
}

}  // namespace tacla
