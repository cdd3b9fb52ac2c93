#pragma once

// Structural classification of stimulus/response transactions. Effectiveness
// is not judged here; a complementary Controlling Parent / Rebellious Child
// exchange is still complementary.

#include <cstddef>
#include <optional>
#include <vector>

#include "tacla/ta_domain.hpp"

namespace tacla {

struct TransactionPair {
    TransactionVector stimulus;
    TransactionVector response;
};

/// Complementary iff the response comes from the state the stimulus addressed
/// and goes back to the state the stimulus came from (parallel vectors).
constexpr TransactionClass classify(const TransactionPair& pair) noexcept {
    const bool parallel = pair.response.source == pair.stimulus.addressed &&
                          pair.response.addressed == pair.stimulus.source;
    return parallel ? TransactionClass::Complementary : TransactionClass::Crossed;
}

struct VectorizedTurn {
    std::size_t turn_index = 0;
    std::optional<TransactionVector> vector;
};

struct ClassifiedTransaction {
    std::size_t stimulus_index = 0;
    std::size_t response_index = 0;
    TransactionClass cls = TransactionClass::Complementary;

    bool operator==(const ClassifiedTransaction&) const = default;
};

/// One classification per adjacent (stimulus, response) pair, in order.
/// Throws MissingVector naming the first turn without a vector.
std::vector<ClassifiedTransaction> classify_transcript(const std::vector<VectorizedTurn>& turns);

}  // namespace tacla
