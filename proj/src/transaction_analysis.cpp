#include "tacla/transaction_analysis.hpp"

namespace tacla {

std::vector<ClassifiedTransaction> classify_transcript(const std::vector<VectorizedTurn>& turns) {
    for (const auto& turn : turns) {
        if (!turn.vector) {
            throw Error(ErrorCode::MissingVector,
                        "turn " + std::to_string(turn.turn_index) + " has no transaction vector");
        }
    }
    std::vector<ClassifiedTransaction> out;
    for (std::size_t i = 1; i < turns.size(); ++i) {
        const auto& stimulus = turns[i - 1];
        const auto& response = turns[i];
        out.push_back({stimulus.turn_index, response.turn_index,
                       classify({*stimulus.vector, *response.vector})});
    }
    return out;
}

}  // namespace tacla
