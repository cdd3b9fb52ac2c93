#include "tacla/pattern_memory.hpp"

#include <cmath>

#include "tacla/io.hpp"

namespace tacla {

PatternStore::PatternStore(EgoState state, std::size_t dimension, std::size_t default_k)
    : state_(state), default_k_(default_k), index_(dimension) {
    if (default_k_ == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
}

void PatternStore::add_pattern(PatternRecord record, std::span<const double> embedding) {
    if (trim(record.context).empty() || trim(record.pattern).empty()) {
        throw Error(ErrorCode::InvalidArgument, "pattern '" + record.id + "' has empty text");
    }
    index_.add(record.id, embedding);
    records_.push_back(std::move(record));
}

std::vector<RetrievedPattern> PatternStore::retrieve(std::span<const double> query,
                                                     std::size_t k) const {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
    std::vector<RetrievedPattern> out;
    for (const Hit& hit : index_.search(query, k)) {
        out.push_back(RetrievedPattern{records_[hit.index], hit.score});
    }
    return out;
}

bool operator==(const PatternStore& a, const PatternStore& b) {
    if (a.state_ != b.state_ || a.dimension() != b.dimension() || a.records_ != b.records_) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto x = a.embedding(i);
        const auto y = b.embedding(i);
        if (!std::equal(x.begin(), x.end(), y.begin(), y.end())) return false;
    }
    return true;
}

json store_to_json(const PatternStore& store) {
    json entries = json::array();
    for (std::size_t i = 0; i < store.size(); ++i) {
        const PatternRecord& r = store.records_[i];
        const auto v = store.embedding(i);
        entries.push_back(json{{"id", r.id},
                               {"context", r.context},
                               {"pattern", r.pattern},
                               {"embedding", std::vector<double>(v.begin(), v.end())}});
    }
    return json{{"ego_state", store.state_},
                {"dimension", store.dimension()},
                {"default_k", store.default_k_},
                {"entries", std::move(entries)}};
}

PatternStore store_from_json(const json& j) {
    try {
        const auto state = j.at("ego_state").get<EgoState>();
        const auto dimension = j.at("dimension").get<std::size_t>();
        PatternStore store(state, dimension, j.value("default_k", kDefaultPatternK));
        std::size_t position = 0;
        for (const json& entry : j.at("entries")) {
            const std::string where = "entries[" + std::to_string(position++) + "]";
            auto record = entry.get<PatternRecord>();
            const auto embedding = entry.at("embedding").get<std::vector<double>>();
            if (embedding.size() != dimension) {
                throw Error(ErrorCode::SchemaViolation, where + ".embedding has dimension " +
                                                            std::to_string(embedding.size()) +
                                                            ", store declares " +
                                                            std::to_string(dimension));
            }
            if (trim(record.context).empty() || trim(record.pattern).empty()) {
                throw Error(ErrorCode::SchemaViolation, where + " has empty text");
            }
            store.index_.add_unit(record.id, embedding);
            store.records_.push_back(std::move(record));
        }
        return store;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::SchemaViolation) throw;
        throw Error(ErrorCode::SchemaViolation, e.detail());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, e.what());
    }
}

void save_store(const PatternStore& store, const std::filesystem::path& path) {
    write_file_atomic(path, dump_json(store_to_json(store)));
}

PatternStore load_store(const std::filesystem::path& path) {
    return store_from_json(read_json_file(path));
}

}  // namespace tacla
