#include <gtest/gtest.h>

#include <random>

#include "tacla/io.hpp"
#include "tacla/pattern_memory.hpp"
#include "tacla/scripted_provider.hpp"
#include "test_support.hpp"

using namespace tacla;

TEST(PatternStore, DefaultKIsTwo) {
    PatternStore store(EgoState::Child);
    for (int i = 0; i < 5; ++i) {
        const std::string ctx = "context number " + std::to_string(i);
        store.add_pattern({"c" + std::to_string(i), ctx, "pattern"}, hash_embedding(ctx));
    }
    EXPECT_EQ(store.retrieve(hash_embedding("context number 3")).size(), 2u);
    EXPECT_EQ(store.retrieve(hash_embedding("context number 3"))[0].record.id, "c3");
}

TEST(PatternStore, SelfMatchComesFirst) {
    PatternStore store(EgoState::Parent);
    const std::vector<std::string> contexts{"a classmate misses a deadline",
                                            "someone gets a question wrong in class",
                                            "the group project falls behind"};
    for (std::size_t i = 0; i < contexts.size(); ++i) {
        store.add_pattern({"p" + std::to_string(i), contexts[i], "criticise"},
                          hash_embedding(contexts[i]));
    }
    for (std::size_t i = 0; i < contexts.size(); ++i) {
        const auto hits = store.retrieve(hash_embedding(contexts[i]), 1);
        ASSERT_EQ(hits.size(), 1u);
        EXPECT_EQ(hits[0].record.id, "p" + std::to_string(i));
        EXPECT_NEAR(hits[0].score, 1.0, 1e-9);
    }
}

TEST(PatternStore, RejectsEmptyTextAndDuplicates) {
    PatternStore store(EgoState::Adult);
    const auto v = hash_embedding("x");
    EXPECT_THROW(store.add_pattern({"a", "", "p"}, v), Error);
    EXPECT_THROW(store.add_pattern({"a", "c", "  "}, v), Error);
    store.add_pattern({"a", "c", "p"}, v);
    try {
        store.add_pattern({"a", "c2", "p2"}, v);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DuplicateId);
    }
}

TEST(PatternStore, SaveLoadIsBitExact) {
    tacla_test::TempDir dir;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> d;
    PatternStore store(EgoState::Child, 0, 3);
    for (int i = 0; i < 20; ++i) {
        Embedding v(33);
        for (auto& x : v) x = d(rng);
        store.add_pattern({"id" + std::to_string(i), "ctx " + std::to_string(i), "pat"}, v);
    }
    save_store(store, dir / "child.json");
    const PatternStore loaded = load_store(dir / "child.json");
    EXPECT_TRUE(loaded == store);
    EXPECT_EQ(loaded.default_k(), 3u);
    EXPECT_EQ(loaded.ego_state(), EgoState::Child);
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto a = store.embedding(i);
        const auto b = loaded.embedding(i);
        for (std::size_t j = 0; j < a.size(); ++j) ASSERT_EQ(a[j], b[j]);
    }
    // Saving the reloaded store reproduces the file byte for byte.
    save_store(loaded, dir / "again.json");
    EXPECT_EQ(read_file(dir / "child.json"), read_file(dir / "again.json"));
}

TEST(PatternStore, LoadRejectsInconsistentDimension) {
    json j = store_to_json([] {
        PatternStore s(EgoState::Adult);
        s.add_pattern({"a", "c", "p"}, std::vector<double>{1, 0});
        return s;
    }());
    j["dimension"] = 3;
    try {
        store_from_json(j);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
    }
    EXPECT_THROW(store_from_json(json{{"ego_state", "Adult"}}), Error);
}
