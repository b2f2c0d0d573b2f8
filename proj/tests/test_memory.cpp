#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "percept/memory.hpp"
#include "percept/simulator.hpp"

using namespace percept;

namespace {

MemoryItem make_item(std::int64_t t, std::size_t tokens, double surprise, float fill) {
    MemoryItem item;
    item.timestamp = t;
    item.tokens = TokenGrid(tokens, 4, fill);
    item.surprise = surprise;
    return item;
}

LatentFrame make_frame(std::int64_t t, std::size_t tokens, float x, float y) {
    LatentFrame f;
    f.timestamp = t;
    f.grid = TokenGrid(tokens, 2);
    for (std::size_t i = 0; i < tokens; ++i) {
        f.grid.token(i)[0] = x;
        f.grid.token(i)[1] = y;
    }
    return f;
}

}  // namespace

TEST_CASE("strategy names round-trip") {
    for (auto s : {ConsolidationStrategy::ForgetOldest, ConsolidationStrategy::ForgetLeastSurprise,
                   ConsolidationStrategy::ForgetLeastSurpriseMergeAdjacent}) {
        CHECK(strategy_from_string(to_string(s)) == s);
    }
    CHECK_THROWS_AS((void)strategy_from_string("bogus"), std::invalid_argument);
}

TEST_CASE("consolidate ForgetOldest drops from the front") {
    LongTermMemory m;
    m.strategy = ConsolidationStrategy::ForgetOldest;
    m.token_budget = 64;
    m.items = {make_item(0, 32, 0.9f, 1), make_item(1, 32, 0.1f, 1), make_item(2, 32, 0.5f, 1)};
    consolidate(m);
    REQUIRE(m.items.size() == 2);
    CHECK(m.items[0].timestamp == 1);
    CHECK(m.items[1].timestamp == 2);
    CHECK(m.total_tokens() == 64);
}

TEST_CASE("consolidate ForgetLeastSurprise drops the calmest item") {
    LongTermMemory m;
    m.strategy = ConsolidationStrategy::ForgetLeastSurprise;
    m.token_budget = 64;
    m.items = {make_item(0, 32, 0.9, 1), make_item(1, 32, 0.1, 1), make_item(2, 32, 0.5, 1)};
    consolidate(m);
    REQUIRE(m.items.size() == 2);
    CHECK(m.items[0].surprise == doctest::Approx(0.9));
    CHECK(m.items[1].surprise == doctest::Approx(0.5));
}

TEST_CASE("consolidate ForgetLeastSurprise tie goes to the oldest") {
    LongTermMemory m;
    m.strategy = ConsolidationStrategy::ForgetLeastSurprise;
    m.token_budget = 64;
    m.items = {make_item(0, 32, 0.2, 1), make_item(1, 32, 0.2, 1), make_item(2, 32, 0.7, 1)};
    consolidate(m);
    REQUIRE(m.items.size() == 2);
    CHECK(m.items[0].timestamp == 1);
}

TEST_CASE("consolidate merge keeps the pair's span and max surprise") {
    LongTermMemory m;
    m.strategy = ConsolidationStrategy::ForgetLeastSurpriseMergeAdjacent;
    m.token_budget = 64;
    m.items = {make_item(0, 32, 0.9, 2.0f), make_item(1, 32, 0.1, 4.0f),
               make_item(2, 32, 0.5, 8.0f)};
    // argmin is item 1; its calmer neighbor is item 2 (0.5 < 0.9)
    consolidate(m);
    REQUIRE(m.items.size() == 2);
    CHECK(m.items[0].timestamp == 0);
    CHECK(m.items[1].timestamp == 1);
    CHECK(m.items[1].surprise == doctest::Approx(0.5));
    CHECK(m.items[1].compressed);
    CHECK(m.items[1].tokens.count == 32);  // pooled back down to max(32, 32)
    // every merged value is a mean of fill-4 and fill-8 tokens
    for (std::size_t i = 0; i < m.items[1].tokens.count; ++i) {
        for (float v : m.items[1].tokens.token(i)) {
            CHECK(v >= 4.0f);
            CHECK(v <= 8.0f);
        }
    }
    CHECK(m.total_tokens() == 64);
}

TEST_CASE("consolidate merge prefers the earlier neighbor on a tie") {
    LongTermMemory m;
    m.strategy = ConsolidationStrategy::ForgetLeastSurpriseMergeAdjacent;
    m.token_budget = 64;
    m.items = {make_item(0, 32, 0.5, 1), make_item(1, 32, 0.1, 1), make_item(2, 32, 0.5, 1)};
    consolidate(m);
    REQUIRE(m.items.size() == 2);
    CHECK(m.items[0].timestamp == 0);
    CHECK(m.items[1].timestamp == 2);
}

TEST_CASE("consolidate merge with a single item falls back to dropping it") {
    LongTermMemory m;
    m.strategy = ConsolidationStrategy::ForgetLeastSurpriseMergeAdjacent;
    m.token_budget = 16;
    m.items = {make_item(0, 8, 0.5, 1), make_item(5, 16, 0.9, 1)};
    consolidate(m);
    // merging 8+16 pools down to 16 > budget-0, loop continues until fits
    CHECK(m.total_tokens() <= 16);
}

TEST_CASE("consolidate rejects an unsatisfiable budget") {
    LongTermMemory m;
    m.token_budget = 16;
    m.items = {make_item(0, 32, 0.5, 1)};
    CHECK_THROWS_AS(consolidate(m), std::runtime_error);
}

TEST_CASE("retrieve matches a brute-force oracle") {
    std::mt19937_64 rng(41);
    LongTermMemory m;
    for (int i = 0; i < 50; ++i) {
        auto item = make_item(i, 4, 0.0, 1.0f);
        for (auto& v : item.tokens.data) {
            v = static_cast<float>(rng() % 2000) / 1000.0f - 1.0f;
            if (v == 0.0f) v = 0.25f;
        }
        m.items.push_back(std::move(item));
    }
    FeatureVector query = {0.3f, -0.7f, 0.2f, 0.9f};

    struct Scored {
        double sim;
        std::size_t idx;
    };
    std::vector<Scored> oracle;
    for (std::size_t i = 0; i < m.items.size(); ++i) {
        oracle.push_back({1.0 - cosine_distance(query, pooled_feature(m.items[i].tokens)), i});
    }
    std::stable_sort(oracle.begin(), oracle.end(), [](const Scored& a, const Scored& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.idx < b.idx;
    });
    oracle.resize(5);
    std::vector<std::int64_t> expect;
    for (const auto& s : oracle) expect.push_back(m.items[s.idx].timestamp);
    std::sort(expect.begin(), expect.end());

    auto wm = retrieve(m, query, 5);
    REQUIRE(wm.items.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(wm.items[i].timestamp == expect[i]);
    // timestamp order
    for (std::size_t i = 1; i < wm.items.size(); ++i) {
        CHECK(wm.items[i].timestamp > wm.items[i - 1].timestamp);
    }
}

TEST_CASE("retrieve ties break toward the earlier item") {
    LongTermMemory m;
    m.items = {make_item(3, 2, 0.0, 1.0f), make_item(7, 2, 0.0, 2.0f),
               make_item(9, 2, 0.0, 1.0f)};
    // fill-scaled grids all point the same way, so every similarity ties
    FeatureVector query(4, 1.0f);
    auto wm = retrieve(m, query, 2);
    REQUIRE(wm.items.size() == 2);
    CHECK(wm.items[0].timestamp == 3);
    CHECK(wm.items[1].timestamp == 7);
}

TEST_CASE("retrieve edge cases") {
    LongTermMemory m;
    FeatureVector query = {1.0f, 0.0f, 0.0f, 0.0f};
    CHECK(retrieve(m, query, 3).items.empty());
    m.items = {make_item(0, 2, 0.0, 1.0f)};
    CHECK_THROWS_AS((void)retrieve(m, query, 0), std::invalid_argument);
    CHECK(retrieve(m, query, 10).items.size() == 1);
}

TEST_CASE("ingest keeps a short stream entirely in the sensory buffer") {
    auto model = PredictorModel::last_frame(2);
    MemoryEngine engine({4, 1024, 0.05, 2, ConsolidationStrategy::ForgetLeastSurprise},
                        {SurpriseMode::PredictionError, &model});
    for (int t = 0; t < 4; ++t) engine.ingest(make_frame(t, 4, 1.0f, 0.0f));
    CHECK(engine.long_term().items.empty());
    CHECK(engine.sensory().size() == 4);
    CHECK(engine.sensory().front().second == 0.0);  // first frame scores zero
}

TEST_CASE("ingest compresses calm frames on spill") {
    auto model = PredictorModel::last_frame(2);
    MemoryEngine engine({2, 1024, 0.05, 2, ConsolidationStrategy::ForgetLeastSurprise},
                        {SurpriseMode::PredictionError, &model});
    for (int t = 0; t < 6; ++t) engine.ingest(make_frame(t, 4, 1.0f, 0.0f));
    REQUIRE(engine.long_term().items.size() == 4);
    for (const auto& item : engine.long_term().items) {
        CHECK(item.compressed);
        CHECK(item.tokens.count == 2);
        CHECK(item.surprise == doctest::Approx(0.0));
    }
}

TEST_CASE("ingest stores a surprising frame uncompressed") {
    auto model = PredictorModel::last_frame(2);
    MemoryEngine engine({2, 1024, 0.05, 2, ConsolidationStrategy::ForgetLeastSurprise},
                        {SurpriseMode::PredictionError, &model});
    engine.ingest(make_frame(0, 4, 1.0f, 0.0f));
    engine.ingest(make_frame(1, 4, 0.0f, 1.0f));  // orthogonal jump, surprise 1
    engine.ingest(make_frame(2, 4, 0.0f, 1.0f));
    engine.ingest(make_frame(3, 4, 0.0f, 1.0f));
    REQUIRE(engine.long_term().items.size() == 2);
    CHECK(engine.long_term().items[0].compressed);       // frame 0, surprise 0
    CHECK(engine.long_term().items[0].tokens.count == 2);
    CHECK_FALSE(engine.long_term().items[1].compressed); // frame 1, surprise 1
    CHECK(engine.long_term().items[1].tokens.count == 4);
    CHECK(engine.long_term().items[1].surprise == doctest::Approx(1.0));
}

TEST_CASE("ingest rejects out-of-order timestamps") {
    auto model = PredictorModel::last_frame(2);
    MemoryEngine engine({2, 64, 0.05, 2, ConsolidationStrategy::ForgetLeastSurprise},
                        {SurpriseMode::PredictionError, &model});
    engine.ingest(make_frame(0, 2, 1.0f, 0.0f));
    CHECK_THROWS_AS(engine.ingest(make_frame(2, 2, 1.0f, 0.0f)), std::invalid_argument);
    CHECK_THROWS_AS(engine.ingest(make_frame(0, 2, 1.0f, 0.0f)), std::invalid_argument);
}

TEST_CASE("peak token count stays within the budget bound") {
    StreamSpec spec = family_stream_spec(12, 400, 8, 8, 25, 0.6, 0.02, 0.0, 0);
    auto model = PredictorModel::last_frame(8);
    EngineConfig cfg{4, 96, 0.05, 2, ConsolidationStrategy::ForgetLeastSurprise};
    MemoryEngine engine(cfg, {SurpriseMode::PredictionError, &model});
    StreamGenerator gen(spec);
    for (std::int64_t t = 0; t < gen.length(); ++t) engine.ingest(gen.frame(t));
    const std::size_t bound = (cfg.sensory_budget + 1) * 8 + cfg.token_budget;
    CHECK(engine.peak_token_count() <= bound);
    CHECK(engine.long_term().total_tokens() <= cfg.token_budget);
    CHECK(engine.peak_token_count() >= engine.current_token_count());
}

TEST_CASE("ForgetLeastSurprise never evicts the most surprising item") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        StreamSpec spec = family_stream_spec(seed, 300, 8, 8, 20, 0.8, 0.02, 0.0, 0);
        auto model = PredictorModel::last_frame(8);
        const std::size_t sensory_budget = 4;
        MemoryEngine engine({sensory_budget, 128, 0.05, 2,
                             ConsolidationStrategy::ForgetLeastSurprise},
                            {SurpriseMode::PredictionError, &model});
        StreamGenerator gen(spec);
        // independent surprise scores for every frame that will spill
        SurpriseEstimator est{SurpriseMode::PredictionError, &model};
        double max_spilled = 0.0;
        std::int64_t max_t = 0;
        for (std::int64_t t = 0;
             t < gen.length() - static_cast<std::int64_t>(sensory_budget); ++t) {
            const double s = t == 0 ? 0.0 : est.score(gen.frame(t - 1), gen.frame(t));
            if (s > max_spilled) {
                max_spilled = s;
                max_t = t;
            }
        }
        for (std::int64_t t = 0; t < gen.length(); ++t) engine.ingest(gen.frame(t));
        bool found = false;
        for (const auto& item : engine.long_term().items) {
            if (item.timestamp == max_t) found = true;
        }
        CHECK(found);
    }
}

TEST_CASE("trace rows follow the sensory then spill pattern") {
    auto model = PredictorModel::last_frame(2);
    MemoryEngine engine({2, 1024, 0.05, 2, ConsolidationStrategy::ForgetLeastSurprise},
                        {SurpriseMode::PredictionError, &model});
    engine.enable_trace();
    for (int t = 0; t < 4; ++t) engine.ingest(make_frame(t, 4, 1.0f, 0.0f));
    REQUIRE(engine.trace().size() == 6);  // 4 enqueues + 2 spills
    CHECK(engine.trace()[0].compressed == -1);
    CHECK(engine.trace()[3].compressed == 1);  // spill of frame 0 after enqueue of frame 2
}

TEST_CASE("match_option prefers exact then longest common subsequence") {
    std::array<std::vector<std::string>, 4> options = {
        std::vector<std::string>{"a", "b", "c", "d"},
        std::vector<std::string>{"d", "c", "b", "a"},
        std::vector<std::string>{"b", "a", "d", "c"},
        std::vector<std::string>{"c", "d", "a", "b"},
    };
    CHECK(match_option(options, {"d", "c", "b", "a"}) == 1);
    CHECK(match_option(options, {"a", "b", "c"}) == 0);    // LCS 3 with option 0
    CHECK(match_option(options, {"z"}) == 0);              // no overlap, lowest index
}

TEST_CASE("answer_recall flags an empty engine") {
    auto model = PredictorModel::last_frame(8);
    MemoryEngine engine({4, 256, 0.05, 4, ConsolidationStrategy::ForgetLeastSurprise},
                        {SurpriseMode::PredictionError, &model});
    RecallSuiteConfig cfg;
    cfg.durations = {240};
    cfg.tasks_per_duration = 1;
    cfg.dim = 8;
    cfg.tokens_per_frame = 4;
    auto tasks = build_recall_suite(cfg);
    REQUIRE(tasks.size() == 1);
    auto ans = answer_recall(engine, tasks[0], 4);
    CHECK(ans.no_evidence);
    CHECK(ans.option_index == 0);
}

TEST_CASE("answer_recall recovers needle locations from a full run") {
    RecallSuiteConfig cfg;
    cfg.durations = {240};
    cfg.tasks_per_duration = 2;
    cfg.dim = 8;
    cfg.tokens_per_frame = 4;
    cfg.seed = 9;
    auto tasks = build_recall_suite(cfg);
    auto model = PredictorModel::last_frame(8);
    for (const auto& task : tasks) {
        MemoryEngine engine({8, 2048, 0.05, 8, ConsolidationStrategy::ForgetLeastSurprise},
                            {SurpriseMode::PredictionError, &model});
        StreamGenerator gen(task.stream);
        for (std::int64_t t = 0; t < gen.length(); ++t) engine.ingest(gen.frame(t));
        auto ans = answer_recall(engine, task, 8);
        CHECK_FALSE(ans.no_evidence);
        REQUIRE(ans.recovered.size() == 4);
        CHECK(ans.option_index == task.correct_index);
    }
}
