#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "percept/core.hpp"
#include "percept/simulator.hpp"

using namespace percept;

namespace {

TokenGrid grid_from(std::vector<std::vector<float>> tokens) {
    TokenGrid g(tokens.size(), tokens[0].size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::copy(tokens[i].begin(), tokens[i].end(), g.token(i).begin());
    }
    return g;
}

std::string temp_path(const char* name) {
    return std::string("/tmp/percept_core_") + name;
}

}  // namespace

TEST_CASE("cosine_distance basics") {
    FeatureVector a = {1.0f, 2.0f, -3.0f};
    CHECK(cosine_distance(a, a) == doctest::Approx(0.0));
    FeatureVector e1 = {1.0f, 0.0f, 0.0f};
    FeatureVector e2 = {0.0f, 1.0f, 0.0f};
    CHECK(cosine_distance(e1, e2) == doctest::Approx(1.0));
    FeatureVector u = {1.0f, 0.0f};
    FeatureVector v = {1.0f, 1.0f};
    CHECK(cosine_distance(u, v) == doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("cosine_distance errors") {
    FeatureVector z = {0.0f, 0.0f};
    FeatureVector a = {1.0f, 0.0f};
    CHECK_THROWS_AS((void)cosine_distance(z, a), std::invalid_argument);
    CHECK_THROWS_AS((void)cosine_distance(a, z), std::invalid_argument);
    FeatureVector b = {1.0f, 0.0f, 0.0f};
    CHECK_THROWS_AS((void)cosine_distance(a, b), std::invalid_argument);
}

TEST_CASE("cosine_distance symmetric, zero iff positive scalar multiple") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        FeatureVector a(8), b(8);
        for (int d = 0; d < 8; ++d) {
            a[d] = static_cast<float>(rng() % 1000) / 100.0f - 5.0f;
            b[d] = static_cast<float>(rng() % 1000) / 100.0f - 5.0f;
        }
        if (std::all_of(a.begin(), a.end(), [](float x) { return x == 0; })) a[0] = 1;
        if (std::all_of(b.begin(), b.end(), [](float x) { return x == 0; })) b[0] = 1;
        CHECK(cosine_distance(a, b) == doctest::Approx(cosine_distance(b, a)));
        FeatureVector scaled = a;
        for (auto& x : scaled) x *= 3.5f;
        CHECK(cosine_distance(a, scaled) == doctest::Approx(0.0).epsilon(1e-6));
    }
}

TEST_CASE("grid_surprise") {
    auto g = grid_from({{1, 0}, {0, 1}});
    CHECK(grid_surprise(g, g) == doctest::Approx(0.0));
    auto h = grid_from({{0, 1}, {1, 0}});
    CHECK(grid_surprise(g, h) == doctest::Approx(1.0));
    // distances {0.0, 0.4}: second pair at cos 0.6
    auto p = grid_from({{1, 0}, {1, 0}});
    auto q = grid_from({{1, 0}, {0.6f, 0.8f}});
    CHECK(grid_surprise(p, q) == doctest::Approx(0.2).epsilon(1e-6));
    auto bad = grid_from({{1, 0}});
    CHECK_THROWS_AS((void)grid_surprise(g, bad), std::invalid_argument);
}

TEST_CASE("mean_pool_pairs") {
    TokenGrid same(64, 4, 1.5f);
    auto pooled = mean_pool_pairs(same);
    CHECK(pooled.count == 32);
    for (std::size_t i = 0; i < pooled.count; ++i) {
        for (float v : pooled.token(i)) CHECK(v == 1.5f);
    }
    // pooled identical tokens pool again to the same values
    auto twice = mean_pool_pairs(pooled);
    CHECK(twice.count == 16);
    CHECK(twice.token(0)[0] == 1.5f);

    auto g = grid_from({{1, 1}, {3, 3}, {5, 5}, {7, 7}});
    auto p = mean_pool_pairs(g);
    CHECK(p.count == 2);
    CHECK(p.token(0)[0] == 2.0f);
    CHECK(p.token(1)[1] == 6.0f);

    auto odd = grid_from({{2, 2}, {4, 4}, {9, 9}});
    auto po = mean_pool_pairs(odd);
    CHECK(po.count == 2);
    CHECK(po.token(0)[0] == 3.0f);
    CHECK(po.token(1)[0] == 9.0f);  // odd trailing token passes through

    TokenGrid single(1, 2, 0.0f);
    CHECK_THROWS_AS((void)mean_pool_pairs(single), std::invalid_argument);
}

TEST_CASE("pooled_feature") {
    auto one = grid_from({{3, -1, 2}});
    auto p = pooled_feature(one);
    CHECK(p == FeatureVector{3, -1, 2});

    auto two = grid_from({{0, 0}, {2, 2}});
    CHECK(pooled_feature(two) == FeatureVector{1, 1});

    std::mt19937_64 rng(11);
    TokenGrid g(4, 6);
    for (auto& v : g.data) v = static_cast<float>(rng() % 100) / 10.0f;
    auto pf = pooled_feature(g);
    for (std::size_t d = 0; d < 6; ++d) {
        double sum = 0.0;
        for (std::size_t i = 0; i < 4; ++i) sum += g.token(i)[d];
        CHECK(pf[d] == doctest::Approx(sum / 4.0).epsilon(1e-6));
    }
}

TEST_CASE("stream round-trip, text and binary") {
    std::vector<LatentFrame> frames;
    for (int t = 0; t < 3; ++t) {
        LatentFrame f;
        f.timestamp = t;
        f.grid = TokenGrid(4, 3, static_cast<float>(t) * 0.25f + 0.125f);
        f.annotation.scene_id = t / 2;
        f.annotation.visible_objects = {{t, "chair"}, {t + 100, "plant"}};
        if (t == 1) f.annotation.needle = NeedleInfo{"odd", "on the rug", 1};
        frames.push_back(f);
    }
    StreamHeader h{3, 4, frames.size(), 42, 1234};
    for (bool binary : {false, true}) {
        const auto path = temp_path(binary ? "bin.stream" : "text.stream");
        write_stream(frames, h, path, binary);
        StreamHeader rh;
        auto back = read_stream(path, &rh);
        CHECK(back == frames);
        CHECK(rh.dim == 3);
        CHECK(rh.seed == 42);
        CHECK(rh.spec_hash == 1234);
        std::remove(path.c_str());
    }
}

TEST_CASE("empty stream file") {
    const auto path = temp_path("empty.stream");
    write_stream({}, StreamHeader{2, 2, 0, 0, 0}, path);
    auto back = read_stream(path);
    CHECK(back.empty());
    std::remove(path.c_str());
}

TEST_CASE("malformed record reports index") {
    const auto path = temp_path("bad.stream");
    {
        std::FILE* f = std::fopen(path.c_str(), "w");
        std::fputs(
            "{\"dim\":2,\"tokens_per_frame\":1,\"frame_count\":2,\"seed\":0,\"spec_hash\":0}\n",
            f);
        std::fputs("{\"t\":0,\"tokens\":[1.0,2.0],\"ann\":{\"scene\":0,\"objects\":[]}}\n", f);
        std::fputs("{\"t\":1,\"tokens\":[1.0,2.0,3.0],\"ann\":{\"scene\":0,\"objects\":[]}}\n", f);
        std::fclose(f);
    }
    try {
        (void)read_stream(path);
        FAIL("expected parse failure");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("record 1") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("round-trip property over generated streams") {
    for (std::uint64_t seed : {3u, 17u, 99u}) {
        StreamSpec spec = family_stream_spec(seed, 40, 8, 6, 10, 0.5, 0.05, 0.0, 0);
        spec.needle_offset_magnitude = 1.0;
        spec.needles.push_back({7, "odd", "by the window", 1});
        spec.scenes[1].objects.push_back({"chair", 2, 1, 8, -1});
        auto frames = generate_stream(spec);
        StreamHeader h{spec.dim, spec.tokens_per_frame, frames.size(), seed, spec_hash(spec)};
        for (bool binary : {false, true}) {
            const auto path = temp_path("prop.stream");
            write_stream(frames, h, path, binary);
            auto back = read_stream(path);
            REQUIRE(back.size() == frames.size());
            CHECK(back == frames);
            std::remove(path.c_str());
        }
    }
}

TEST_CASE("1000-frame round-trip") {
    StreamSpec spec = family_stream_spec(5, 1000, 8, 4, 50, 0.5, 0.02, 0.0, 0);
    auto frames = generate_stream(spec);
    StreamHeader h{spec.dim, spec.tokens_per_frame, frames.size(), 5, spec_hash(spec)};
    const auto path = temp_path("big.stream");
    write_stream(frames, h, path);
    auto back = read_stream(path);
    CHECK(back == frames);
    // serialization oracle: identical bytes when written twice
    const auto path2 = temp_path("big2.stream");
    write_stream(back, h, path2);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(fnv1a(sa) == fnv1a(sb));
    std::remove(path.c_str());
    std::remove(path2.c_str());
}
