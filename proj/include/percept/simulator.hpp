#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "percept/core.hpp"

namespace percept {

struct ObjectSpec {
    std::string category;
    int count = 0;
    int window_start = 0;  // frames relative to scene start, inclusive
    int window_end = 0;
    std::int64_t id_base = -1;  // -1: assign ids automatically
};

struct SceneSpec {
    int duration_frames = 1;
    double anchor_distance = 1.0;  // expected latent jump at scene entry
    std::vector<ObjectSpec> objects;
};

struct NeedleSpec {
    std::int64_t timestamp = 0;
    std::string label;
    std::string location;
    int order_index = 0;
};

// Generative description of a synthetic multi-scene latent stream.
// Fully deterministic: (spec, seed) decides every byte.
struct StreamSpec {
    std::uint64_t seed = 0;
    std::size_t dim = 64;
    std::size_t tokens_per_frame = 64;
    std::vector<SceneSpec> scenes;
    double needle_offset_magnitude = 0.0;
    double within_scene_noise = 0.0;
    double drift_rate = 0.0;     // per-frame latent drift within a scene
    std::uint64_t drift_seed = 0;  // 0: derive from seed; suites share one so
                                   // the drift direction is learnable
    std::vector<NeedleSpec> needles;
};

std::string spec_to_json(const StreamSpec& spec);
StreamSpec spec_from_json(const std::string& text);
std::uint64_t spec_hash(const StreamSpec& spec);

// Lazy frame factory over a StreamSpec. frame(t) is O(tokens); annotation(t)
// skips latent generation entirely, which keeps window baselines cheap.
class StreamGenerator {
public:
    explicit StreamGenerator(StreamSpec spec);

    const StreamSpec& spec() const { return spec_; }
    std::int64_t length() const { return length_; }

    LatentFrame frame(std::int64_t t) const;
    FrameAnnotation annotation(std::int64_t t) const;

    // Scene-entry timestamps, first scene excluded.
    std::vector<std::int64_t> scene_boundaries() const;

    const FeatureVector& needle_direction() const { return needle_dir_; }

    static FeatureVector needle_direction_for(const StreamSpec& spec);

private:
    struct ObjectInstance {
        std::int64_t id;
        std::string category;
        std::int64_t first_frame;  // absolute timestamps, inclusive window
        std::int64_t last_frame;
    };

    StreamSpec spec_;
    std::int64_t length_ = 0;
    std::vector<std::int64_t> scene_starts_;
    std::vector<std::vector<float>> anchors_;
    std::vector<std::vector<ObjectInstance>> scene_objects_;
    FeatureVector drift_dir_;
    FeatureVector needle_dir_;

    std::size_t scene_index(std::int64_t t) const;
};

std::vector<LatentFrame> generate_stream(const StreamSpec& spec);

// Needle-recall task: 4 needles in 4 distinct scenes, 4 candidate
// location orderings, exactly one consistent with the stream.
struct RecallTask {
    StreamSpec stream;
    std::string needle_label;
    std::array<std::vector<std::string>, 4> options;
    int correct_index = 0;
    FeatureVector query;
    std::int64_t duration = 0;
};

struct CountTask {
    StreamSpec stream;
    std::string category;
    long gt_total = 0;
    std::vector<std::int64_t> query_timestamps;
    std::int64_t duration = 0;
};

struct RecallSuiteConfig {
    std::vector<std::int64_t> durations = {600, 1800, 3600, 7200, 14400};
    int tasks_per_duration = 60;
    std::size_t dim = 32;
    std::size_t tokens_per_frame = 16;
    std::uint64_t seed = 1;
    int scene_frames = 60;
    double boundary_distance = 0.6;
    double within_scene_noise = 0.02;
    double needle_offset_magnitude = 2.0;
    double drift_rate = 0.0;
};

struct CountSuiteConfig {
    std::vector<std::int64_t> durations = {600, 1800, 3600, 7200};
    int tasks_per_duration = 50;
    std::size_t dim = 32;
    std::size_t tokens_per_frame = 16;
    std::uint64_t seed = 2;
    int scene_frames = 60;
    double boundary_distance = 0.6;
    double within_scene_noise = 0.02;
    double drift_rate = 0.0;
    std::string category = "chair";
    int total_min = 10;  // suite totals spread evenly over this range
    int total_max = 60;
    int query_count = 10;
};

std::vector<RecallTask> build_recall_suite(const RecallSuiteConfig& config);
std::vector<CountTask> build_count_suite(const CountSuiteConfig& config);

// Drift direction seed shared by every stream a suite generates, so a
// position-wise predictor can learn the drift from held-out streams.
std::uint64_t suite_drift_seed(std::uint64_t suite_seed);

// Training/tuning streams from the same generative family as a suite.
StreamSpec family_stream_spec(std::uint64_t seed, std::int64_t duration, std::size_t dim,
                              std::size_t tokens_per_frame, int scene_frames,
                              double boundary_distance, double noise, double drift_rate,
                              std::uint64_t drift_seed);

}  // namespace percept
