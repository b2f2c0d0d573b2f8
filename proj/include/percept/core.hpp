#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace percept {

// One latent feature vector (length D, 32-bit storage).
using FeatureVector = std::vector<float>;

// Row-major grid of per-frame tokens: `count` tokens of dimension `dim`.
struct TokenGrid {
    std::size_t count = 0;
    std::size_t dim = 0;
    std::vector<float> data;

    TokenGrid() = default;
    TokenGrid(std::size_t count_, std::size_t dim_, float fill = 0.0f)
        : count(count_), dim(dim_), data(count_ * dim_, fill) {}

    std::span<const float> token(std::size_t i) const {
        return {data.data() + i * dim, dim};
    }
    std::span<float> token(std::size_t i) {
        return {data.data() + i * dim, dim};
    }
    bool congruent(const TokenGrid& other) const {
        return count == other.count && dim == other.dim;
    }
    bool operator==(const TokenGrid& other) const = default;
};

struct ObjectRef {
    std::int64_t id = 0;
    std::string category;
    auto operator<=>(const ObjectRef&) const = default;
};

struct NeedleInfo {
    std::string label;
    std::string location;
    int order_index = 0;  // 1..4, unique per stream
    bool operator==(const NeedleInfo&) const = default;
};

struct FrameAnnotation {
    int scene_id = 0;
    std::vector<ObjectRef> visible_objects;
    std::optional<NeedleInfo> needle;
    bool operator==(const FrameAnnotation&) const = default;
};

// One timestep of a stream. Timestamps start at 0 and increase by 1
// (1 frame = 1 second at the sampling rate used throughout).
struct LatentFrame {
    std::int64_t timestamp = 0;
    TokenGrid grid;
    FrameAnnotation annotation;
    bool operator==(const LatentFrame&) const = default;
};

// 1 - cos(a, b), range [0, 2]. Throws on zero vectors or length mismatch.
double cosine_distance(std::span<const float> a, std::span<const float> b);

// Mean cosine distance over aligned token pairs.
double grid_surprise(const TokenGrid& pred, const TokenGrid& actual);

// Factor-of-2 spatial downsample: averages token pairs (2i, 2i+1).
// An odd trailing token passes through unchanged.
TokenGrid mean_pool_pairs(const TokenGrid& grid);

// Elementwise mean over all tokens of the grid.
FeatureVector pooled_feature(const TokenGrid& grid);

struct StreamHeader {
    std::size_t dim = 0;
    std::size_t tokens_per_frame = 0;
    std::size_t frame_count = 0;
    std::uint64_t seed = 0;
    std::uint64_t spec_hash = 0;
};

// Stream files come in two interchangeable encodings:
//  - text: one JSON object per line, header object first
//  - binary: "PCTS" magic, packed header, packed frame records
// read_stream sniffs the magic bytes; write_stream picks by `binary`.
void write_stream(const std::vector<LatentFrame>& frames, const StreamHeader& header,
                  const std::string& path, bool binary = false);
std::vector<LatentFrame> read_stream(const std::string& path, StreamHeader* header_out = nullptr);

// FNV-1a over a byte string; used for spec hashes in stream headers.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace percept
