#include "percept/core.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace percept {

using nlohmann::json;

double cosine_distance(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("cosine_distance: dimension mismatch");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw std::invalid_argument("cosine_distance: zero vector (degenerate latent)");
    }
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

double grid_surprise(const TokenGrid& pred, const TokenGrid& actual) {
    if (!pred.congruent(actual)) {
        throw std::invalid_argument("grid_surprise: grid shape mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.count; ++i) {
        sum += cosine_distance(pred.token(i), actual.token(i));
    }
    return sum / static_cast<double>(pred.count);
}

TokenGrid mean_pool_pairs(const TokenGrid& grid) {
    if (grid.count < 2) {
        throw std::invalid_argument("mean_pool_pairs: need at least 2 tokens");
    }
    const std::size_t pairs = grid.count / 2;
    const bool odd = (grid.count % 2) != 0;
    TokenGrid out(pairs + (odd ? 1 : 0), grid.dim);
    for (std::size_t i = 0; i < pairs; ++i) {
        auto a = grid.token(2 * i);
        auto b = grid.token(2 * i + 1);
        auto dst = out.token(i);
        for (std::size_t d = 0; d < grid.dim; ++d) {
            dst[d] = static_cast<float>((static_cast<double>(a[d]) + b[d]) * 0.5);
        }
    }
    if (odd) {
        auto last = grid.token(grid.count - 1);
        std::copy(last.begin(), last.end(), out.token(pairs).begin());
    }
    return out;
}

FeatureVector pooled_feature(const TokenGrid& grid) {
    if (grid.count < 1) {
        throw std::invalid_argument("pooled_feature: empty grid");
    }
    std::vector<double> acc(grid.dim, 0.0);
    for (std::size_t i = 0; i < grid.count; ++i) {
        auto t = grid.token(i);
        for (std::size_t d = 0; d < grid.dim; ++d) acc[d] += t[d];
    }
    FeatureVector out(grid.dim);
    for (std::size_t d = 0; d < grid.dim; ++d) {
        out[d] = static_cast<float>(acc[d] / static_cast<double>(grid.count));
    }
    return out;
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

constexpr char kBinaryMagic[4] = {'P', 'C', 'T', 'S'};

json annotation_to_json(const FrameAnnotation& ann) {
    json j;
    j["scene"] = ann.scene_id;
    json objs = json::array();
    for (const auto& o : ann.visible_objects) objs.push_back({o.id, o.category});
    j["objects"] = std::move(objs);
    if (ann.needle) {
        j["needle"] = {ann.needle->label, ann.needle->location, ann.needle->order_index};
    }
    return j;
}

FrameAnnotation annotation_from_json(const json& j) {
    FrameAnnotation ann;
    ann.scene_id = j.at("scene").get<int>();
    for (const auto& o : j.at("objects")) {
        ann.visible_objects.push_back({o.at(0).get<std::int64_t>(), o.at(1).get<std::string>()});
    }
    if (j.contains("needle")) {
        const auto& n = j.at("needle");
        ann.needle = NeedleInfo{n.at(0).get<std::string>(), n.at(1).get<std::string>(),
                                n.at(2).get<int>()};
    }
    return ann;
}

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("stream file: truncated binary record");
    return v;
}

void put_string(std::ostream& os, const std::string& s) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
    auto n = get<std::uint32_t>(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw std::runtime_error("stream file: truncated binary string");
    return s;
}

void write_binary(const std::vector<LatentFrame>& frames, const StreamHeader& h, std::ostream& os) {
    os.write(kBinaryMagic, 4);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(h.dim));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(h.tokens_per_frame));
    put<std::uint64_t>(os, h.frame_count);
    put<std::uint64_t>(os, h.seed);
    put<std::uint64_t>(os, h.spec_hash);
    for (const auto& f : frames) {
        put<std::int64_t>(os, f.timestamp);
        put<std::uint32_t>(os, static_cast<std::uint32_t>(f.grid.count));
        os.write(reinterpret_cast<const char*>(f.grid.data.data()),
                 static_cast<std::streamsize>(f.grid.data.size() * sizeof(float)));
        put<std::int32_t>(os, f.annotation.scene_id);
        put<std::uint32_t>(os, static_cast<std::uint32_t>(f.annotation.visible_objects.size()));
        for (const auto& o : f.annotation.visible_objects) {
            put<std::int64_t>(os, o.id);
            put_string(os, o.category);
        }
        put<std::uint8_t>(os, f.annotation.needle ? 1 : 0);
        if (f.annotation.needle) {
            put_string(os, f.annotation.needle->label);
            put_string(os, f.annotation.needle->location);
            put<std::int32_t>(os, f.annotation.needle->order_index);
        }
    }
}

std::vector<LatentFrame> read_binary(std::istream& is, StreamHeader* header_out) {
    char magic[4];
    is.read(magic, 4);
    StreamHeader h;
    h.dim = get<std::uint32_t>(is);
    h.tokens_per_frame = get<std::uint32_t>(is);
    h.frame_count = get<std::uint64_t>(is);
    h.seed = get<std::uint64_t>(is);
    h.spec_hash = get<std::uint64_t>(is);
    std::vector<LatentFrame> frames;
    frames.reserve(h.frame_count);
    for (std::size_t r = 0; r < h.frame_count; ++r) {
        try {
            LatentFrame f;
            f.timestamp = get<std::int64_t>(is);
            auto count = get<std::uint32_t>(is);
            f.grid = TokenGrid(count, h.dim);
            is.read(reinterpret_cast<char*>(f.grid.data.data()),
                    static_cast<std::streamsize>(f.grid.data.size() * sizeof(float)));
            if (!is) throw std::runtime_error("truncated token block");
            f.annotation.scene_id = get<std::int32_t>(is);
            auto nobj = get<std::uint32_t>(is);
            for (std::uint32_t i = 0; i < nobj; ++i) {
                ObjectRef o;
                o.id = get<std::int64_t>(is);
                o.category = get_string(is);
                f.annotation.visible_objects.push_back(std::move(o));
            }
            if (get<std::uint8_t>(is)) {
                NeedleInfo n;
                n.label = get_string(is);
                n.location = get_string(is);
                n.order_index = get<std::int32_t>(is);
                f.annotation.needle = std::move(n);
            }
            frames.push_back(std::move(f));
        } catch (const std::exception& e) {
            throw std::runtime_error("stream file: record " + std::to_string(r) + ": " + e.what());
        }
    }
    if (header_out) *header_out = h;
    return frames;
}

}  // namespace

void write_stream(const std::vector<LatentFrame>& frames, const StreamHeader& header,
                  const std::string& path, bool binary) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_stream: cannot open " + path);
    StreamHeader h = header;
    h.frame_count = frames.size();
    if (binary) {
        write_binary(frames, h, os);
        return;
    }
    json hdr;
    hdr["dim"] = h.dim;
    hdr["tokens_per_frame"] = h.tokens_per_frame;
    hdr["frame_count"] = h.frame_count;
    hdr["seed"] = h.seed;
    hdr["spec_hash"] = h.spec_hash;
    os << hdr.dump() << "\n";
    for (const auto& f : frames) {
        json j;
        j["t"] = f.timestamp;
        j["tokens"] = f.grid.data;
        j["ann"] = annotation_to_json(f.annotation);
        os << j.dump() << "\n";
    }
}

std::vector<LatentFrame> read_stream(const std::string& path, StreamHeader* header_out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_stream: cannot open " + path);
    char magic[4] = {0, 0, 0, 0};
    is.read(magic, 4);
    is.seekg(0);
    if (is.gcount() == 4 && std::memcmp(magic, kBinaryMagic, 4) == 0) {
        return read_binary(is, header_out);
    }
    std::string line;
    if (!std::getline(is, line)) {
        // Empty file: empty stream with an empty header.
        if (header_out) *header_out = StreamHeader{};
        return {};
    }
    StreamHeader h;
    try {
        json hdr = json::parse(line);
        h.dim = hdr.at("dim").get<std::size_t>();
        h.tokens_per_frame = hdr.at("tokens_per_frame").get<std::size_t>();
        h.frame_count = hdr.at("frame_count").get<std::size_t>();
        h.seed = hdr.at("seed").get<std::uint64_t>();
        h.spec_hash = hdr.at("spec_hash").get<std::uint64_t>();
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("stream file: header record: ") + e.what());
    }
    std::vector<LatentFrame> frames;
    frames.reserve(h.frame_count);
    std::size_t record = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            LatentFrame f;
            f.timestamp = j.at("t").get<std::int64_t>();
            auto tokens = j.at("tokens").get<std::vector<float>>();
            if (h.dim == 0 || tokens.size() % h.dim != 0) {
                throw std::runtime_error("token array length not a multiple of dim");
            }
            f.grid.count = tokens.size() / h.dim;
            f.grid.dim = h.dim;
            f.grid.data = std::move(tokens);
            for (float v : f.grid.data) {
                if (!std::isfinite(v)) throw std::runtime_error("non-finite token value");
            }
            f.annotation = annotation_from_json(j.at("ann"));
            frames.push_back(std::move(f));
        } catch (const std::exception& e) {
            throw std::runtime_error("stream file: record " + std::to_string(record) + ": " +
                                     e.what());
        }
        ++record;
    }
    if (header_out) *header_out = h;
    return frames;
}

}  // namespace percept
