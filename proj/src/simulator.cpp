#include "percept/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace percept {

using nlohmann::json;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix(a ^ splitmix(b)); }

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Hand-rolled Box-Muller: std::normal_distribution output sequences are
// implementation-defined.
class Gaussian {
public:
    explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
    double next() {
        if (have_) {
            have_ = false;
            return cached_;
        }
        double u1 = uniform01(rng_);
        while (u1 <= 1e-300) u1 = uniform01(rng_);
        const double u2 = uniform01(rng_);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(a);
        have_ = true;
        return r * std::cos(a);
    }
    std::mt19937_64& raw() { return rng_; }

private:
    std::mt19937_64 rng_;
    bool have_ = false;
    double cached_ = 0.0;
};

std::vector<double> unit_vector(std::size_t dim, Gaussian& g) {
    std::vector<double> v(dim);
    double norm2 = 0.0;
    for (auto& x : v) {
        x = g.next();
        norm2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(std::max(norm2, 1e-30));
    for (auto& x : v) x *= inv;
    return v;
}

FeatureVector to_floats(const std::vector<double>& v) {
    FeatureVector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
}

json spec_to_json_obj(const StreamSpec& s) {
    json j;
    j["seed"] = s.seed;
    j["dim"] = s.dim;
    j["tokens_per_frame"] = s.tokens_per_frame;
    j["needle_offset_magnitude"] = s.needle_offset_magnitude;
    j["within_scene_noise"] = s.within_scene_noise;
    j["drift_rate"] = s.drift_rate;
    j["drift_seed"] = s.drift_seed;
    json scenes = json::array();
    for (const auto& sc : s.scenes) {
        json objs = json::array();
        for (const auto& o : sc.objects) {
            objs.push_back({o.category, o.count, o.window_start, o.window_end, o.id_base});
        }
        scenes.push_back({{"duration", sc.duration_frames},
                          {"anchor_distance", sc.anchor_distance},
                          {"objects", std::move(objs)}});
    }
    j["scenes"] = std::move(scenes);
    json needles = json::array();
    for (const auto& n : s.needles) {
        needles.push_back({n.timestamp, n.label, n.location, n.order_index});
    }
    j["needles"] = std::move(needles);
    return j;
}

}  // namespace

std::string spec_to_json(const StreamSpec& spec) { return spec_to_json_obj(spec).dump(); }

StreamSpec spec_from_json(const std::string& text) {
    json j = json::parse(text);
    StreamSpec s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.dim = j.at("dim").get<std::size_t>();
    s.tokens_per_frame = j.at("tokens_per_frame").get<std::size_t>();
    s.needle_offset_magnitude = j.at("needle_offset_magnitude").get<double>();
    s.within_scene_noise = j.at("within_scene_noise").get<double>();
    s.drift_rate = j.at("drift_rate").get<double>();
    s.drift_seed = j.at("drift_seed").get<std::uint64_t>();
    for (const auto& sc : j.at("scenes")) {
        SceneSpec scene;
        scene.duration_frames = sc.at("duration").get<int>();
        scene.anchor_distance = sc.at("anchor_distance").get<double>();
        for (const auto& o : sc.at("objects")) {
            scene.objects.push_back({o.at(0).get<std::string>(), o.at(1).get<int>(),
                                     o.at(2).get<int>(), o.at(3).get<int>(),
                                     o.at(4).get<std::int64_t>()});
        }
        s.scenes.push_back(std::move(scene));
    }
    for (const auto& n : j.at("needles")) {
        s.needles.push_back({n.at(0).get<std::int64_t>(), n.at(1).get<std::string>(),
                             n.at(2).get<std::string>(), n.at(3).get<int>()});
    }
    return s;
}

std::uint64_t spec_hash(const StreamSpec& spec) { return fnv1a(spec_to_json(spec)); }

StreamGenerator::StreamGenerator(StreamSpec spec) : spec_(std::move(spec)) {
    if (spec_.scenes.empty()) throw std::invalid_argument("stream spec: need at least one scene");
    if (spec_.within_scene_noise < 0 || spec_.needle_offset_magnitude < 0) {
        throw std::invalid_argument("stream spec: negative noise or needle magnitude");
    }
    std::int64_t t = 0;
    for (const auto& sc : spec_.scenes) {
        if (sc.duration_frames < 1) throw std::invalid_argument("stream spec: empty scene");
        scene_starts_.push_back(t);
        t += sc.duration_frames;
    }
    length_ = t;

    // Each token position runs its own anchor chain so frames have real
    // per-token structure; scene-major layout, anchors_[s * T_f + i].
    Gaussian anchor_rng(mix(spec_.seed, 0xA17C0));
    std::vector<std::vector<double>> prev(spec_.tokens_per_frame);
    for (std::size_t s = 0; s < spec_.scenes.size(); ++s) {
        const auto& sc = spec_.scenes[s];
        for (std::size_t i = 0; i < spec_.tokens_per_frame; ++i) {
            std::vector<double> anchor;
            if (s == 0) {
                anchor = unit_vector(spec_.dim, anchor_rng);
            } else {
                const auto step = unit_vector(spec_.dim, anchor_rng);
                anchor = prev[i];
                double norm2 = 0.0;
                for (std::size_t d = 0; d < spec_.dim; ++d) {
                    anchor[d] += sc.anchor_distance * step[d];
                    norm2 += anchor[d] * anchor[d];
                }
                const double inv = 1.0 / std::sqrt(std::max(norm2, 1e-30));
                for (auto& x : anchor) x *= inv;
            }
            anchors_.push_back(to_floats(anchor));
            prev[i] = std::move(anchor);
        }
    }

    Gaussian drift_rng(mix(spec_.drift_seed != 0 ? spec_.drift_seed : spec_.seed, 0xD21F7));
    drift_dir_ = to_floats(unit_vector(spec_.dim, drift_rng));
    Gaussian needle_rng(mix(spec_.seed, 0x9EED1E));
    needle_dir_ = to_floats(unit_vector(spec_.dim, needle_rng));

    std::int64_t next_id = 0;
    scene_objects_.resize(spec_.scenes.size());
    for (std::size_t s = 0; s < spec_.scenes.size(); ++s) {
        for (const auto& o : spec_.scenes[s].objects) {
            for (int k = 0; k < o.count; ++k) {
                ObjectInstance inst;
                inst.id = o.id_base >= 0 ? o.id_base + k : next_id++;
                inst.category = o.category;
                inst.first_frame = scene_starts_[s] + o.window_start;
                inst.last_frame = scene_starts_[s] + o.window_end;
                scene_objects_[s].push_back(std::move(inst));
            }
        }
    }
}

std::size_t StreamGenerator::scene_index(std::int64_t t) const {
    auto it = std::upper_bound(scene_starts_.begin(), scene_starts_.end(), t);
    return static_cast<std::size_t>(it - scene_starts_.begin()) - 1;
}

FrameAnnotation StreamGenerator::annotation(std::int64_t t) const {
    if (t < 0 || t >= length_) throw std::out_of_range("annotation: timestamp out of range");
    const std::size_t s = scene_index(t);
    FrameAnnotation ann;
    ann.scene_id = static_cast<int>(s);
    for (const auto& o : scene_objects_[s]) {
        if (t >= o.first_frame && t <= o.last_frame) {
            ann.visible_objects.push_back({o.id, o.category});
        }
    }
    for (const auto& n : spec_.needles) {
        if (n.timestamp == t) {
            ann.needle = NeedleInfo{n.label, n.location, n.order_index};
            break;
        }
    }
    return ann;
}

LatentFrame StreamGenerator::frame(std::int64_t t) const {
    if (t < 0 || t >= length_) throw std::out_of_range("frame: timestamp out of range");
    const std::size_t s = scene_index(t);
    const std::int64_t local = t - scene_starts_[s];
    LatentFrame f;
    f.timestamp = t;
    f.annotation = annotation(t);
    f.grid = TokenGrid(spec_.tokens_per_frame, spec_.dim);
    const double drift = spec_.drift_rate * static_cast<double>(local);
    const bool has_needle = f.annotation.needle.has_value();
    Gaussian noise(mix(spec_.seed, mix(0xF4A3E, static_cast<std::uint64_t>(t))));
    for (std::size_t i = 0; i < spec_.tokens_per_frame; ++i) {
        auto tok = f.grid.token(i);
        const auto& anchor = anchors_[s * spec_.tokens_per_frame + i];
        for (std::size_t d = 0; d < spec_.dim; ++d) {
            double v = anchor[d] + drift * drift_dir_[d];
            if (spec_.within_scene_noise > 0) v += spec_.within_scene_noise * noise.next();
            if (has_needle) v += spec_.needle_offset_magnitude * needle_dir_[d];
            tok[d] = static_cast<float>(v);
        }
    }
    return f;
}

std::vector<std::int64_t> StreamGenerator::scene_boundaries() const {
    return {scene_starts_.begin() + 1, scene_starts_.end()};
}

FeatureVector StreamGenerator::needle_direction_for(const StreamSpec& spec) {
    Gaussian needle_rng(mix(spec.seed, 0x9EED1E));
    return to_floats(unit_vector(spec.dim, needle_rng));
}

std::vector<LatentFrame> generate_stream(const StreamSpec& spec) {
    StreamGenerator gen(spec);
    std::vector<LatentFrame> frames;
    frames.reserve(static_cast<std::size_t>(gen.length()));
    for (std::int64_t t = 0; t < gen.length(); ++t) frames.push_back(gen.frame(t));
    return frames;
}

std::uint64_t suite_drift_seed(std::uint64_t suite_seed) { return mix(suite_seed, 0xD21F7); }

StreamSpec family_stream_spec(std::uint64_t seed, std::int64_t duration, std::size_t dim,
                              std::size_t tokens_per_frame, int scene_frames,
                              double boundary_distance, double noise, double drift_rate,
                              std::uint64_t drift_seed) {
    StreamSpec spec;
    spec.seed = seed;
    spec.dim = dim;
    spec.tokens_per_frame = tokens_per_frame;
    spec.within_scene_noise = noise;
    spec.drift_rate = drift_rate;
    spec.drift_seed = drift_seed;
    std::int64_t remaining = duration;
    while (remaining > 0) {
        SceneSpec sc;
        sc.duration_frames = static_cast<int>(std::min<std::int64_t>(scene_frames, remaining));
        sc.anchor_distance = boundary_distance;
        spec.scenes.push_back(sc);
        remaining -= sc.duration_frames;
    }
    return spec;
}

namespace {

const char* kLocationPool[] = {"by the window",  "on the counter", "under the desk",
                               "next to the tv", "on the shelf",   "beside the door",
                               "on the rug",     "in the corner"};

template <typename T>
void shuffle_vec(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

}  // namespace

std::vector<RecallTask> build_recall_suite(const RecallSuiteConfig& config) {
    std::vector<RecallTask> tasks;
    for (const auto duration : config.durations) {
        const int n_scenes = static_cast<int>(duration / config.scene_frames);
        if (n_scenes < 4) {
            throw std::invalid_argument("recall suite: duration too short for 4 scenes");
        }
        for (int i = 0; i < config.tasks_per_duration; ++i) {
            const std::uint64_t task_seed =
                mix(config.seed, mix(static_cast<std::uint64_t>(duration),
                                     static_cast<std::uint64_t>(i)));
            std::mt19937_64 rng(task_seed);
            StreamSpec spec = family_stream_spec(
                mix(task_seed, 0x57E0), duration, config.dim, config.tokens_per_frame,
                config.scene_frames, config.boundary_distance, config.within_scene_noise,
                config.drift_rate, suite_drift_seed(config.seed));
            spec.needle_offset_magnitude = config.needle_offset_magnitude;

            std::vector<int> scene_ids(static_cast<std::size_t>(n_scenes));
            for (int s = 0; s < n_scenes; ++s) scene_ids[static_cast<std::size_t>(s)] = s;
            shuffle_vec(scene_ids, rng);
            scene_ids.resize(4);
            std::sort(scene_ids.begin(), scene_ids.end());

            std::vector<std::string> locations(std::begin(kLocationPool),
                                               std::end(kLocationPool));
            shuffle_vec(locations, rng);
            locations.resize(4);

            RecallTask task;
            task.duration = duration;
            task.needle_label = "out-of-place object";
            std::vector<std::string> correct;
            for (int k = 0; k < 4; ++k) {
                NeedleSpec n;
                const std::int64_t scene_start =
                    static_cast<std::int64_t>(scene_ids[static_cast<std::size_t>(k)]) *
                    config.scene_frames;
                // interior frame, away from the scene boundary
                n.timestamp = scene_start + 5 +
                              static_cast<std::int64_t>(rng() %
                                  static_cast<std::uint64_t>(config.scene_frames - 10));
                n.label = task.needle_label;
                n.location = locations[static_cast<std::size_t>(k)];
                n.order_index = k + 1;
                spec.needles.push_back(n);
                correct.push_back(n.location);
            }

            std::set<std::vector<std::string>> seen;
            seen.insert(correct);
            std::vector<std::vector<std::string>> distractors;
            while (distractors.size() < 3) {
                std::vector<std::string> perm = correct;
                shuffle_vec(perm, rng);
                if (seen.insert(perm).second) distractors.push_back(std::move(perm));
            }
            task.correct_index = static_cast<int>(rng() % 4);
            int d = 0;
            for (int k = 0; k < 4; ++k) {
                task.options[static_cast<std::size_t>(k)] =
                    (k == task.correct_index) ? correct : distractors[static_cast<std::size_t>(d++)];
            }
            task.query = StreamGenerator::needle_direction_for(spec);
            task.stream = std::move(spec);
            tasks.push_back(std::move(task));
        }
    }
    return tasks;
}

std::vector<CountTask> build_count_suite(const CountSuiteConfig& config) {
    std::vector<CountTask> tasks;
    for (const auto duration : config.durations) {
        const int n_scenes = static_cast<int>(duration / config.scene_frames);
        if (n_scenes < 1) throw std::invalid_argument("count suite: duration too short");
        // Tail scenes carry a fixed object load so a recency-window answerer
        // sees the same thing regardless of the stream's true total.
        const int tail = std::min(n_scenes / 2 > 0 ? n_scenes / 2 : 1,
                                  std::max(10, n_scenes / 10));
        const int early = n_scenes - tail;
        const int span = config.total_max - config.total_min;
        for (int i = 0; i < config.tasks_per_duration; ++i) {
            const std::uint64_t task_seed =
                mix(config.seed, mix(static_cast<std::uint64_t>(duration),
                                     static_cast<std::uint64_t>(i) + 7919));
            StreamSpec spec = family_stream_spec(
                mix(task_seed, 0xC0), duration, config.dim, config.tokens_per_frame,
                config.scene_frames, config.boundary_distance, config.within_scene_noise,
                config.drift_rate, suite_drift_seed(config.seed));

            const int target =
                config.total_min +
                (config.tasks_per_duration > 1
                     ? (span * i + (config.tasks_per_duration - 1) / 2) /
                           (config.tasks_per_duration - 1)
                     : span / 2);
            const int early_total = std::max(0, target - tail);
            const int win_lo = 5;
            const int win_hi = std::max(win_lo, config.scene_frames - 20);
            for (int s = 0; s < n_scenes; ++s) {
                auto& scene = spec.scenes[static_cast<std::size_t>(s)];
                int count = 0;
                if (s >= early) {
                    count = 1;
                } else if (early > 0) {
                    count = early_total / early + (s < early_total % early ? 1 : 0);
                }
                if (count > 0) {
                    scene.objects.push_back({config.category, count, win_lo, win_hi, -1});
                }
                if (s % 3 == 0) {
                    scene.objects.push_back({"plant", 1, win_lo, win_hi, -1});
                }
            }

            CountTask task;
            task.duration = duration;
            task.category = config.category;
            for (int q = 1; q <= config.query_count; ++q) {
                task.query_timestamps.push_back(duration * q / config.query_count - 1);
            }
            // brute-force distinct count over annotations
            StreamGenerator gen(spec);
            std::set<std::int64_t> ids;
            for (std::int64_t t = 0; t < gen.length(); ++t) {
                for (const auto& o : gen.annotation(t).visible_objects) {
                    if (o.category == config.category) ids.insert(o.id);
                }
            }
            task.gt_total = static_cast<long>(ids.size());
            task.stream = std::move(spec);
            tasks.push_back(std::move(task));
        }
    }
    return tasks;
}

}  // namespace percept
