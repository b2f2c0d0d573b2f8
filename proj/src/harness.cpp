#include "percept/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace percept {

using nlohmann::json;
namespace fs = std::filesystem;

double mra(long pred, long gt) {
    if (gt < 1) throw std::invalid_argument("mra: ground truth must be >= 1");
    if (pred < 0) throw std::invalid_argument("mra: negative prediction");
    const long err20 = 20 * std::labs(pred - gt);
    int hits = 0;
    for (int theta20 = 10; theta20 <= 19; ++theta20) {
        // |pred - gt| / gt < 1 - theta, with theta = theta20 / 20
        if (err20 < (20 - theta20) * gt) ++hits;
    }
    return static_cast<double>(hits) / 10.0;
}

double choice_accuracy(const std::vector<bool>& correct) {
    if (correct.empty()) return 0.0;
    long hits = std::count(correct.begin(), correct.end(), true);
    return static_cast<double>(hits) / static_cast<double>(correct.size());
}

Prf boundary_prf(const std::vector<std::int64_t>& predicted,
                 const std::vector<std::int64_t>& ground_truth, std::int64_t tolerance) {
    if (tolerance < 0) throw std::invalid_argument("boundary_prf: negative tolerance");
    if (predicted.empty() && ground_truth.empty()) return {1.0, 1.0, 1.0};
    std::size_t i = 0, j = 0, matches = 0;
    while (i < predicted.size() && j < ground_truth.size()) {
        const std::int64_t diff = predicted[i] - ground_truth[j];
        if (std::llabs(diff) <= tolerance) {
            ++matches;
            ++i;
            ++j;
        } else if (diff < 0) {
            ++i;
        } else {
            ++j;
        }
    }
    Prf out;
    out.precision = predicted.empty()
                        ? 0.0
                        : static_cast<double>(matches) / static_cast<double>(predicted.size());
    out.recall = ground_truth.empty()
                     ? 0.0
                     : static_cast<double>(matches) / static_cast<double>(ground_truth.size());
    out.f1 = (out.precision + out.recall) > 0.0
                 ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
                 : 0.0;
    return out;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.empty()) {
        throw std::invalid_argument("pearson: size mismatch or empty");
    }
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw std::invalid_argument("auroc: size mismatch or empty");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // average ranks over ties
    std::vector<double> rank(scores.size(), 0.0);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    double pos = 0.0, rank_sum = 0.0;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k]) {
            pos += 1.0;
            rank_sum += rank[k];
        }
    }
    const double neg = static_cast<double>(labels.size()) - pos;
    if (pos == 0.0 || neg == 0.0) throw std::invalid_argument("auroc: need both classes");
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

std::vector<double> score_stream(const StreamGenerator& gen, const SurpriseEstimator& estimator) {
    std::vector<double> scores;
    scores.reserve(static_cast<std::size_t>(gen.length()));
    std::optional<LatentFrame> prev;
    for (std::int64_t t = 0; t < gen.length(); ++t) {
        LatentFrame f = gen.frame(t);
        scores.push_back(prev ? estimator.score(*prev, f) : 0.0);
        prev = std::move(f);
    }
    return scores;
}

std::vector<double> score_frames(const std::vector<LatentFrame>& frames,
                                 const SurpriseEstimator& estimator) {
    std::vector<double> scores;
    scores.reserve(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        scores.push_back(i == 0 ? 0.0 : estimator.score(frames[i - 1], frames[i]));
    }
    return scores;
}

long fixed_window_count(const StreamGenerator& gen, std::int64_t window,
                        const std::string& category) {
    if (window < 1) throw std::invalid_argument("fixed_window_count: window must be >= 1");
    std::set<std::int64_t> ids;
    const std::int64_t begin = std::max<std::int64_t>(0, gen.length() - window);
    for (std::int64_t t = begin; t < gen.length(); ++t) {
        for (const auto& o : gen.annotation(t).visible_objects) {
            if (o.category == category) ids.insert(o.id);
        }
    }
    return static_cast<long>(ids.size());
}

RecallAnswer fixed_window_recall(const StreamGenerator& gen, std::int64_t window,
                                 const RecallTask& task) {
    if (window < 1) throw std::invalid_argument("fixed_window_recall: window must be >= 1");
    RecallAnswer answer;
    const std::int64_t begin = std::max<std::int64_t>(0, gen.length() - window);
    for (std::int64_t t = begin; t < gen.length(); ++t) {
        const auto ann = gen.annotation(t);
        if (ann.needle) answer.recovered.push_back(ann.needle->location);
    }
    if (answer.recovered.empty()) {
        answer.no_evidence = true;
        return answer;
    }
    answer.option_index = match_option(task.options, answer.recovered);
    return answer;
}

std::vector<std::int64_t> detect_boundaries(const std::vector<double>& scores, double tau,
                                            std::int64_t min_spacing) {
    std::vector<std::int64_t> out;
    std::int64_t last = -min_spacing - 1;
    for (std::size_t t = 0; t < scores.size(); ++t) {
        const auto ts = static_cast<std::int64_t>(t);
        if (scores[t] >= tau && ts - last >= min_spacing) {
            out.push_back(ts);
            last = ts;
        }
    }
    return out;
}

SweepResult sweep_tau(const std::vector<ScoredStream>& tuning, const std::vector<double>& grid,
                      std::int64_t tolerance) {
    if (grid.empty()) throw std::invalid_argument("sweep_tau: empty grid");
    std::vector<double> sorted_grid = grid;
    std::sort(sorted_grid.begin(), sorted_grid.end());
    SweepResult result;
    double best_metric = -1.0;
    for (const double tau : sorted_grid) {
        double sum = 0.0;
        for (const auto& s : tuning) {
            const auto detected = detect_boundaries(s.scores, tau, 2);
            sum += boundary_prf(detected, s.boundaries, tolerance).f1;
        }
        const double metric = tuning.empty() ? 0.0 : sum / static_cast<double>(tuning.size());
        result.table.emplace_back(tau, metric);
        if (metric > best_metric) {  // strict: ties keep the smaller tau
            best_metric = metric;
            result.best_tau = tau;
        }
    }
    return result;
}

namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

json config_to_json_obj(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["suite"] = c.suite;
    j["recall"] = {{"durations", c.recall.durations},
                   {"tasks_per_duration", c.recall.tasks_per_duration},
                   {"dim", c.recall.dim},
                   {"tokens_per_frame", c.recall.tokens_per_frame},
                   {"seed", c.recall.seed},
                   {"scene_frames", c.recall.scene_frames},
                   {"boundary_distance", c.recall.boundary_distance},
                   {"within_scene_noise", c.recall.within_scene_noise},
                   {"needle_offset_magnitude", c.recall.needle_offset_magnitude},
                   {"drift_rate", c.recall.drift_rate}};
    j["count"] = {{"durations", c.count.durations},
                  {"tasks_per_duration", c.count.tasks_per_duration},
                  {"dim", c.count.dim},
                  {"tokens_per_frame", c.count.tokens_per_frame},
                  {"seed", c.count.seed},
                  {"scene_frames", c.count.scene_frames},
                  {"boundary_distance", c.count.boundary_distance},
                  {"within_scene_noise", c.count.within_scene_noise},
                  {"drift_rate", c.count.drift_rate},
                  {"category", c.count.category},
                  {"total_min", c.count.total_min},
                  {"total_max", c.count.total_max},
                  {"query_count", c.count.query_count}};
    j["engine"] = {{"sensory_budget", c.engine.sensory_budget},
                   {"token_budget", c.engine.token_budget},
                   {"surprise_threshold", c.engine.surprise_threshold},
                   {"retrieval_k", c.engine.retrieval_k},
                   {"strategy", to_string(c.engine.strategy)}};
    j["event_loop"] = {{"sensory_budget", c.event_loop.sensory_budget},
                       {"surprise_threshold", c.event_loop.surprise_threshold},
                       {"min_segment_frames", c.event_loop.min_segment_frames}};
    j["estimator_mode"] = c.estimator_mode == SurpriseMode::PredictionError
                              ? "prediction_error"
                              : "adjacent_similarity";
    j["predictor_kind"] = to_string(c.predictor_kind);
    j["training"] = {{"learning_rate", c.training.learning_rate},
                     {"epochs", c.training.epochs},
                     {"batch_size", c.training.batch_size},
                     {"loss_weight", c.training.loss_weight},
                     {"seed", c.training.seed}};
    j["tau_grid"] = c.tau_grid;
    j["train_seed"] = c.train_seed;
    j["tune_seed"] = c.tune_seed;
    j["train_streams"] = c.train_streams;
    j["tune_streams"] = c.tune_streams;
    j["train_duration"] = c.train_duration;
    j["fixed_window"] = c.fixed_window;
    j["methods"] = c.methods;
    j["output_dir"] = c.output_dir;
    return j;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string experiment_config_to_json(const ExperimentConfig& config) {
    return config_to_json_obj(config).dump(2);
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
    json j = json::parse(text);
    ExperimentConfig c;
    maybe(j, "name", c.name);
    maybe(j, "suite", c.suite);
    if (j.contains("recall")) {
        const auto& r = j.at("recall");
        maybe(r, "durations", c.recall.durations);
        maybe(r, "tasks_per_duration", c.recall.tasks_per_duration);
        maybe(r, "dim", c.recall.dim);
        maybe(r, "tokens_per_frame", c.recall.tokens_per_frame);
        maybe(r, "seed", c.recall.seed);
        maybe(r, "scene_frames", c.recall.scene_frames);
        maybe(r, "boundary_distance", c.recall.boundary_distance);
        maybe(r, "within_scene_noise", c.recall.within_scene_noise);
        maybe(r, "needle_offset_magnitude", c.recall.needle_offset_magnitude);
        maybe(r, "drift_rate", c.recall.drift_rate);
    }
    if (j.contains("count")) {
        const auto& r = j.at("count");
        maybe(r, "durations", c.count.durations);
        maybe(r, "tasks_per_duration", c.count.tasks_per_duration);
        maybe(r, "dim", c.count.dim);
        maybe(r, "tokens_per_frame", c.count.tokens_per_frame);
        maybe(r, "seed", c.count.seed);
        maybe(r, "scene_frames", c.count.scene_frames);
        maybe(r, "boundary_distance", c.count.boundary_distance);
        maybe(r, "within_scene_noise", c.count.within_scene_noise);
        maybe(r, "drift_rate", c.count.drift_rate);
        maybe(r, "category", c.count.category);
        maybe(r, "total_min", c.count.total_min);
        maybe(r, "total_max", c.count.total_max);
        maybe(r, "query_count", c.count.query_count);
    }
    if (j.contains("engine")) {
        const auto& e = j.at("engine");
        maybe(e, "sensory_budget", c.engine.sensory_budget);
        maybe(e, "token_budget", c.engine.token_budget);
        maybe(e, "surprise_threshold", c.engine.surprise_threshold);
        maybe(e, "retrieval_k", c.engine.retrieval_k);
        if (e.contains("strategy")) {
            c.engine.strategy = strategy_from_string(e.at("strategy").get<std::string>());
        }
    }
    if (j.contains("event_loop")) {
        const auto& e = j.at("event_loop");
        maybe(e, "sensory_budget", c.event_loop.sensory_budget);
        maybe(e, "surprise_threshold", c.event_loop.surprise_threshold);
        maybe(e, "min_segment_frames", c.event_loop.min_segment_frames);
    }
    if (j.contains("estimator_mode")) {
        const auto s = j.at("estimator_mode").get<std::string>();
        if (s == "prediction_error") {
            c.estimator_mode = SurpriseMode::PredictionError;
        } else if (s == "adjacent_similarity") {
            c.estimator_mode = SurpriseMode::AdjacentSimilarity;
        } else {
            throw std::invalid_argument("unknown estimator mode: " + s);
        }
    }
    if (j.contains("predictor_kind")) {
        c.predictor_kind = predictor_kind_from_string(j.at("predictor_kind").get<std::string>());
    }
    if (j.contains("training")) {
        const auto& t = j.at("training");
        maybe(t, "learning_rate", c.training.learning_rate);
        maybe(t, "epochs", c.training.epochs);
        maybe(t, "batch_size", c.training.batch_size);
        maybe(t, "loss_weight", c.training.loss_weight);
        maybe(t, "seed", c.training.seed);
    }
    maybe(j, "tau_grid", c.tau_grid);
    maybe(j, "train_seed", c.train_seed);
    maybe(j, "tune_seed", c.tune_seed);
    maybe(j, "train_streams", c.train_streams);
    maybe(j, "tune_streams", c.tune_streams);
    maybe(j, "train_duration", c.train_duration);
    maybe(j, "fixed_window", c.fixed_window);
    maybe(j, "methods", c.methods);
    maybe(j, "output_dir", c.output_dir);
    if (c.tau_grid.empty()) throw std::invalid_argument("experiment: empty tau grid");
    return c;
}

namespace {

std::uint64_t mix2(std::uint64_t a, std::uint64_t b) {
    a ^= b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2);
    return a;
}

struct SuiteFamily {
    std::size_t dim;
    std::size_t tokens_per_frame;
    int scene_frames;
    double boundary_distance;
    double noise;
    double drift_rate;
    std::uint64_t drift_seed;
};

SuiteFamily family_of(const ExperimentConfig& c) {
    if (c.suite == "recall") {
        return {c.recall.dim,      c.recall.tokens_per_frame,  c.recall.scene_frames,
                c.recall.boundary_distance, c.recall.within_scene_noise, c.recall.drift_rate,
                suite_drift_seed(c.recall.seed)};
    }
    return {c.count.dim,      c.count.tokens_per_frame,  c.count.scene_frames,
            c.count.boundary_distance, c.count.within_scene_noise, c.count.drift_rate,
            suite_drift_seed(c.count.seed)};
}

PredictorModel train_suite_predictor(const ExperimentConfig& c, const SuiteFamily& fam,
                                     std::vector<double>* history_out) {
    PredictorModel model;
    switch (c.predictor_kind) {
        case PredictorKind::LastFrame:
            model = PredictorModel::last_frame(fam.dim);
            break;
        case PredictorKind::Linear:
            model = PredictorModel::linear(fam.dim, c.training.seed);
            break;
        case PredictorKind::TwoLayerPerceptron:
            model = PredictorModel::two_layer(fam.dim, 4 * fam.dim, c.training.seed);
            break;
    }
    if (c.predictor_kind == PredictorKind::LastFrame) return model;
    std::vector<std::vector<LatentFrame>> streams;
    for (int i = 0; i < c.train_streams; ++i) {
        const auto spec = family_stream_spec(
            mix2(c.train_seed, static_cast<std::uint64_t>(i)), c.train_duration, fam.dim,
            fam.tokens_per_frame, fam.scene_frames, fam.boundary_distance, fam.noise,
            fam.drift_rate, fam.drift_seed);
        streams.push_back(generate_stream(spec));
    }
    auto history = train(model, streams, c.training);
    if (history_out) *history_out = std::move(history);
    return model;
}

double sweep_duration_tau(const ExperimentConfig& c, const SuiteFamily& fam,
                          const SurpriseEstimator& estimator, std::int64_t duration) {
    std::vector<ScoredStream> tuning;
    for (int i = 0; i < c.tune_streams; ++i) {
        const auto spec = family_stream_spec(
            mix2(c.tune_seed, mix2(static_cast<std::uint64_t>(duration),
                                   static_cast<std::uint64_t>(i))),
            std::min<std::int64_t>(duration, 1200), fam.dim, fam.tokens_per_frame,
            fam.scene_frames, fam.boundary_distance, fam.noise, fam.drift_rate, fam.drift_seed);
        StreamGenerator gen(spec);
        tuning.push_back({score_stream(gen, estimator), gen.scene_boundaries()});
    }
    return sweep_tau(tuning, c.tau_grid, 2).best_tau;
}

void append_result(std::vector<ResultRecord>& records, std::string task_id,
                   std::int64_t duration, std::string method, double predicted, double gt,
                   double metric, std::size_t peak, double wall) {
    records.push_back({std::move(task_id), duration, std::move(method), predicted, gt, metric,
                       peak, wall});
}

std::string summary_from_records(const std::vector<ResultRecord>& records) {
    struct Agg {
        std::vector<double> preds, gts, metrics;
        double peak = 0.0;
    };
    std::map<std::pair<std::int64_t, std::string>, Agg> groups;
    for (const auto& r : records) {
        auto& g = groups[{r.duration, r.method}];
        g.preds.push_back(r.predicted);
        g.gts.push_back(r.ground_truth);
        g.metrics.push_back(r.metric);
        g.peak = std::max(g.peak, static_cast<double>(r.peak_tokens));
    }
    std::string out = "duration,method,tasks,mean_metric,pearson_r,max_peak_tokens\n";
    for (const auto& [key, g] : groups) {
        const double mean =
            std::accumulate(g.metrics.begin(), g.metrics.end(), 0.0) /
            static_cast<double>(g.metrics.size());
        double r = 0.0;
        if (g.preds.size() > 1) r = pearson(g.preds, g.gts);
        out += std::to_string(key.first) + "," + key.second + "," +
               std::to_string(g.metrics.size()) + "," + fmt(mean) + "," + fmt(r) + "," +
               std::to_string(static_cast<long long>(g.peak)) + "\n";
    }
    return out;
}

json record_to_json(const ResultRecord& r) {
    json j;
    j["task_id"] = r.task_id;
    j["duration"] = r.duration;
    j["method"] = r.method;
    j["predicted"] = r.predicted;
    j["ground_truth"] = r.ground_truth;
    j["metric"] = r.metric;
    j["peak_tokens"] = r.peak_tokens;
    j["wall_seconds"] = r.wall_seconds;
    return j;
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& config) {
    if (config.suite != "recall" && config.suite != "count") {
        throw std::invalid_argument("experiment: suite must be 'recall' or 'count'");
    }
    if (config.methods.empty()) throw std::invalid_argument("experiment: no methods");
    const char* env_root = std::getenv("PERCEPT_OUT");
    const fs::path out_dir =
        env_root ? fs::path(env_root) / config.output_dir : fs::path(config.output_dir);
    fs::create_directories(out_dir);

    const SuiteFamily fam = family_of(config);
    std::vector<double> loss_history;
    const PredictorModel model = train_suite_predictor(config, fam, &loss_history);
    const SurpriseEstimator estimator{config.estimator_mode, &model};
    if (!loss_history.empty()) {
        write_loss_history_csv(loss_history, (out_dir / "predictor_loss.csv").string());
        model.save((out_dir / "predictor.ckpt").string(), config.training.seed,
                   config.training.loss_weight);
    }

    const auto& durations =
        config.suite == "recall" ? config.recall.durations : config.count.durations;
    ExperimentOutput output;
    std::map<std::int64_t, double> tau_of;
    for (const auto d : durations) {
        tau_of[d] = sweep_duration_tau(config, fam, estimator, d);
        output.tau_by_duration.emplace_back(d, tau_of[d]);
    }

    const auto has_method = [&](const char* m) {
        return std::find(config.methods.begin(), config.methods.end(), m) !=
               config.methods.end();
    };

    bool wrote_trace = false;
    if (config.suite == "recall") {
        const auto tasks = build_recall_suite(config.recall);
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            const auto& task = tasks[i];
            char id[64];
            std::snprintf(id, sizeof(id), "recall-%lld-%03zu",
                          static_cast<long long>(task.duration),
                          i % static_cast<std::size_t>(config.recall.tasks_per_duration));
            StreamGenerator gen(task.stream);
            if (has_method("engine")) {
                const auto t0 = std::chrono::steady_clock::now();
                EngineConfig ec = config.engine;
                ec.surprise_threshold = tau_of[task.duration];
                MemoryEngine engine(ec, estimator);
                if (!wrote_trace) engine.enable_trace();
                for (std::int64_t t = 0; t < gen.length(); ++t) engine.ingest(gen.frame(t));
                const auto ans = answer_recall(engine, task, ec.retrieval_k);
                const double wall =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                append_result(output.records, id, task.duration, "engine", ans.option_index,
                              task.correct_index,
                              ans.option_index == task.correct_index ? 1.0 : 0.0,
                              engine.peak_token_count(), wall);
                if (!wrote_trace) {
                    engine.write_trace_csv((out_dir / "memory_trace.csv").string());
                    wrote_trace = true;
                }
            }
            if (has_method("fixed_window")) {
                const auto t0 = std::chrono::steady_clock::now();
                const auto ans = fixed_window_recall(gen, config.fixed_window, task);
                const double wall =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                append_result(output.records, id, task.duration, "fixed_window",
                              ans.option_index, task.correct_index,
                              ans.option_index == task.correct_index ? 1.0 : 0.0, 0, wall);
            }
        }
    } else {
        const auto tasks = build_count_suite(config.count);
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            const auto& task = tasks[i];
            char id[64];
            std::snprintf(id, sizeof(id), "count-%lld-%03zu",
                          static_cast<long long>(task.duration),
                          i % static_cast<std::size_t>(config.count.tasks_per_duration));
            StreamGenerator gen(task.stream);
            const OracleCounter counter{task.category};
            if (has_method("engine")) {
                const auto t0 = std::chrono::steady_clock::now();
                EventLoopConfig lc = config.event_loop;
                lc.surprise_threshold = tau_of[task.duration];
                EventLoop loop(lc, estimator, counter);
                for (std::int64_t t = 0; t < gen.length(); ++t) loop.step(gen.frame(t));
                const long pred = loop.finish();
                const double wall =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                append_result(output.records, id, task.duration, "engine", pred, task.gt_total,
                              mra(pred, task.gt_total), 0, wall);
                if (!wrote_trace) {
                    loop.write_trace_csv((out_dir / "segment_trace.csv").string());
                    wrote_trace = true;
                }
            }
            if (has_method("fixed_window")) {
                const auto t0 = std::chrono::steady_clock::now();
                const long pred = fixed_window_count(gen, config.fixed_window, task.category);
                const double wall =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                append_result(output.records, id, task.duration, "fixed_window", pred,
                              task.gt_total, mra(pred, task.gt_total), 0, wall);
            }
            if (has_method("gt_seg")) {
                const auto t0 = std::chrono::steady_clock::now();
                std::vector<LatentFrame> ann_only;
                ann_only.reserve(static_cast<std::size_t>(gen.length()));
                for (std::int64_t t = 0; t < gen.length(); ++t) {
                    LatentFrame f;
                    f.timestamp = t;
                    f.annotation = gen.annotation(t);
                    ann_only.push_back(std::move(f));
                }
                const long pred = gt_segmentation_run(ann_only, counter);
                const double wall =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                append_result(output.records, id, task.duration, "gt_seg", pred, task.gt_total,
                              mra(pred, task.gt_total), 0, wall);
            }
        }
    }

    std::sort(output.records.begin(), output.records.end(),
              [](const ResultRecord& a, const ResultRecord& b) {
                  if (a.task_id != b.task_id) return a.task_id < b.task_id;
                  return a.method < b.method;
              });
    {
        std::ofstream os(out_dir / "results.jsonl");
        for (const auto& r : output.records) os << record_to_json(r).dump() << "\n";
    }
    {
        std::ofstream os(out_dir / "summary.csv");
        os << summary_from_records(output.records);
    }
    {
        json manifest;
        manifest["config"] = config_to_json_obj(config);
        manifest["config_hash"] = fnv1a(config_to_json_obj(config).dump());
        manifest["tau_by_duration"] = output.tau_by_duration;
        manifest["train_seed"] = config.train_seed;
        manifest["tune_seed"] = config.tune_seed;
        manifest["suite_seed"] = config.suite == "recall" ? config.recall.seed : config.count.seed;
        std::ofstream os(out_dir / "manifest.json");
        os << manifest.dump(2) << "\n";
    }
    return output;
}

void write_report(const std::string& results_path, const std::string& summary_path) {
    std::ifstream is(results_path);
    if (!is) throw std::runtime_error("report: cannot open " + results_path);
    std::vector<ResultRecord> records;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        ResultRecord r;
        r.task_id = j.at("task_id").get<std::string>();
        r.duration = j.at("duration").get<std::int64_t>();
        r.method = j.at("method").get<std::string>();
        r.predicted = j.at("predicted").get<double>();
        r.ground_truth = j.at("ground_truth").get<double>();
        r.metric = j.at("metric").get<double>();
        r.peak_tokens = j.at("peak_tokens").get<std::size_t>();
        r.wall_seconds = j.at("wall_seconds").get<double>();
        records.push_back(std::move(r));
    }
    std::ofstream os(summary_path);
    if (!os) throw std::runtime_error("report: cannot open " + summary_path);
    os << summary_from_records(records);
}

}  // namespace percept
