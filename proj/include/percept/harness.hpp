#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "percept/core.hpp"
#include "percept/memory.hpp"
#include "percept/predictor.hpp"
#include "percept/segmentation.hpp"
#include "percept/simulator.hpp"

namespace percept {

// Mean relative accuracy over confidence thresholds 0.50..0.95 step 0.05.
// Integer arithmetic throughout, so the threshold comparisons are exact.
double mra(long pred, long gt);

double choice_accuracy(const std::vector<bool>& correct);

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Greedy matching of sorted boundary lists; a predicted boundary matches
// at most one ground-truth boundary within +/- tolerance frames.
Prf boundary_prf(const std::vector<std::int64_t>& predicted,
                 const std::vector<std::int64_t>& ground_truth, std::int64_t tolerance);

// Pearson correlation; 0 when either side has no variance.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// Rank-based AUROC with tied-score handling.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Per-frame surprise scores over a generated stream (index = timestamp;
// the first frame scores 0).
std::vector<double> score_stream(const StreamGenerator& gen, const SurpriseEstimator& estimator);
std::vector<double> score_frames(const std::vector<LatentFrame>& frames,
                                 const SurpriseEstimator& estimator);

// Recency-window comparators: answer from the last N frames only.
long fixed_window_count(const StreamGenerator& gen, std::int64_t window,
                        const std::string& category);
RecallAnswer fixed_window_recall(const StreamGenerator& gen, std::int64_t window,
                                 const RecallTask& task);

struct SweepResult {
    double best_tau = 0.0;
    std::vector<std::pair<double, double>> table;  // (tau, mean F1)
};

struct ScoredStream {
    std::vector<double> scores;                 // per-frame surprise
    std::vector<std::int64_t> boundaries;       // ground-truth scene entries
};

// Picks the tau maximizing mean boundary F1 over tuning streams;
// ties go to the smaller tau.
SweepResult sweep_tau(const std::vector<ScoredStream>& tuning, const std::vector<double>& grid,
                      std::int64_t tolerance);

// Thresholded boundary detection from a score sequence (respecting the
// same minimum spacing the event loop uses).
std::vector<std::int64_t> detect_boundaries(const std::vector<double>& scores, double tau,
                                            std::int64_t min_spacing);

struct ExperimentConfig {
    std::string name = "experiment";
    std::string suite = "count";  // "recall" | "count"
    RecallSuiteConfig recall;
    CountSuiteConfig count;
    EngineConfig engine;
    EventLoopConfig event_loop;
    SurpriseMode estimator_mode = SurpriseMode::PredictionError;
    PredictorKind predictor_kind = PredictorKind::Linear;
    TrainingConfig training;
    std::vector<double> tau_grid = {0.005, 0.01, 0.02, 0.05, 0.1, 0.2};
    std::uint64_t train_seed = 9000;
    std::uint64_t tune_seed = 9500;
    int train_streams = 4;
    int tune_streams = 4;
    std::int64_t train_duration = 600;
    std::int64_t fixed_window = 600;
    std::vector<std::string> methods = {"engine", "fixed_window"};
    std::string output_dir = "out";
};

ExperimentConfig experiment_config_from_json(const std::string& text);
std::string experiment_config_to_json(const ExperimentConfig& config);

struct ResultRecord {
    std::string task_id;
    std::int64_t duration = 0;
    std::string method;
    double predicted = 0.0;
    double ground_truth = 0.0;
    double metric = 0.0;  // 0/1 accuracy for recall, MRA for count
    std::size_t peak_tokens = 0;
    double wall_seconds = 0.0;
};

struct ExperimentOutput {
    std::vector<ResultRecord> records;
    std::vector<std::pair<std::int64_t, double>> tau_by_duration;
};

// Trains the predictor, sweeps tau per duration on held-out tuning
// streams, evaluates every task with every configured method, and writes
// results.jsonl, summary.csv, traces, and a manifest under output_dir.
ExperimentOutput run_experiment(const ExperimentConfig& config);

// Rebuilds summary.csv from an existing results.jsonl.
void write_report(const std::string& results_path, const std::string& summary_path);

}  // namespace percept
