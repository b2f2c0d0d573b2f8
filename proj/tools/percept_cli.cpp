// Command-line front end: generate suites, train predictors, sweep the
// surprise threshold, run experiments, and rebuild report tables.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "percept/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

fs::path resolve_out(const std::string& dir) {
    const char* root = std::getenv("PERCEPT_OUT");
    return root ? fs::path(root) / dir : fs::path(dir);
}

percept::ExperimentConfig load_config(const std::string& path) {
    return percept::experiment_config_from_json(read_file(path));
}

int cmd_generate(const std::string& config_path, bool write_streams, bool binary) {
    const auto config = load_config(config_path);
    const fs::path out = resolve_out(config.output_dir);
    fs::create_directories(out);
    json manifest;
    manifest["suite"] = config.suite;
    json task_list = json::array();
    if (config.suite == "recall") {
        const auto tasks = percept::build_recall_suite(config.recall);
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            const auto& t = tasks[i];
            json j;
            j["id"] = "recall-" + std::to_string(t.duration) + "-" + std::to_string(i);
            j["duration"] = t.duration;
            j["spec"] = json::parse(percept::spec_to_json(t.stream));
            j["spec_hash"] = percept::spec_hash(t.stream);
            j["options"] = t.options;
            j["correct_index"] = t.correct_index;
            if (write_streams) {
                const auto path = out / (j["id"].get<std::string>() + ".stream");
                percept::StreamHeader h{t.stream.dim, t.stream.tokens_per_frame, 0,
                                        t.stream.seed, percept::spec_hash(t.stream)};
                percept::write_stream(percept::generate_stream(t.stream), h, path.string(),
                                      binary);
                j["stream_file"] = path.filename().string();
            }
            task_list.push_back(std::move(j));
        }
    } else {
        const auto tasks = percept::build_count_suite(config.count);
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            const auto& t = tasks[i];
            json j;
            j["id"] = "count-" + std::to_string(t.duration) + "-" + std::to_string(i);
            j["duration"] = t.duration;
            j["spec"] = json::parse(percept::spec_to_json(t.stream));
            j["spec_hash"] = percept::spec_hash(t.stream);
            j["category"] = t.category;
            j["gt_total"] = t.gt_total;
            j["query_timestamps"] = t.query_timestamps;
            if (write_streams) {
                const auto path = out / (j["id"].get<std::string>() + ".stream");
                percept::StreamHeader h{t.stream.dim, t.stream.tokens_per_frame, 0,
                                        t.stream.seed, percept::spec_hash(t.stream)};
                percept::write_stream(percept::generate_stream(t.stream), h, path.string(),
                                      binary);
                j["stream_file"] = path.filename().string();
            }
            task_list.push_back(std::move(j));
        }
    }
    manifest["tasks"] = std::move(task_list);
    std::ofstream os(out / "suite_manifest.json");
    os << manifest.dump(2) << "\n";
    std::cout << "wrote " << (out / "suite_manifest.json").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"surprise-driven streaming memory engine"};
    app.require_subcommand(1);

    std::string config_path;
    bool write_streams = false;
    bool binary = false;

    auto* gen = app.add_subcommand("generate", "build task suites and manifests");
    gen->add_option("--config", config_path, "experiment config (JSON)")->required();
    gen->add_flag("--write-streams", write_streams, "also materialize stream files");
    gen->add_flag("--binary", binary, "use the packed binary stream format");

    auto* tr = app.add_subcommand("train", "train the latent-frame predictor");
    tr->add_option("--config", config_path, "experiment config (JSON)")->required();

    auto* sw = app.add_subcommand("sweep", "sweep the surprise threshold per duration");
    sw->add_option("--config", config_path, "experiment config (JSON)")->required();

    auto* run = app.add_subcommand("run", "run the configured experiment end to end");
    run->add_option("--config", config_path, "experiment config (JSON)")->required();

    std::string results_path, summary_path = "summary.csv";
    auto* rep = app.add_subcommand("report", "rebuild summary tables from results.jsonl");
    rep->add_option("--results", results_path, "results.jsonl path")->required();
    rep->add_option("--summary", summary_path, "output summary CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(config_path, write_streams, binary);
        if (tr->parsed()) {
            const auto cfg = load_config(config_path);
            const fs::path out = resolve_out(cfg.output_dir);
            fs::create_directories(out);
            std::vector<std::vector<percept::LatentFrame>> streams;
            const auto fam_dim = cfg.suite == "recall" ? cfg.recall.dim : cfg.count.dim;
            const auto fam_tpf = cfg.suite == "recall" ? cfg.recall.tokens_per_frame
                                                       : cfg.count.tokens_per_frame;
            const auto scene_frames =
                cfg.suite == "recall" ? cfg.recall.scene_frames : cfg.count.scene_frames;
            const auto boundary = cfg.suite == "recall" ? cfg.recall.boundary_distance
                                                        : cfg.count.boundary_distance;
            const auto noise = cfg.suite == "recall" ? cfg.recall.within_scene_noise
                                                     : cfg.count.within_scene_noise;
            const auto drift =
                cfg.suite == "recall" ? cfg.recall.drift_rate : cfg.count.drift_rate;
            const auto dseed = percept::suite_drift_seed(cfg.suite == "recall" ? cfg.recall.seed
                                                                               : cfg.count.seed);
            for (int i = 0; i < cfg.train_streams; ++i) {
                streams.push_back(percept::generate_stream(percept::family_stream_spec(
                    cfg.train_seed + static_cast<std::uint64_t>(i) * 7919, cfg.train_duration,
                    fam_dim, fam_tpf, scene_frames, boundary, noise, drift, dseed)));
            }
            percept::PredictorModel model;
            switch (cfg.predictor_kind) {
                case percept::PredictorKind::LastFrame:
                    model = percept::PredictorModel::last_frame(fam_dim);
                    break;
                case percept::PredictorKind::Linear:
                    model = percept::PredictorModel::linear(fam_dim, cfg.training.seed);
                    break;
                case percept::PredictorKind::TwoLayerPerceptron:
                    model = percept::PredictorModel::two_layer(fam_dim, 4 * fam_dim,
                                                               cfg.training.seed);
                    break;
            }
            const auto history = percept::train(model, streams, cfg.training);
            model.save((out / "predictor.ckpt").string(), cfg.training.seed,
                       cfg.training.loss_weight);
            percept::write_loss_history_csv(history, (out / "predictor_loss.csv").string());
            std::cout << "final loss " << (history.empty() ? 0.0 : history.back()) << "\n";
            return 0;
        }
        if (sw->parsed() || run->parsed()) {
            auto config = load_config(config_path);
            const auto output = percept::run_experiment(config);
            const fs::path out = resolve_out(config.output_dir);
            for (const auto& [d, tau] : output.tau_by_duration) {
                std::cout << "duration " << d << ": tau " << tau << "\n";
            }
            if (run->parsed()) {
                std::cout << output.records.size() << " task results in "
                          << (out / "results.jsonl").string() << "\n";
            }
            return 0;
        }
        if (rep->parsed()) {
            percept::write_report(results_path, summary_path);
            std::cout << "wrote " << summary_path << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
