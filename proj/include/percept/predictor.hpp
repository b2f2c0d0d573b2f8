#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "percept/core.hpp"

namespace percept {

enum class PredictorKind { LastFrame, Linear, TwoLayerPerceptron };

std::string to_string(PredictorKind kind);
PredictorKind predictor_kind_from_string(const std::string& s);

// Position-wise next-frame predictor. LastFrame is the parameter-free
// identity; Linear is an affine D->D map; TwoLayerPerceptron is
// D -> H -> D with exact GELU between the layers. Parameters are held
// in double precision so gradient checks are meaningful.
class PredictorModel {
public:
    PredictorModel() = default;

    static PredictorModel last_frame(std::size_t dim);
    static PredictorModel linear(std::size_t dim, std::uint64_t seed);
    static PredictorModel two_layer(std::size_t dim, std::size_t hidden, std::uint64_t seed);

    PredictorKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    std::size_t hidden() const { return hidden_; }

    // All trainable parameters as one flat view, layout [w1, b1, w2, b2].
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    TokenGrid predict_next(const TokenGrid& input) const;

    void save(const std::string& path, std::uint64_t seed, double loss_weight) const;
    static PredictorModel load(const std::string& path);

    // Per-token forward pass in double precision; `hidden_pre` is only
    // filled for the two-layer variant (pre-activation values).
    void forward_token(std::span<const float> x, std::vector<double>& y,
                       std::vector<double>& hidden_pre) const;

private:
    PredictorKind kind_ = PredictorKind::LastFrame;
    std::size_t dim_ = 0;
    std::size_t hidden_ = 0;
    std::vector<double> params_;

    // Offsets into params_ for the two-layer layout.
    std::size_t w1_size() const;
    std::size_t b1_off() const { return w1_size(); }
    std::size_t w2_off() const;
    std::size_t b2_off() const;

    friend struct PredictorGradients;
};

struct TrainingConfig {
    double learning_rate = 0.05;
    int epochs = 50;
    int batch_size = 8;
    double loss_weight = 0.1;  // recorded in checkpoints; objective itself is unscaled
    std::uint64_t seed = 0;
};

// Sum of mean-squared error over all coordinates and mean per-token
// cosine distance, equally weighted.
double lfp_loss(const TokenGrid& pred, const TokenGrid& target);

// Minibatch SGD on consecutive-frame pairs drawn from the streams.
// Returns one mean loss value per epoch; bitwise deterministic per seed.
std::vector<double> train(PredictorModel& model,
                          const std::vector<std::vector<LatentFrame>>& streams,
                          const TrainingConfig& config);

void write_loss_history_csv(const std::vector<double>& history, const std::string& path);

// Loss and parameter gradient of lfp_loss(model(input), target).
double loss_and_gradients(const PredictorModel& model, const TokenGrid& input,
                          const TokenGrid& target, std::vector<double>& grad);

// Max relative error between analytic gradients and central finite
// differences. Zero-parameter models return 0.
double finite_difference_check(const PredictorModel& model, const TokenGrid& input,
                               const TokenGrid& target, double epsilon);

enum class SurpriseMode { PredictionError, AdjacentSimilarity };

struct SurpriseEstimator {
    SurpriseMode mode = SurpriseMode::PredictionError;
    const PredictorModel* model = nullptr;  // required for PredictionError

    // Surprise of `current` given its predecessor. Stream starts have no
    // predecessor; callers score the first frame as 0.
    double score(const LatentFrame& prev, const LatentFrame& current) const;
};

}  // namespace percept
