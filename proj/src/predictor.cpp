#include "percept/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace percept {

using nlohmann::json;

std::string to_string(PredictorKind kind) {
    switch (kind) {
        case PredictorKind::LastFrame: return "last_frame";
        case PredictorKind::Linear: return "linear";
        case PredictorKind::TwoLayerPerceptron: return "two_layer";
    }
    return "unknown";
}

PredictorKind predictor_kind_from_string(const std::string& s) {
    if (s == "last_frame") return PredictorKind::LastFrame;
    if (s == "linear") return PredictorKind::Linear;
    if (s == "two_layer") return PredictorKind::TwoLayerPerceptron;
    throw std::invalid_argument("unknown predictor kind: " + s);
}

namespace {

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void init_uniform(std::vector<double>& p, std::size_t begin, std::size_t end, double scale,
                  std::mt19937_64& rng) {
    for (std::size_t i = begin; i < end; ++i) {
        p[i] = (2.0 * uniform01(rng) - 1.0) * scale;
    }
}

}  // namespace

std::size_t PredictorModel::w1_size() const {
    if (kind_ == PredictorKind::Linear) return dim_ * dim_;
    if (kind_ == PredictorKind::TwoLayerPerceptron) return hidden_ * dim_;
    return 0;
}

std::size_t PredictorModel::w2_off() const {
    return w1_size() + (kind_ == PredictorKind::Linear ? dim_ : hidden_);
}

std::size_t PredictorModel::b2_off() const { return w2_off() + dim_ * hidden_; }

PredictorModel PredictorModel::last_frame(std::size_t dim) {
    PredictorModel m;
    m.kind_ = PredictorKind::LastFrame;
    m.dim_ = dim;
    return m;
}

PredictorModel PredictorModel::linear(std::size_t dim, std::uint64_t seed) {
    PredictorModel m;
    m.kind_ = PredictorKind::Linear;
    m.dim_ = dim;
    m.params_.assign(dim * dim + dim, 0.0);
    std::mt19937_64 rng(seed);
    init_uniform(m.params_, 0, dim * dim, 1.0 / std::sqrt(static_cast<double>(dim)), rng);
    return m;
}

PredictorModel PredictorModel::two_layer(std::size_t dim, std::size_t hidden,
                                         std::uint64_t seed) {
    PredictorModel m;
    m.kind_ = PredictorKind::TwoLayerPerceptron;
    m.dim_ = dim;
    m.hidden_ = hidden;
    m.params_.assign(hidden * dim + hidden + dim * hidden + dim, 0.0);
    std::mt19937_64 rng(seed);
    init_uniform(m.params_, 0, hidden * dim, 1.0 / std::sqrt(static_cast<double>(dim)), rng);
    init_uniform(m.params_, m.w2_off(), m.w2_off() + dim * hidden,
                 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
    return m;
}

void PredictorModel::forward_token(std::span<const float> x, std::vector<double>& y,
                                   std::vector<double>& hidden_pre) const {
    if (x.size() != dim_) throw std::invalid_argument("predictor: dimension mismatch");
    y.resize(dim_);
    switch (kind_) {
        case PredictorKind::LastFrame:
            for (std::size_t d = 0; d < dim_; ++d) y[d] = x[d];
            break;
        case PredictorKind::Linear: {
            const double* w = params_.data();
            const double* b = params_.data() + dim_ * dim_;
            for (std::size_t r = 0; r < dim_; ++r) {
                double acc = b[r];
                const double* row = w + r * dim_;
                for (std::size_t c = 0; c < dim_; ++c) acc += row[c] * x[c];
                y[r] = acc;
            }
            break;
        }
        case PredictorKind::TwoLayerPerceptron: {
            const double* w1 = params_.data();
            const double* b1 = params_.data() + b1_off();
            const double* w2 = params_.data() + w2_off();
            const double* b2 = params_.data() + b2_off();
            hidden_pre.resize(hidden_);
            for (std::size_t h = 0; h < hidden_; ++h) {
                double acc = b1[h];
                const double* row = w1 + h * dim_;
                for (std::size_t c = 0; c < dim_; ++c) acc += row[c] * x[c];
                hidden_pre[h] = acc;
            }
            for (std::size_t r = 0; r < dim_; ++r) {
                double acc = b2[r];
                const double* row = w2 + r * hidden_;
                for (std::size_t h = 0; h < hidden_; ++h) acc += row[h] * gelu(hidden_pre[h]);
                y[r] = acc;
            }
            break;
        }
    }
}

TokenGrid PredictorModel::predict_next(const TokenGrid& input) const {
    if (input.dim != dim_) throw std::invalid_argument("predict_next: dimension mismatch");
    TokenGrid out(input.count, input.dim);
    std::vector<double> y, hpre;
    for (std::size_t i = 0; i < input.count; ++i) {
        forward_token(input.token(i), y, hpre);
        auto dst = out.token(i);
        for (std::size_t d = 0; d < dim_; ++d) dst[d] = static_cast<float>(y[d]);
    }
    return out;
}

void PredictorModel::save(const std::string& path, std::uint64_t seed,
                          double loss_weight) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
    json j;
    j["variant"] = to_string(kind_);
    j["dim"] = dim_;
    j["hidden"] = hidden_;
    j["seed"] = seed;
    j["loss_weight"] = loss_weight;
    j["params"] = params_;
    os << j.dump() << "\n";
}

PredictorModel PredictorModel::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    json j = json::parse(is);
    PredictorModel m;
    m.kind_ = predictor_kind_from_string(j.at("variant").get<std::string>());
    m.dim_ = j.at("dim").get<std::size_t>();
    m.hidden_ = j.at("hidden").get<std::size_t>();
    m.params_ = j.at("params").get<std::vector<double>>();
    std::size_t expect = 0;
    if (m.kind_ == PredictorKind::Linear) expect = m.dim_ * m.dim_ + m.dim_;
    if (m.kind_ == PredictorKind::TwoLayerPerceptron) {
        expect = m.hidden_ * m.dim_ + m.hidden_ + m.dim_ * m.hidden_ + m.dim_;
    }
    if (m.params_.size() != expect) throw std::runtime_error("checkpoint: parameter count mismatch");
    for (double p : m.params_) {
        if (!std::isfinite(p)) throw std::runtime_error("checkpoint: non-finite parameter");
    }
    return m;
}

double lfp_loss(const TokenGrid& pred, const TokenGrid& target) {
    if (!pred.congruent(target)) throw std::invalid_argument("lfp_loss: grid shape mismatch");
    double mse = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - target.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(pred.data.size());
    return mse + grid_surprise(pred, target);
}

namespace {

// Loss over one (input, target) token pair plus d(loss)/d(prediction),
// where loss is averaged the same way lfp_loss averages over a grid:
// MSE normalized by count*dim, cosine term by count.
double token_loss_grad(std::span<const double> y, std::span<const float> t,
                       std::size_t count, std::size_t dim, std::vector<double>& dy) {
    dy.assign(dim, 0.0);
    const double mse_norm = 1.0 / (static_cast<double>(count) * static_cast<double>(dim));
    const double cos_norm = 1.0 / static_cast<double>(count);
    double mse = 0.0, dot = 0.0, ny2 = 0.0, nt2 = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        const double diff = y[d] - t[d];
        mse += diff * diff;
        dy[d] += 2.0 * diff * mse_norm;
        dot += y[d] * t[d];
        ny2 += y[d] * y[d];
        nt2 += static_cast<double>(t[d]) * t[d];
    }
    const double ny = std::sqrt(ny2), nt = std::sqrt(nt2);
    if (ny == 0.0 || nt == 0.0) {
        throw std::invalid_argument("lfp_loss gradient: zero vector");
    }
    const double cosd = 1.0 - dot / (ny * nt);
    for (std::size_t d = 0; d < dim; ++d) {
        const double g = -(t[d] / (ny * nt) - dot * y[d] / (ny2 * ny * nt));
        dy[d] += g * cos_norm;
    }
    return mse * mse_norm + cosd * cos_norm;
}

}  // namespace

double loss_and_gradients(const PredictorModel& model, const TokenGrid& input,
                          const TokenGrid& target, std::vector<double>& grad) {
    if (!input.congruent(target)) {
        throw std::invalid_argument("loss_and_gradients: grid shape mismatch");
    }
    grad.assign(model.params().size(), 0.0);
    const std::size_t dim = model.dim();
    const std::size_t hidden = model.hidden();
    std::vector<double> y, hpre, dy, da;
    double total = 0.0;
    for (std::size_t i = 0; i < input.count; ++i) {
        auto x = input.token(i);
        model.forward_token(x, y, hpre);
        total += token_loss_grad(y, target.token(i), input.count, dim, dy);
        switch (model.kind()) {
            case PredictorKind::LastFrame:
                break;
            case PredictorKind::Linear: {
                double* gw = grad.data();
                double* gb = grad.data() + dim * dim;
                for (std::size_t r = 0; r < dim; ++r) {
                    double* row = gw + r * dim;
                    for (std::size_t c = 0; c < dim; ++c) row[c] += dy[r] * x[c];
                    gb[r] += dy[r];
                }
                break;
            }
            case PredictorKind::TwoLayerPerceptron: {
                const std::size_t b1o = hidden * dim;
                const std::size_t w2o = b1o + hidden;
                const std::size_t b2o = w2o + dim * hidden;
                const double* w2 = model.params().data() + w2o;
                da.assign(hidden, 0.0);
                for (std::size_t r = 0; r < dim; ++r) {
                    double* gw2row = grad.data() + w2o + r * hidden;
                    for (std::size_t h = 0; h < hidden; ++h) {
                        gw2row[h] += dy[r] * gelu(hpre[h]);
                        da[h] += dy[r] * w2[r * hidden + h];
                    }
                    grad[b2o + r] += dy[r];
                }
                for (std::size_t h = 0; h < hidden; ++h) {
                    const double dh = da[h] * gelu_grad(hpre[h]);
                    double* gw1row = grad.data() + h * dim;
                    for (std::size_t c = 0; c < dim; ++c) gw1row[c] += dh * x[c];
                    grad[b1o + h] += dh;
                }
                break;
            }
        }
    }
    return total;
}

namespace {

// Same objective as lfp_loss but evaluated on the double-precision forward
// pass; predict_next rounds to float, which is too coarse for central
// differences at small epsilon.
double loss_double(const PredictorModel& model, const TokenGrid& input,
                   const TokenGrid& target) {
    std::vector<double> y, hpre, dy;
    double total = 0.0;
    for (std::size_t i = 0; i < input.count; ++i) {
        model.forward_token(input.token(i), y, hpre);
        total += token_loss_grad(y, target.token(i), input.count, input.dim, dy);
    }
    return total;
}

}  // namespace

double finite_difference_check(const PredictorModel& model, const TokenGrid& input,
                               const TokenGrid& target, double epsilon) {
    if (epsilon <= 0.0) throw std::invalid_argument("finite_difference_check: epsilon <= 0");
    if (model.params().empty()) return 0.0;
    std::vector<double> grad;
    loss_and_gradients(model, input, target, grad);
    PredictorModel probe = model;
    double max_rel = 0.0;
    for (std::size_t i = 0; i < probe.params().size(); ++i) {
        const double orig = probe.params()[i];
        probe.params()[i] = orig + epsilon;
        const double lp = loss_double(probe, input, target);
        probe.params()[i] = orig - epsilon;
        const double lm = loss_double(probe, input, target);
        probe.params()[i] = orig;
        const double fd = (lp - lm) / (2.0 * epsilon);
        const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
        max_rel = std::max(max_rel, std::abs(fd - grad[i]) / denom);
    }
    return max_rel;
}

namespace {

// Deterministic Fisher-Yates; std::shuffle is implementation-defined.
void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = rng() % i;
        std::swap(idx[i - 1], idx[j]);
    }
}

}  // namespace

std::vector<double> train(PredictorModel& model,
                          const std::vector<std::vector<LatentFrame>>& streams,
                          const TrainingConfig& config) {
    if (config.learning_rate <= 0.0) throw std::invalid_argument("train: learning_rate <= 0");
    if (config.loss_weight < 0.0) throw std::invalid_argument("train: loss_weight < 0");
    struct Pair {
        const TokenGrid* input;
        const TokenGrid* target;
    };
    std::vector<Pair> pairs;
    for (const auto& s : streams) {
        for (std::size_t t = 0; t + 1 < s.size(); ++t) {
            if (s[t + 1].timestamp != s[t].timestamp + 1) {
                throw std::invalid_argument("train: frames must be at uniform unit spacing");
            }
            pairs.push_back({&s[t].grid, &s[t + 1].grid});
        }
    }
    if (pairs.empty()) throw std::invalid_argument("train: no consecutive-frame pairs");

    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(config.epochs));
    // loss_weight is recorded alongside checkpoints but does not scale the
    // objective here: the next-frame loss is the only training objective.
    if (model.kind() == PredictorKind::LastFrame) {
        double loss = 0.0;
        for (const auto& p : pairs) loss += lfp_loss(*p.input, *p.target);
        loss /= static_cast<double>(pairs.size());
        history.assign(static_cast<std::size_t>(config.epochs), loss);
        return history;
    }

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t batch = std::max<std::size_t>(1, static_cast<std::size_t>(config.batch_size));
    std::vector<double> grad, batch_grad(model.params().size());
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_indices(order, rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
            for (std::size_t k = start; k < end; ++k) {
                const auto& p = pairs[order[k]];
                epoch_loss += loss_and_gradients(model, *p.input, *p.target, grad);
                for (std::size_t i = 0; i < grad.size(); ++i) batch_grad[i] += grad[i];
            }
            const double scale = config.learning_rate / static_cast<double>(end - start);
            for (std::size_t i = 0; i < model.params().size(); ++i) {
                model.params()[i] -= scale * batch_grad[i];
            }
        }
        history.push_back(epoch_loss / static_cast<double>(pairs.size()));
    }
    return history;
}

void write_loss_history_csv(const std::vector<double>& history, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("loss history: cannot open " + path);
    os << "epoch,loss\n";
    for (std::size_t i = 0; i < history.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, history[i]);
        os << buf;
    }
}

double SurpriseEstimator::score(const LatentFrame& prev, const LatentFrame& current) const {
    if (current.timestamp != prev.timestamp + 1) {
        throw std::invalid_argument("surprise: frames must be consecutive");
    }
    switch (mode) {
        case SurpriseMode::PredictionError:
            if (!model) throw std::invalid_argument("surprise: PredictionError needs a model");
            return grid_surprise(model->predict_next(prev.grid), current.grid);
        case SurpriseMode::AdjacentSimilarity: {
            const auto a = pooled_feature(prev.grid);
            const auto b = pooled_feature(current.grid);
            return cosine_distance(a, b);
        }
    }
    return 0.0;
}

}  // namespace percept
