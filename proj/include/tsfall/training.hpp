#pragma once

// Mini-batch Adam training and batched inference for the window classifiers
// (FallSeqTCN and the LSTM baseline). A model type provides
//   params(), loss_and_grad(x, labels, class_weight, PassMode), forward(x)
// and a nested Scalar type.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "tsfall/dataset.hpp"
#include "tsfall/error.hpp"
#include "tsfall/eval.hpp"
#include "tsfall/models.hpp"
#include "tsfall/nncore.hpp"
#include "tsfall/rng.hpp"

namespace tsfall::training {

template <class T>
nn::Tensor3<T> gather(const dataset::WindowBatch& batch, std::span<const std::size_t> idx) {
    nn::Tensor3<T> x(idx.size(), batch.length(), batch.channels());
    const std::size_t stride = batch.length() * batch.channels();
    for (std::size_t k = 0; k < idx.size(); ++k) {
        auto w = batch.window(idx[k]);
        std::transform(w.begin(), w.end(), x.data.begin() + static_cast<std::ptrdiff_t>(k * stride),
                       [](double v) { return static_cast<T>(v); });
    }
    return x;
}

template <class T>
nn::Tensor3<T> window_tensor(std::span<const double> window, std::size_t length, std::size_t channels = kNumChannels) {
    nn::require(window.size() == length * channels, "window must hold " + std::to_string(length) + "x" +
                                                        std::to_string(channels) + " values");
    nn::Tensor3<T> x(1, length, channels);
    std::transform(window.begin(), window.end(), x.data.begin(), [](double v) { return static_cast<T>(v); });
    return x;
}

// Fall-class probability for every window, inference mode.
template <class Model>
std::vector<double> predict_proba(const Model& model, const dataset::WindowBatch& batch, std::size_t chunk = 256) {
    using T = typename Model::Scalar;
    std::vector<double> out;
    out.reserve(batch.size());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < batch.size(); start += chunk) {
        const std::size_t n = std::min(chunk, batch.size() - start);
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), start);
        auto p = model.forward(gather<T>(batch, idx));
        for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<double>(p[i * 2 + 1]));
    }
    return out;
}

// argmax over the two classes; ties go to the negative class.
inline int decide(double p_fall) { return p_fall > 0.5 ? 1 : 0; }

inline std::vector<int> decide(std::span<const double> p_fall) {
    std::vector<int> out(p_fall.size());
    for (std::size_t i = 0; i < p_fall.size(); ++i) out[i] = decide(p_fall[i]);
    return out;
}

struct WindowPrediction {
    int label;
    double probability; // of the fall class
};

template <class Model>
WindowPrediction predict_window(const Model& model, std::span<const double> window, std::size_t length) {
    using T = typename Model::Scalar;
    auto p = model.forward(window_tensor<T>(window, length));
    const double pf = static_cast<double>(p[1]);
    return {decide(pf), pf};
}

template <class Model>
double mean_loss(const Model& model, const dataset::WindowBatch& batch, std::span<const double> class_weight = {},
                 std::size_t chunk = 256) {
    using T = typename Model::Scalar;
    // Weighted mean over the whole set, matching softmax_xent's normalisation.
    double num = 0.0, den = 0.0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < batch.size(); start += chunk) {
        const std::size_t n = std::min(chunk, batch.size() - start);
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), start);
        auto p = model.forward(gather<T>(batch, idx));
        for (std::size_t i = 0; i < n; ++i) {
            const int y = batch.label(start + i);
            const double w = class_weight.empty() ? 1.0 : class_weight[static_cast<std::size_t>(y)];
            const double py = std::max(static_cast<double>(p[i * 2 + static_cast<std::size_t>(y)]),
                                       std::numeric_limits<double>::min());
            num += -w * std::log(py);
            den += w;
        }
    }
    return den > 0 ? num / den : 0.0;
}

struct TrainOptions {
    std::size_t epochs = 20;
    double lr = 1e-3;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    std::size_t patience = 5;
    bool early_stopping = true;
    bool class_weighted = false;
};

struct EpochStats {
    std::size_t epoch = 0;     // 0 is the untrained model
    double train_loss = 0.0;   // inference-mode mean loss over the training set
    double valid_loss = 0.0;
    eval::EvalReport valid;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;
    bool stopped_early = false;
};

inline std::vector<double> balanced_class_weights(std::span<const int> labels) {
    double n0 = 0, n1 = 0;
    for (int y : labels) (y ? n1 : n0) += 1.0;
    const double n = n0 + n1;
    return {n / (2.0 * n0), n / (2.0 * n1)};
}

// Minimises mean softmax cross-entropy with Adam. Early stopping keeps the
// parameters of the epoch with the best validation F1 (undefined F1 ranks
// below every defined value; ties keep the earlier epoch).
template <class Model>
TrainHistory train(Model& model, const dataset::WindowBatch& train_set, const dataset::WindowBatch& valid_set,
                   const TrainOptions& opt) {
    using T = typename Model::Scalar;
    if (train_set.empty() || valid_set.empty()) throw Error("models", Errc::EmptyData, "training and validation sets must be nonempty");
    const auto labels = train_set.labels();
    const bool has0 = std::count(labels.begin(), labels.end(), 0) > 0;
    const bool has1 = std::count(labels.begin(), labels.end(), 1) > 0;
    if (!has0 || !has1) throw Error("models", Errc::SingleClassTrainSet, "");
    if (opt.batch_size == 0) throw Error("models", Errc::BadConfig, "batch size must be positive");

    const std::vector<double> cw = opt.class_weighted ? balanced_class_weights(labels) : std::vector<double>{};
    const auto valid_labels = valid_set.labels();
    auto record = [&](std::size_t epoch) {
        EpochStats s;
        s.epoch = epoch;
        s.train_loss = mean_loss(model, train_set, cw);
        auto pv = predict_proba(model, valid_set);
        s.valid_loss = mean_loss(model, valid_set, cw);
        s.valid = eval::confusion(decide(pv), valid_labels);
        return s;
    };

    TrainHistory h;
    h.epochs.push_back(record(0));
    nn::AdamState<T> adam;
    const nn::AdamConfig acfg{opt.lr, 0.9, 0.999, 1e-8};
    Rng rng(opt.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::uint64_t step = 0;

    auto params = model.params();
    std::vector<std::vector<T>> best;
    double best_f1 = -std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
            const std::size_t n = std::min(opt.batch_size, order.size() - start);
            std::span<const std::size_t> idx(order.data() + start, n);
            auto x = gather<T>(train_set, idx);
            std::vector<int> y(n);
            for (std::size_t i = 0; i < n; ++i) y[i] = train_set.label(idx[i]);
            model.loss_and_grad(x, y, cw, models::PassMode{true, splitmix64(opt.seed ^ splitmix64(++step))});
            nn::adam_step<T>(params, adam, acfg);
        }
        h.epochs.push_back(record(epoch));
        const auto& f1 = h.epochs.back().valid.f1;
        const double score = f1 ? *f1 : -1.0;
        if (score > best_f1) {
            best_f1 = score;
            h.best_epoch = epoch;
            since_best = 0;
            best.clear();
            for (auto* p : params) best.push_back(p->value);
        } else if (opt.early_stopping && ++since_best >= opt.patience) {
            h.stopped_early = true;
            break;
        }
    }
    if (opt.early_stopping && !best.empty())
        for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = best[k];
    return h;
}

} // namespace tsfall::training
