#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsfall/baselines/features.hpp"
#include "tsfall/checkpoint.hpp"
#include "tsfall/error.hpp"

namespace tsfall::baselines {

// Linear hinge-loss classifier on standardised features. The bias is an
// extra constant feature and shares the L2 penalty.
struct LinearSvm {
    std::vector<double> mean, scale;
    std::vector<double> weight; // dim + 1, bias last

    double decision(std::span<const double> x) const {
        double s = weight.back();
        for (std::size_t j = 0; j < mean.size(); ++j) s += weight[j] * (x[j] - mean[j]) / scale[j];
        return s;
    }
    int predict(std::span<const double> x) const { return decision(x) >= 0.0 ? 1 : 0; }

    std::vector<int> predict(const FeatureMatrix& m) const {
        std::vector<int> out(m.rows);
        for (std::size_t i = 0; i < m.rows; ++i) out[i] = predict(m.row(i));
        return out;
    }
};

struct SvmOptions {
    double lambda = 1e-3;
    std::size_t epochs = 200;
    std::uint64_t seed = 0;
};

// Full-batch subgradient descent on
//   lambda/2 |w|^2 + mean_i max(0, 1 - y_i w.x_i),   y in {-1, +1}
// with step 1/(lambda t). The schedule has no randomness, so the seed only
// travels into the checkpoint header.
inline LinearSvm svm_train(const FeatureMatrix& x, std::span<const int> labels, const SvmOptions& opt = {}) {
    if (x.rows != labels.size() || x.rows == 0) throw Error("baselines", Errc::EmptyData, "features and labels must match and be nonempty");
    if (!(opt.lambda > 0)) throw Error("baselines", Errc::BadConfig, "lambda must be positive");
    const bool has0 = std::find(labels.begin(), labels.end(), 0) != labels.end();
    const bool has1 = std::find(labels.begin(), labels.end(), 1) != labels.end();
    if (!has0 || !has1) throw Error("baselines", Errc::SingleClass, "svm needs both classes");

    const std::size_t d = x.dim, n = x.rows;
    LinearSvm m;
    m.mean.assign(d, 0.0);
    m.scale.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) m.mean[j] += x.row(i)[j];
    for (auto& v : m.mean) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double t = x.row(i)[j] - m.mean[j];
            m.scale[j] += t * t;
        }
    for (auto& v : m.scale) {
        v = std::sqrt(v / static_cast<double>(n));
        if (!(v > 1e-12)) v = 1.0;
    }
    std::vector<double> z(n * (d + 1));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) z[i * (d + 1) + j] = (x.row(i)[j] - m.mean[j]) / m.scale[j];
        z[i * (d + 1) + d] = 1.0;
    }

    std::vector<double> w(d + 1, 0.0), g(d + 1);
    m.weight.assign(d + 1, 0.0);
    // The last iterate can swing across the optimum; return the mean of the
    // second half of the iterates instead.
    const std::size_t avg_from = opt.epochs / 2 + 1;
    for (std::size_t t = 1; t <= opt.epochs; ++t) {
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double y = labels[i] == 1 ? 1.0 : -1.0;
            const double* zi = z.data() + i * (d + 1);
            double s = 0.0;
            for (std::size_t j = 0; j <= d; ++j) s += w[j] * zi[j];
            if (y * s < 1.0)
                for (std::size_t j = 0; j <= d; ++j) g[j] += y * zi[j];
        }
        const double eta = 1.0 / (opt.lambda * static_cast<double>(t));
        for (std::size_t j = 0; j <= d; ++j) w[j] = (1.0 - eta * opt.lambda) * w[j] + eta * g[j] / static_cast<double>(n);
        if (t >= avg_from)
            for (std::size_t j = 0; j <= d; ++j) m.weight[j] += w[j];
    }
    const auto kept = static_cast<double>(opt.epochs + 1 - avg_from);
    for (auto& v : m.weight) v /= kept;
    return m;
}

inline checkpoint::Container to_container(const LinearSvm& m, std::uint64_t seed) {
    checkpoint::Container c;
    c.header["model_kind"] = "svm";
    c.header["train_seed"] = seed;
    c.header["dim"] = m.mean.size();
    // Standardisation statistics stay in double precision so loaded models
    // decide exactly like trained ones on the stored weights.
    c.header["mean"] = m.mean;
    c.header["scale"] = m.scale;
    c.header["params"] = nlohmann::json::array({{{"name", "weight"}, {"shape", {m.weight.size()}}}});
    for (double w : m.weight) c.params.push_back(static_cast<float>(w));
    return c;
}

inline LinearSvm svm_from_container(const checkpoint::Container& c) {
    if (c.header.value("model_kind", std::string{}) != "svm") throw Error("baselines", Errc::BadConfig, "not an svm checkpoint");
    LinearSvm m;
    m.mean = c.header.at("mean").get<std::vector<double>>();
    m.scale = c.header.at("scale").get<std::vector<double>>();
    if (c.params.size() != m.mean.size() + 1 || m.scale.size() != m.mean.size())
        throw Error("baselines", Errc::ShapeMismatch, "svm parameter block");
    m.weight.assign(c.params.begin(), c.params.end());
    return m;
}

} // namespace tsfall::baselines
