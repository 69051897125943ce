#pragma once

// Single-layer LSTM over raw windows: the last hidden state feeds a linear
// head and a two-way softmax. Gate order in the stacked weights is
// input, forget, cell candidate, output.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsfall/checkpoint.hpp"
#include "tsfall/error.hpp"
#include "tsfall/models.hpp"
#include "tsfall/nncore.hpp"
#include "tsfall/rng.hpp"

namespace tsfall::baselines {

struct LstmConfig {
    std::size_t in_channels = kNumChannels;
    std::size_t hidden = 32;
    std::size_t window_length = 64;
    std::size_t classes = 2;

    void validate() const {
        if (in_channels < 1 || hidden < 1 || window_length < 1 || classes < 2)
            throw Error("baselines", Errc::BadConfig, "lstm sizes must be positive");
    }
    nlohmann::json to_json() const {
        return {{"in_channels", in_channels}, {"hidden", hidden}, {"window_length", window_length}, {"classes", classes}};
    }
    static LstmConfig from_json(const nlohmann::json& j) {
        return {j.at("in_channels").get<std::size_t>(), j.at("hidden").get<std::size_t>(),
                j.at("window_length").get<std::size_t>(), j.at("classes").get<std::size_t>()};
    }
};

template <class T>
T sigmoid(T x) {
    return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

template <class T>
class LstmModel {
public:
    using Scalar = T;
    static constexpr const char* kind = "lstm";

    LstmModel() = default;

    static LstmModel build(const LstmConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        LstmModel m;
        m.cfg_ = cfg;
        const std::size_t h = cfg.hidden;
        m.input_ = nn::DenseLayer<T>("lstm.input", cfg.in_channels, 4 * h);
        m.recur_ = nn::Param<T>("lstm.recurrent.w", {h, 4 * h});
        m.head_ = nn::DenseLayer<T>("head", h, cfg.classes);
        Rng rng(seed);
        nn::glorot_init(m.input_.weight, cfg.in_channels, 4 * h, rng);
        nn::glorot_init(m.recur_, h, 4 * h, rng);
        nn::glorot_init(m.head_.weight, h, cfg.classes, rng);
        return m;
    }

    const LstmConfig& config() const { return cfg_; }
    nn::DenseLayer<T>& input_layer() { return input_; }
    nn::Param<T>& recurrent() { return recur_; }
    nn::DenseLayer<T>& head() { return head_; }

    std::vector<nn::Param<T>*> params() {
        return {&input_.weight, &input_.bias, &recur_, &head_.weight, &head_.bias};
    }
    std::vector<const nn::Param<T>*> params() const {
        auto v = const_cast<LstmModel*>(this)->params();
        return {v.begin(), v.end()};
    }

    struct Cache {
        nn::Tensor3<T> x;
        std::vector<T> gates;  // (b, t, 4h) post-activation
        std::vector<T> cells;  // (b, t, h)
        std::vector<T> hidden; // (b, t, h)
    };

    // Hidden states for every timestep, (b, t, h).
    nn::Tensor3<T> hidden_states(const nn::Tensor3<T>& x, Cache* cache = nullptr) const {
        nn::require(x.channels == cfg_.in_channels, "lstm expects " + std::to_string(cfg_.in_channels) + " channels");
        const std::size_t B = x.batch, Tn = x.time, H = cfg_.hidden;
        auto pre = nn::dense_forward(x, input_); // (b, t, 4h) input contribution plus bias
        std::vector<T> gates(B * Tn * 4 * H), cells(B * Tn * H);
        nn::Tensor3<T> hs(B, Tn, H);
        std::vector<T> z(4 * H);
        const T* wh = recur_.value.data();
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t t = 0; t < Tn; ++t) {
                const T* pr = pre.row(b, t);
                std::copy(pr, pr + 4 * H, z.begin());
                if (t > 0) {
                    const T* hp = hs.row(b, t - 1);
                    for (std::size_t k = 0; k < H; ++k) {
                        const T hv = hp[k];
                        const T* wr = wh + k * 4 * H;
                        for (std::size_t o = 0; o < 4 * H; ++o) z[o] += hv * wr[o];
                    }
                }
                T* g = gates.data() + (b * Tn + t) * 4 * H;
                T* c = cells.data() + (b * Tn + t) * H;
                const T* cprev = t > 0 ? cells.data() + (b * Tn + t - 1) * H : nullptr;
                T* h = hs.row(b, t);
                for (std::size_t k = 0; k < H; ++k) {
                    const T ig = sigmoid(z[k]);
                    const T fg = sigmoid(z[H + k]);
                    const T gg = std::tanh(z[2 * H + k]);
                    const T og = sigmoid(z[3 * H + k]);
                    g[k] = ig;
                    g[H + k] = fg;
                    g[2 * H + k] = gg;
                    g[3 * H + k] = og;
                    c[k] = fg * (cprev ? cprev[k] : T(0)) + ig * gg;
                    h[k] = og * std::tanh(c[k]);
                }
            }
        }
        if (cache) {
            cache->x = x;
            cache->gates = std::move(gates);
            cache->cells = std::move(cells);
            cache->hidden = hs.data;
        }
        return hs;
    }

    std::vector<T> logits(const nn::Tensor3<T>& x, Cache* cache = nullptr) const {
        nn::require(x.time == cfg_.window_length, "lstm window length");
        auto hs = hidden_states(x, cache);
        const std::size_t H = cfg_.hidden;
        std::vector<T> last(x.batch * H);
        for (std::size_t b = 0; b < x.batch; ++b) std::copy(hs.row(b, x.time - 1), hs.row(b, x.time - 1) + H, last.begin() + static_cast<std::ptrdiff_t>(b * H));
        return nn::dense_forward<T>(last, x.batch, head_);
    }

    std::vector<T> forward(const nn::Tensor3<T>& x, models::PassMode = {}) const {
        return nn::softmax<T>(logits(x), x.batch, cfg_.classes);
    }

    void backward(const Cache& c, std::span<const T> dlogits) {
        const std::size_t B = c.x.batch, Tn = c.x.time, H = cfg_.hidden;
        std::vector<T> last(B * H);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t k = 0; k < H; ++k) last[b * H + k] = c.hidden[((b * Tn) + Tn - 1) * H + k];
        auto hg = nn::dense_backward<T>(last, B, head_, dlogits);
        add(head_.weight, hg.dw);
        add(head_.bias, hg.db);

        nn::Tensor3<T> dz(B, Tn, 4 * H); // gradient wrt gate pre-activations
        const T* wh = recur_.value.data();
        std::vector<T> dh(H), dc(H), dh_prev(H);
        for (std::size_t b = 0; b < B; ++b) {
            std::copy(hg.dx.begin() + static_cast<std::ptrdiff_t>(b * H), hg.dx.begin() + static_cast<std::ptrdiff_t>((b + 1) * H), dh.begin());
            std::fill(dc.begin(), dc.end(), T(0));
            for (std::size_t t = Tn; t-- > 0;) {
                const T* g = c.gates.data() + (b * Tn + t) * 4 * H;
                const T* cc = c.cells.data() + (b * Tn + t) * H;
                const T* cprev = t > 0 ? c.cells.data() + (b * Tn + t - 1) * H : nullptr;
                T* dzr = dz.row(b, t);
                for (std::size_t k = 0; k < H; ++k) {
                    const T ig = g[k], fg = g[H + k], gg = g[2 * H + k], og = g[3 * H + k];
                    const T tc = std::tanh(cc[k]);
                    const T dct = dc[k] + dh[k] * og * (T(1) - tc * tc);
                    dzr[3 * H + k] = dh[k] * tc * og * (T(1) - og);
                    dzr[k] = dct * gg * ig * (T(1) - ig);
                    dzr[2 * H + k] = dct * ig * (T(1) - gg * gg);
                    dzr[H + k] = dct * (cprev ? cprev[k] : T(0)) * fg * (T(1) - fg);
                    dc[k] = dct * fg;
                }
                if (t > 0) {
                    const T* hp = c.hidden.data() + (b * Tn + t - 1) * H;
                    for (std::size_t k = 0; k < H; ++k) {
                        const T* wr = wh + k * 4 * H;
                        T* gr = recur_.grad.data() + k * 4 * H;
                        T acc = T(0);
                        for (std::size_t o = 0; o < 4 * H; ++o) {
                            acc += wr[o] * dzr[o];
                            gr[o] += hp[k] * dzr[o];
                        }
                        dh_prev[k] = acc;
                    }
                    dh.swap(dh_prev);
                }
            }
        }
        auto ig = nn::dense_backward<T>(c.x.data, c.x.rows(), input_, dz.data);
        add(input_.weight, ig.dw);
        add(input_.bias, ig.db);
    }

    double loss_and_grad(const nn::Tensor3<T>& x, std::span<const int> labels, std::span<const double> class_weight,
                         models::PassMode = {}) {
        for (auto* p : params()) p->zero_grad();
        Cache cache;
        auto z = logits(x, &cache);
        auto r = nn::softmax_xent<T>(z, cfg_.classes, labels, class_weight);
        backward(cache, r.dlogits);
        return r.loss;
    }

private:
    static void add(nn::Param<T>& p, const std::vector<T>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
    }

    LstmConfig cfg_;
    nn::DenseLayer<T> input_;
    nn::Param<T> recur_;
    nn::DenseLayer<T> head_;
};

template <class T>
checkpoint::Container to_container(const LstmModel<T>& m, std::uint64_t seed) {
    checkpoint::Container c;
    c.header["model_kind"] = LstmModel<T>::kind;
    c.header["config"] = m.config().to_json();
    c.header["channels"] = models::channel_schema();
    c.header["train_seed"] = seed;
    models::pack_params(m.params(), c);
    return c;
}

template <class T>
LstmModel<T> lstm_from_container(const checkpoint::Container& c) {
    if (c.header.value("model_kind", std::string{}) != LstmModel<T>::kind)
        throw Error("baselines", Errc::BadConfig, "not an lstm checkpoint");
    auto m = LstmModel<T>::build(LstmConfig::from_json(c.header.at("config")), 0);
    models::unpack_params(m.params(), c);
    return m;
}

} // namespace tsfall::baselines
