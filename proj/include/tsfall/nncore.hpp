#pragma once

// Minimal differentiable kernels: (batch, time, channel) tensors, dilated
// causal 1-D convolution, per-row dense maps, ReLU, counter-based dropout,
// softmax cross-entropy and Adam. Every backward pass is hand written and
// pinned to central differences in the tests.
//
// Kernels never mix batch elements, so the result for one sample does not
// depend on what else is in the batch.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tsfall/error.hpp"
#include "tsfall/rng.hpp"

namespace tsfall::nn {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw Error("nncore", Errc::ShapeMismatch, what);
}

template <class T>
struct Tensor3 {
    std::size_t batch = 0, time = 0, channels = 0;
    std::vector<T> data;

    Tensor3() = default;
    Tensor3(std::size_t b, std::size_t t, std::size_t c, T fill = T(0)) : batch(b), time(t), channels(c), data(b * t * c, fill) {}

    T& at(std::size_t b, std::size_t t, std::size_t c) { return data[(b * time + t) * channels + c]; }
    const T& at(std::size_t b, std::size_t t, std::size_t c) const { return data[(b * time + t) * channels + c]; }
    T* row(std::size_t b, std::size_t t) { return data.data() + (b * time + t) * channels; }
    const T* row(std::size_t b, std::size_t t) const { return data.data() + (b * time + t) * channels; }
    std::size_t rows() const { return batch * time; }
    bool same_shape(const Tensor3& o) const { return batch == o.batch && time == o.time && channels == o.channels; }
};

template <class T>
bool all_finite(std::span<const T> v) {
    return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

template <class T>
struct Param {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<T> value;
    std::vector<T> grad;

    Param() = default;
    Param(std::string n, std::vector<std::size_t> s) : name(std::move(n)), shape(std::move(s)) {
        std::size_t total = 1;
        for (auto d : shape) total *= d;
        value.assign(total, T(0));
        grad.assign(total, T(0));
    }
    std::size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

// Glorot-uniform weights, zero bias.
template <class T>
void glorot_init(Param<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : w.value) v = static_cast<T>(rng.uniform(-a, a));
}

// ---------------------------------------------------------------------------
// Dilated causal convolution. Weights are laid out (k, in, out); tap j reads
// input time t - (k-1-j)*dilation, so tap k-1 sees the current frame. Reads
// before t=0 see zeros and the output keeps the input length.

template <class T>
struct ConvLayer {
    std::size_t k = 1, in_ch = 0, out_ch = 0, dilation = 1;
    Param<T> weight;
    Param<T> bias;

    ConvLayer() = default;
    ConvLayer(std::string name, std::size_t k_, std::size_t in, std::size_t out, std::size_t d)
        : k(k_), in_ch(in), out_ch(out), dilation(d), weight(name + ".w", {k_, in, out}), bias(name + ".b", {out}) {
        if (k_ < 1 || d < 1 || in < 1 || out < 1) throw Error("nncore", Errc::BadConfig, "conv needs k, dilation, widths >= 1");
    }
    std::size_t receptive_field() const { return 1 + (k - 1) * dilation; }
};

template <class T>
Tensor3<T> causal_conv_forward(const Tensor3<T>& x, const ConvLayer<T>& L) {
    require(x.channels == L.in_ch, "conv input has " + std::to_string(x.channels) + " channels, layer expects " +
                                       std::to_string(L.in_ch));
    Tensor3<T> y(x.batch, x.time, L.out_ch);
    const T* w = L.weight.value.data();
    for (std::size_t b = 0; b < x.batch; ++b) {
        for (std::size_t t = 0; t < x.time; ++t) {
            T* yr = y.row(b, t);
            std::copy(L.bias.value.begin(), L.bias.value.end(), yr);
            for (std::size_t j = 0; j < L.k; ++j) {
                const std::size_t lag = (L.k - 1 - j) * L.dilation;
                if (lag > t) continue;
                const T* xr = x.row(b, t - lag);
                for (std::size_t i = 0; i < L.in_ch; ++i) {
                    const T xv = xr[i];
                    const T* wr = w + (j * L.in_ch + i) * L.out_ch;
                    for (std::size_t o = 0; o < L.out_ch; ++o) yr[o] += xv * wr[o];
                }
            }
        }
    }
    return y;
}

template <class T>
struct ConvGrads {
    Tensor3<T> dx;
    std::vector<T> dw;
    std::vector<T> db;
};

template <class T>
ConvGrads<T> causal_conv_backward(const Tensor3<T>& x, const ConvLayer<T>& L, const Tensor3<T>& dy) {
    require(x.channels == L.in_ch, "conv backward: input channels");
    require(dy.batch == x.batch && dy.time == x.time && dy.channels == L.out_ch, "conv backward: dy shape");
    ConvGrads<T> g{Tensor3<T>(x.batch, x.time, x.channels), std::vector<T>(L.weight.size(), T(0)),
                   std::vector<T>(L.out_ch, T(0))};
    const T* w = L.weight.value.data();
    for (std::size_t b = 0; b < x.batch; ++b) {
        for (std::size_t t = 0; t < x.time; ++t) {
            const T* dyr = dy.row(b, t);
            for (std::size_t o = 0; o < L.out_ch; ++o) g.db[o] += dyr[o];
            for (std::size_t j = 0; j < L.k; ++j) {
                const std::size_t lag = (L.k - 1 - j) * L.dilation;
                if (lag > t) continue;
                const T* xr = x.row(b, t - lag);
                T* dxr = g.dx.row(b, t - lag);
                for (std::size_t i = 0; i < L.in_ch; ++i) {
                    const T* wr = w + (j * L.in_ch + i) * L.out_ch;
                    T* dwr = g.dw.data() + (j * L.in_ch + i) * L.out_ch;
                    const T xv = xr[i];
                    T acc = T(0);
                    for (std::size_t o = 0; o < L.out_ch; ++o) {
                        acc += wr[o] * dyr[o];
                        dwr[o] += xv * dyr[o];
                    }
                    dxr[i] += acc;
                }
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Dense map applied independently to every row (every timestep of a Tensor3,
// or every sample of a matrix). Weight layout (in, out).

template <class T>
struct DenseLayer {
    std::size_t in = 0, out = 0;
    Param<T> weight;
    Param<T> bias;

    DenseLayer() = default;
    DenseLayer(std::string name, std::size_t in_, std::size_t out_)
        : in(in_), out(out_), weight(name + ".w", {in_, out_}), bias(name + ".b", {out_}) {}
};

template <class T>
std::vector<T> dense_forward(std::span<const T> x, std::size_t rows, const DenseLayer<T>& L) {
    require(x.size() == rows * L.in, "dense input size");
    std::vector<T> y(rows * L.out);
    const T* w = L.weight.value.data();
    for (std::size_t r = 0; r < rows; ++r) {
        T* yr = y.data() + r * L.out;
        std::copy(L.bias.value.begin(), L.bias.value.end(), yr);
        const T* xr = x.data() + r * L.in;
        for (std::size_t i = 0; i < L.in; ++i) {
            const T xv = xr[i];
            const T* wr = w + i * L.out;
            for (std::size_t o = 0; o < L.out; ++o) yr[o] += xv * wr[o];
        }
    }
    return y;
}

template <class T>
struct DenseGrads {
    std::vector<T> dx;
    std::vector<T> dw;
    std::vector<T> db;
};

template <class T>
DenseGrads<T> dense_backward(std::span<const T> x, std::size_t rows, const DenseLayer<T>& L, std::span<const T> dy) {
    require(x.size() == rows * L.in && dy.size() == rows * L.out, "dense backward shapes");
    DenseGrads<T> g{std::vector<T>(rows * L.in, T(0)), std::vector<T>(L.weight.size(), T(0)), std::vector<T>(L.out, T(0))};
    const T* w = L.weight.value.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const T* dyr = dy.data() + r * L.out;
        const T* xr = x.data() + r * L.in;
        T* dxr = g.dx.data() + r * L.in;
        for (std::size_t o = 0; o < L.out; ++o) g.db[o] += dyr[o];
        for (std::size_t i = 0; i < L.in; ++i) {
            const T* wr = w + i * L.out;
            T* dwr = g.dw.data() + i * L.out;
            const T xv = xr[i];
            T acc = T(0);
            for (std::size_t o = 0; o < L.out; ++o) {
                acc += wr[o] * dyr[o];
                dwr[o] += xv * dyr[o];
            }
            dxr[i] = acc;
        }
    }
    return g;
}

template <class T>
Tensor3<T> dense_forward(const Tensor3<T>& x, const DenseLayer<T>& L) {
    require(x.channels == L.in, "dense input channels");
    Tensor3<T> y;
    y.batch = x.batch;
    y.time = x.time;
    y.channels = L.out;
    y.data = dense_forward<T>(std::span<const T>(x.data), x.rows(), L);
    return y;
}

// ---------------------------------------------------------------------------

template <class T>
std::vector<T> relu_forward(std::span<const T> x) {
    std::vector<T> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    return y;
}

// Gradient uses the pre-activation input; the kink at 0 takes slope 0.
template <class T>
std::vector<T> relu_backward(std::span<const T> x, std::span<const T> dy) {
    require(x.size() == dy.size(), "relu backward shapes");
    std::vector<T> dx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
    return dx;
}

// Inverted dropout. The keep mask for element i is a pure function of
// (seed, stream, i), so forward and backward agree without storing it.
struct DropoutSpec {
    double p = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    bool train = false;

    void validate() const {
        if (!(p >= 0.0 && p < 1.0)) throw Error("nncore", Errc::BadConfig, "dropout p must lie in [0, 1)");
    }
    bool active() const { return train && p > 0.0; }
    bool keep(std::size_t i) const { return counter_uniform(seed, stream, i) >= p; }
};

template <class T>
std::vector<T> dropout_forward(std::span<const T> x, const DropoutSpec& d) {
    d.validate();
    std::vector<T> y(x.begin(), x.end());
    if (!d.active()) return y;
    const T scale = static_cast<T>(1.0 / (1.0 - d.p));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = d.keep(i) ? y[i] * scale : T(0);
    return y;
}

template <class T>
std::vector<T> dropout_backward(std::span<const T> dy, const DropoutSpec& d) {
    return dropout_forward<T>(dy, d);
}

template <class T>
struct XentResult {
    double loss = 0.0;         // weighted mean over rows
    std::vector<T> probs;      // rows x classes
    std::vector<T> dlogits;    // gradient of `loss`
};

template <class T>
std::vector<T> softmax(std::span<const T> logits, std::size_t rows, std::size_t classes) {
    require(logits.size() == rows * classes, "softmax shape");
    std::vector<T> p(logits.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* z = logits.data() + r * classes;
        T* pr = p.data() + r * classes;
        const T m = *std::max_element(z, z + classes);
        T sum = T(0);
        for (std::size_t c = 0; c < classes; ++c) sum += (pr[c] = std::exp(z[c] - m));
        for (std::size_t c = 0; c < classes; ++c) pr[c] /= sum;
    }
    return p;
}

// Mean softmax cross-entropy with optional per-class weights. The loss is
// sum_r w[y_r] * -log p[r, y_r] / sum_r w[y_r].
template <class T>
XentResult<T> softmax_xent(std::span<const T> logits, std::size_t classes, std::span<const int> labels,
                           std::span<const double> class_weight = {}) {
    const std::size_t rows = labels.size();
    require(classes > 0 && logits.size() == rows * classes, "softmax_xent: logits/labels mismatch");
    require(class_weight.empty() || class_weight.size() == classes, "softmax_xent: class weight count");
    XentResult<T> out;
    out.probs = softmax<T>(logits, rows, classes);
    out.dlogits.assign(logits.size(), T(0));
    double wsum = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        require(labels[r] >= 0 && static_cast<std::size_t>(labels[r]) < classes, "softmax_xent: label out of range");
        wsum += class_weight.empty() ? 1.0 : class_weight[static_cast<std::size_t>(labels[r])];
    }
    if (rows == 0 || wsum <= 0.0) return out;
    for (std::size_t r = 0; r < rows; ++r) {
        const auto y = static_cast<std::size_t>(labels[r]);
        const double w = (class_weight.empty() ? 1.0 : class_weight[y]) / wsum;
        const T* z = logits.data() + r * classes;
        const T m = *std::max_element(z, z + classes);
        double lse = 0.0;
        for (std::size_t c = 0; c < classes; ++c) lse += std::exp(static_cast<double>(z[c] - m));
        out.loss += w * (std::log(lse) - static_cast<double>(z[y] - m));
        for (std::size_t c = 0; c < classes; ++c) {
            const T p = out.probs[r * classes + c];
            out.dlogits[r * classes + c] = static_cast<T>(w) * (p - (c == y ? T(1) : T(0)));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
struct AdamState {
    std::vector<std::vector<T>> m, v;
    std::uint64_t step = 0;
};

// Bias-corrected Adam over a fixed parameter list. The state is sized on the
// first call and shape-checked on every later one.
template <class T>
void adam_step(std::span<Param<T>* const> params, AdamState<T>& st, const AdamConfig& cfg) {
    if (st.m.empty()) {
        for (auto* p : params) {
            st.m.emplace_back(p->size(), T(0));
            st.v.emplace_back(p->size(), T(0));
        }
    }
    require(st.m.size() == params.size(), "adam: parameter count changed");
    ++st.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = *params[k];
        require(st.m[k].size() == p.size() && p.grad.size() == p.size(), "adam: shape of " + p.name);
        auto& m = st.m[k];
        auto& v = st.v[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = static_cast<double>(p.grad[i]);
            m[i] = static_cast<T>(cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * g);
            v[i] = static_cast<T>(cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * g * g);
            const double mh = static_cast<double>(m[i]) / bc1;
            const double vh = static_cast<double>(v[i]) / bc2;
            p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) - cfg.lr * mh / (std::sqrt(vh) + cfg.eps));
        }
    }
}

} // namespace tsfall::nn
