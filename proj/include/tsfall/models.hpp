#pragma once

// FallSeqTCN: stacked SDC blocks (dilated causal conv -> ReLU -> dropout ->
// per-timestep linear map) with a residual connection around every group of
// three blocks, a linear head on the last timestep and a two-way softmax.
// There is no normalization layer anywhere in the graph and the input is
// consumed as-is.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsfall/checkpoint.hpp"
#include "tsfall/error.hpp"
#include "tsfall/frame.hpp"
#include "tsfall/nncore.hpp"
#include "tsfall/rng.hpp"

namespace tsfall::models {

inline constexpr std::size_t kGroupSize = 3;

struct TcnConfig {
    std::size_t in_channels = kNumChannels;
    std::size_t width = 32;
    std::size_t kernel = 3;
    std::vector<std::size_t> dilations{1, 2, 4, 8, 16, 32};
    double dropout = 0.1;
    std::size_t window_length = 64;
    std::size_t classes = 2;

    std::size_t blocks() const { return dilations.size(); }
    std::size_t groups() const { return dilations.size() / kGroupSize; }

    std::size_t receptive_field() const {
        std::size_t s = 0;
        for (auto d : dilations) s += d;
        return 1 + (kernel - 1) * s;
    }

    // Throws on invalid settings; returns non-fatal warnings.
    std::vector<std::string> validate() const {
        if (dilations.empty() || dilations.size() % kGroupSize != 0)
            throw Error("models", Errc::BadConfig,
                        "block count " + std::to_string(dilations.size()) + " is not a positive multiple of 3");
        if (kernel < 1 || width < 1 || in_channels < 1 || classes < 2 || window_length < 1)
            throw Error("models", Errc::BadConfig, "kernel, width, channels, window length must be positive");
        for (auto d : dilations)
            if (d < 1) throw Error("models", Errc::BadConfig, "dilation must be >= 1");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("models", Errc::BadConfig, "dropout must lie in [0, 1)");
        std::vector<std::string> warn;
        if (receptive_field() < window_length)
            warn.push_back("receptive field " + std::to_string(receptive_field()) + " is shorter than the " +
                           std::to_string(window_length) + "-frame window");
        return warn;
    }

    nlohmann::json to_json() const {
        return {{"in_channels", in_channels}, {"width", width},       {"kernel", kernel},
                {"dilations", dilations},     {"dropout", dropout},   {"window_length", window_length},
                {"classes", classes},         {"blocks", blocks()},   {"residual_group", kGroupSize}};
    }
    static TcnConfig from_json(const nlohmann::json& j) {
        TcnConfig c;
        c.in_channels = j.at("in_channels").get<std::size_t>();
        c.width = j.at("width").get<std::size_t>();
        c.kernel = j.at("kernel").get<std::size_t>();
        c.dilations = j.at("dilations").get<std::vector<std::size_t>>();
        c.dropout = j.at("dropout").get<double>();
        c.window_length = j.at("window_length").get<std::size_t>();
        c.classes = j.at("classes").get<std::size_t>();
        return c;
    }
};

// Dropout context for one forward pass. Masks are keyed by (seed, block).
struct PassMode {
    bool train = false;
    std::uint64_t seed = 0;
};

template <class T>
struct SdcBlock {
    nn::ConvLayer<T> conv;
    nn::DenseLayer<T> ff;
};

template <class T>
class TcnModel {
public:
    using Scalar = T;
    static constexpr const char* kind = "tcn";

    TcnModel() = default;

    static TcnModel build(const TcnConfig& cfg, std::uint64_t seed, std::vector<std::string>* warnings = nullptr) {
        auto w = cfg.validate();
        if (warnings) *warnings = std::move(w);
        TcnModel m;
        m.cfg_ = cfg;
        std::size_t in = cfg.in_channels;
        for (std::size_t b = 0; b < cfg.blocks(); ++b) {
            const std::string n = "block" + std::to_string(b);
            m.blocks_.push_back({nn::ConvLayer<T>(n + ".conv", cfg.kernel, in, cfg.width, cfg.dilations[b]),
                                 nn::DenseLayer<T>(n + ".ff", cfg.width, cfg.width)});
            in = cfg.width;
        }
        in = cfg.in_channels;
        for (std::size_t g = 0; g < cfg.groups(); ++g) {
            if (in != cfg.width) m.proj_.emplace_back(nn::DenseLayer<T>("group" + std::to_string(g) + ".proj", in, cfg.width));
            else m.proj_.emplace_back(std::nullopt);
            in = cfg.width;
        }
        m.head_ = nn::DenseLayer<T>("head", cfg.width, cfg.classes);
        Rng rng(seed);
        for (auto& blk : m.blocks_) {
            nn::glorot_init(blk.conv.weight, blk.conv.k * blk.conv.in_ch, blk.conv.k * blk.conv.out_ch, rng);
            nn::glorot_init(blk.ff.weight, blk.ff.in, blk.ff.out, rng);
        }
        for (auto& p : m.proj_)
            if (p) nn::glorot_init(p->weight, p->in, p->out, rng);
        nn::glorot_init(m.head_.weight, m.head_.in, m.head_.out, rng);
        return m;
    }

    const TcnConfig& config() const { return cfg_; }
    const std::vector<SdcBlock<T>>& blocks() const { return blocks_; }
    std::vector<SdcBlock<T>>& blocks() { return blocks_; }
    const std::vector<std::optional<nn::DenseLayer<T>>>& projections() const { return proj_; }
    nn::DenseLayer<T>& head() { return head_; }
    const nn::DenseLayer<T>& head() const { return head_; }

    // Declaration order; the checkpoint parameter block follows it.
    std::vector<nn::Param<T>*> params() {
        std::vector<nn::Param<T>*> out;
        for (auto& b : blocks_) {
            out.push_back(&b.conv.weight);
            out.push_back(&b.conv.bias);
            out.push_back(&b.ff.weight);
            out.push_back(&b.ff.bias);
        }
        for (auto& p : proj_)
            if (p) {
                out.push_back(&p->weight);
                out.push_back(&p->bias);
            }
        out.push_back(&head_.weight);
        out.push_back(&head_.bias);
        return out;
    }
    std::vector<const nn::Param<T>*> params() const {
        auto v = const_cast<TcnModel*>(this)->params();
        return {v.begin(), v.end()};
    }

    struct Cache {
        std::vector<nn::Tensor3<T>> block_in;
        std::vector<std::vector<T>> block_pre;
        std::vector<nn::Tensor3<T>> block_mid;
        std::vector<nn::Tensor3<T>> group_in;
        std::vector<T> last;
        PassMode mode;
    };

    // Final residual-group output for every timestep; accepts any length.
    nn::Tensor3<T> features(const nn::Tensor3<T>& x, PassMode mode = {}, Cache* cache = nullptr) const {
        nn::require(x.channels == cfg_.in_channels,
                    "model expects " + std::to_string(cfg_.in_channels) + " channels, got " + std::to_string(x.channels));
        if (cache) {
            *cache = Cache{};
            cache->mode = mode;
        }
        nn::Tensor3<T> h = x;
        for (std::size_t g = 0; g < cfg_.groups(); ++g) {
            if (cache) cache->group_in.push_back(h);
            nn::Tensor3<T> cur = h;
            for (std::size_t bi = g * kGroupSize; bi < (g + 1) * kGroupSize; ++bi) {
                const auto& blk = blocks_[bi];
                auto pre = nn::causal_conv_forward(cur, blk.conv);
                auto act = nn::relu_forward<T>(pre.data);
                nn::Tensor3<T> mid(pre.batch, pre.time, pre.channels);
                mid.data = nn::dropout_forward<T>(act, dropout_spec(mode, bi));
                if (cache) {
                    cache->block_in.push_back(std::move(cur));
                    cache->block_pre.push_back(std::move(pre.data));
                }
                cur = nn::dense_forward(mid, blk.ff);
                if (cache) cache->block_mid.push_back(std::move(mid));
            }
            if (proj_[g]) {
                auto skip = nn::dense_forward(h, *proj_[g]);
                for (std::size_t i = 0; i < cur.data.size(); ++i) cur.data[i] += skip.data[i];
            } else {
                for (std::size_t i = 0; i < cur.data.size(); ++i) cur.data[i] += h.data[i];
            }
            h = std::move(cur);
        }
        return h;
    }

    std::vector<T> logits(const nn::Tensor3<T>& x, PassMode mode = {}, Cache* cache = nullptr) const {
        nn::require(x.time == cfg_.window_length,
                    "window length " + std::to_string(x.time) + " != " + std::to_string(cfg_.window_length));
        auto h = features(x, mode, cache);
        std::vector<T> last(x.batch * cfg_.width);
        for (std::size_t b = 0; b < x.batch; ++b) {
            const T* r = h.row(b, h.time - 1);
            std::copy(r, r + cfg_.width, last.begin() + static_cast<std::ptrdiff_t>(b * cfg_.width));
        }
        auto z = nn::dense_forward<T>(last, x.batch, head_);
        if (cache) cache->last = std::move(last);
        return z;
    }

    // (batch x classes) probabilities.
    std::vector<T> forward(const nn::Tensor3<T>& x, PassMode mode = {}) const {
        return nn::softmax<T>(logits(x, mode), x.batch, cfg_.classes);
    }

    // Accumulates parameter gradients for d(loss)/d(logits) = dlogits.
    void backward(const Cache& c, std::span<const T> dlogits) {
        const std::size_t batch = dlogits.size() / cfg_.classes;
        const std::size_t time = c.group_in.front().time;
        auto hg = nn::dense_backward<T>(c.last, batch, head_, dlogits);
        accumulate(head_.weight, hg.dw);
        accumulate(head_.bias, hg.db);
        nn::Tensor3<T> dh(batch, time, cfg_.width);
        for (std::size_t b = 0; b < batch; ++b)
            std::copy(hg.dx.begin() + static_cast<std::ptrdiff_t>(b * cfg_.width),
                      hg.dx.begin() + static_cast<std::ptrdiff_t>((b + 1) * cfg_.width), dh.row(b, time - 1));
        for (std::size_t gi = cfg_.groups(); gi-- > 0;) {
            nn::Tensor3<T> dcur = dh;
            for (std::size_t bi = (gi + 1) * kGroupSize; bi-- > gi * kGroupSize;) {
                auto& blk = blocks_[bi];
                const auto& mid = c.block_mid[bi];
                auto fg = nn::dense_backward<T>(mid.data, mid.rows(), blk.ff, dcur.data);
                accumulate(blk.ff.weight, fg.dw);
                accumulate(blk.ff.bias, fg.db);
                auto dact = nn::dropout_backward<T>(fg.dx, dropout_spec(c.mode, bi));
                nn::Tensor3<T> dpre(mid.batch, mid.time, mid.channels);
                dpre.data = nn::relu_backward<T>(c.block_pre[bi], dact);
                auto cg = nn::causal_conv_backward(c.block_in[bi], blk.conv, dpre);
                accumulate(blk.conv.weight, cg.dw);
                accumulate(blk.conv.bias, cg.db);
                dcur = std::move(cg.dx);
            }
            const auto& gin = c.group_in[gi];
            if (proj_[gi]) {
                auto pg = nn::dense_backward<T>(gin.data, gin.rows(), *proj_[gi], dh.data);
                accumulate(proj_[gi]->weight, pg.dw);
                accumulate(proj_[gi]->bias, pg.db);
                for (std::size_t i = 0; i < dcur.data.size(); ++i) dcur.data[i] += pg.dx[i];
            } else {
                for (std::size_t i = 0; i < dcur.data.size(); ++i) dcur.data[i] += dh.data[i];
            }
            dh = std::move(dcur);
        }
    }

    // Zeroes gradients, runs forward+backward and returns the mean loss.
    double loss_and_grad(const nn::Tensor3<T>& x, std::span<const int> labels, std::span<const double> class_weight,
                         PassMode mode) {
        for (auto* p : params()) p->zero_grad();
        Cache cache;
        auto z = logits(x, mode, &cache);
        auto xr = nn::softmax_xent<T>(z, cfg_.classes, labels, class_weight);
        backward(cache, xr.dlogits);
        return xr.loss;
    }

    bool has_normalization() const { return false; }

private:
    nn::DropoutSpec dropout_spec(const PassMode& m, std::size_t block) const {
        return {cfg_.dropout, m.seed, block, m.train};
    }
    static void accumulate(nn::Param<T>& p, const std::vector<T>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
    }

    TcnConfig cfg_;
    std::vector<SdcBlock<T>> blocks_;
    std::vector<std::optional<nn::DenseLayer<T>>> proj_;
    nn::DenseLayer<T> head_;
};

// ---------------------------------------------------------------------------
// Parameter (de)serialization shared by the neural models.

inline nlohmann::json channel_schema() {
    nlohmann::json a = nlohmann::json::array();
    for (auto n : kChannelNames) a.push_back(std::string(n));
    return a;
}

template <class T>
void pack_params(const std::vector<const nn::Param<T>*>& ps, checkpoint::Container& c) {
    nlohmann::json decl = nlohmann::json::array();
    for (const auto* p : ps) {
        decl.push_back({{"name", p->name}, {"shape", p->shape}});
        for (T v : p->value) c.params.push_back(static_cast<float>(v));
    }
    c.header["params"] = decl;
}

template <class T>
void unpack_params(const std::vector<nn::Param<T>*>& ps, const checkpoint::Container& c) {
    const auto& decl = c.header.at("params");
    if (decl.size() != ps.size()) throw Error("models", Errc::ShapeMismatch, "checkpoint declares a different parameter count");
    std::size_t pos = 0;
    for (std::size_t k = 0; k < ps.size(); ++k) {
        auto& p = *ps[k];
        if (decl[k].at("name").get<std::string>() != p.name ||
            decl[k].at("shape").get<std::vector<std::size_t>>() != p.shape)
            throw Error("models", Errc::ShapeMismatch, "checkpoint parameter " + std::to_string(k) + " does not match " + p.name);
        if (pos + p.size() > c.params.size()) throw Error("models", Errc::ShapeMismatch, "parameter block too short");
        for (std::size_t i = 0; i < p.size(); ++i) p.value[i] = static_cast<T>(c.params[pos + i]);
        pos += p.size();
    }
    if (pos != c.params.size()) throw Error("models", Errc::ShapeMismatch, "parameter block too long");
}

template <class T>
checkpoint::Container to_container(const TcnModel<T>& m, std::uint64_t train_seed) {
    checkpoint::Container c;
    c.header["model_kind"] = TcnModel<T>::kind;
    c.header["config"] = m.config().to_json();
    c.header["channels"] = channel_schema();
    c.header["train_seed"] = train_seed;
    pack_params(m.params(), c);
    return c;
}

template <class T>
TcnModel<T> tcn_from_container(const checkpoint::Container& c) {
    if (c.header.value("model_kind", std::string{}) != TcnModel<T>::kind)
        throw Error("models", Errc::BadConfig, "checkpoint is not a tcn model");
    if (c.header.at("channels") != channel_schema())
        throw Error("models", Errc::BadConfig, "checkpoint channel schema differs");
    auto m = TcnModel<T>::build(TcnConfig::from_json(c.header.at("config")), 0);
    unpack_params(m.params(), c);
    return m;
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const TcnModel<T>& m, std::uint64_t train_seed) {
    checkpoint::save(path, to_container(m, train_seed));
}

template <class T>
TcnModel<T> load_checkpoint(const std::filesystem::path& path) {
    return tcn_from_container<T>(checkpoint::load(path));
}

} // namespace tsfall::models
