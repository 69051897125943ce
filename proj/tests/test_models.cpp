#include <gtest/gtest.h>

#include <cstring>

#include "support.hpp"
#include "tsfall/models.hpp"
#include "tsfall/synth.hpp"
#include "tsfall/training.hpp"

using namespace tsfall;
using models::PassMode;
using models::TcnConfig;
using models::TcnModel;
using tsfall::test::fill_normal;
using tsfall::test::numeric_grad;
using tsfall::test::rel_error;
using tsfall::test::TempDir;

namespace {

TcnConfig small_config(std::size_t in, std::size_t width, std::size_t window, double dropout = 0.0) {
    TcnConfig c;
    c.in_channels = in;
    c.width = width;
    c.window_length = window;
    c.dropout = dropout;
    return c;
}

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return Errc::Io;
}

dataset::WindowBatch separable_windows(std::size_t per_class, std::uint64_t seed) {
    return dataset::make_windows(synth::separable_corpus(per_class, 80, seed)).batch;
}

} // namespace

TEST(Tcn, DefaultReceptiveFieldIs127) {
    const TcnConfig c;
    EXPECT_EQ(c.receptive_field(), 127u);
    EXPECT_EQ(c.blocks(), 6u);
    std::vector<std::string> warn;
    TcnModel<double>::build(c, 1, &warn);
    EXPECT_TRUE(warn.empty());
}

// The last-timestep output depends on exactly the last 127 frames.
TEST(Tcn, ReceptiveFieldProbe) {
    auto c = small_config(2, 4, 160);
    auto m = TcnModel<double>::build(c, 5);
    Rng rng(6);
    nn::Tensor3<double> x(1, 160, 2);
    fill_normal(x.data, rng);
    const auto base = m.logits(x);
    auto probe = [&](std::size_t t) {
        auto y = x;
        y.at(0, t, 0) += 1.0;
        y.at(0, t, 1) -= 1.0;
        return m.logits(y);
    };
    EXPECT_EQ(probe(160 - 128), base);
    EXPECT_EQ(probe(0), base);
    EXPECT_NE(probe(160 - 127), base);
    EXPECT_NE(probe(159), base);
}

TEST(Tcn, CausalAcrossAllTimesteps) {
    auto m = TcnModel<double>::build(small_config(3, 4, 30), 9);
    Rng rng(1);
    nn::Tensor3<double> x(2, 30, 3);
    fill_normal(x.data, rng);
    const auto h = m.features(x);
    auto y = x;
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t t = 20; t < 30; ++t)
            for (std::size_t c = 0; c < 3; ++c) y.at(b, t, c) = 42.0;
    const auto h2 = m.features(y);
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t t = 0; t < 20; ++t)
            for (std::size_t c = 0; c < 4; ++c) ASSERT_EQ(h.at(b, t, c), h2.at(b, t, c));
}

TEST(Tcn, ShallowStackWarnsAndOddStackRejected) {
    TcnConfig c;
    c.dilations = {1, 2, 4};
    EXPECT_EQ(c.receptive_field(), 15u);
    std::vector<std::string> warn;
    TcnModel<double>::build(c, 1, &warn);
    ASSERT_EQ(warn.size(), 1u);
    EXPECT_NE(warn[0].find("15"), std::string::npos);

    c.dilations = {1, 2, 4, 8};
    EXPECT_EQ(code_of([&] { TcnModel<double>::build(c, 1); }), Errc::BadConfig);
    c.dilations = {};
    EXPECT_EQ(code_of([&] { TcnModel<double>::build(c, 1); }), Errc::BadConfig);
    TcnConfig d;
    d.dropout = 1.0;
    EXPECT_EQ(code_of([&] { TcnModel<double>::build(d, 1); }), Errc::BadConfig);
}

TEST(Tcn, ZeroHeadGivesEvenOdds) {
    auto m = TcnModel<double>::build(small_config(3, 4, 16), 2);
    std::fill(m.head().weight.value.begin(), m.head().weight.value.end(), 0.0);
    Rng rng(3);
    nn::Tensor3<double> x(3, 16, 3);
    fill_normal(x.data, rng);
    for (double p : m.forward(x)) EXPECT_DOUBLE_EQ(p, 0.5);
}

TEST(Tcn, ProbabilityRowsSumToOne) {
    auto m = TcnModel<double>::build(small_config(kNumChannels, 8, 64), 4);
    Rng rng(4);
    nn::Tensor3<double> x(5, 64, kNumChannels);
    fill_normal(x.data, rng, 3.0);
    const auto p = m.forward(x);
    for (std::size_t b = 0; b < 5; ++b) EXPECT_NEAR(p[2 * b] + p[2 * b + 1], 1.0, 1e-12);
}

TEST(Tcn, NoNormalisationLayers) {
    auto m = TcnModel<double>::build(TcnConfig{}, 1);
    EXPECT_FALSE(m.has_normalization());
    for (const auto* p : std::as_const(m).params()) {
        EXPECT_EQ(p->name.find("norm"), std::string::npos);
        EXPECT_EQ(p->name.find("bn"), std::string::npos);
    }
    // One projection, in the first group (21 -> 32).
    ASSERT_EQ(m.projections().size(), 2u);
    EXPECT_TRUE(m.projections()[0].has_value());
    EXPECT_FALSE(m.projections()[1].has_value());
}

TEST(Tcn, ZeroBlocksReduceToResidualPath) {
    auto m = TcnModel<double>::build(small_config(4, 4, 10), 7);
    for (auto& b : m.blocks()) {
        std::fill(b.conv.weight.value.begin(), b.conv.weight.value.end(), 0.0);
        std::fill(b.ff.weight.value.begin(), b.ff.weight.value.end(), 0.0);
    }
    Rng rng(8);
    nn::Tensor3<double> x(2, 10, 4);
    fill_normal(x.data, rng);
    EXPECT_EQ(m.features(x).data, x.data);
}

TEST(Tcn, EndToEndGradient) {
    for (double dropout : {0.0, 0.3}) {
        auto m = TcnModel<double>::build(small_config(3, 4, 12, dropout), 11);
        Rng rng(12);
        for (auto* p : m.params()) fill_normal(p->value, rng, 0.5);
        nn::Tensor3<double> x(2, 12, 3);
        fill_normal(x.data, rng);
        const std::vector<int> y{0, 1};
        const std::vector<double> cw{0.7, 1.6};
        const PassMode mode{dropout > 0, 99};
        m.loss_and_grad(x, y, cw, mode);
        for (auto* p : m.params()) {
            auto loss = [&] { return nn::softmax_xent<double>(m.logits(x, mode), 2, y, cw).loss; };
            const auto num = numeric_grad(p->value, loss);
            EXPECT_LT(rel_error(p->grad, num), 1e-4) << p->name << " dropout " << dropout;
        }
    }
}

TEST(Tcn, WrongWindowLengthIsShapeError) {
    auto m = TcnModel<double>::build(small_config(3, 4, 12), 1);
    nn::Tensor3<double> x(1, 11, 3);
    EXPECT_EQ(code_of([&] { m.forward(x); }), Errc::ShapeMismatch);
    nn::Tensor3<double> x2(1, 12, 2);
    EXPECT_EQ(code_of([&] { m.forward(x2); }), Errc::ShapeMismatch);
}

TEST(Training, ZeroLearningRateLeavesParameters) {
    const auto data = separable_windows(2, 1);
    auto m = TcnModel<float>::build(small_config(kNumChannels, 4, 64), 3);
    std::vector<std::vector<float>> before;
    for (auto* p : m.params()) before.push_back(p->value);
    training::TrainOptions opt;
    opt.epochs = 2;
    opt.lr = 0.0;
    training::train(m, data, data, opt);
    const auto ps = m.params();
    for (std::size_t k = 0; k < ps.size(); ++k) EXPECT_EQ(ps[k]->value, before[k]) << ps[k]->name;
}

TEST(Training, SameSeedSameHistory) {
    const auto data = separable_windows(3, 2);
    auto run = [&] {
        auto m = TcnModel<float>::build(small_config(kNumChannels, 4, 64, 0.1), 4);
        training::TrainOptions opt;
        opt.epochs = 3;
        opt.seed = 17;
        opt.early_stopping = false;
        auto h = training::train(m, data, data, opt);
        std::vector<double> losses;
        for (const auto& e : h.epochs) losses.push_back(e.train_loss);
        return std::make_pair(losses, models::to_container(m, 17).params);
    };
    const auto a = run(), b = run();
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
}

TEST(Training, LossFallsOnSeparableTask) {
    const auto data = separable_windows(4, 3);
    auto m = TcnModel<float>::build(small_config(kNumChannels, 8, 64), 5);
    training::TrainOptions opt;
    opt.epochs = 5;
    opt.lr = 3e-3;
    opt.batch_size = 32;
    opt.early_stopping = false;
    const auto h = training::train(m, data, data, opt);
    ASSERT_EQ(h.epochs.size(), 6u);
    EXPECT_LT(h.epochs.back().train_loss, h.epochs.front().train_loss);
}

TEST(Training, SingleClassRejected) {
    auto corpus = synth::separable_corpus(2, 80, 4);
    std::erase_if(corpus, [](const auto& ns) { return ns.series.label != Label::walk; });
    const auto data = dataset::make_windows(corpus).batch;
    auto m = TcnModel<float>::build(small_config(kNumChannels, 4, 64), 1);
    EXPECT_EQ(code_of([&] { training::train(m, data, data, {}); }), Errc::SingleClassTrainSet);
}

TEST(Training, PredictWindowMatchesBatch) {
    const auto data = separable_windows(1, 6);
    auto m = TcnModel<double>::build(small_config(kNumChannels, 4, 64), 8);
    const auto batch = training::predict_proba(m, data);
    for (std::size_t i = 0; i < data.size(); i += 7) {
        const auto w = training::predict_window(m, data.window(i), 64);
        EXPECT_EQ(w.probability, batch[i]);
        EXPECT_EQ(w.label, batch[i] > 0.5 ? 1 : 0);
    }
    EXPECT_THROW(training::predict_window(m, data.window(0).first(63 * kNumChannels), 64), Error);
}

TEST(Checkpoint, BitExactRoundTrip) {
    TempDir dir;
    auto m = TcnModel<float>::build(TcnConfig{}, 21);
    const auto path = dir / "m.tsfd";
    models::save_checkpoint(path, m, 21);
    const auto back = models::load_checkpoint<float>(path);
    const auto a = std::as_const(m).params(), b = back.params();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        ASSERT_EQ(a[k]->value.size(), b[k]->value.size());
        EXPECT_EQ(std::memcmp(a[k]->value.data(), b[k]->value.data(), a[k]->value.size() * sizeof(float)), 0);
    }
    // Re-saving produces the same bytes.
    models::save_checkpoint(dir / "again.tsfd", back, 21);
    EXPECT_EQ(checkpoint::read_file(path), checkpoint::read_file(dir / "again.tsfd"));
}

TEST(Checkpoint, HeaderDescribesArchitecture) {
    auto m = TcnModel<float>::build(TcnConfig{}, 1);
    const auto c = models::to_container(m, 1);
    EXPECT_EQ(c.header.at("model_kind"), "tcn");
    EXPECT_EQ(c.header.at("config").at("blocks"), 6);
    EXPECT_EQ(c.header.at("config").at("kernel"), 3);
    EXPECT_EQ(c.header.at("config").at("dilations"), (std::vector<std::size_t>{1, 2, 4, 8, 16, 32}));
    EXPECT_EQ(c.header.at("channels").size(), kNumChannels);
}

TEST(Checkpoint, CorruptionIsDetected) {
    auto m = TcnModel<float>::build(small_config(3, 4, 12), 1);
    const auto bytes = checkpoint::encode(models::to_container(m, 1));

    auto truncated = bytes;
    truncated.pop_back();
    EXPECT_EQ(code_of([&] { checkpoint::decode(truncated); }), Errc::ChecksumMismatch);
    EXPECT_EQ(code_of([&] { checkpoint::decode(std::span(bytes).first(10)); }), Errc::ChecksumMismatch);

    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x01;
    EXPECT_EQ(code_of([&] { checkpoint::decode(flipped); }), Errc::ChecksumMismatch);

    auto magic = bytes;
    magic[0] = 'X';
    EXPECT_EQ(code_of([&] { checkpoint::decode(magic); }), Errc::BadMagic);

    // A future version with a valid checksum.
    auto ver = bytes;
    ver[4] = 2;
    const auto crc = checkpoint::crc32_of(std::span(ver).first(ver.size() - 4));
    std::memcpy(ver.data() + ver.size() - 4, &crc, 4);
    EXPECT_EQ(code_of([&] { checkpoint::decode(ver); }), Errc::VersionMismatch);
}

TEST(Checkpoint, WrongKindRejected) {
    auto m = TcnModel<float>::build(small_config(3, 4, 12), 1);
    auto c = models::to_container(m, 1);
    c.header["model_kind"] = "lstm";
    EXPECT_EQ(code_of([&] { models::tcn_from_container<float>(c); }), Errc::BadConfig);
}
