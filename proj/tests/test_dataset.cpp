#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "support.hpp"
#include "tsfall/dataset.hpp"
#include "tsfall/synth.hpp"

using namespace tsfall;
using tsfall::test::ramp_series;
using tsfall::test::TempDir;

namespace {

template <class F>
Errc code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return Errc::Io;
}

std::vector<dataset::NamedSeries> sources(std::size_t walks, std::size_t falls, std::size_t len = 70) {
    std::vector<dataset::NamedSeries> v;
    for (std::size_t i = 0; i < walks; ++i) v.push_back({"w" + std::to_string(i), ramp_series(len, Label::walk)});
    for (std::size_t i = 0; i < falls; ++i) v.push_back({"f" + std::to_string(i), ramp_series(len, Label::fall_forward)});
    return v;
}

} // namespace

TEST(Slice, PaperBreakpointsGive250Frames) {
    const auto s = ramp_series(300);
    const auto out = dataset::slice_augment(s, 25, 275);
    ASSERT_EQ(out.size(), 250u);
    for (std::size_t i = 0; i < 250; ++i) EXPECT_EQ(out.frames[i], s.frames[25 + i]);
    EXPECT_EQ(out.label, Label::walk);
    EXPECT_EQ(out.sample_rate_hz, s.sample_rate_hz);
}

TEST(Slice, FullRangeIsIdentity) {
    const auto s = ramp_series(120);
    EXPECT_EQ(dataset::slice_augment(s, 0, 120).frames, s.frames);
}

TEST(Slice, Errors) {
    EXPECT_EQ(code_of([] { dataset::slice_augment(ramp_series(300, Label::fall_forward), 25, 275); }), Errc::LabelNotWalk);
    EXPECT_EQ(code_of([] { dataset::slice_augment(ramp_series(300, Label::fall_left), 0, 10); }), Errc::LabelNotWalk);
    EXPECT_EQ(code_of([] { dataset::slice_augment(ramp_series(100), 25, 275); }), Errc::BadRange);
    EXPECT_EQ(code_of([] { dataset::slice_augment(ramp_series(100), 30, 30); }), Errc::BadRange);
}

TEST(Augment, GrowsWalkingWindowsOnly) {
    std::vector<dataset::NamedSeries> corpus{{"long", ramp_series(320)}, {"short", ramp_series(200)},
                                             {"fall", ramp_series(320, Label::fall_forward)}};
    const auto aug = dataset::augment_corpus(corpus);
    ASSERT_EQ(aug.size(), 4u);
    EXPECT_EQ(aug[3].name, "long_slice");
    EXPECT_EQ(aug[3].series.size(), 250u);
    const auto before = dataset::make_windows(corpus).batch.size();
    const auto after = dataset::make_windows(aug).batch.size();
    EXPECT_GT(after, before);
    EXPECT_EQ(after - before, 250u - 64 + 1);
}

TEST(Windows, CountIsNMinusLPlusOne) {
    EXPECT_EQ(dataset::make_windows(std::vector<ChannelSeries>{ramp_series(250)}).batch.size(), 187u);
    EXPECT_EQ(dataset::make_windows(std::vector<ChannelSeries>{ramp_series(64)}).batch.size(), 1u);
    EXPECT_EQ(code_of([] { dataset::make_windows(std::vector<ChannelSeries>{ramp_series(63)}); }), Errc::AllTooShort);
}

TEST(Windows, ContentsLabelsAndSkips) {
    std::vector<dataset::NamedSeries> corpus{
        {"a", ramp_series(100, Label::walk)}, {"tiny", ramp_series(10)}, {"b", ramp_series(80, Label::fall_left)}};
    const auto r = dataset::make_windows(corpus);
    ASSERT_EQ(r.skipped, std::vector<std::string>{"tiny"});
    const auto& b = r.batch;
    ASSERT_EQ(b.size(), 37u + 17u);
    for (std::size_t i = 0; i < b.size(); ++i) {
        const auto w = b.window(i);
        ASSERT_EQ(w.size(), 64u * kNumChannels);
        const bool first = i < 37;
        EXPECT_EQ(b.label(i), first ? 0 : 1);
        const double start = static_cast<double>(first ? i : i - 37);
        // The ramp makes every entry identify its frame, so no window crosses sources.
        for (std::size_t t = 0; t < 64; ++t)
            for (std::size_t c = 0; c < kNumChannels; ++c)
                ASSERT_DOUBLE_EQ(w[t * kNumChannels + c], start + static_cast<double>(t) + static_cast<double>(c) / 100.0);
    }
}

TEST(Windows, StepOption) {
    const auto r = dataset::make_windows(std::vector<ChannelSeries>{ramp_series(100)}, {64, 4});
    EXPECT_EQ(r.batch.size(), 10u);
    EXPECT_DOUBLE_EQ(r.batch.window(1)[0], 4.0);
}

TEST(Split, SevenThreeBySource) {
    const auto batch = dataset::make_windows(sources(10, 10)).batch;
    const auto [tr, te] = dataset::split(batch, 0.7, 42);
    EXPECT_EQ(tr.source_set().size(), 14u);
    EXPECT_EQ(te.source_set().size(), 6u);
    std::size_t tr_falls = 0, te_falls = 0;
    for (auto s : tr.source_set()) tr_falls += static_cast<std::size_t>(batch.sources()[s].label);
    for (auto s : te.source_set()) te_falls += static_cast<std::size_t>(batch.sources()[s].label);
    EXPECT_EQ(tr_falls, 7u);
    EXPECT_EQ(te_falls, 3u);
    std::vector<std::size_t> both;
    const auto a = tr.source_set(), b = te.source_set();
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    EXPECT_TRUE(both.empty());
    EXPECT_EQ(tr.size() + te.size(), batch.size());
}

TEST(Split, DeterministicUnderSeed) {
    const auto batch = dataset::make_windows(sources(10, 10)).batch;
    const auto x = dataset::split(batch, 0.7, 5), y = dataset::split(batch, 0.7, 5);
    EXPECT_EQ(x.first.source_set(), y.first.source_set());
    EXPECT_EQ(x.second.source_set(), y.second.source_set());
    bool differs = false;
    for (std::uint64_t s = 6; s < 20 && !differs; ++s) differs = dataset::split(batch, 0.7, s).first.source_set() != x.first.source_set();
    EXPECT_TRUE(differs);
}

TEST(Split, DegenerateInputsRejected) {
    const auto batch = dataset::make_windows(sources(10, 10)).batch;
    EXPECT_EQ(code_of([&] { dataset::split(batch, 1.0, 1); }), Errc::InsufficientSources);
    EXPECT_EQ(code_of([&] { dataset::split(batch, 0.0, 1); }), Errc::InsufficientSources);
    const auto lone = dataset::make_windows(sources(5, 1)).batch;
    EXPECT_EQ(code_of([&] { dataset::split(lone, 0.7, 1); }), Errc::InsufficientSources);
}

TEST(Split, SampleCorpusLayout) {
    // 11 walks and 15 falls: round(7.7) = 8 and round(10.5) = 11 go to training.
    const auto m = dataset::split_corpus(synth::sample_corpus(), 0.7, 1);
    EXPECT_EQ(m.train.size(), 19u);
    EXPECT_EQ(m.test.size(), 7u);
}

TEST(Resample, SameRateIsIdentity) {
    const auto s = ramp_series(90, Label::walk, 18.0);
    const auto r = dataset::resample(s, 18.0);
    EXPECT_EQ(r.frames, s.frames);
}

TEST(Resample, ConstantStaysConstant) {
    auto s = tsfall::test::constant_series(50, 3.5);
    for (double hz : {5.0, 18.0, 50.0, 200.0}) {
        const auto r = dataset::resample(s, hz);
        EXPECT_EQ(r.size(), static_cast<std::size_t>(std::llround(2695.0 / 1000.0 * hz)) + 1);
        for (const auto& f : r.frames)
            for (double v : f.channels) EXPECT_DOUBLE_EQ(v, 3.5);
    }
}

TEST(Resample, HalvingRateKeepsEveryOtherSample) {
    const auto s = ramp_series(101, Label::walk, 36.0);
    const auto r = dataset::resample(s, 18.0);
    ASSERT_EQ(r.size(), 51u);
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(r.frames[i], s.frames[2 * i]) << i;
}

TEST(Resample, InterpolatesBetweenKnots) {
    ChannelSeries s;
    SensorFrame a, b;
    a.timestamp_ms = 0;
    b.timestamp_ms = 100;
    b.channels.fill(10.0);
    s.frames = {a, b};
    const auto r = dataset::resample(s, 40.0); // 25 ms grid
    ASSERT_EQ(r.size(), 5u);
    EXPECT_DOUBLE_EQ(r.frames[1].channels[0], 2.5);
    EXPECT_DOUBLE_EQ(r.frames[3].channels[7], 7.5);
}

TEST(Resample, Errors) {
    EXPECT_EQ(code_of([] { dataset::resample(ChannelSeries{}, 18.0); }), Errc::EmptySeries);
    EXPECT_EQ(code_of([] { dataset::resample(ramp_series(5), 0.0); }), Errc::BadRange);
}

TEST(Corpus, SaveLoadAndManifest) {
    TempDir dir;
    const auto corpus = synth::sample_corpus(3);
    dataset::save_corpus(dir.path(), corpus);
    const auto back = dataset::load_corpus(dir.path());
    ASSERT_EQ(back.size(), corpus.size());
    std::map<std::string, const ChannelSeries*> by_name;
    for (const auto& ns : corpus) by_name[ns.name] = &ns.series;
    for (const auto& ns : back) {
        ASSERT_TRUE(by_name.count(ns.name));
        EXPECT_EQ(ns.series.frames, by_name[ns.name]->frames);
        EXPECT_EQ(ns.series.label, by_name[ns.name]->label);
    }
    const auto m = dataset::split_corpus(back, 0.7, 9);
    dataset::write_split_manifest(dir.path(), m, 0.7, 9);
    const auto m2 = dataset::read_split_manifest(dir.path());
    EXPECT_EQ(m2.train, m.train);
    EXPECT_EQ(m2.test, m.test);
    const auto [tr, te] = dataset::apply_split(back, m2);
    EXPECT_EQ(tr.size() + te.size(), back.size());
}

class Umafall : public ::testing::Test {
protected:
    TempDir dir;

    // 40 Hz accelerometer and gyroscope for the ankle, plus a waist sensor.
    std::filesystem::path write_trial(const std::string& name, bool with_ankle = true) {
        const auto p = dir / name;
        std::ofstream out(p);
        out << "% Universidad de Malaga - ETSI de Telecomunicacion\n% TimeStamp; Sample No; X-Axis; Y-Axis; Z-Axis; Sensor Type; Sensor ID\n";
        for (int i = 0; i < 200; ++i) {
            const int t = 1000 + i * 25;
            if (with_ankle) {
                out << t << ";" << i << ";" << 0.01 * i << ";0.5;-1.0;0;4\n";
                out << t << ";" << i << ";" << 2.0 * i << ";0;0;1;4\n";
            }
            out << t << ";" << i << ";9;9;9;0;3\n";
        }
        return p;
    }
};

TEST_F(Umafall, LabelsFromFilename) {
    EXPECT_EQ(dataset::umafall_label("UMAFall_Subject_01_Fall_forwardFall_1_2016.csv"), Label::fall_forward);
    EXPECT_EQ(dataset::umafall_label("UMAFall_Subject_02_Fall_lateralFall_3.csv"), Label::fall_left);
    EXPECT_EQ(dataset::umafall_label("UMAFall_Subject_03_ADL_Walking_1.csv"), Label::walk);
    EXPECT_EQ(code_of([] { dataset::umafall_label("UMAFall_Subject_03_Calibration.csv"); }), Errc::UnknownTrialType);
}

TEST_F(Umafall, FallTrialIsLabelOne) {
    const auto s = dataset::read_umafall_trial(write_trial("UMAFall_Subject_01_Fall_forwardFall_1.csv"), {});
    EXPECT_EQ(binary_label(s.label), 1);
    EXPECT_EQ(s.sample_rate_hz, 18.0);
    // 199 * 25 ms = 4.975 s at 18 Hz.
    EXPECT_EQ(s.size(), static_cast<std::size_t>(std::llround(4.975 * 18)) + 1);
    EXPECT_EQ(s.frames[0].timestamp_ms, 0);
    EXPECT_DOUBLE_EQ(s.frames[0].channels[ch::l_acc_x + 1], 0.5);
    EXPECT_DOUBLE_EQ(s.frames[0].channels[ch::l_acc_x + 2], -1.0);
    EXPECT_DOUBLE_EQ(s.frames[0].channels[ch::r_acc_x], 0.0);
    // Frame 2 sits at 111 ms, between samples 4 (100 ms) and 5 (125 ms).
    EXPECT_NEAR(s.frames[2].channels[ch::l_acc_x], 0.01 * (4 + 11.0 / 25.0), 1e-12);
    EXPECT_NEAR(s.frames[2].channels[ch::l_gyro_x], 2.0 * (4 + 11.0 / 25.0), 1e-12);
}

TEST_F(Umafall, AdlTrialIsLabelZero) {
    const auto s = dataset::read_umafall_trial(write_trial("UMAFall_Subject_01_ADL_Walking_1.csv"), {});
    EXPECT_EQ(binary_label(s.label), 0);
}

TEST_F(Umafall, MissingSensor) {
    const auto p = write_trial("UMAFall_Subject_01_ADL_Walking_2.csv", false);
    EXPECT_EQ(code_of([&] { dataset::read_umafall_trial(p, {}); }), Errc::MissingSensor);
    dataset::UmafallConfig waist;
    waist.sensor_id = 3;
    EXPECT_EQ(dataset::read_umafall_trial(p, waist).frames[0].channels[ch::l_acc_x], 9.0);
}

TEST_F(Umafall, IngestDirectory) {
    write_trial("UMAFall_Subject_01_ADL_Walking_1.csv");
    std::filesystem::create_directories(dir / "sub");
    write_trial("sub/UMAFall_Subject_02_Fall_lateralFall_1.csv");
    const auto corpus = dataset::ingest_umafall(dir.path());
    ASSERT_EQ(corpus.size(), 2u);
    EXPECT_EQ(corpus[0].series.label, Label::walk);
    EXPECT_EQ(corpus[1].series.label, Label::fall_left);
}
