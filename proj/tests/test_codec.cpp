#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "support.hpp"
#include "tsfall/codec.hpp"
#include "tsfall/synth.hpp"

using namespace tsfall;
using tsfall::test::TempDir;

namespace {

const std::string kExample =
    "0,1.20,10.0,-5.0,2.0,0.10,0.02,0.98,1.5,-0.3,0.2,1.18,9.8,-4.9,2.1,0.11,0.01,0.97,1.4,-0.2,0.3\n";

SensorFrame random_frame(Rng& rng, std::int64_t ts) {
    SensorFrame f;
    f.timestamp_ms = ts;
    for (auto& v : f.channels) v = synth::q6(rng.uniform(-500.0, 500.0));
    return f;
}

std::string random_bytes(Rng& rng) {
    // Mostly valid records with corruption mixed in.
    std::string s;
    const std::size_t records = rng.below(12);
    std::int64_t ts = 0;
    for (std::size_t r = 0; r < records; ++r) {
        ts += static_cast<std::int64_t>(rng.below(80));
        std::string rec = codec::encode_frame(random_frame(rng, ts));
        switch (rng.below(6)) {
        case 0: rec.erase(rng.below(rec.size() - 1), 1); break;
        case 1: rec.insert(rng.below(rec.size()), 1, "x,.\n-e"[rng.below(6)]); break;
        case 2: rec = "nan" + rec; break;
        default: break;
        }
        s += rec;
    }
    const std::size_t tail = rng.below(40);
    for (std::size_t i = 0; i < tail; ++i) s += "0123456789,.-\n"[rng.below(14)];
    return s;
}

struct Parsed {
    std::vector<SensorFrame> frames;
    std::size_t malformed = 0;
    std::string pending;
};

Parsed parse_chunked(const std::string& s, const std::vector<std::size_t>& cuts) {
    codec::FrameAccumulator acc;
    Parsed p;
    std::size_t prev = 0;
    auto feed = [&](std::size_t a, std::size_t b) {
        auto r = acc.feed_bytes(std::string_view(s).substr(a, b - a));
        p.frames.insert(p.frames.end(), r.frames.begin(), r.frames.end());
        p.malformed += r.malformed.size();
    };
    for (auto c : cuts) {
        feed(prev, c);
        prev = c;
    }
    feed(prev, s.size());
    p.pending = acc.pending();
    return p;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

} // namespace

TEST(Codec, DecodesExampleRecord) {
    codec::FrameAccumulator acc;
    auto r = acc.feed_bytes(kExample);
    ASSERT_EQ(r.frames.size(), 1u);
    EXPECT_TRUE(r.malformed.empty());
    EXPECT_EQ(r.frames[0].timestamp_ms, 0);
    EXPECT_DOUBLE_EQ(r.frames[0].channels[ch::l_voltage_ao], 1.20);
    EXPECT_DOUBLE_EQ(r.frames[0].channels[ch::r_gyro_z], 0.3);
    EXPECT_DOUBLE_EQ(r.frames[0].channels[ch::r_voltage_ao], 1.18);
    EXPECT_DOUBLE_EQ(r.frames[0].channels[ch::l_gyro_x + 2], 0.2);
    EXPECT_TRUE(acc.pending().empty());
}

TEST(Codec, PerByteChunksYieldFrameOnlyAtNewline) {
    codec::FrameAccumulator whole, bytes;
    const auto expect = whole.feed_bytes(kExample).frames;
    for (std::size_t i = 0; i < kExample.size(); ++i) {
        auto r = bytes.feed_bytes(std::string_view(kExample).substr(i, 1));
        if (i + 1 < kExample.size()) {
            EXPECT_TRUE(r.frames.empty());
        } else {
            ASSERT_EQ(r.frames.size(), 1u);
            EXPECT_EQ(r.frames[0], expect[0]);
        }
    }
}

TEST(Codec, WrongFieldCountIsReportedAndSkipped) {
    codec::FrameAccumulator acc;
    auto r = acc.feed_bytes("0,1,2\n");
    EXPECT_TRUE(r.frames.empty());
    ASSERT_EQ(r.malformed.size(), 1u);
    EXPECT_EQ(r.malformed[0].record_index, 1u);
    EXPECT_EQ(r.malformed[0].bytes, 6u);
    // Still usable afterwards.
    EXPECT_EQ(acc.feed_bytes(kExample).frames.size(), 1u);
}

TEST(Codec, RejectsNonNumericAndNonFinite) {
    for (std::string bad : {"abc", "nan", "inf", "-inf", "1e999", "", "1.0.0"}) {
        std::string rec = kExample;
        rec.replace(2, 4, bad); // field 1
        codec::FrameAccumulator acc;
        auto r = acc.feed_bytes(rec);
        EXPECT_TRUE(r.frames.empty()) << bad;
        EXPECT_EQ(r.malformed.size(), 1u) << bad;
    }
    codec::FrameAccumulator acc;
    EXPECT_EQ(acc.feed_bytes("x" + kExample).malformed.size(), 1u);
}

TEST(Codec, BackwardsTimestampIsMalformed) {
    codec::FrameAccumulator acc;
    std::string later = kExample;
    later.replace(0, 1, "100");
    auto r = acc.feed_bytes(later + kExample + later);
    EXPECT_EQ(r.frames.size(), 2u);
    EXPECT_EQ(r.malformed.size(), 1u);
}

TEST(Codec, EncodeIsCanonicalAndInvertsDecode) {
    codec::FrameAccumulator acc;
    const auto f = acc.feed_bytes(kExample).frames.at(0);
    const auto text = codec::encode_frame(f);
    EXPECT_EQ(text, "0,1.2,10.0,-5.0,2.0,0.1,0.02,0.98,1.5,-0.3,0.2,1.18,9.8,-4.9,2.1,0.11,0.01,0.97,1.4,-0.2,0.3\n");
    codec::FrameAccumulator again;
    const auto g = again.feed_bytes(text).frames.at(0);
    EXPECT_EQ(g, f);
    EXPECT_EQ(codec::encode_frame(g), text);
}

TEST(Codec, RandomFramesRoundTrip) {
    Rng rng(11);
    codec::FrameAccumulator acc;
    for (int i = 0; i < 1000; ++i) {
        const auto f = random_frame(rng, i);
        auto r = acc.feed_bytes(codec::encode_frame(f));
        ASSERT_EQ(r.frames.size(), 1u);
        ASSERT_EQ(r.frames[0], f) << codec::encode_frame(f);
    }
}

TEST(Codec, NegativeZeroBecomesZero) {
    SensorFrame f;
    f.channels.fill(-0.0);
    f.channels[3] = -1e-9; // rounds to zero at six decimals
    const auto text = codec::encode_frame(f);
    EXPECT_EQ(text.find('-'), std::string::npos) << text;
    codec::FrameAccumulator acc;
    const auto g = acc.feed_bytes(text).frames.at(0);
    for (double v : g.channels) {
        EXPECT_EQ(v, 0.0);
        EXPECT_FALSE(std::signbit(v));
    }
    codec::FrameAccumulator acc2;
    std::string neg = kExample;
    neg.replace(2, 4, "-0.0");
    EXPECT_FALSE(std::signbit(acc2.feed_bytes(neg).frames.at(0).channels[0]));
}

TEST(Codec, ChunkInvarianceAndConservation) {
    Rng rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        const auto s = random_bytes(rng);
        const auto ref = parse_chunked(s, {});
        std::vector<std::size_t> cuts;
        for (std::size_t i = 1; i < s.size(); ++i)
            if (rng.below(4) == 0) cuts.push_back(i);
        const auto got = parse_chunked(s, cuts);
        ASSERT_EQ(got.frames, ref.frames);
        ASSERT_EQ(got.malformed, ref.malformed);
        ASSERT_EQ(got.pending, ref.pending);

        codec::FrameAccumulator acc;
        std::size_t prev = 0;
        for (auto c : cuts) {
            acc.feed_bytes(std::string_view(s).substr(prev, c - prev));
            prev = c;
            ASSERT_EQ(acc.pending().find('\n'), std::string::npos);
            ASSERT_EQ(acc.consumed_bytes(), acc.emitted_bytes() + acc.malformed_bytes() + acc.pending().size());
        }
        acc.feed_bytes(std::string_view(s).substr(prev));
        ASSERT_EQ(acc.consumed_bytes(), s.size());
        ASSERT_EQ(acc.consumed_bytes(), acc.emitted_bytes() + acc.malformed_bytes() + acc.pending().size());
        ASSERT_EQ(acc.emitted_count(), ref.frames.size());
    }
}

TEST(Codec, EmptyChunkIsHarmless) {
    codec::FrameAccumulator acc;
    EXPECT_TRUE(acc.feed_bytes(std::string_view{}).frames.empty());
    acc.feed_bytes(kExample.substr(0, 10));
    EXPECT_TRUE(acc.feed_bytes(std::string_view{}).frames.empty());
    EXPECT_EQ(acc.pending(), kExample.substr(0, 10));
}

TEST(Codec, LogRoundTrip) {
    TempDir dir;
    Rng rng(3);
    ChannelSeries s;
    s.label = Label::fall_left;
    s.subject = "s7";
    s.sample_rate_hz = 18.0;
    for (int i = 0; i < 250; ++i) s.frames.push_back(random_frame(rng, i * 55));
    const auto path = dir / "rec.csv";
    codec::write_log(path, s);
    EXPECT_TRUE(std::filesystem::exists(dir / "rec.meta"));
    const auto back = codec::read_log(path);
    EXPECT_EQ(back.frames, s.frames);
    EXPECT_EQ(back.label, s.label);
    EXPECT_EQ(back.subject, "s7");
    EXPECT_EQ(back.sample_rate_hz, 18.0);
}

TEST(Codec, EmptyFileIsEmptySeries) {
    TempDir dir;
    write_file(dir / "e.csv", "");
    try {
        codec::read_frames(dir / "e.csv");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::EmptySeries);
    }
    write_file(dir / "h.csv", codec::log_header() + "\n");
    try {
        codec::read_frames(dir / "h.csv");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::EmptySeries);
    }
}

TEST(Codec, PermutedHeaderIsRejected) {
    TempDir dir;
    std::string h = codec::log_header();
    const auto a = h.find("l_acc_x"), b = h.find("l_acc_y");
    h.replace(b, 7, "l_acc_x");
    h.replace(a, 7, "l_acc_y");
    write_file(dir / "p.csv", h + "\n" + kExample);
    try {
        codec::read_frames(dir / "p.csv");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::HeaderMismatch);
        EXPECT_EQ(e.module(), "codec");
    }
}

TEST(Codec, BadRecordInLogReportsLineNumber) {
    TempDir dir;
    write_file(dir / "b.csv", codec::log_header() + "\n" + kExample + "0,1,2\n");
    try {
        codec::read_frames(dir / "b.csv");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::MalformedRecord);
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
    }
}

TEST(Codec, MissingFileIsIo) {
    try {
        codec::read_frames("/nonexistent/x.csv");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::Io);
    }
}

TEST(Codec, MetaNeedsValidLabel) {
    TempDir dir;
    write_file(dir / "m.csv", codec::log_header() + "\n" + kExample);
    write_file(dir / "m.meta", "label=jump\n");
    EXPECT_THROW(codec::read_log(dir / "m.csv"), Error);
    write_file(dir / "m.meta", "subject=x\n");
    EXPECT_THROW(codec::read_log(dir / "m.csv"), Error);
    write_file(dir / "m.meta", "label=walk\n");
    EXPECT_EQ(codec::read_log(dir / "m.csv").label, Label::walk);
}
