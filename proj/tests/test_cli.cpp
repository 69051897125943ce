#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "support.hpp"
#include "tsfall/baselines.hpp"
#include "tsfall/codec.hpp"
#include "tsfall/dataset.hpp"
#include "tsfall/eval.hpp"
#include "tsfall/filter.hpp"
#include "tsfall/registry.hpp"

using namespace tsfall;
using tsfall::test::TempDir;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run tsfall_cli(const std::string& args) {
    const std::string cmd = std::string(TSFALL_CLI_PATH) + " " + args + " 2>&1";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int st = pclose(p);
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

const std::string kSample = TSFALL_SAMPLE_DIR;

} // namespace

TEST(Cli, UnknownFlagIsUsageError) {
    EXPECT_EQ(tsfall_cli("train --data x --out y --bogus").code, 2);
    EXPECT_EQ(tsfall_cli("frobnicate").code, 2);
    EXPECT_EQ(tsfall_cli("train --model cnn --data x --out y").code, 2);
}

TEST(Cli, HelpDocumentsFlags) {
    const auto top = tsfall_cli("--help");
    EXPECT_EQ(top.code, 0);
    for (auto sub : {"parse", "denoise", "augment", "windows", "split", "train", "eval", "stream", "push", "pull", "serve"})
        EXPECT_NE(top.out.find(sub), std::string::npos) << sub;
    const auto tr = tsfall_cli("train --help");
    EXPECT_EQ(tr.code, 0);
    for (auto flag : {"--data", "--out", "--model", "--seed", "--epochs", "--lr", "--history"})
        EXPECT_NE(tr.out.find(flag), std::string::npos) << flag;
    const auto st = tsfall_cli("stream --help");
    for (auto flag : {"--model", "--log", "--speedup", "--threshold", "--refractory-ms", "--events"})
        EXPECT_NE(st.out.find(flag), std::string::npos) << flag;
}

TEST(Cli, DomainErrorExitsOne) {
    TempDir dir;
    const auto r = tsfall_cli("parse " + (dir / "missing.csv").string());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("Io"), std::string::npos) << r.out;
    EXPECT_EQ(tsfall_cli("--set nonsense.key=1 parse " + kSample).code, 1);
}

TEST(Cli, HappyPathOnSample) {
    TempDir dir;
    const auto dn = (dir / "dn").string();
    auto r = tsfall_cli("parse " + kSample);
    ASSERT_EQ(r.code, 0) << r.out;
    r = tsfall_cli("denoise " + kSample + " " + dn);
    ASSERT_EQ(r.code, 0) << r.out;
    r = tsfall_cli("windows " + dn);
    ASSERT_EQ(r.code, 0) << r.out;
    r = tsfall_cli("split " + dn + " --seed 3");
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("train=19 test=7"), std::string::npos) << r.out;
    const auto ckpt = (dir / "tcn.ckpt").string();
    r = tsfall_cli("--set model.width=8 train --data " + dn + " --out " + ckpt + " --epochs 1 --seed 1 --history " +
                   (dir / "h.csv").string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(std::filesystem::exists(ckpt));
    const auto report = (dir / "report.txt").string();
    r = tsfall_cli("eval --model " + ckpt + " --data " + dn + " --report " + report);
    ASSERT_EQ(r.code, 0) << r.out;
    const auto kv = codec::read_kv_file(report, "test");
    EXPECT_EQ(kv.at("part"), "test");
    EXPECT_EQ(kv.at("recordings"), "7");
    for (auto key : {"tp", "fp", "fn", "tn", "accuracy", "precision", "recall", "f1"}) EXPECT_TRUE(kv.count(std::string("model.tcn.") + key)) << key;
}

TEST(Cli, SameSeedSameCheckpoint) {
    TempDir dir;
    auto r = tsfall_cli("synth --kind separable --per-class 3 --frames 80 --out " + (dir / "sep").string());
    ASSERT_EQ(r.code, 0) << r.out;
    for (auto name : {"a.ckpt", "b.ckpt"}) {
        r = tsfall_cli("--set model.width=4 train --data " + (dir / "sep").string() + " --out " + (dir / name).string() +
                       " --epochs 2 --seed 5");
        ASSERT_EQ(r.code, 0) << r.out;
    }
    EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
}

// The CLI report must equal what the library computes from the same pieces.
TEST(Cli, EvalMatchesLibrary) {
    TempDir dir;
    const auto dn = (dir / "dn").string();
    ASSERT_EQ(tsfall_cli("denoise " + kSample + " " + dn).code, 0);
    ASSERT_EQ(tsfall_cli("split " + dn + " --seed 8").code, 0);
    const auto ckpt = dir / "tree.ckpt";
    ASSERT_EQ(tsfall_cli("train --model tree --data " + dn + " --out " + ckpt.string()).code, 0);
    ASSERT_EQ(tsfall_cli("eval --model " + ckpt.string() + " --data " + dn + " --report " + (dir / "r.txt").string()).code, 0);

    const auto corpus = dataset::load_corpus(dn);
    const auto [train, test] = dataset::apply_split(corpus, dataset::read_split_manifest(dn));
    const auto tree = baselines::tree_from_container(checkpoint::load(ckpt));
    const auto batch = dataset::make_windows(test).batch;
    const auto labels = batch.labels();
    const auto rows = eval::compare({{"tree", [&] { return tree.predict(baselines::batch_features(batch)); }}}, labels);
    const std::string expect = "data=" + dn + "\npart=test\nwindows=" + std::to_string(batch.size()) +
                               "\nrecordings=" + std::to_string(batch.num_sources()) + "\n" + eval::report_kv(rows);
    EXPECT_EQ(slurp(dir / "r.txt"), expect);

    // Denoising through the CLI equals the library filter on the canonical text.
    const auto raw = codec::read_log(std::filesystem::path(kSample) / (corpus.front().name + ".csv"));
    const auto lib = filter::denoise_series(raw, {});
    ChannelSeries quantised = lib;
    for (auto& f : quantised.frames) {
        codec::FrameAccumulator acc;
        f = acc.feed_bytes(codec::encode_frame(f)).frames.at(0);
    }
    EXPECT_EQ(corpus.front().series.frames, quantised.frames);
}

TEST(Cli, StreamReplaysLog) {
    TempDir dir;
    const auto sep = (dir / "sep").string();
    ASSERT_EQ(tsfall_cli("synth --kind separable --per-class 2 --frames 100 --out " + sep).code, 0);
    ASSERT_EQ(tsfall_cli("train --model svm --data " + sep + " --out " + (dir / "svm.ckpt").string()).code, 0);
    const auto log = dataset::load_corpus(sep).front().name;
    const auto r = tsfall_cli("stream --model " + (dir / "svm.ckpt").string() + " --log " + sep + "/" + log +
                              ".csv --events " + (dir / "ev.csv").string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("predictions=37"), std::string::npos) << r.out;
}

TEST(Cli, PushPullThroughRegistry) {
    TempDir root, dir;
    registry::Server server(root.path());
    const int port = server.start();
    ::setenv(registry::kAddressEnv, ("127.0.0.1:" + std::to_string(port)).c_str(), 1);

    ASSERT_EQ(tsfall_cli("synth --kind separable --per-class 2 --frames 80 --out " + (dir / "sep").string()).code, 0);
    ASSERT_EQ(tsfall_cli("train --model tree --data " + (dir / "sep").string() + " --out " + (dir / "m.ckpt").string()).code, 0);
    auto r = tsfall_cli("push --model " + (dir / "m.ckpt").string() + " --timestamp-ms 1234");
    ASSERT_EQ(r.code, 0) << r.out;
    r = tsfall_cli("push --session " + (dir / "sep").string() + " --name run1");
    ASSERT_EQ(r.code, 0) << r.out;
    r = tsfall_cli("pull --out " + (dir / "pulled.ckpt").string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(slurp(dir / "pulled.ckpt"), slurp(dir / "m.ckpt"));
    EXPECT_FALSE(server.store().list("data", "run1/").empty());

    // An explicit flag beats the environment.
    r = tsfall_cli("pull --registry 127.0.0.1:1 --out " + (dir / "x.ckpt").string());
    EXPECT_EQ(r.code, 1);
    ::unsetenv(registry::kAddressEnv);
    server.stop();
}
