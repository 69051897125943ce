// tsfall: command-line front end for the fall detection pipeline.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tsfall/baselines.hpp"
#include "tsfall/checkpoint.hpp"
#include "tsfall/codec.hpp"
#include "tsfall/config.hpp"
#include "tsfall/dataset.hpp"
#include "tsfall/eval.hpp"
#include "tsfall/filter.hpp"
#include "tsfall/models.hpp"
#include "tsfall/registry.hpp"
#include "tsfall/stream.hpp"
#include "tsfall/synth.hpp"
#include "tsfall/training.hpp"

namespace fs = std::filesystem;
using namespace tsfall;

namespace {

template <class T>
void put_opt(const std::optional<T>& v, T& dst) {
    if (v) dst = *v;
}

// A file argument, or every *.csv directly inside a directory argument.
std::vector<fs::path> log_inputs(const fs::path& p) {
    if (!fs::is_directory(p)) {
        if (!fs::exists(p)) throw Error("cli", Errc::Io, "no such file: " + p.string());
        return {p};
    }
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw Error("cli", Errc::EmptySeries, "no .csv logs in " + p.string());
    return out;
}

fs::path output_for(const fs::path& in, const fs::path& in_root, const fs::path& out_root) {
    if (!fs::is_directory(in_root)) return out_root;
    fs::create_directories(out_root);
    return out_root / in.filename();
}

// Log plus its sidecar if there is one. Logs without a sidecar stay that way.
struct LogFile {
    ChannelSeries series;
    bool has_meta = false;
};

LogFile load_log(const fs::path& p) {
    LogFile lf;
    if (fs::exists(codec::meta_path(p))) {
        lf.series = codec::read_log(p);
        lf.has_meta = true;
    } else {
        lf.series.frames = codec::read_frames(p);
    }
    return lf;
}

void save_log(const fs::path& p, const LogFile& lf) {
    if (lf.has_meta) return codec::write_log(p, lf.series);
    std::string body = codec::log_header() + "\n";
    for (const auto& f : lf.series.frames) body += codec::encode_frame(f);
    codec::write_text_atomic(p, body, "codec");
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cli", Errc::Io, "cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Recordings of a corpus directory, restricted to one side of its split
// manifest when present.
std::vector<dataset::NamedSeries> corpus_part(const fs::path& dir, const std::string& part) {
    auto corpus = dataset::load_corpus(dir);
    if (part == "all" || !fs::exists(dir / "split.manifest")) return corpus;
    auto [train, test] = dataset::apply_split(corpus, dataset::read_split_manifest(dir));
    auto& out = part == "train" ? train : test;
    if (out.empty()) throw Error("cli", Errc::EmptySeries, "split manifest in " + dir.string() + " has no " + part + " recordings");
    return out;
}

// Uniform double-precision view over every checkpoint kind, shaped like the
// neural models so the stream and eval code can take any of them.
class AnyModel {
public:
    using Scalar = double;

    static AnyModel load(const fs::path& path) {
        AnyModel m;
        const auto c = checkpoint::load(path);
        m.kind_ = c.header.value("model_kind", std::string{});
        if (m.kind_ == "tcn") m.tcn_ = models::tcn_from_container<double>(c);
        else if (m.kind_ == "lstm") m.lstm_ = baselines::lstm_from_container<double>(c);
        else if (m.kind_ == "svm") m.svm_ = baselines::svm_from_container(c);
        else if (m.kind_ == "tree") m.tree_ = baselines::tree_from_container(c);
        else throw Error("cli", Errc::BadConfig, path.string() + ": unknown model kind '" + m.kind_ + "'");
        return m;
    }

    const std::string& kind() const { return kind_; }

    std::size_t window_length() const {
        if (tcn_) return tcn_->config().window_length;
        if (lstm_) return lstm_->config().window_length;
        return 0;
    }

    std::vector<double> forward(const nn::Tensor3<double>& x, models::PassMode = {}) const {
        if (tcn_) return tcn_->forward(x);
        if (lstm_) return lstm_->forward(x);
        std::vector<double> p;
        p.reserve(x.batch * 2);
        for (std::size_t b = 0; b < x.batch; ++b) {
            const std::span<const double> w(x.row(b, 0), x.time * x.channels);
            const auto f = baselines::window_features(w, x.time);
            const int y = svm_ ? svm_->predict(f) : tree_->predict(f);
            p.push_back(y ? 0.0 : 1.0);
            p.push_back(y ? 1.0 : 0.0);
        }
        return p;
    }

private:
    std::string kind_;
    std::optional<models::TcnModel<double>> tcn_;
    std::optional<baselines::LstmModel<double>> lstm_;
    std::optional<baselines::LinearSvm> svm_;
    std::optional<baselines::DecisionTree> tree_;
};

registry::Address registry_address(const std::optional<std::string>& flag, const config::RunConfig& cfg) {
    if (flag) return registry::Address::parse(*flag);
    if (const char* env = std::getenv(registry::kAddressEnv); env && *env) return registry::Address::parse(env);
    return registry::Address::parse(cfg.registry_address);
}

std::string history_csv(const training::TrainHistory& h) {
    std::string s = "epoch,train_loss,valid_loss,valid_accuracy,valid_f1\n";
    char buf[160];
    for (const auto& e : h.epochs) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%s,%s\n", e.epoch, e.train_loss, e.valid_loss,
                      eval::fmt_metric(e.valid.accuracy, 6).c_str(), eval::fmt_metric(e.valid.f1, 6).c_str());
        s += buf;
    }
    return s;
}

template <class Model>
void train_neural(Model& model, const dataset::WindowBatch& tr, const dataset::WindowBatch& va,
                  const training::TrainOptions& opt, const std::optional<std::string>& history_path) {
    auto h = training::train(model, tr, va, opt);
    const auto& best = h.epochs[h.best_epoch];
    std::printf("epochs_run=%zu best_epoch=%zu stopped_early=%s best_valid_f1=%s train_loss=%.6f\n", h.epochs.size() - 1,
                h.best_epoch, h.stopped_early ? "true" : "false", eval::fmt_metric(best.valid.f1).c_str(), best.train_loss);
    if (history_path) codec::write_text_atomic(*history_path, history_csv(h), "cli");
}

volatile std::sig_atomic_t g_stop = 0;

} // namespace

int run(int argc, char** argv) {
    CLI::App app{"tsfall: plantar/IMU fall detection pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    std::optional<std::string> config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "key=value run configuration file");
    app.add_option("--set", overrides, "override one configuration key (key=value); repeatable");

    // parse
    auto* parse = app.add_subcommand("parse", "decode a log (or directory of logs), reporting malformed records");
    std::string parse_in;
    std::optional<std::string> parse_out;
    std::optional<std::string> label_flag;
    parse->add_option("input", parse_in, "log file or directory")->required();
    parse->add_option("--out", parse_out, "write canonical re-encoded log(s) here");
    parse->add_option("--label", label_flag, "label for logs without a .meta sidecar (walk|fall_forward|fall_left)");

    // denoise
    auto* denoise = app.add_subcommand("denoise", "per-channel Kalman smoothing of a log (or directory)");
    std::optional<double> dn_q, dn_r, dn_p0;
    std::string dn_in, dn_out;
    denoise->add_option("--q", dn_q, "process noise variance (default 1e-3)");
    denoise->add_option("--r", dn_r, "measurement noise variance (default 1e-1)");
    denoise->add_option("--p0", dn_p0, "initial error covariance (default 1)");
    denoise->add_option("input", dn_in, "log file or directory")->required();
    denoise->add_option("output", dn_out, "output file or directory")->required();

    // augment
    auto* augment = app.add_subcommand("augment", "add fixed-range slice copies of long walking recordings");
    std::string au_in, au_out;
    std::optional<std::size_t> au_start, au_end, au_min;
    augment->add_option("input", au_in, "corpus directory")->required();
    augment->add_option("output", au_out, "output corpus directory")->required();
    augment->add_option("--start", au_start, "first frame of the slice (default 25)");
    augment->add_option("--end", au_end, "one past the last frame of the slice (default 275)");
    augment->add_option("--min-length", au_min, "only walks at least this long are sliced (default 300)");

    // windows
    auto* windows = app.add_subcommand("windows", "cut a corpus into labelled fixed-length windows");
    std::string wi_in;
    std::optional<std::size_t> wi_len, wi_step;
    std::optional<std::string> wi_out;
    windows->add_option("input", wi_in, "corpus directory")->required();
    windows->add_option("--length", wi_len, "window length in frames (default 64)");
    windows->add_option("--step", wi_step, "stride between windows (default 1)");
    windows->add_option("--out", wi_out, "write a source,offset,label index CSV");

    // split
    auto* split = app.add_subcommand("split", "stratified train/test split by recording; writes split.manifest");
    std::string sp_in;
    std::optional<double> sp_ratio;
    std::optional<std::uint64_t> sp_seed;
    split->add_option("input", sp_in, "corpus directory")->required();
    split->add_option("--ratio", sp_ratio, "train fraction per class (default 0.7)");
    split->add_option("--seed", sp_seed, "shuffle seed");

    // train
    auto* train = app.add_subcommand("train", "train a model on the train side of a corpus");
    std::string tr_data, tr_out, tr_model = "tcn";
    std::optional<std::uint64_t> tr_seed;
    std::optional<std::size_t> tr_epochs;
    std::optional<double> tr_lr;
    std::optional<std::string> tr_history;
    train->add_option("--data", tr_data, "corpus directory (uses train members of split.manifest if present)")->required();
    train->add_option("--out", tr_out, "checkpoint path")->required();
    train->add_option("--model", tr_model, "tcn, lstm, svm or tree")->check(CLI::IsMember({"tcn", "lstm", "svm", "tree"}));
    train->add_option("--seed", tr_seed, "seed for validation split, init, dropout and shuffling");
    train->add_option("--epochs", tr_epochs, "maximum epochs (tcn/lstm)");
    train->add_option("--lr", tr_lr, "Adam learning rate (tcn/lstm)");
    train->add_option("--history", tr_history, "write per-epoch losses and validation metrics as CSV");

    // eval
    auto* evalc = app.add_subcommand("eval", "evaluate one or more checkpoints on the test side of a corpus");
    std::vector<std::string> ev_models;
    std::string ev_data, ev_part = "test";
    std::optional<std::string> ev_report;
    evalc->add_option("--model", ev_models, "checkpoint; repeat to compare models")->required();
    evalc->add_option("--data", ev_data, "corpus directory")->required();
    evalc->add_option("--part", ev_part, "test, train or all (test/train need split.manifest)")
        ->check(CLI::IsMember({"test", "train", "all"}));
    evalc->add_option("--report", ev_report, "write key=value metrics report");

    // stream
    auto* streamc = app.add_subcommand("stream", "replay a log through the real-time pipeline");
    std::string st_model, st_log;
    std::optional<double> st_speedup, st_threshold;
    std::optional<std::int64_t> st_refractory;
    std::optional<std::uint64_t> st_seed;
    std::optional<std::string> st_events;
    streamc->add_option("--model", st_model, "checkpoint")->required();
    streamc->add_option("--log", st_log, "log file to replay")->required();
    streamc->add_option("--speedup", st_speedup, "replay speed multiple; 0 replays as fast as possible (default 0)");
    streamc->add_option("--threshold", st_threshold, "alarm probability threshold (default 0.5)");
    streamc->add_option("--refractory-ms", st_refractory, "minimum gap between alarms (default 2000)");
    streamc->add_option("--seed", st_seed, "chunking seed");
    streamc->add_option("--events", st_events, "write frame_index,timestamp_ms,probability,latency_us records");

    // push / pull / serve
    std::optional<std::string> reg_flag;
    auto* push = app.add_subcommand("push", "upload a session directory or a model checkpoint to the registry");
    std::optional<std::string> pu_session, pu_model, pu_name;
    std::optional<std::int64_t> pu_ts;
    auto* pu_sess_opt = push->add_option("--session", pu_session, "directory of logs to upload to data/<id>/");
    auto* pu_model_opt = push->add_option("--model", pu_model, "checkpoint to publish in models/");
    pu_sess_opt->excludes(pu_model_opt);
    push->add_option("--name", pu_name, "session id or model name (default: directory or file stem)");
    push->add_option("--timestamp-ms", pu_ts, "model timestamp (default: now)");
    push->add_option("--registry", reg_flag, "host:port (default: $TSFALL_REGISTRY, then registry.address)");

    auto* pull = app.add_subcommand("pull", "install the newest model checkpoint from the registry");
    std::string pl_out;
    pull->add_option("--out", pl_out, "destination checkpoint path")->required();
    pull->add_option("--registry", reg_flag, "host:port (default: $TSFALL_REGISTRY, then registry.address)");

    auto* serve = app.add_subcommand("serve", "run the object registry server until SIGINT/SIGTERM");
    std::string sv_root, sv_host = "127.0.0.1";
    int sv_port = 9000;
    serve->add_option("--root", sv_root, "storage directory")->required();
    serve->add_option("--port", sv_port, "port; 0 picks a free one (default 9000)");
    serve->add_option("--host", sv_host, "bind address (default 127.0.0.1)");

    // synth / ingest-umafall
    auto* synthc = app.add_subcommand("synth", "write a synthetic corpus");
    std::string sy_out, sy_kind = "sample";
    std::optional<std::uint64_t> sy_seed;
    std::size_t sy_per_class = 10, sy_frames = 200;
    synthc->add_option("--out", sy_out, "output directory")->required();
    synthc->add_option("--kind", sy_kind, "sample (26 gait/fall recordings) or separable")
        ->check(CLI::IsMember({"sample", "separable"}));
    synthc->add_option("--seed", sy_seed, "generator seed (default 2024)");
    synthc->add_option("--per-class", sy_per_class, "separable: recordings per class (default 10)");
    synthc->add_option("--frames", sy_frames, "separable: frames per recording (default 200)");

    auto* ingest = app.add_subcommand("ingest-umafall", "convert UMAFall trial files into a corpus directory");
    std::string in_dir, in_out;
    std::optional<int> in_sensor;
    std::optional<double> in_hz;
    ingest->add_option("--in", in_dir, "UMAFall directory (searched recursively)")->required();
    ingest->add_option("--out", in_out, "output corpus directory")->required();
    ingest->add_option("--sensor-id", in_sensor, "sensing point id (default 4, ankle)");
    ingest->add_option("--target-hz", in_hz, "resampling rate (default 18)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    config::RunConfig cfg;
    if (config_path) cfg = config::load(*config_path);
    for (const auto& kv : overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error("cli", Errc::BadConfig, "--set expects key=value, got '" + kv + "'");
        config::set(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    put_opt(dn_q, cfg.kalman.q);
    put_opt(dn_r, cfg.kalman.r);
    put_opt(dn_p0, cfg.kalman.p0);
    put_opt(au_start, cfg.augment.start);
    put_opt(au_end, cfg.augment.end);
    put_opt(au_min, cfg.augment.min_length);
    if (wi_len) config::set(cfg, "window.length", std::to_string(*wi_len));
    put_opt(wi_step, cfg.window.step);
    put_opt(sp_ratio, cfg.split_ratio);
    put_opt(sp_seed, cfg.seed);
    put_opt(tr_seed, cfg.seed);
    put_opt(tr_epochs, cfg.train.epochs);
    put_opt(tr_lr, cfg.train.lr);
    put_opt(st_speedup, cfg.speedup);
    put_opt(st_threshold, cfg.stream.threshold);
    put_opt(st_refractory, cfg.stream.refractory_ms);
    put_opt(st_seed, cfg.seed);
    put_opt(in_sensor, cfg.umafall.sensor_id);
    put_opt(in_hz, cfg.umafall.target_hz);
    cfg.validate();

    if (*parse) {
        const fs::path root = parse_in;
        std::size_t total_frames = 0, total_bad = 0;
        for (const auto& f : log_inputs(root)) {
            const std::string text = read_text(f);
            std::string_view body = text;
            auto nl = body.find('\n');
            std::string_view first = body.substr(0, nl);
            if (!first.empty() && first.back() == '\r') first.remove_suffix(1);
            if (first.rfind("timestamp_ms", 0) == 0) {
                if (first != codec::log_header())
                    throw Error("codec", Errc::HeaderMismatch, f.string() + ": header does not name the 20 channels");
                body.remove_prefix(nl == std::string_view::npos ? body.size() : nl + 1);
            }
            codec::FrameAccumulator acc;
            auto r = acc.feed_bytes(body);
            for (const auto& m : r.malformed)
                std::fprintf(stderr, "%s: record %zu: %s\n", f.string().c_str(), m.record_index, m.reason.c_str());
            if (!acc.pending().empty()) std::fprintf(stderr, "%s: %zu trailing bytes without a terminator\n", f.string().c_str(), acc.pending().size());
            std::printf("%s frames=%zu malformed=%zu\n", f.filename().string().c_str(), r.frames.size(), r.malformed.size());
            total_frames += r.frames.size();
            total_bad += r.malformed.size();
            if (parse_out) {
                LogFile lf;
                lf.series.frames = std::move(r.frames);
                if (fs::exists(codec::meta_path(f))) {
                    auto meta = codec::read_log(f); // validates the sidecar as well
                    lf.series.label = meta.label;
                    lf.series.subject = meta.subject;
                    lf.series.sample_rate_hz = meta.sample_rate_hz;
                    lf.has_meta = true;
                } else if (label_flag) {
                    lf.series.label = parse_label(*label_flag);
                    lf.has_meta = true;
                }
                if (lf.series.frames.empty()) throw Error("codec", Errc::EmptySeries, f.string() + ": no valid records");
                save_log(output_for(f, root, *parse_out), lf);
            }
        }
        std::printf("total frames=%zu malformed=%zu\n", total_frames, total_bad);
        return 0;
    }

    if (*denoise) {
        const fs::path root = dn_in;
        for (const auto& f : log_inputs(root)) {
            auto lf = load_log(f);
            lf.series = filter::denoise_series(lf.series, cfg.kalman);
            save_log(output_for(f, root, dn_out), lf);
            std::printf("%s frames=%zu\n", f.filename().string().c_str(), lf.series.size());
        }
        return 0;
    }

    if (*augment) {
        auto corpus = dataset::load_corpus(au_in);
        const fs::path manifest_dir = au_in;
        std::optional<dataset::SplitManifest> manifest;
        if (fs::exists(manifest_dir / "split.manifest")) manifest = dataset::read_split_manifest(manifest_dir);
        // With a split in place only training recordings gain slices, and the
        // slices follow their originals into the train side.
        std::vector<dataset::NamedSeries> eligible = corpus;
        if (manifest) eligible = dataset::apply_split(corpus, *manifest).first;
        auto augmented = dataset::augment_corpus(eligible, cfg.augment);
        std::size_t added = 0;
        for (std::size_t i = eligible.size(); i < augmented.size(); ++i) {
            corpus.push_back(augmented[i]);
            if (manifest) manifest->train.push_back(augmented[i].name);
            ++added;
        }
        dataset::save_corpus(au_out, corpus);
        if (manifest) {
            const auto kv = codec::read_kv_file(manifest_dir / "split.manifest", "dataset");
            const double ratio = kv.count("ratio") ? std::stod(kv.at("ratio")) : cfg.split_ratio;
            const std::uint64_t seed = kv.count("seed") ? std::stoull(kv.at("seed")) : cfg.seed;
            dataset::write_split_manifest(au_out, *manifest, ratio, seed);
        }
        std::printf("recordings=%zu added=%zu\n", corpus.size(), added);
        return 0;
    }

    if (*windows) {
        auto wr = dataset::make_windows(dataset::load_corpus(wi_in), cfg.window);
        const auto labels = wr.batch.labels();
        const auto falls = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
        for (const auto& s : wr.skipped) std::fprintf(stderr, "skipped %s: shorter than %zu frames\n", s.c_str(), cfg.window.length);
        std::printf("windows=%zu walk=%zu fall=%zu sources=%zu skipped=%zu\n", wr.batch.size(), wr.batch.size() - falls, falls,
                    wr.batch.num_sources(), wr.skipped.size());
        if (wi_out) {
            std::string s = "source,offset,label\n";
            for (const auto& e : wr.batch.entries())
                s += wr.batch.sources()[e.source].name + "," + std::to_string(e.offset) + "," +
                     std::to_string(wr.batch.sources()[e.source].label) + "\n";
            codec::write_text_atomic(*wi_out, s, "cli");
        }
        return 0;
    }

    if (*split) {
        const auto corpus = dataset::load_corpus(sp_in);
        const auto m = dataset::split_corpus(corpus, cfg.split_ratio, cfg.seed);
        dataset::write_split_manifest(sp_in, m, cfg.split_ratio, cfg.seed);
        std::printf("train=%zu test=%zu\n", m.train.size(), m.test.size());
        return 0;
    }

    if (*train) {
        const auto corpus = corpus_part(tr_data, "train");
        const auto all = dataset::make_windows(corpus, cfg.window).batch;
        // Validation recordings come out of the training side; with too few
        // recordings per class the training set doubles as validation.
        dataset::WindowBatch tr_set = all, va_set = all;
        std::vector<int> src_labels;
        for (const auto& s : all.sources()) src_labels.push_back(s.label);
        try {
            const auto ss = dataset::split_sources(src_labels, cfg.valid_ratio, cfg.seed);
            tr_set = all.select_sources({ss.train.begin(), ss.train.end()});
            va_set = all.select_sources({ss.test.begin(), ss.test.end()});
        } catch (const Error& e) {
            if (e.code() != Errc::InsufficientSources) throw;
            std::fprintf(stderr, "note: too few recordings for a validation split; validating on the training set\n");
        }
        std::printf("train_windows=%zu valid_windows=%zu\n", tr_set.size(), va_set.size());
        auto opt = cfg.train;
        opt.seed = cfg.seed;
        if (tr_model == "tcn") {
            std::vector<std::string> warnings;
            auto m = models::TcnModel<float>::build(cfg.model, cfg.seed, &warnings);
            for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
            train_neural(m, tr_set, va_set, opt, tr_history);
            models::save_checkpoint(tr_out, m, cfg.seed);
        } else if (tr_model == "lstm") {
            auto m = baselines::LstmModel<float>::build(cfg.lstm, cfg.seed);
            train_neural(m, tr_set, va_set, opt, tr_history);
            checkpoint::save(tr_out, baselines::to_container(m, cfg.seed));
        } else {
            const auto x = baselines::batch_features(all);
            const auto y = all.labels();
            if (tr_model == "svm") {
                auto o = cfg.svm;
                o.seed = cfg.seed;
                checkpoint::save(tr_out, baselines::to_container(baselines::svm_train(x, y, o), cfg.seed));
            } else {
                const auto t = baselines::tree_train(x, y, cfg.tree);
                std::printf("tree depth=%zu leaves=%zu\n", t.depth(), t.leaves());
                checkpoint::save(tr_out, baselines::to_container(t, cfg.seed));
            }
        }
        std::printf("wrote %s\n", tr_out.c_str());
        return 0;
    }

    if (*evalc) {
        const auto corpus = corpus_part(ev_data, ev_part);
        const auto batch = dataset::make_windows(corpus, cfg.window).batch;
        const auto labels = batch.labels();
        std::vector<eval::Candidate> cands;
        std::map<std::string, int> seen;
        for (const auto& path : ev_models) {
            std::string name = fs::path(path).stem().string();
            if (int n = seen[name]++; n > 0) name += "_" + std::to_string(n + 1);
            cands.push_back({name, [path, &batch] {
                                 const auto m = AnyModel::load(path);
                                 if (m.window_length() != 0 && m.window_length() != batch.length())
                                     throw Error("eval", Errc::ShapeMismatch, path + ": model window differs from window.length");
                                 return training::decide(training::predict_proba(m, batch));
                             }});
        }
        const auto rows = eval::compare(cands, labels);
        std::printf("test_windows=%zu recordings=%zu\n", batch.size(), batch.num_sources());
        std::fputs(eval::report_table(rows).c_str(), stdout);
        if (ev_report) {
            std::string s = "data=" + ev_data + "\npart=" + ev_part + "\nwindows=" + std::to_string(batch.size()) +
                            "\nrecordings=" + std::to_string(batch.num_sources()) + "\n" + eval::report_kv(rows);
            codec::write_text_atomic(*ev_report, s, "eval");
        }
        return 0;
    }

    if (*streamc) {
        const auto m = AnyModel::load(st_model);
        if (m.window_length() != 0) cfg.stream.window_length = m.window_length();
        cfg.stream.kalman = cfg.kalman;
        auto src = stream::replay_source(st_log, cfg.speedup, cfg.seed);
        const auto r = stream::run_stream(src, m, cfg.stream);
        const auto& s = r.summary;
        std::printf("frames=%zu predictions=%zu alarms=%zu malformed=%zu queue_high_water=%zu\n", s.frames, s.predictions,
                    s.alarms, s.malformed, s.queue_high_water);
        std::printf("latency_us p50=%lld p90=%lld p99=%lld max=%lld\n", static_cast<long long>(s.latency_p50_us),
                    static_cast<long long>(s.latency_p90_us), static_cast<long long>(s.latency_p99_us),
                    static_cast<long long>(s.latency_max_us));
        if (st_events) codec::write_text_atomic(*st_events, stream::format_events(r.events), "stream");
        else std::fputs(stream::format_events(r.events).c_str(), stdout);
        return 0;
    }

    if (*push) {
        if (!pu_session && !pu_model) throw Error("cli", Errc::BadConfig, "push needs --session or --model");
        registry::Client client(registry_address(reg_flag, cfg));
        if (pu_session) {
            for (const auto& k : client.push_session(*pu_session, pu_name.value_or(""))) std::printf("data/%s\n", k.c_str());
        } else {
            const auto ts = pu_ts.value_or(std::chrono::duration_cast<std::chrono::milliseconds>(
                                               std::chrono::system_clock::now().time_since_epoch())
                                               .count());
            const auto etag = client.push_model(*pu_model, ts, pu_name.value_or(""));
            std::printf("etag=%s timestamp_ms=%lld\n", etag.c_str(), static_cast<long long>(ts));
        }
        return 0;
    }

    if (*pull) {
        registry::Client client(registry_address(reg_flag, cfg));
        const auto got = client.pull_latest_model(pl_out);
        std::printf("installed %s (timestamp_ms=%lld) at %s\n", got.key.c_str(), static_cast<long long>(got.timestamp_ms),
                    pl_out.c_str());
        return 0;
    }

    if (*serve) {
        registry::Server server(sv_root);
        std::signal(SIGINT, [](int) { g_stop = 1; });
        std::signal(SIGTERM, [](int) { g_stop = 1; });
        const int port = server.start(sv_host, sv_port);
        std::printf("listening on %s:%d\n", sv_host.c_str(), port);
        std::fflush(stdout);
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        server.stop();
        return 0;
    }

    if (*synthc) {
        const std::uint64_t seed = sy_seed.value_or(2024);
        const auto corpus = sy_kind == "sample" ? synth::sample_corpus(seed) : synth::separable_corpus(sy_per_class, sy_frames, seed);
        dataset::save_corpus(sy_out, corpus);
        std::printf("recordings=%zu\n", corpus.size());
        return 0;
    }

    if (*ingest) {
        const auto corpus = dataset::ingest_umafall(in_dir, cfg.umafall);
        dataset::save_corpus(in_out, corpus);
        std::printf("recordings=%zu\n", corpus.size());
        return 0;
    }
    return 2;
}

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "tsfall: %s\n", e.what());
        return 1;
    }
}
