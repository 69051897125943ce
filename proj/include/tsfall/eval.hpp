#pragma once

#include <algorithm>
#include <cstdio>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tsfall/error.hpp"

namespace tsfall::eval {

// Confusion counts with the fall class (1) as positive. A ratio whose
// denominator is zero is left empty rather than reported as 0.
struct EvalReport {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::optional<double> accuracy, precision, recall, f1;

    std::size_t total() const { return tp + fp + fn + tn; }
    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

inline std::optional<double> f1_score(std::optional<double> p, std::optional<double> r) {
    if (!p || !r || *p + *r == 0.0) return std::nullopt;
    return 2.0 * *p * *r / (*p + *r);
}

inline EvalReport from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
    EvalReport r{tp, fp, fn, tn, {}, {}, {}, {}};
    const auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    r.accuracy = ratio(tp + tn, tp + tn + fp + fn);
    r.precision = ratio(tp, tp + fp);
    r.recall = ratio(tp, tp + fn);
    r.f1 = f1_score(r.precision, r.recall);
    return r;
}

inline EvalReport confusion(std::span<const int> preds, std::span<const int> labels) {
    if (preds.size() != labels.size())
        throw Error("eval", Errc::LengthMismatch,
                    std::to_string(preds.size()) + " predictions vs " + std::to_string(labels.size()) + " labels");
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if ((preds[i] != 0 && preds[i] != 1) || (labels[i] != 0 && labels[i] != 1))
            throw Error("eval", Errc::BadRange, "non-binary value at index " + std::to_string(i));
        if (preds[i] == 1) (labels[i] == 1 ? tp : fp)++;
        else (labels[i] == 1 ? fn : tn)++;
    }
    return from_counts(tp, fp, fn, tn);
}

inline std::string fmt_metric(std::optional<double> v, int digits = 4) {
    if (!v) return "undefined";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
    return buf;
}

struct NamedReport {
    std::string model;
    EvalReport report;
};

// A model under comparison maps the test set to binary predictions.
struct Candidate {
    std::string name;
    std::function<std::vector<int>()> predict;
};

inline std::vector<NamedReport> compare(const std::vector<Candidate>& models, std::span<const int> test_labels) {
    if (test_labels.empty()) throw Error("eval", Errc::EmptyTestSet, "");
    std::vector<NamedReport> rows;
    rows.reserve(models.size());
    for (const auto& m : models) rows.push_back({m.name, confusion(m.predict(), test_labels)});
    return rows;
}

// `model.<name>.<field>=<value>` lines, one per field.
inline std::string report_kv(const std::vector<NamedReport>& rows) {
    std::ostringstream os;
    for (const auto& r : rows) {
        const std::string p = "model." + r.model + ".";
        os << p << "tp=" << r.report.tp << '\n'
           << p << "fp=" << r.report.fp << '\n'
           << p << "fn=" << r.report.fn << '\n'
           << p << "tn=" << r.report.tn << '\n'
           << p << "accuracy=" << fmt_metric(r.report.accuracy, 6) << '\n'
           << p << "precision=" << fmt_metric(r.report.precision, 6) << '\n'
           << p << "recall=" << fmt_metric(r.report.recall, 6) << '\n'
           << p << "f1=" << fmt_metric(r.report.f1, 6) << '\n';
    }
    return os.str();
}

inline std::string report_table(const std::vector<NamedReport>& rows) {
    std::size_t w = 5;
    for (const auto& r : rows) w = std::max(w, r.model.size());
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*s %6s %6s %6s %6s %10s %10s %10s %10s\n", static_cast<int>(w), "model", "TP", "FP",
                  "FN", "TN", "accuracy", "precision", "recall", "f1");
    os << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-*s %6zu %6zu %6zu %6zu %10s %10s %10s %10s\n", static_cast<int>(w),
                      r.model.c_str(), r.report.tp, r.report.fp, r.report.fn, r.report.tn,
                      fmt_metric(r.report.accuracy).c_str(), fmt_metric(r.report.precision).c_str(),
                      fmt_metric(r.report.recall).c_str(), fmt_metric(r.report.f1).c_str());
        os << buf;
    }
    return os.str();
}

} // namespace tsfall::eval
