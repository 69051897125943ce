#pragma once

// CART classifier: Gini impurity, axis-aligned `x[f] <= threshold` splits at
// midpoints between consecutive distinct values. The best split minimises
// weighted child impurity; ties go to the lowest feature index, then the
// lowest threshold. A split is taken even when it does not reduce impurity
// (XOR needs that at the root).

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsfall/baselines/features.hpp"
#include "tsfall/checkpoint.hpp"
#include "tsfall/error.hpp"

namespace tsfall::baselines {

inline double gini(std::size_t n0, std::size_t n1) {
    const double n = static_cast<double>(n0 + n1);
    if (n == 0) return 0.0;
    const double p0 = static_cast<double>(n0) / n, p1 = static_cast<double>(n1) / n;
    return 1.0 - p0 * p0 - p1 * p1;
}

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    int prediction = 0;
    std::size_t n0 = 0, n1 = 0;
};

struct DecisionTree {
    std::vector<TreeNode> nodes; // nodes[0] is the root

    int predict(std::span<const double> x) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const auto& n = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].prediction;
    }
    std::vector<int> predict(const FeatureMatrix& m) const {
        std::vector<int> out(m.rows);
        for (std::size_t i = 0; i < m.rows; ++i) out[i] = predict(m.row(i));
        return out;
    }
    // Sequence of node indices visited for x.
    std::vector<int> path(std::span<const double> x) const {
        std::vector<int> p{0};
        while (nodes[static_cast<std::size_t>(p.back())].feature >= 0) {
            const auto& n = nodes[static_cast<std::size_t>(p.back())];
            p.push_back(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
        }
        return p;
    }
    std::size_t depth() const { return depth_from(0); }
    std::size_t leaves() const {
        return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
    }

private:
    std::size_t depth_from(int i) const {
        const auto& n = nodes[static_cast<std::size_t>(i)];
        if (n.feature < 0) return 0;
        return 1 + std::max(depth_from(n.left), depth_from(n.right));
    }
};

struct TreeOptions {
    std::size_t max_depth = 8;
    std::size_t min_leaf = 1;
};

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
};

// Exhaustive search over features and midpoints for the rows in `idx`.
inline SplitChoice best_split(const FeatureMatrix& x, std::span<const int> y, std::span<const std::size_t> idx,
                              std::size_t min_leaf) {
    SplitChoice best;
    const std::size_t n = idx.size();
    std::size_t tot1 = 0;
    for (auto i : idx) tot1 += static_cast<std::size_t>(y[i]);
    std::vector<std::size_t> order(idx.begin(), idx.end());
    for (std::size_t f = 0; f < x.dim; ++f) {
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double va = x.row(a)[f], vb = x.row(b)[f];
            return va < vb || (va == vb && a < b);
        });
        std::size_t l0 = 0, l1 = 0;
        for (std::size_t k = 0; k + 1 < n; ++k) {
            (y[order[k]] ? l1 : l0)++;
            const double v = x.row(order[k])[f], vnext = x.row(order[k + 1])[f];
            if (!(v < vnext)) continue;
            const std::size_t nl = k + 1, nr = n - nl;
            if (nl < min_leaf || nr < min_leaf) continue;
            const std::size_t r1 = tot1 - l1, r0 = nr - r1;
            const double imp = (static_cast<double>(nl) * gini(l0, l1) + static_cast<double>(nr) * gini(r0, r1)) /
                               static_cast<double>(n);
            // Strict improvement keeps the lowest feature, then lowest threshold.
            if (best.feature < 0 || imp < best.impurity) best = {static_cast<int>(f), v + (vnext - v) / 2.0, imp};
        }
    }
    return best;
}

namespace detail {
inline int grow(DecisionTree& t, const FeatureMatrix& x, std::span<const int> y, std::vector<std::size_t> idx,
                std::size_t depth, const TreeOptions& opt) {
    TreeNode node;
    for (auto i : idx) (y[i] ? node.n1 : node.n0)++;
    node.prediction = node.n1 > node.n0 ? 1 : 0;
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.push_back(node);
    if (depth >= opt.max_depth || node.n0 == 0 || node.n1 == 0) return id;
    auto s = best_split(x, y, idx, std::max<std::size_t>(opt.min_leaf, 1));
    if (s.feature < 0) return id;
    std::vector<std::size_t> li, ri;
    for (auto i : idx) (x.row(i)[static_cast<std::size_t>(s.feature)] <= s.threshold ? li : ri).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(t, x, y, std::move(li), depth + 1, opt);
    const int r = grow(t, x, y, std::move(ri), depth + 1, opt);
    auto& me = t.nodes[static_cast<std::size_t>(id)];
    me.feature = s.feature;
    me.threshold = s.threshold;
    me.left = l;
    me.right = r;
    return id;
}
} // namespace detail

inline DecisionTree tree_train(const FeatureMatrix& x, std::span<const int> labels, const TreeOptions& opt = {}) {
    if (x.rows == 0 || x.rows != labels.size()) throw Error("baselines", Errc::EmptyData, "tree needs matching nonempty data");
    DecisionTree t;
    std::vector<std::size_t> idx(x.rows);
    std::iota(idx.begin(), idx.end(), 0);
    detail::grow(t, x, labels, std::move(idx), 0, opt);
    return t;
}

inline checkpoint::Container to_container(const DecisionTree& t, std::uint64_t seed) {
    checkpoint::Container c;
    c.header["model_kind"] = "tree";
    c.header["train_seed"] = seed;
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes)
        nodes.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}, {"p", n.prediction},
                         {"n0", n.n0}, {"n1", n.n1}});
    c.header["nodes"] = nodes;
    c.header["params"] = nlohmann::json::array();
    return c;
}

inline DecisionTree tree_from_container(const checkpoint::Container& c) {
    if (c.header.value("model_kind", std::string{}) != "tree") throw Error("baselines", Errc::BadConfig, "not a tree checkpoint");
    DecisionTree t;
    for (const auto& j : c.header.at("nodes")) {
        TreeNode n;
        n.feature = j.at("f").get<int>();
        n.threshold = j.at("t").get<double>();
        n.left = j.at("l").get<int>();
        n.right = j.at("r").get<int>();
        n.prediction = j.at("p").get<int>();
        n.n0 = j.at("n0").get<std::size_t>();
        n.n1 = j.at("n1").get<std::size_t>();
        t.nodes.push_back(n);
    }
    const auto count = static_cast<int>(t.nodes.size());
    if (count == 0) throw Error("baselines", Errc::ShapeMismatch, "empty tree");
    for (const auto& n : t.nodes)
        if (n.feature >= 0 && (n.left <= 0 || n.left >= count || n.right <= 0 || n.right >= count))
            throw Error("baselines", Errc::ShapeMismatch, "tree child index out of range");
    return t;
}

} // namespace tsfall::baselines
