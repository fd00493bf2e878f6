#include "c2bn/dtree.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "c2bn/error.hpp"

namespace c2bn::dtree {
namespace {

using u128 = unsigned __int128;

std::size_t argmax_class(const std::vector<std::uint64_t>& hist) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < hist.size(); ++c) {
        if (hist[c] > hist[best]) best = c;
    }
    return best;
}

double midpoint(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    return (mid >= hi || mid < lo) ? lo : mid;
}

struct Candidate {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double score = 0.0;  // sum_l^2 / n_l + sum_r^2 / n_r; larger is better
    std::uint64_t left_sq = 0, right_sq = 0, n_left = 0, n_right = 0;
};

// Scans one node. `sorted(f)` yields the node's row indices ordered by feature f.
template <typename SortedFn>
Candidate scan_node(const Matrix& x, LabelView labels, std::size_t num_classes,
                    const std::vector<std::uint64_t>& hist, std::size_t n, SortedFn sorted) {
    Candidate best;
    std::vector<std::uint64_t> left(num_classes), right(num_classes);
    std::uint64_t total_sq = 0;
    for (std::uint64_t c : hist) total_sq += c * c;
    for (std::size_t f = 0; f < static_cast<std::size_t>(x.cols()); ++f) {
        const std::span<const std::uint32_t> rows = sorted(f);
        std::fill(left.begin(), left.end(), 0);
        std::copy(hist.begin(), hist.end(), right.begin());
        std::uint64_t lsq = 0, rsq = total_sq;
        const auto fi = static_cast<Eigen::Index>(f);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const std::size_t c = labels[rows[i]];
            lsq += 2 * left[c] + 1;
            rsq -= 2 * right[c] - 1;
            ++left[c];
            --right[c];
            const double v = x(static_cast<Eigen::Index>(rows[i]), fi);
            const double next = x(static_cast<Eigen::Index>(rows[i + 1]), fi);
            if (!(v < next)) continue;
            const std::uint64_t nl = i + 1, nr = n - nl;
            const double score =
                static_cast<double>(lsq) / static_cast<double>(nl) +
                static_cast<double>(rsq) / static_cast<double>(nr);
            if (!best.found || score > best.score) {
                best = {true, f, midpoint(v, next), score, lsq, rsq, nl, nr};
            }
        }
    }
    return best;
}

// Gini gain of a candidate, exactly 0 when the partition does not change the
// weighted impurity.
double candidate_gain(const Candidate& c, std::uint64_t total_sq, std::uint64_t n) {
    const u128 lhs = (static_cast<u128>(c.left_sq) * c.n_right +
                      static_cast<u128>(c.right_sq) * c.n_left) * n;
    const u128 rhs = static_cast<u128>(total_sq) * c.n_left * c.n_right;
    if (lhs <= rhs) return 0.0;
    const double nd = static_cast<double>(n);
    return (c.score - static_cast<double>(total_sq) / nd) / nd;
}

std::uint64_t sum_sq(const std::vector<std::uint64_t>& hist) {
    std::uint64_t s = 0;
    for (std::uint64_t c : hist) s += c * c;
    return s;
}

std::vector<std::uint64_t> histogram(LabelView labels, std::span<const std::uint32_t> rows,
                                     std::size_t num_classes) {
    std::vector<std::uint64_t> hist(num_classes, 0);
    for (std::uint32_t r : rows) {
        if (labels[r] >= num_classes) {
            throw LabelError("decision tree: label " + std::to_string(labels[r]) +
                             " out of range for " + std::to_string(num_classes) + " classes");
        }
        ++hist[labels[r]];
    }
    return hist;
}

void check_inputs(const Matrix& features, LabelView labels, std::size_t num_classes) {
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw ShapeError("decision tree: " + std::to_string(labels.size()) + " labels for " +
                         shape_of(features));
    }
    if (num_classes == 0) throw ConfigError("decision tree: num_classes must be >= 1");
    if (labels.size() > 0xFFFFFFFFu) throw DataError("decision tree: too many rows");
}

std::vector<std::uint32_t> presort(const Matrix& x, std::size_t f) {
    std::vector<std::uint32_t> idx(static_cast<std::size_t>(x.rows()));
    std::iota(idx.begin(), idx.end(), 0u);
    const auto fi = static_cast<Eigen::Index>(f);
    std::stable_sort(idx.begin(), idx.end(), [&x, fi](std::uint32_t a, std::uint32_t b) {
        return x(a, fi) < x(b, fi);
    });
    return idx;
}

}  // namespace

void TreeParams::validate() const {
    if (min_samples_split < 2) throw ConfigError("tree params: min_samples_split must be >= 2");
    if (!(min_gain >= 0.0)) throw ConfigError("tree params: min_gain must be >= 0");
}

double gini(std::span<const std::uint64_t> counts) {
    std::uint64_t n = 0;
    for (std::uint64_t c : counts) n += c;
    if (n == 0) throw DataError("gini: all class counts are zero");
    double s = 0.0;
    for (std::uint64_t c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(n);
        s += p * p;
    }
    return 1.0 - s;
}

std::optional<Split> best_split(const Matrix& features, LabelView labels, std::size_t num_classes,
                                const TreeParams& params) {
    check_inputs(features, labels, num_classes);
    params.validate();
    const std::size_t n = labels.size();
    if (n < params.min_samples_split) return std::nullopt;
    std::vector<std::uint32_t> all(n);
    std::iota(all.begin(), all.end(), 0u);
    const auto hist = histogram(labels, all, num_classes);
    if (std::count_if(hist.begin(), hist.end(), [](std::uint64_t c) { return c > 0; }) < 2) {
        return std::nullopt;
    }
    std::vector<std::vector<std::uint32_t>> sorted(static_cast<std::size_t>(features.cols()));
    for (std::size_t f = 0; f < sorted.size(); ++f) sorted[f] = presort(features, f);
    const Candidate c = scan_node(features, labels, num_classes, hist, n,
                                  [&sorted](std::size_t f) {
                                      return std::span<const std::uint32_t>(sorted[f]);
                                  });
    if (!c.found) return std::nullopt;
    const double gain = candidate_gain(c, sum_sq(hist), n);
    if (gain < params.min_gain) return std::nullopt;
    return Split{c.feature, c.threshold, gain};
}

DecisionTree fit(const Matrix& features, LabelView labels, std::size_t num_classes,
                 const TreeParams& params) {
    check_inputs(features, labels, num_classes);
    params.validate();
    const std::size_t n = labels.size();
    if (n == 0) throw DataError("decision tree: empty training set");
    const std::size_t d = static_cast<std::size_t>(features.cols());

    // sorted[f * n + i]: rows ordered by feature f. Every node owns the same
    // [begin, end) slice in each feature's ordering.
    std::vector<std::uint32_t> sorted(d * n);
    for (std::size_t f = 0; f < d; ++f) {
        const auto idx = presort(features, f);
        std::copy(idx.begin(), idx.end(), sorted.begin() + static_cast<std::ptrdiff_t>(f * n));
    }
    std::vector<std::uint32_t> rows0(n);
    std::iota(rows0.begin(), rows0.end(), 0u);

    DecisionTree tree;
    tree.num_features = d;
    tree.num_classes = num_classes;

    struct Work {
        std::size_t node, begin, end, depth;
    };
    tree.nodes.push_back(TreeNode{});
    std::vector<Work> stack{{0, 0, n, 0}};
    std::vector<std::uint8_t> goes_left(n, 0);
    std::vector<std::uint32_t> scratch(n);

    while (!stack.empty()) {
        const Work w = stack.back();
        stack.pop_back();
        const std::size_t count = w.end - w.begin;
        auto slice = [&sorted, n, &w](std::size_t f) {
            return std::span<const std::uint32_t>(sorted.data() + f * n + w.begin, w.end - w.begin);
        };
        // Any feature's slice lists the node's rows; take feature 0 (or the
        // identity order when there are no features).
        const auto node_rows = d > 0 ? slice(0)
                                     : std::span<const std::uint32_t>(rows0.data() + w.begin, count);
        TreeNode& node = tree.nodes[w.node];
        node.histogram = histogram(labels, node_rows, num_classes);
        node.predicted = argmax_class(node.histogram);
        node.leaf = true;

        const bool depth_ok = params.max_depth == 0 || w.depth < params.max_depth;
        const bool impure = node.histogram[node.predicted] < count;
        if (!depth_ok || !impure || count < params.min_samples_split || d == 0) continue;

        const Candidate c = scan_node(features, labels, num_classes, node.histogram, count, slice);
        if (!c.found) continue;
        if (candidate_gain(c, sum_sq(node.histogram), count) < params.min_gain) continue;

        const auto fi = static_cast<Eigen::Index>(c.feature);
        for (std::uint32_t r : node_rows) {
            goes_left[r] = features(static_cast<Eigen::Index>(r), fi) <= c.threshold ? 1 : 0;
        }
        std::size_t n_left = 0;
        for (std::size_t f = 0; f < d; ++f) {
            std::uint32_t* seg = sorted.data() + f * n + w.begin;
            std::size_t l = 0, r = 0;
            for (std::size_t i = 0; i < count; ++i) {
                if (goes_left[seg[i]]) {
                    seg[l++] = seg[i];
                } else {
                    scratch[r++] = seg[i];
                }
            }
            std::copy(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(r), seg + l);
            n_left = l;
        }

        const std::size_t left_id = tree.nodes.size();
        tree.nodes.push_back(TreeNode{});
        tree.nodes.push_back(TreeNode{});
        TreeNode& parent = tree.nodes[w.node];
        parent.leaf = false;
        parent.feature = c.feature;
        parent.threshold = c.threshold;
        parent.left = left_id;
        parent.right = left_id + 1;
        // Right pushed first so the left subtree is grown first.
        stack.push_back({left_id + 1, w.begin + n_left, w.end, w.depth + 1});
        stack.push_back({left_id, w.begin, w.begin + n_left, w.depth + 1});
    }
    return tree;
}

Labels predict(const DecisionTree& tree, const Matrix& rows) {
    if (static_cast<std::size_t>(rows.cols()) != tree.num_features) {
        throw ShapeError("predict: rows " + shape_of(rows) + " but the tree was trained on " +
                         std::to_string(tree.num_features) + " features");
    }
    if (tree.nodes.empty()) throw ConfigError("predict: tree is empty");
    Labels out(static_cast<std::size_t>(rows.rows()));
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        std::size_t id = 0;
        while (!tree.nodes[id].leaf) {
            const TreeNode& nd = tree.nodes[id];
            id = rows(r, static_cast<Eigen::Index>(nd.feature)) <= nd.threshold ? nd.left : nd.right;
        }
        out[static_cast<std::size_t>(r)] = tree.nodes[id].predicted;
    }
    return out;
}

std::size_t DecisionTree::depth() const {
    if (nodes.empty()) return 0;
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        const auto [id, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        if (!nodes[id].leaf) {
            stack.push_back({nodes[id].left, d + 1});
            stack.push_back({nodes[id].right, d + 1});
        }
    }
    return best;
}

std::size_t DecisionTree::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.leaf; }));
}

std::string DecisionTree::export_text() const {
    std::ostringstream out;
    out.precision(17);
    std::vector<std::pair<std::size_t, std::size_t>> stack;
    if (!nodes.empty()) stack.push_back({0, 0});
    while (!stack.empty()) {
        const auto [id, d] = stack.back();
        stack.pop_back();
        const TreeNode& nd = nodes[id];
        out << std::string(2 * d, ' ');
        if (nd.leaf) {
            out << "leaf " << nd.predicted << " [";
            for (std::size_t c = 0; c < nd.histogram.size(); ++c) {
                out << (c ? "," : "") << nd.histogram[c];
            }
            out << "]\n";
        } else {
            out << "split f" << nd.feature << " <= " << nd.threshold << "\n";
            stack.push_back({nd.right, d + 1});
            stack.push_back({nd.left, d + 1});
        }
    }
    return out.str();
}

}  // namespace c2bn::dtree
