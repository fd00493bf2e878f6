#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c2bn/matrix.hpp"

namespace c2bn::dtree {

struct TreeParams {
    std::size_t max_depth = 0;  // 0 = unlimited
    std::size_t min_samples_split = 2;
    double min_gain = 0.0;

    void validate() const;
};

// Flat arena node. Internal nodes route value <= threshold to `left`.
struct TreeNode {
    bool leaf = true;
    std::size_t feature = 0;
    double threshold = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    std::size_t predicted = 0;
    std::vector<std::uint64_t> histogram;
};

class DecisionTree {
public:
    std::vector<TreeNode> nodes;  // nodes[0] is the root; children follow parents
    std::size_t num_features = 0;
    std::size_t num_classes = 0;

    std::size_t depth() const;
    std::size_t leaf_count() const;

    // One node per line, pre-order:
    //   "<indent>split f<feature> <= <threshold>" or "<indent>leaf <class> [h0,h1,...]"
    std::string export_text() const;
};

// Gini impurity 1 - sum (n_c / n)^2. Throws DataError on all-zero counts.
double gini(std::span<const std::uint64_t> counts);

struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;  // parent Gini minus size-weighted child Gini
};

// Exhaustive scan over features and midpoints of consecutive distinct values.
// Highest gain wins; ties go to the lower feature, then the lower threshold.
// Returns nothing for a pure node, when no feature varies, or when the best
// gain is below params.min_gain. A zero-gain partition is still a split
// (needed for XOR-like structure under greedy growth).
std::optional<Split> best_split(const Matrix& features, LabelView labels, std::size_t num_classes,
                                const TreeParams& params = {});

DecisionTree fit(const Matrix& features, LabelView labels, std::size_t num_classes,
                 const TreeParams& params = {});

Labels predict(const DecisionTree& tree, const Matrix& rows);

}  // namespace c2bn::dtree
