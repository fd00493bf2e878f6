#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "c2bn/matrix.hpp"

namespace c2bn::metrics {

// Rows = true class, columns = predicted class.
struct ConfusionMatrix {
    std::size_t num_classes = 0;
    std::vector<std::uint64_t> counts;

    std::uint64_t at(std::size_t truth, std::size_t pred) const {
        return counts[truth * num_classes + pred];
    }
    std::uint64_t total() const;
    std::uint64_t true_count(std::size_t c) const;       // row sum, N_c
    std::uint64_t predicted_count(std::size_t c) const;  // column sum
};

ConfusionMatrix confusion(LabelView y_true, LabelView y_pred, std::size_t num_classes);

// Percentages in [0, 100].
double accuracy(const ConfusionMatrix& cm);

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
    // Zero denominators: the term is reported as 0 and flagged here.
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
};

struct WeightedScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::vector<ClassScores> per_class;  // fractions, not percentages
};

// Per-class terms weighted by true-class frequency N_c / N_total.
WeightedScores weighted_prf(const ConfusionMatrix& cm);

struct EvalReport {
    std::string algorithm;
    bool ok = true;
    std::string failure;  // reason when !ok
    double acc = 0.0;
    double pre_w = 0.0;
    double recall_w = 0.0;
    double f1_w = 0.0;
    std::vector<ClassScores> per_class;
    ConfusionMatrix cm;
    std::vector<std::string> flags;
};

EvalReport evaluate(const std::string& algorithm, LabelView y_true, LabelView y_pred,
                    std::size_t num_classes, const std::vector<std::string>& class_names = {});

EvalReport failed_report(const std::string& algorithm, const std::string& reason);

// Two decimals, half-up.
std::string format_percent(double value);

std::string reports_to_json(const std::vector<EvalReport>& reports,
                            const std::vector<std::string>& class_names,
                            const std::string& manifest);
std::vector<EvalReport> reports_from_json(const std::string& text);

// Aligned text table with Acc / Pre_w / Recall_w / F1_w columns.
std::string results_table(const std::vector<EvalReport>& reports);

// Long-form rows (algorithm,metric,value) for bar charts.
std::string chart_csv(const std::vector<EvalReport>& reports, const std::string& manifest);

}  // namespace c2bn::metrics
