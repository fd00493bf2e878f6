#include "c2bn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

#include "c2bn/error.hpp"

namespace c2bn::metrics {
namespace {

double ratio(std::uint64_t num, std::uint64_t den, bool& undefined) {
    undefined = den == 0;
    return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void require_nonempty(const ConfusionMatrix& cm, const char* what) {
    if (cm.num_classes == 0 || cm.total() == 0) {
        throw DataError(std::string(what) + ": confusion matrix is empty");
    }
}

}  // namespace

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (std::uint64_t c : counts) t += c;
    return t;
}

std::uint64_t ConfusionMatrix::true_count(std::size_t c) const {
    std::uint64_t t = 0;
    for (std::size_t p = 0; p < num_classes; ++p) t += at(c, p);
    return t;
}

std::uint64_t ConfusionMatrix::predicted_count(std::size_t c) const {
    std::uint64_t t = 0;
    for (std::size_t r = 0; r < num_classes; ++r) t += at(r, c);
    return t;
}

ConfusionMatrix confusion(LabelView y_true, LabelView y_pred, std::size_t num_classes) {
    if (y_true.size() != y_pred.size()) {
        throw ShapeError("confusion: " + std::to_string(y_true.size()) + " true labels vs " +
                         std::to_string(y_pred.size()) + " predictions");
    }
    ConfusionMatrix cm{num_classes, std::vector<std::uint64_t>(num_classes * num_classes, 0)};
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] >= num_classes || y_pred[i] >= num_classes) {
            throw LabelError("confusion: label out of range at sample " + std::to_string(i));
        }
        ++cm.counts[y_true[i] * num_classes + y_pred[i]];
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    require_nonempty(cm, "accuracy");
    std::uint64_t trace = 0;
    for (std::size_t c = 0; c < cm.num_classes; ++c) trace += cm.at(c, c);
    return 100.0 * static_cast<double>(trace) / static_cast<double>(cm.total());
}

WeightedScores weighted_prf(const ConfusionMatrix& cm) {
    require_nonempty(cm, "weighted_prf");
    const double n_total = static_cast<double>(cm.total());
    WeightedScores w;
    std::uint64_t recalled = 0;
    for (std::size_t c = 0; c < cm.num_classes; ++c) {
        ClassScores s;
        const std::uint64_t tp = cm.at(c, c);
        s.support = cm.true_count(c);
        s.precision = ratio(tp, cm.predicted_count(c), s.precision_undefined);
        s.recall = ratio(tp, s.support, s.recall_undefined);
        const double pr = s.precision + s.recall;
        s.f1_undefined = pr == 0.0;
        s.f1 = s.f1_undefined ? 0.0 : 2.0 * s.precision * s.recall / pr;
        const double weight = static_cast<double>(s.support) / n_total;
        w.precision += weight * s.precision;
        w.f1 += weight * s.f1;
        recalled += tp;
        w.per_class.push_back(s);
    }
    // sum_c (N_c / N) * (TP_c / N_c) reduces to sum_c TP_c / N; evaluating the
    // reduced form keeps it bit-identical to accuracy.
    w.recall = 100.0 * static_cast<double>(recalled) / n_total;
    w.precision *= 100.0;
    w.f1 *= 100.0;
    return w;
}

EvalReport evaluate(const std::string& algorithm, LabelView y_true, LabelView y_pred,
                    std::size_t num_classes, const std::vector<std::string>& class_names) {
    EvalReport r;
    r.algorithm = algorithm;
    r.cm = confusion(y_true, y_pred, num_classes);
    r.acc = accuracy(r.cm);
    const WeightedScores w = weighted_prf(r.cm);
    r.pre_w = w.precision;
    r.recall_w = w.recall;
    r.f1_w = w.f1;
    r.per_class = w.per_class;
    for (std::size_t c = 0; c < num_classes; ++c) {
        const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
        const ClassScores& s = w.per_class[c];
        if (s.precision_undefined) r.flags.push_back("precision undefined for " + name + " (never predicted)");
        if (s.recall_undefined) r.flags.push_back("recall undefined for " + name + " (absent from evaluation set)");
    }
    return r;
}

EvalReport failed_report(const std::string& algorithm, const std::string& reason) {
    EvalReport r;
    r.algorithm = algorithm;
    r.ok = false;
    r.failure = reason;
    return r;
}

std::string format_percent(double value) {
    // The 1e-9 nudge keeps values like 79.405 (stored as 79.40499..) rounding up.
    const double rounded = std::floor(value * 100.0 + 0.5 + 1e-9) / 100.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", rounded);
    return buf;
}

std::string reports_to_json(const std::vector<EvalReport>& reports,
                            const std::vector<std::string>& class_names,
                            const std::string& manifest) {
    nlohmann::ordered_json j;
    j["manifest"] = manifest;
    j["classes"] = class_names;
    j["reports"] = nlohmann::ordered_json::array();
    for (const EvalReport& r : reports) {
        nlohmann::ordered_json e;
        e["algorithm"] = r.algorithm;
        e["ok"] = r.ok;
        if (!r.ok) {
            e["failure"] = r.failure;
            j["reports"].push_back(e);
            continue;
        }
        e["acc"] = r.acc;
        e["pre_w"] = r.pre_w;
        e["recall_w"] = r.recall_w;
        e["f1_w"] = r.f1_w;
        e["per_class"] = nlohmann::ordered_json::array();
        for (const ClassScores& s : r.per_class) {
            e["per_class"].push_back({{"precision", s.precision},
                                      {"recall", s.recall},
                                      {"f1", s.f1},
                                      {"support", s.support},
                                      {"precision_undefined", s.precision_undefined},
                                      {"recall_undefined", s.recall_undefined}});
        }
        e["confusion"] = nlohmann::ordered_json::array();
        for (std::size_t t = 0; t < r.cm.num_classes; ++t) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (std::size_t p = 0; p < r.cm.num_classes; ++p) row.push_back(r.cm.at(t, p));
            e["confusion"].push_back(row);
        }
        e["flags"] = r.flags;
        j["reports"].push_back(e);
    }
    return j.dump(2) + "\n";
}

std::vector<EvalReport> reports_from_json(const std::string& text) {
    std::vector<EvalReport> out;
    try {
        const auto j = nlohmann::json::parse(text);
        for (const auto& e : j.at("reports")) {
            EvalReport r;
            r.algorithm = e.at("algorithm").get<std::string>();
            r.ok = e.at("ok").get<bool>();
            if (!r.ok) {
                r.failure = e.value("failure", std::string{});
                out.push_back(r);
                continue;
            }
            r.acc = e.at("acc").get<double>();
            r.pre_w = e.at("pre_w").get<double>();
            r.recall_w = e.at("recall_w").get<double>();
            r.f1_w = e.at("f1_w").get<double>();
            const auto& conf = e.at("confusion");
            r.cm.num_classes = conf.size();
            for (const auto& row : conf) {
                for (const auto& v : row) r.cm.counts.push_back(v.get<std::uint64_t>());
            }
            for (const auto& s : e.at("per_class")) {
                ClassScores cs;
                cs.precision = s.at("precision").get<double>();
                cs.recall = s.at("recall").get<double>();
                cs.f1 = s.at("f1").get<double>();
                cs.support = s.at("support").get<std::uint64_t>();
                cs.precision_undefined = s.at("precision_undefined").get<bool>();
                cs.recall_undefined = s.at("recall_undefined").get<bool>();
                r.per_class.push_back(cs);
            }
            r.flags = e.at("flags").get<std::vector<std::string>>();
            out.push_back(r);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed report file: ") + e.what());
    }
    return out;
}

std::string results_table(const std::vector<EvalReport>& reports) {
    std::size_t name_w = std::string("Algorithms").size();
    for (const EvalReport& r : reports) name_w = std::max(name_w, r.algorithm.size());
    std::ostringstream out;
    auto cell = [&out](const std::string& s) {
        out << "  " << std::string(s.size() < 8 ? 8 - s.size() : 0, ' ') << s;
    };
    out << "Algorithms" << std::string(name_w - 10, ' ');
    for (const char* h : {"Acc", "Pre_w", "Recall_w", "F1_w"}) cell(h);
    out << "\n" << std::string(name_w + 4 * 10, '-') << "\n";
    for (const EvalReport& r : reports) {
        out << r.algorithm << std::string(name_w - r.algorithm.size(), ' ');
        if (!r.ok) {
            out << "  failed: " << r.failure << "\n";
            continue;
        }
        for (double v : {r.acc, r.pre_w, r.recall_w, r.f1_w}) cell(format_percent(v));
        out << "\n";
    }
    return out.str();
}

std::string chart_csv(const std::vector<EvalReport>& reports, const std::string& manifest) {
    std::ostringstream out;
    out << "# " << manifest << "\n";
    out << "algorithm,metric,value\n";
    for (const EvalReport& r : reports) {
        if (!r.ok) continue;
        const std::pair<const char*, double> rows[] = {
            {"Acc", r.acc}, {"Pre_w", r.pre_w}, {"Recall_w", r.recall_w}, {"F1_w", r.f1_w}};
        for (const auto& [metric, v] : rows) {
            out << r.algorithm << "," << metric << "," << format_percent(v) << "\n";
        }
    }
    return out.str();
}

}  // namespace c2bn::metrics
