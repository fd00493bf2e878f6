#include "c2bn/balancers.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "json.hpp"

#include "c2bn/checkpoint.hpp"
#include "c2bn/digest.hpp"
#include "c2bn/error.hpp"

namespace c2bn::balance {
namespace {

constexpr Eigen::Index kQueryBlock = 256;

std::size_t uniform_index(std::size_t n, std::mt19937_64& rng) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

double uniform_unit(std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

struct Prepared {
    const EncodedDataset& ds;
    std::vector<std::size_t> counts;
    std::vector<std::size_t> deficits;
    std::vector<std::vector<std::size_t>> rows_by_class;
};

Prepared prepare(const BalanceRequest& req) {
    if (req.dataset == nullptr) throw ConfigError("balance request has no dataset");
    const EncodedDataset& ds = *req.dataset;
    validate(ds);
    Prepared p{ds, class_counts(ds), {}, std::vector<std::vector<std::size_t>>(ds.num_classes)};
    if (req.target_counts.size() != ds.num_classes) {
        throw ConfigError("balance request: " + std::to_string(req.target_counts.size()) +
                          " targets for " + std::to_string(ds.num_classes) + " classes");
    }
    for (std::size_t c = 0; c < ds.num_classes; ++c) {
        if (req.target_counts[c] < p.counts[c]) {
            throw ConfigError("balance request: target for class " + std::to_string(c) +
                              " is below its current count");
        }
        p.deficits.push_back(req.target_counts[c] - p.counts[c]);
    }
    for (std::size_t i = 0; i < ds.labels.size(); ++i) p.rows_by_class[ds.labels[i]].push_back(i);
    return p;
}

// Features are preallocated for every target row; labels grow as rows are written.
BalanceResult start_result(const Prepared& p) {
    BalanceResult r;
    r.data.num_classes = p.ds.num_classes;
    r.data.schema_fingerprint = p.ds.schema_fingerprint;
    r.data.schema = p.ds.schema;
    const std::size_t total =
        p.ds.size() + std::accumulate(p.deficits.begin(), p.deficits.end(), std::size_t{0});
    r.data.features.resize(static_cast<Eigen::Index>(total), p.ds.features.cols());
    r.data.features.topRows(p.ds.features.rows()) = p.ds.features;
    r.data.labels = p.ds.labels;
    r.synthetic_per_class.assign(p.ds.num_classes, 0);
    return r;
}

void require_samples(const Prepared& p, std::size_t minimum, const char* method) {
    for (std::size_t c = 0; c < p.deficits.size(); ++c) {
        if (p.deficits[c] > 0 && p.counts[c] < minimum) {
            throw DataError(std::string(method) + ": class " + std::to_string(c) + " has " +
                            std::to_string(p.counts[c]) + " samples but needs at least " +
                            std::to_string(minimum) + " to synthesize");
        }
    }
}

std::mt19937_64 class_rng(std::uint64_t seed, const std::string& method, std::size_t c) {
    return std::mt19937_64(derive_seed(seed, method + ".class" + std::to_string(c)));
}

// Appends `rows` labeled `label` to the result dataset.
void append_rows(BalanceResult& r, const Matrix& rows, std::size_t label) {
    if (rows.rows() == 0) return;
    const auto at = static_cast<Eigen::Index>(r.data.labels.size());
    r.data.features.middleRows(at, rows.rows()) = rows;
    r.data.labels.insert(r.data.labels.end(), static_cast<std::size_t>(rows.rows()), label);
    r.synthetic_per_class[label] += static_cast<std::size_t>(rows.rows());
}

// Core SMOTE draw: `count` rows, seeds uniform over `seeds`, neighbors among
// the k nearest members of `pool`. Neighbor lists are computed only for seeds
// that are actually drawn.
void interpolate(BalanceResult& r, const Matrix& x, std::span<const std::size_t> seeds,
                 std::span<const std::size_t> pool, std::size_t k, std::size_t count,
                 std::size_t label, std::mt19937_64& rng) {
    if (count == 0) return;
    const std::size_t k_eff = std::min(k, pool.size() - 1);
    struct Draw {
        std::size_t seed, rank;
        double lambda;
    };
    std::vector<Draw> draws(count);
    for (Draw& d : draws) {
        d.seed = seeds[uniform_index(seeds.size(), rng)];
        d.rank = uniform_index(k_eff, rng);
        d.lambda = uniform_unit(rng);
    }
    std::vector<std::size_t> unique_seeds;
    for (const Draw& d : draws) unique_seeds.push_back(d.seed);
    std::sort(unique_seeds.begin(), unique_seeds.end());
    unique_seeds.erase(std::unique(unique_seeds.begin(), unique_seeds.end()), unique_seeds.end());
    const auto nbrs = nearest_neighbors(x, unique_seeds, pool, k_eff);

    Matrix out(static_cast<Eigen::Index>(count), x.cols());
    for (std::size_t i = 0; i < count; ++i) {
        const Draw& d = draws[i];
        const auto pos = static_cast<std::size_t>(
            std::lower_bound(unique_seeds.begin(), unique_seeds.end(), d.seed) - unique_seeds.begin());
        const std::size_t q = nbrs[pos][d.rank];
        const auto p_row = x.row(static_cast<Eigen::Index>(d.seed));
        const auto q_row = x.row(static_cast<Eigen::Index>(q));
        out.row(static_cast<Eigen::Index>(i)) = p_row + d.lambda * (q_row - p_row);
        r.origins.push_back({d.seed, q, d.lambda});
    }
    append_rows(r, out, label);
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

void smote_class(BalanceResult& r, const Prepared& p, std::size_t c, std::size_t k,
                 std::mt19937_64& rng) {
    interpolate(r, p.ds.features, p.rows_by_class[c], p.rows_by_class[c], k, p.deficits[c], c, rng);
}

std::string num(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

BalanceRequest match_largest(const EncodedDataset& dataset, std::uint64_t seed) {
    const auto counts = class_counts(dataset);
    const std::size_t top = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
    return BalanceRequest{&dataset, std::vector<std::size_t>(counts.size(), top), seed};
}

std::vector<std::size_t> target_counts(std::span<const std::size_t> counts) {
    if (counts.empty()) return {};
    const std::size_t top = *std::max_element(counts.begin(), counts.end());
    std::vector<std::size_t> deficits;
    for (std::size_t c : counts) deficits.push_back(top - c);
    return deficits;
}

std::vector<std::vector<std::size_t>> nearest_neighbors(const Matrix& x,
                                                        std::span<const std::size_t> queries,
                                                        std::span<const std::size_t> candidates,
                                                        std::size_t k) {
    std::vector<std::vector<std::size_t>> result(queries.size());
    if (k == 0 || candidates.empty()) return result;
    Matrix cand(static_cast<Eigen::Index>(candidates.size()), x.cols());
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        cand.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(candidates[j]));
    }
    const Eigen::VectorXd cand_sq = cand.rowwise().squaredNorm();
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t start = 0; start < queries.size(); start += kQueryBlock) {
        const std::size_t nb = std::min<std::size_t>(kQueryBlock, queries.size() - start);
        Matrix q(static_cast<Eigen::Index>(nb), x.cols());
        for (std::size_t i = 0; i < nb; ++i) {
            q.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(queries[start + i]));
        }
        const Matrix cross = q * cand.transpose();
        for (std::size_t i = 0; i < nb; ++i) {
            const std::size_t self = queries[start + i];
            const double q_sq = q.row(static_cast<Eigen::Index>(i)).squaredNorm();
            scored.clear();
            for (std::size_t j = 0; j < candidates.size(); ++j) {
                if (candidates[j] == self) continue;
                const double d = q_sq + cand_sq(static_cast<Eigen::Index>(j)) -
                                 2.0 * cross(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                scored.emplace_back(std::max(d, 0.0), candidates[j]);
            }
            const std::size_t take = std::min(k, scored.size());
            std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                              scored.end());
            auto& out = result[start + i];
            for (std::size_t t = 0; t < take; ++t) out.push_back(scored[t].second);
        }
    }
    return result;
}

std::vector<std::size_t> kmeans(const Matrix& x, std::size_t n_clusters, std::size_t max_iter,
                                std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (n_clusters == 0) throw ConfigError("kmeans: n_clusters must be >= 1");
    if (n == 0) return {};
    const std::size_t kc = std::min(n_clusters, n);
    std::mt19937_64 rng(seed);

    // k-means++ seeding.
    Matrix centers(static_cast<Eigen::Index>(kc), x.cols());
    centers.row(0) = x.row(static_cast<Eigen::Index>(uniform_index(n, rng)));
    Eigen::VectorXd closest = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (std::size_t c = 1; c < kc; ++c) {
        const double total = closest.sum();
        std::size_t pick = 0;
        if (total > 0.0) {
            double target = uniform_unit(rng) * total;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                target -= closest(static_cast<Eigen::Index>(i));
                if (target < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = uniform_index(n, rng);
        }
        centers.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(pick));
        const Eigen::VectorXd d =
            (x.rowwise() - centers.row(static_cast<Eigen::Index>(c))).rowwise().squaredNorm();
        closest = closest.cwiseMin(d);
    }

    std::vector<std::size_t> assign(n, 0);
    const Eigen::VectorXd x_sq = x.rowwise().squaredNorm();
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        const Eigen::VectorXd c_sq = centers.rowwise().squaredNorm();
        const Matrix cross = x * centers.transpose();
        bool changed = iter == 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < kc; ++c) {
                const double d = x_sq(static_cast<Eigen::Index>(i)) + c_sq(static_cast<Eigen::Index>(c)) -
                                 2.0 * cross(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assign[i] != best) changed = true;
            assign[i] = best;
        }
        if (!changed) break;
        Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(kc), x.cols());
        std::vector<std::size_t> sizes(kc, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums.row(static_cast<Eigen::Index>(assign[i])) += x.row(static_cast<Eigen::Index>(i));
            ++sizes[assign[i]];
        }
        for (std::size_t c = 0; c < kc; ++c) {
            // Empty clusters keep their previous center.
            if (sizes[c] > 0) {
                centers.row(static_cast<Eigen::Index>(c)) =
                    sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(sizes[c]);
            }
        }
    }
    return assign;
}

BalanceResult random_oversample(const BalanceRequest& request) {
    const Prepared p = prepare(request);
    require_samples(p, 1, "random_oversample");
    BalanceResult r = start_result(p);
    for (std::size_t c = 0; c < p.deficits.size(); ++c) {
        if (p.deficits[c] == 0) continue;
        auto rng = class_rng(request.seed, "random", c);
        const auto& rows = p.rows_by_class[c];
        Matrix out(static_cast<Eigen::Index>(p.deficits[c]), p.ds.features.cols());
        for (std::size_t i = 0; i < p.deficits[c]; ++i) {
            out.row(static_cast<Eigen::Index>(i)) =
                p.ds.features.row(static_cast<Eigen::Index>(rows[uniform_index(rows.size(), rng)]));
        }
        append_rows(r, out, c);
    }
    return r;
}

BalanceResult smote(const BalanceRequest& request, const SmoteParams& params) {
    if (params.k == 0) throw ConfigError("smote: k must be >= 1");
    const Prepared p = prepare(request);
    require_samples(p, 2, "smote");
    BalanceResult r = start_result(p);
    r.parameters = {{"k", std::to_string(params.k)}};
    for (std::size_t c = 0; c < p.deficits.size(); ++c) {
        if (p.deficits[c] == 0) continue;
        auto rng = class_rng(request.seed, "smote", c);
        smote_class(r, p, c, params.k, rng);
    }
    return r;
}

BalanceResult borderline_smote(const BalanceRequest& request, const BorderlineParams& params) {
    if (params.k == 0 || params.m == 0) throw ConfigError("borderline_smote: k and m must be >= 1");
    const Prepared p = prepare(request);
    require_samples(p, 2, "borderline_smote");
    BalanceResult r = start_result(p);
    r.parameters = {{"k", std::to_string(params.k)}, {"m", std::to_string(params.m)}};
    const auto everyone = all_rows(p.ds.size());
    for (std::size_t c = 0; c < p.deficits.size(); ++c) {
        if (p.deficits[c] == 0) continue;
        auto rng = class_rng(request.seed, "borderline", c);
        const auto& minority = p.rows_by_class[c];
        const auto nbrs = nearest_neighbors(p.ds.features, minority, everyone, params.m);
        std::vector<std::size_t> danger;
        for (std::size_t i = 0; i < minority.size(); ++i) {
            std::size_t other = 0;
            for (std::size_t q : nbrs[i]) other += p.ds.labels[q] != c ? 1 : 0;
            const std::size_t m_eff = nbrs[i].size();
            // m/2 <= other < m, written without halving.
            if (2 * other >= m_eff && other < m_eff) danger.push_back(minority[i]);
        }
        if (danger.empty()) {
            r.notices.push_back("borderline_smote: class " + std::to_string(c) +
                                " has an empty DANGER set; fell back to smote");
            smote_class(r, p, c, params.k, rng);
            continue;
        }
        interpolate(r, p.ds.features, danger, minority, params.k, p.deficits[c], c, rng);
    }
    return r;
}

BalanceResult kmeans_smote(const BalanceRequest& request, const KMeansSmoteParams& params) {
    if (params.k == 0) throw ConfigError("kmeans_smote: k must be >= 1");
    if (params.n_clusters == 0) throw ConfigError("kmeans_smote: n_clusters must be >= 1");
    const Prepared p = prepare(request);
    require_samples(p, 2, "kmeans_smote");
    BalanceResult r = start_result(p);
    r.parameters = {{"k", std::to_string(params.k)},
                    {"n_clusters", std::to_string(params.n_clusters)},
                    {"imbalance_threshold", num(params.imbalance_threshold)},
                    {"max_iter", std::to_string(params.max_iter)}};
    const bool any_deficit =
        std::any_of(p.deficits.begin(), p.deficits.end(), [](std::size_t d) { return d > 0; });
    if (!any_deficit) return r;

    const auto assign = kmeans(p.ds.features, params.n_clusters, params.max_iter,
                               derive_seed(request.seed, "kmeans_smote.clusters"));
    const std::size_t kc = assign.empty() ? 0 : *std::max_element(assign.begin(), assign.end()) + 1;
    std::vector<std::size_t> cluster_size(kc, 0);
    for (std::size_t a : assign) ++cluster_size[a];

    for (std::size_t c = 0; c < p.deficits.size(); ++c) {
        if (p.deficits[c] == 0) continue;
        auto rng = class_rng(request.seed, "kmeans_smote", c);
        std::vector<std::vector<std::size_t>> members(kc);
        for (std::size_t row : p.rows_by_class[c]) members[assign[row]].push_back(row);
        std::vector<std::size_t> eligible;
        for (std::size_t k = 0; k < kc; ++k) {
            const double frac = cluster_size[k] == 0 ? 0.0
                                                      : static_cast<double>(members[k].size()) /
                                                            static_cast<double>(cluster_size[k]);
            if (members[k].size() >= 2 && frac > params.imbalance_threshold) eligible.push_back(k);
        }
        if (eligible.empty()) {
            r.notices.push_back("kmeans_smote: no cluster qualifies for class " + std::to_string(c) +
                                "; fell back to smote");
            smote_class(r, p, c, params.k, rng);
            continue;
        }
        // Largest-remainder apportionment proportional to minority count.
        std::size_t weight_total = 0;
        for (std::size_t k : eligible) weight_total += members[k].size();
        std::vector<std::size_t> share(eligible.size());
        std::vector<std::pair<double, std::size_t>> remainders;
        std::size_t assigned = 0;
        for (std::size_t i = 0; i < eligible.size(); ++i) {
            const double exact = static_cast<double>(p.deficits[c]) *
                                 static_cast<double>(members[eligible[i]].size()) /
                                 static_cast<double>(weight_total);
            share[i] = static_cast<std::size_t>(std::floor(exact));
            assigned += share[i];
            remainders.emplace_back(-(exact - std::floor(exact)), i);
        }
        std::sort(remainders.begin(), remainders.end());
        for (std::size_t i = 0; assigned < p.deficits[c]; ++i, ++assigned) {
            ++share[remainders[i % remainders.size()].second];
        }
        for (std::size_t i = 0; i < eligible.size(); ++i) {
            const auto& pool = members[eligible[i]];
            interpolate(r, p.ds.features, pool, pool, params.k, share[i], c, rng);
        }
    }
    return r;
}

BalanceResult svm_smote(const BalanceRequest& request, const SvmSmoteParams& params) {
    if (params.k == 0) throw ConfigError("svm_smote: k must be >= 1");
    if (!(params.penalty > 0.0)) throw ConfigError("svm_smote: penalty must be positive");
    if (params.epochs == 0) throw ConfigError("svm_smote: epochs must be >= 1");
    const Prepared p = prepare(request);
    require_samples(p, 2, "svm_smote");
    BalanceResult r = start_result(p);
    r.parameters = {{"k", std::to_string(params.k)},
                    {"penalty", num(params.penalty)},
                    {"epochs", std::to_string(params.epochs)}};
    const Matrix& x = p.ds.features;
    const std::size_t n = p.ds.size();
    for (std::size_t c = 0; c < p.deficits.size(); ++c) {
        if (p.deficits[c] == 0) continue;
        if (n - p.counts[c] < 2) {
            throw DataError("svm_smote: class " + std::to_string(c) +
                            " has fewer than 2 rows on the other side of the one-vs-rest split");
        }
        auto rng = class_rng(request.seed, "svm_smote", c);
        const double lambda = 1.0 / (params.penalty * static_cast<double>(n));
        const double radius = 1.0 / std::sqrt(lambda);
        Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(x.cols());
        double bias = 0.0;  // weight of the constant feature
        Eigen::RowVectorXd w_avg = Eigen::RowVectorXd::Zero(x.cols());
        double bias_avg = 0.0;
        const std::size_t steps = params.epochs * n;
        const std::size_t average_from = steps - n + 1;
        for (std::size_t t = 1; t <= steps; ++t) {
            const std::size_t i = uniform_index(n, rng);
            const double y = p.ds.labels[i] == c ? 1.0 : -1.0;
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            const double margin = y * (x.row(static_cast<Eigen::Index>(i)).dot(w) + bias);
            const double shrink = 1.0 - eta * lambda;
            w *= shrink;
            bias *= shrink;
            if (margin < 1.0) {
                w += eta * y * x.row(static_cast<Eigen::Index>(i));
                bias += eta * y;
            }
            const double norm = std::sqrt(w.squaredNorm() + bias * bias);
            if (norm > radius) {
                w *= radius / norm;
                bias *= radius / norm;
            }
            if (t >= average_from) {
                w_avg += w;
                bias_avg += bias;
            }
        }
        w = w_avg / static_cast<double>(n);
        bias = bias_avg / static_cast<double>(n);
        std::vector<std::size_t> support;
        for (std::size_t row : p.rows_by_class[c]) {
            if (x.row(static_cast<Eigen::Index>(row)).dot(w) + bias <= 1.0) support.push_back(row);
        }
        if (support.empty()) {
            r.notices.push_back("svm_smote: no minority support vectors for class " +
                                std::to_string(c) + "; fell back to smote");
            smote_class(r, p, c, params.k, rng);
            continue;
        }
        interpolate(r, x, support, p.rows_by_class[c], params.k, p.deficits[c], c, rng);
    }
    return r;
}

BalanceResult generative_balance(const BalanceRequest& request,
                                 const vae::ModelCheckpoint& checkpoint) {
    const Prepared p = prepare(request);
    vae::require_matching_schema(checkpoint, p.ds);
    if (checkpoint.config().num_classes < p.ds.num_classes) {
        throw ConfigError("generative_balance: generator knows " +
                          std::to_string(checkpoint.config().num_classes) + " classes, dataset has " +
                          std::to_string(p.ds.num_classes));
    }
    BalanceResult r = start_result(p);
    r.parameters = {{"generator_norm", vae::to_string(checkpoint.config().norm)},
                    {"schema_fingerprint", checkpoint.schema_fingerprint}};
    for (std::size_t c = 0; c < p.deficits.size(); ++c) {
        if (p.deficits[c] == 0) continue;
        auto rng = class_rng(request.seed, "generative", c);
        append_rows(r, vae::generate(c, p.deficits[c], checkpoint, rng), c);
    }
    return r;
}

std::string manifest_json(const BalanceResult& result, const std::string& method,
                          std::uint64_t seed, const std::string& manifest) {
    nlohmann::ordered_json j;
    j["manifest"] = manifest;
    j["method"] = method;
    j["seed"] = seed;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& [k, v] : result.parameters) params[k] = v;
    j["parameters"] = params;
    j["synthetic_per_class"] = result.synthetic_per_class;
    j["notices"] = result.notices;
    return j.dump(2) + "\n";
}

}  // namespace c2bn::balance
