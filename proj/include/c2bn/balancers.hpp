#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "c2bn/dataset.hpp"
#include "c2bn/model.hpp"

namespace c2bn::balance {

struct BalanceRequest {
    const EncodedDataset* dataset = nullptr;
    std::vector<std::size_t> target_counts;  // per class, >= current count
    std::uint64_t seed = 0;
};

// Every class targeted to the largest class count.
BalanceRequest match_largest(const EncodedDataset& dataset, std::uint64_t seed);

// deficit_c = max(counts) - counts_c
std::vector<std::size_t> target_counts(std::span<const std::size_t> counts);

struct SmoteParams {
    std::size_t k = 5;
};

// Borderline-1: seeds from the DANGER set, interpolation toward same-class neighbors.
struct BorderlineParams {
    std::size_t k = 5;
    std::size_t m = 10;
};

struct KMeansSmoteParams {
    std::size_t k = 5;
    std::size_t n_clusters = 8;
    double imbalance_threshold = 0.5;  // minimum minority fraction of an eligible cluster
    std::size_t max_iter = 300;
};

// One-vs-rest linear soft-margin SVM trained with Pegasos: lambda = 1/(C n),
// step 1/(lambda t), `epochs` passes of n uniformly drawn samples, bias as an
// extra constant feature, projection onto the 1/sqrt(lambda) ball. The hyperplane is the mean iterate of the last pass. Minority rows with y f(x) <= 1 become seeds.
struct SvmSmoteParams {
    std::size_t k = 5;
    double penalty = 1.0;
    std::size_t epochs = 20;
};

// Provenance of one SMOTE-family row: seed + lambda * (neighbor - seed).
struct SyntheticOrigin {
    std::size_t seed_row = 0;
    std::size_t neighbor_row = 0;
    double lambda = 0.0;
};

struct BalanceResult {
    // Original rows, unchanged and in order, followed by synthetic rows grouped by class.
    EncodedDataset data;
    std::vector<std::size_t> synthetic_per_class;
    std::vector<SyntheticOrigin> origins;  // one per synthetic row for SMOTE-family methods
    std::vector<std::pair<std::string, std::string>> parameters;
    std::vector<std::string> notices;  // fallbacks and other logged events
};

BalanceResult random_oversample(const BalanceRequest& request);
BalanceResult smote(const BalanceRequest& request, const SmoteParams& params = {});
BalanceResult borderline_smote(const BalanceRequest& request, const BorderlineParams& params = {});
BalanceResult kmeans_smote(const BalanceRequest& request, const KMeansSmoteParams& params = {});
BalanceResult svm_smote(const BalanceRequest& request, const SvmSmoteParams& params = {});

// Deficits filled from the generator; rows stay in encoded space.
BalanceResult generative_balance(const BalanceRequest& request,
                                 const vae::ModelCheckpoint& checkpoint);

// k nearest rows among `candidates` for each query row (Euclidean, self
// excluded by row id, ties to the lower row id).
std::vector<std::vector<std::size_t>> nearest_neighbors(const Matrix& x,
                                                        std::span<const std::size_t> queries,
                                                        std::span<const std::size_t> candidates,
                                                        std::size_t k);

// Seeded k-means++ followed by Lloyd iterations. Returns the cluster of each row.
std::vector<std::size_t> kmeans(const Matrix& x, std::size_t n_clusters, std::size_t max_iter,
                                std::uint64_t seed);

std::string manifest_json(const BalanceResult& result, const std::string& method,
                          std::uint64_t seed, const std::string& manifest);

}  // namespace c2bn::balance
