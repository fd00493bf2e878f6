#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "c2bn/balancers.hpp"
#include "c2bn/dataset.hpp"
#include "c2bn/dtree.hpp"
#include "c2bn/metrics.hpp"
#include "c2bn/model.hpp"
#include "c2bn/nslkdd.hpp"

namespace c2bn::experiment {

// Row order of the results table.
const std::vector<std::string>& algorithm_names();
// Human-readable row label for an algorithm name.
std::string display_name(const std::string& algorithm);

struct BalancerSettings {
    balance::SmoteParams smote;
    balance::BorderlineParams borderline;
    balance::KMeansSmoteParams kmeans_smote;
    balance::SvmSmoteParams svm_smote;
};

struct ExperimentConfig {
    std::filesystem::path train_file = "KDDTrain+.txt";
    std::filesystem::path test_file = "KDDTest+.txt";
    std::filesystem::path taxonomy_file = "data/taxonomy.csv";
    std::filesystem::path output_dir = "out";
    // feature_dim and num_classes are taken from the data at run time.
    vae::ModelConfig model;
    BalancerSettings balancers;
    dtree::TreeParams tree;
    std::vector<std::string> algorithms = algorithm_names();
    std::uint64_t seed = 0;
    std::size_t pad_to = 123;  // 0 keeps the natural width
    double subsample = 1.0;    // stratified fraction of the training split

    void validate() const;

    // Canonical JSON of every setting that affects results (paths excluded).
    std::string settings_json() const;
    // First 16 hex digits of the SHA-256 of settings_json().
    std::string digest() const;
    // "c2bn <version> config=<digest> seed=<seed>"
    std::string manifest() const;
};

// JSON config. Relative paths resolve against `base_dir`. Unknown keys are errors.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

struct PreparedData {
    EncodedDataset train;
    EncodedDataset test;
    std::shared_ptr<const nslkdd::EncodingSchema> schema;
};

// Parse, fit the schema, encode both splits, subsample the training split.
PreparedData prepare(const ExperimentConfig& cfg);

// Summary table of per-class counts for both splits.
std::string counts_summary(const PreparedData& data);

// Writes schema.json, train.bin, test.bin and counts.csv under output_dir.
void write_prepared(const PreparedData& data, const ExperimentConfig& cfg);
PreparedData load_prepared(const ExperimentConfig& cfg);

// Model config for a generator on `data`, seeded from the master seed.
vae::ModelConfig generator_config(const ExperimentConfig& cfg, const EncodedDataset& train,
                                  vae::NormKind norm);
std::string generator_tag(vae::NormKind norm);  // "cvae" or "c2bnvae"

struct GeneratorArtifacts {
    std::filesystem::path checkpoint;
    std::filesystem::path trace;
};
GeneratorArtifacts generator_paths(const ExperimentConfig& cfg, vae::NormKind norm);

// Trains and writes the checkpoint and loss trace.
vae::TrainResult train_generator(const ExperimentConfig& cfg, const PreparedData& data,
                                 vae::NormKind norm, std::ostream& log);

// Loads an existing checkpoint when it matches the expected config and
// schema, otherwise trains one.
vae::ModelCheckpoint obtain_generator(const ExperimentConfig& cfg, const PreparedData& data,
                                      vae::NormKind norm, std::ostream& log);

// Balance (or not), fit the tree, evaluate on the test split.
metrics::EvalReport run_algorithm(const std::string& algorithm, const ExperimentConfig& cfg,
                                  const PreparedData& data, std::ostream& log);

struct RunOutputs {
    std::vector<metrics::EvalReport> reports;
    std::filesystem::path table;
    std::filesystem::path json;
    std::filesystem::path chart;
};

// Every configured algorithm in table order; a failing row records its reason
// and the others continue.
RunOutputs run_all(const ExperimentConfig& cfg, const PreparedData& data, std::ostream& log);

// Encoder/decoder/total counts under the reporting convention next to the
// stored-trainable counts.
std::string count_table(const vae::ModelConfig& model);

}  // namespace c2bn::experiment
