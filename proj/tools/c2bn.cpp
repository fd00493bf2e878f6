// c2bn: preprocess NSL-KDD, train generators, run the balancing comparison.
//
// Exit codes: 0 success, 1 usage/config, 2 data, 3 training failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "c2bn/digest.hpp"
#include "c2bn/error.hpp"
#include "c2bn/experiment.hpp"

using namespace c2bn;
namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<double> subsample;
    std::optional<std::size_t> pad_to;
    std::optional<std::size_t> epochs;
    std::string out, train, test, taxonomy;
    std::vector<std::string> algorithms;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config, "JSON experiment config");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--subsample", o.subsample, "stratified fraction of the training split, (0, 1]");
    cmd->add_option("--pad-to", o.pad_to, "pad encoded rows to this width (0 disables)");
    cmd->add_option("--epochs", o.epochs, "generator training epochs");
    cmd->add_option("-o,--out", o.out, "output directory");
    cmd->add_option("--train", o.train, "KDDTrain+ file");
    cmd->add_option("--test", o.test, "KDDTest+ file");
    cmd->add_option("--taxonomy", o.taxonomy, "attack taxonomy CSV");
}

experiment::ExperimentConfig resolve(const Overrides& o) {
    experiment::ExperimentConfig cfg =
        o.config.empty() ? experiment::ExperimentConfig{} : experiment::load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.subsample) cfg.subsample = *o.subsample;
    if (o.pad_to) cfg.pad_to = *o.pad_to;
    if (o.epochs) cfg.model.epochs = *o.epochs;
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (!o.train.empty()) cfg.train_file = o.train;
    if (!o.test.empty()) cfg.test_file = o.test;
    if (!o.taxonomy.empty()) cfg.taxonomy_file = o.taxonomy;
    if (!o.algorithms.empty()) cfg.algorithms = o.algorithms;
    cfg.validate();
    return cfg;
}

std::string file_digest(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return sha256_hex(buf.str());
}

int cmd_preprocess(const Overrides& o) {
    const auto cfg = resolve(o);
    const auto data = experiment::prepare(cfg);
    experiment::write_prepared(data, cfg);
    std::cout << "# " << cfg.manifest() << "\n" << experiment::counts_summary(data);
    return 0;
}

int cmd_train_gen(const Overrides& o, const std::string& norm) {
    const auto cfg = resolve(o);
    const auto data = experiment::load_prepared(cfg);
    const auto kind = vae::parse_norm_kind(norm);
    const auto result = experiment::train_generator(cfg, data, kind, std::cerr);
    const auto paths = experiment::generator_paths(cfg, kind);
    std::cout << "# " << cfg.manifest() << "\n"
              << "checkpoint " << paths.checkpoint.string() << "\n"
              << "sha256 " << file_digest(paths.checkpoint) << "\n"
              << "epochs " << result.trace.size() << "\n";
    return 0;
}

int cmd_run_all(const Overrides& o) {
    const auto cfg = resolve(o);
    const auto data = experiment::load_prepared(cfg);
    const auto out = experiment::run_all(cfg, data, std::cerr);
    std::cout << "# " << cfg.manifest() << "\n" << metrics::results_table(out.reports);
    std::cerr << "wrote " << out.table.string() << ", " << out.json.string() << ", "
              << out.chart.string() << "\n";
    return 0;
}

int cmd_count(const Overrides& o, std::optional<std::size_t> feature_dim) {
    const auto cfg = resolve(o);
    vae::ModelConfig m = cfg.model;
    // 122 is the natural width of the standard NSL-KDD encoding.
    m.feature_dim = feature_dim ? *feature_dim : (cfg.pad_to == 0 ? 122 : cfg.pad_to);
    m.num_classes = nslkdd::ClassTaxonomy::category_names().size();
    std::cout << "# " << cfg.manifest() << "\n"
              << "# feature_dim " << m.feature_dim << ", classes " << m.num_classes << ", latent "
              << m.latent_dim << "\n"
              << experiment::count_table(m);
    return 0;
}

int cmd_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open report file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const auto reports = metrics::reports_from_json(buf.str());
    std::cout << metrics::results_table(reports);
    for (const auto& r : reports) {
        for (const auto& f : r.flags) std::cout << "note [" << r.algorithm << "]: " << f << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"C2BNVAE class balancing for NSL-KDD intrusion detection"};
    app.require_subcommand(1);
    Overrides o;
    std::string norm = "conditional";
    std::optional<std::size_t> feature_dim;
    std::string report_path;

    auto* pre = app.add_subcommand("preprocess", "encode train/test files and fit the schema");
    add_common(pre, o);
    auto* gen = app.add_subcommand("train-gen", "train a generator on the encoded training split");
    add_common(gen, o);
    gen->add_option("--norm", norm, "conditional (C2BNVAE) or batch (CVAE)")
        ->check(CLI::IsMember({"conditional", "batch"}));
    auto* run = app.add_subcommand("run-all", "balance, fit the tree and evaluate every algorithm");
    add_common(run, o);
    run->add_option("--algorithms", o.algorithms, "subset of algorithms to run");
    auto* count = app.add_subcommand("count", "parameter and FLOP counts of the generator");
    add_common(count, o);
    count->add_option("--feature-dim", feature_dim, "encoded input width");
    auto* report = app.add_subcommand("report", "print the results table from a reports.json");
    report->add_option("reports", report_path, "reports.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*pre) return cmd_preprocess(o);
        if (*gen) return cmd_train_gen(o, norm);
        if (*run) return cmd_run_all(o);
        if (*count) return cmd_count(o, feature_dim);
        if (*report) return cmd_report(report_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const TrainingError& e) {
        std::cerr << "training failed: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
