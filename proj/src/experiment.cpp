#include "c2bn/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "c2bn/checkpoint.hpp"
#include "c2bn/cost.hpp"
#include "c2bn/digest.hpp"
#include "c2bn/error.hpp"

namespace c2bn::experiment {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
        if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

fs::path resolve(const fs::path& p, const fs::path& base) {
    return p.is_absolute() || base.empty() ? p : base / p;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

json model_json(const vae::ModelConfig& m) {
    return json{{"latent_dim", m.latent_dim},
                {"hidden_widths", m.hidden_widths},
                {"lr", m.lr},
                {"epochs", m.epochs},
                {"batch_size", m.batch_size},
                {"kl_weight", m.kl_weight},
                {"cbn_placement", vae::to_string(m.cbn_placement)},
                {"leaky_slope", m.leaky_slope},
                {"norm_eps", m.norm_eps},
                {"norm_momentum", m.norm_momentum}};
}

json balancers_json(const BalancerSettings& b) {
    return json{{"smote", {{"k", b.smote.k}}},
                {"borderline", {{"k", b.borderline.k}, {"m", b.borderline.m}}},
                {"kmeans_smote",
                 {{"k", b.kmeans_smote.k},
                  {"n_clusters", b.kmeans_smote.n_clusters},
                  {"imbalance_threshold", b.kmeans_smote.imbalance_threshold},
                  {"max_iter", b.kmeans_smote.max_iter}}},
                {"svm_smote",
                 {{"k", b.svm_smote.k}, {"penalty", b.svm_smote.penalty}, {"epochs", b.svm_smote.epochs}}}};
}

json settings(const ExperimentConfig& c) {
    return json{{"seed", c.seed},
                {"pad_to", c.pad_to},
                {"subsample", c.subsample},
                {"algorithms", c.algorithms},
                {"model", model_json(c.model)},
                {"balancers", balancers_json(c.balancers)},
                {"tree",
                 {{"max_depth", c.tree.max_depth},
                  {"min_samples_split", c.tree.min_samples_split},
                  {"min_gain", c.tree.min_gain}}}};
}

metrics::EvalReport fit_and_score(const std::string& label, const EncodedDataset& train,
                                  const EncodedDataset& test, const dtree::TreeParams& params,
                                  std::ostream& log) {
    const auto t0 = std::chrono::steady_clock::now();
    const dtree::DecisionTree tree = dtree::fit(train.features, train.labels, train.num_classes, params);
    const Labels pred = dtree::predict(tree, test.features);
    log << "[" << label << "] tree: " << tree.nodes.size() << " nodes, depth " << tree.depth()
        << ", " << fixed(seconds_since(t0), 1) << "s\n";
    return metrics::evaluate(label, test.labels, pred, test.num_classes,
                             nslkdd::ClassTaxonomy::category_names());
}

}  // namespace

const std::vector<std::string>& algorithm_names() {
    static const std::vector<std::string> names{"original",     "random",    "smote", "borderline",
                                                "kmeans_smote", "svm_smote", "cvae",  "c2bnvae"};
    return names;
}

std::string display_name(const std::string& algorithm) {
    static const std::map<std::string, std::string> names{
        {"original", "Original imbalanced"}, {"random", "Random oversampling"},
        {"smote", "SMOTE"},                  {"borderline", "Borderline SMOTE"},
        {"kmeans_smote", "KMeans SMOTE"},    {"svm_smote", "SVM SMOTE"},
        {"cvae", "CVAE"},                    {"c2bnvae", "C2BNVAE"}};
    const auto it = names.find(algorithm);
    return it == names.end() ? algorithm : it->second;
}

void ExperimentConfig::validate() const {
    if (train_file.empty() || test_file.empty() || taxonomy_file.empty() || output_dir.empty()) {
        throw ConfigError("config: paths must be nonempty");
    }
    if (!(subsample > 0.0 && subsample <= 1.0)) throw ConfigError("config: subsample must lie in (0, 1]");
    if (algorithms.empty()) throw ConfigError("config: no algorithms selected");
    const auto& known = algorithm_names();
    std::set<std::string> seen;
    for (const auto& a : algorithms) {
        if (std::find(known.begin(), known.end(), a) == known.end()) {
            throw ConfigError("config: unknown algorithm '" + a + "'");
        }
        if (!seen.insert(a).second) throw ConfigError("config: algorithm '" + a + "' listed twice");
    }
    tree.validate();
    vae::ModelConfig probe = model;
    probe.feature_dim = std::max<std::size_t>(probe.feature_dim, 1);
    probe.validate();
}

std::string ExperimentConfig::settings_json() const { return settings(*this).dump(); }

std::string ExperimentConfig::digest() const { return sha256_hex(settings_json()).substr(0, 16); }

std::string ExperimentConfig::manifest() const {
    return std::string("c2bn ") + kArtifactVersion + " config=" + digest() + " seed=" + std::to_string(seed);
}

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig c;
    check_keys(j, {"paths", "seed", "pad_to", "subsample", "algorithms", "model", "balancers", "tree"},
               "config");
    if (j.contains("paths")) {
        const json& p = j["paths"];
        check_keys(p, {"train", "test", "taxonomy", "output"}, "paths");
        std::string s;
        if (p.contains("train")) read(p, "train", s, "paths"), c.train_file = resolve(s, base_dir);
        if (p.contains("test")) read(p, "test", s, "paths"), c.test_file = resolve(s, base_dir);
        if (p.contains("taxonomy")) read(p, "taxonomy", s, "paths"), c.taxonomy_file = resolve(s, base_dir);
        if (p.contains("output")) read(p, "output", s, "paths"), c.output_dir = resolve(s, base_dir);
    }
    read(j, "seed", c.seed, "config");
    read(j, "pad_to", c.pad_to, "config");
    read(j, "subsample", c.subsample, "config");
    read(j, "algorithms", c.algorithms, "config");
    if (j.contains("model")) {
        const json& m = j["model"];
        check_keys(m, {"latent_dim", "hidden_widths", "lr", "epochs", "batch_size", "kl_weight",
                       "cbn_placement", "leaky_slope", "norm_eps", "norm_momentum"},
                   "model");
        read(m, "latent_dim", c.model.latent_dim, "model");
        read(m, "hidden_widths", c.model.hidden_widths, "model");
        read(m, "lr", c.model.lr, "model");
        read(m, "epochs", c.model.epochs, "model");
        read(m, "batch_size", c.model.batch_size, "model");
        read(m, "kl_weight", c.model.kl_weight, "model");
        std::string placement;
        read(m, "cbn_placement", placement, "model");
        if (!placement.empty()) c.model.cbn_placement = vae::parse_cbn_placement(placement);
        read(m, "leaky_slope", c.model.leaky_slope, "model");
        read(m, "norm_eps", c.model.norm_eps, "model");
        read(m, "norm_momentum", c.model.norm_momentum, "model");
    }
    if (j.contains("balancers")) {
        const json& b = j["balancers"];
        check_keys(b, {"smote", "borderline", "kmeans_smote", "svm_smote"}, "balancers");
        if (b.contains("smote")) {
            check_keys(b["smote"], {"k"}, "balancers.smote");
            read(b["smote"], "k", c.balancers.smote.k, "balancers.smote");
        }
        if (b.contains("borderline")) {
            const json& s = b["borderline"];
            check_keys(s, {"k", "m"}, "balancers.borderline");
            read(s, "k", c.balancers.borderline.k, "balancers.borderline");
            read(s, "m", c.balancers.borderline.m, "balancers.borderline");
        }
        if (b.contains("kmeans_smote")) {
            const json& s = b["kmeans_smote"];
            check_keys(s, {"k", "n_clusters", "imbalance_threshold", "max_iter"}, "balancers.kmeans_smote");
            read(s, "k", c.balancers.kmeans_smote.k, "balancers.kmeans_smote");
            read(s, "n_clusters", c.balancers.kmeans_smote.n_clusters, "balancers.kmeans_smote");
            read(s, "imbalance_threshold", c.balancers.kmeans_smote.imbalance_threshold,
                 "balancers.kmeans_smote");
            read(s, "max_iter", c.balancers.kmeans_smote.max_iter, "balancers.kmeans_smote");
        }
        if (b.contains("svm_smote")) {
            const json& s = b["svm_smote"];
            check_keys(s, {"k", "penalty", "epochs"}, "balancers.svm_smote");
            read(s, "k", c.balancers.svm_smote.k, "balancers.svm_smote");
            read(s, "penalty", c.balancers.svm_smote.penalty, "balancers.svm_smote");
            read(s, "epochs", c.balancers.svm_smote.epochs, "balancers.svm_smote");
        }
    }
    if (j.contains("tree")) {
        const json& t = j["tree"];
        check_keys(t, {"max_depth", "min_samples_split", "min_gain"}, "tree");
        read(t, "max_depth", c.tree.max_depth, "tree");
        read(t, "min_samples_split", c.tree.min_samples_split, "tree");
        read(t, "min_gain", c.tree.min_gain, "tree");
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["paths"] = {{"train", cfg.train_file.string()},
                  {"test", cfg.test_file.string()},
                  {"taxonomy", cfg.taxonomy_file.string()},
                  {"output", cfg.output_dir.string()}};
    const json rest = settings(cfg);
    for (const auto& [k, v] : rest.items()) j[k] = v;
    return j.dump(2) + "\n";
}

PreparedData prepare(const ExperimentConfig& cfg) {
    cfg.validate();
    const nslkdd::ClassTaxonomy taxonomy = nslkdd::ClassTaxonomy::load(cfg.taxonomy_file);
    const auto train_records = nslkdd::load_records(cfg.train_file);
    const auto test_records = nslkdd::load_records(cfg.test_file);
    auto schema = std::make_shared<const nslkdd::EncodingSchema>(
        nslkdd::fit_schema(train_records, test_records, cfg.pad_to));
    PreparedData data{nslkdd::transform(train_records, schema, taxonomy),
                      nslkdd::transform(test_records, schema, taxonomy), schema};
    if (cfg.subsample < 1.0) {
        const auto keep = stratified_subsample(data.train.labels, data.train.num_classes, cfg.subsample,
                                               derive_seed(cfg.seed, "subsample"));
        data.train = select_rows(data.train, keep);
    }
    return data;
}

std::string counts_summary(const PreparedData& data) {
    const auto& names = nslkdd::ClassTaxonomy::category_names();
    const auto train = class_counts(data.train);
    const auto test = class_counts(data.test);
    std::ostringstream out;
    char line[128];
    std::snprintf(line, sizeof line, "%-8s %10s %10s\n", "class", "train", "test");
    out << line;
    for (std::size_t c = 0; c < names.size(); ++c) {
        std::snprintf(line, sizeof line, "%-8s %10zu %10zu\n", names[c].c_str(), train[c], test[c]);
        out << line;
    }
    std::snprintf(line, sizeof line, "%-8s %10zu %10zu\n", "total", data.train.size(), data.test.size());
    out << line;
    out << "feature_dim " << data.schema->feature_dim << " (natural " << data.schema->natural_dim << ")\n";
    return out.str();
}

void write_prepared(const PreparedData& data, const ExperimentConfig& cfg) {
    fs::create_directories(cfg.output_dir);
    data.schema->save(cfg.output_dir / "schema.json");
    save_dataset(data.train, cfg.output_dir / "train.bin", cfg.manifest());
    save_dataset(data.test, cfg.output_dir / "test.bin", cfg.manifest());
    const auto& names = nslkdd::ClassTaxonomy::category_names();
    const auto train = class_counts(data.train);
    const auto test = class_counts(data.test);
    std::ostringstream csv;
    csv << "# " << cfg.manifest() << "\nclass,train,test\n";
    for (std::size_t c = 0; c < names.size(); ++c) csv << names[c] << "," << train[c] << "," << test[c] << "\n";
    write_text(cfg.output_dir / "counts.csv", csv.str());
}

PreparedData load_prepared(const ExperimentConfig& cfg) {
    const fs::path schema_path = cfg.output_dir / "schema.json";
    if (!fs::exists(schema_path)) {
        throw DataError("no preprocessed data in " + cfg.output_dir.string() + "; run preprocess first");
    }
    auto schema = std::make_shared<const nslkdd::EncodingSchema>(nslkdd::EncodingSchema::load(schema_path));
    PreparedData data{load_dataset(cfg.output_dir / "train.bin"), load_dataset(cfg.output_dir / "test.bin"),
                      schema};
    for (EncodedDataset* ds : {&data.train, &data.test}) {
        if (ds->schema_fingerprint != schema->fingerprint) {
            throw FingerprintMismatch("preprocessed data in " + cfg.output_dir.string() +
                                      " does not match schema.json");
        }
        ds->schema = schema;
    }
    return data;
}

std::string generator_tag(vae::NormKind norm) {
    return norm == vae::NormKind::conditional ? "c2bnvae" : "cvae";
}

vae::ModelConfig generator_config(const ExperimentConfig& cfg, const EncodedDataset& train,
                                  vae::NormKind norm) {
    vae::ModelConfig m = cfg.model;
    m.feature_dim = train.feature_dim();
    m.num_classes = train.num_classes;
    m.norm = norm;
    m.seed = derive_seed(cfg.seed, "generator." + generator_tag(norm));
    return m;
}

GeneratorArtifacts generator_paths(const ExperimentConfig& cfg, vae::NormKind norm) {
    const std::string tag = generator_tag(norm);
    return {cfg.output_dir / ("generator_" + tag + ".ckpt"), cfg.output_dir / ("loss_" + tag + ".csv")};
}

vae::TrainResult train_generator(const ExperimentConfig& cfg, const PreparedData& data,
                                 vae::NormKind norm, std::ostream& log) {
    const vae::ModelConfig m = generator_config(cfg, data.train, norm);
    const std::string tag = generator_tag(norm);
    log << "[" << tag << "] training " << m.epochs << " epochs on " << data.train.size() << " rows\n";
    const auto t0 = std::chrono::steady_clock::now();
    vae::TrainResult result = vae::train(data.train, m);
    log << "[" << tag << "] trained in " << fixed(seconds_since(t0), 1) << "s";
    if (!result.trace.empty()) log << ", final loss " << result.trace.back().total;
    log << "\n";
    fs::create_directories(cfg.output_dir);
    const GeneratorArtifacts paths = generator_paths(cfg, norm);
    vae::save_checkpoint(result.checkpoint, paths.checkpoint, cfg.manifest());
    std::ofstream trace(paths.trace);
    vae::write_loss_trace_csv(trace, result.trace, cfg.manifest());
    if (!trace) throw DataError("cannot write " + paths.trace.string());
    return result;
}

vae::ModelCheckpoint obtain_generator(const ExperimentConfig& cfg, const PreparedData& data,
                                      vae::NormKind norm, std::ostream& log) {
    const GeneratorArtifacts paths = generator_paths(cfg, norm);
    if (fs::exists(paths.checkpoint)) {
        vae::ModelCheckpoint ckpt = vae::load_checkpoint(paths.checkpoint);
        if (ckpt.config() == generator_config(cfg, data.train, norm) &&
            ckpt.schema_fingerprint == data.train.schema_fingerprint) {
            log << "[" << generator_tag(norm) << "] reusing " << paths.checkpoint.string() << "\n";
            return ckpt;
        }
        log << "[" << generator_tag(norm) << "] checkpoint does not match the config; retraining\n";
    }
    return train_generator(cfg, data, norm, log).checkpoint;
}

metrics::EvalReport run_algorithm(const std::string& algorithm, const ExperimentConfig& cfg,
                                  const PreparedData& data, std::ostream& log) {
    const std::string label = display_name(algorithm);
    if (algorithm == "original") return fit_and_score(label, data.train, data.test, cfg.tree, log);

    const balance::BalanceRequest request =
        balance::match_largest(data.train, derive_seed(cfg.seed, "balance." + algorithm));
    const auto t0 = std::chrono::steady_clock::now();
    balance::BalanceResult balanced;
    if (algorithm == "random") {
        balanced = balance::random_oversample(request);
    } else if (algorithm == "smote") {
        balanced = balance::smote(request, cfg.balancers.smote);
    } else if (algorithm == "borderline") {
        balanced = balance::borderline_smote(request, cfg.balancers.borderline);
    } else if (algorithm == "kmeans_smote") {
        balanced = balance::kmeans_smote(request, cfg.balancers.kmeans_smote);
    } else if (algorithm == "svm_smote") {
        balanced = balance::svm_smote(request, cfg.balancers.svm_smote);
    } else if (algorithm == "cvae" || algorithm == "c2bnvae") {
        const auto norm = algorithm == "cvae" ? vae::NormKind::batch : vae::NormKind::conditional;
        balanced = balance::generative_balance(request, obtain_generator(cfg, data, norm, log));
    } else {
        throw ConfigError("unknown algorithm '" + algorithm + "'");
    }
    log << "[" << label << "] balanced to " << balanced.data.size() << " rows in "
        << fixed(seconds_since(t0), 1) << "s\n";
    for (const auto& notice : balanced.notices) log << "[" << label << "] " << notice << "\n";
    fs::create_directories(cfg.output_dir);
    write_text(cfg.output_dir / ("balance_" + algorithm + ".json"),
               balance::manifest_json(balanced, algorithm, request.seed, cfg.manifest()));

    metrics::EvalReport report = fit_and_score(label, balanced.data, data.test, cfg.tree, log);
    report.flags.insert(report.flags.end(), balanced.notices.begin(), balanced.notices.end());
    return report;
}

RunOutputs run_all(const ExperimentConfig& cfg, const PreparedData& data, std::ostream& log) {
    RunOutputs out;
    for (const std::string& name : algorithm_names()) {
        if (std::find(cfg.algorithms.begin(), cfg.algorithms.end(), name) == cfg.algorithms.end()) continue;
        try {
            out.reports.push_back(run_algorithm(name, cfg, data, log));
        } catch (const std::exception& e) {
            log << "[" << display_name(name) << "] failed: " << e.what() << "\n";
            out.reports.push_back(metrics::failed_report(display_name(name), e.what()));
        }
    }
    fs::create_directories(cfg.output_dir);
    out.table = cfg.output_dir / "results.txt";
    out.json = cfg.output_dir / "reports.json";
    out.chart = cfg.output_dir / "chart.csv";
    write_text(out.table, "# " + cfg.manifest() + "\n" + metrics::results_table(out.reports));
    write_text(out.json, metrics::reports_to_json(out.reports, nslkdd::ClassTaxonomy::category_names(),
                                                  cfg.manifest()));
    write_text(out.chart, metrics::chart_csv(out.reports, cfg.manifest()));
    return out;
}

std::string count_table(const vae::ModelConfig& model) {
    const nn::CostReport report = nn::count_params_flops(vae::architecture(model));
    std::ostringstream out;
    char line[128];
    std::snprintf(line, sizeof line, "%-10s %12s %12s %12s\n", "component", "params", "flops", "trainable");
    out << line;
    auto row = [&](const nn::CostEntry& e) {
        std::snprintf(line, sizeof line, "%-10s %12llu %12llu %12llu\n", e.name.c_str(),
                      static_cast<unsigned long long>(e.params), static_cast<unsigned long long>(e.flops),
                      static_cast<unsigned long long>(e.trainable_params));
        out << line;
    };
    for (const auto& e : report.components) row(e);
    row(report.total);
    return out.str();
}

}  // namespace c2bn::experiment
