#include "c2bn/model.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "c2bn/digest.hpp"
#include "c2bn/error.hpp"

namespace c2bn::vae {
namespace {

Labels norm_labels(const nn::CbnParamBank& bank, LabelView y) {
    if (bank.num_classes == 1) return Labels(y.size(), 0);
    return Labels(y.begin(), y.end());
}

void check_batch(const Matrix& x, LabelView y, std::size_t width, const char* what) {
    if (static_cast<std::size_t>(x.cols()) != width) {
        throw ShapeError(std::string(what) + ": input " + shape_of(x) + " but the model expects " +
                         std::to_string(width) + " columns");
    }
    if (y.size() != static_cast<std::size_t>(x.rows())) {
        throw ShapeError(std::string(what) + ": " + std::to_string(y.size()) + " labels for input " +
                         shape_of(x));
    }
}

Matrix hidden_stack_eval(Matrix h, const std::vector<nn::LinearLayer>& layers,
                         const nn::CbnParamBank& bank, LabelView y, double slope) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = nn::linear_forward(h, layers[i]);
        if (i + 1 == layers.size()) h = nn::cbn_forward(h, norm_labels(bank, y), bank);
        h = nn::leaky_relu(h, slope);
    }
    return h;
}

nn::Tape::Var hidden_stack_tape(nn::Tape& tape, nn::Tape::Var h,
                                std::vector<nn::LinearLayer>& layers, nn::CbnParamBank& bank,
                                LabelView y, double slope, bool training) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = tape.linear(h, tape.parameter(layers[i].weights), tape.parameter(layers[i].bias));
        if (i + 1 == layers.size()) {
            const Labels nl = norm_labels(bank, y);
            h = tape.norm(h, nl, tape.parameter(bank.gamma), tape.parameter(bank.beta), bank,
                          training);
        }
        h = tape.leaky_relu(h, slope);
    }
    return h;
}

template <typename Model, typename Ptr>
std::vector<std::pair<std::string, Ptr>> collect_parameters(Model& m) {
    std::vector<std::pair<std::string, Ptr>> out;
    auto add_linear = [&out](const std::string& prefix, auto& layer) {
        out.emplace_back(prefix + ".weights", &layer.weights);
        out.emplace_back(prefix + ".bias", &layer.bias);
    };
    for (std::size_t i = 0; i < m.encoder.hidden.size(); ++i) {
        add_linear("encoder.hidden" + std::to_string(i), m.encoder.hidden[i]);
    }
    out.emplace_back("encoder.norm.gamma", &m.encoder.norm.gamma);
    out.emplace_back("encoder.norm.beta", &m.encoder.norm.beta);
    add_linear("encoder.mu_head", m.encoder.mu_head);
    add_linear("encoder.logvar_head", m.encoder.logvar_head);
    for (std::size_t i = 0; i < m.decoder.hidden.size(); ++i) {
        add_linear("decoder.hidden" + std::to_string(i), m.decoder.hidden[i]);
    }
    out.emplace_back("decoder.norm.gamma", &m.decoder.norm.gamma);
    out.emplace_back("decoder.norm.beta", &m.decoder.norm.beta);
    add_linear("decoder.output", m.decoder.output);
    return out;
}

template <typename Model, typename Ptr>
std::vector<std::pair<std::string, Ptr>> collect_buffers(Model& m) {
    return {{"encoder.norm.running_mean", &m.encoder.norm.running_mean},
            {"encoder.norm.running_var", &m.encoder.norm.running_var},
            {"decoder.norm.running_mean", &m.decoder.norm.running_mean},
            {"decoder.norm.running_var", &m.decoder.norm.running_var}};
}

}  // namespace

std::size_t ModelConfig::encoder_norm_classes() const {
    return norm == NormKind::conditional && cbn_placement == CbnPlacement::encoder_and_decoder
               ? num_classes
               : 1;
}

std::size_t ModelConfig::decoder_norm_classes() const {
    return norm == NormKind::conditional ? num_classes : 1;
}

void ModelConfig::validate() const {
    if (feature_dim == 0 || num_classes == 0 || latent_dim == 0) {
        throw ConfigError("model config: feature_dim, num_classes and latent_dim must be >= 1");
    }
    if (hidden_widths.empty()) throw ConfigError("model config: need at least one hidden layer");
    for (std::size_t w : hidden_widths) {
        if (w == 0) throw ConfigError("model config: hidden widths must be >= 1");
    }
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("model config: lr must be positive");
    if (batch_size == 0) throw ConfigError("model config: batch_size must be >= 1");
    if (!(kl_weight >= 0.0) || !std::isfinite(kl_weight)) {
        throw ConfigError("model config: kl_weight must be >= 0");
    }
    if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
        throw ConfigError("model config: leaky_slope must lie in [0, 1)");
    }
}

std::string to_string(NormKind k) {
    return k == NormKind::conditional ? "conditional" : "batch";
}

std::string to_string(CbnPlacement p) {
    return p == CbnPlacement::decoder_only ? "decoder_only" : "encoder_and_decoder";
}

NormKind parse_norm_kind(const std::string& s) {
    if (s == "conditional") return NormKind::conditional;
    if (s == "batch") return NormKind::batch;
    throw ConfigError("unknown norm kind '" + s + "' (expected conditional|batch)");
}

CbnPlacement parse_cbn_placement(const std::string& s) {
    if (s == "decoder_only") return CbnPlacement::decoder_only;
    if (s == "encoder_and_decoder") return CbnPlacement::encoder_and_decoder;
    throw ConfigError("unknown cbn placement '" + s + "'");
}

C2bnvae C2bnvae::initialize(const ModelConfig& config) {
    config.validate();
    std::mt19937_64 rng(derive_seed(config.seed, "vae.init"));
    C2bnvae m;
    m.config = config;
    const auto& widths = config.hidden_widths;
    std::size_t in = config.encoder_input_dim();
    for (std::size_t w : widths) {
        m.encoder.hidden.push_back(nn::make_linear(in, w, rng));
        in = w;
    }
    m.encoder.norm = nn::CbnParamBank::create(config.encoder_norm_classes(), widths.back(),
                                              config.norm_eps, config.norm_momentum);
    m.encoder.mu_head = nn::make_linear(widths.back(), config.latent_dim, rng);
    m.encoder.logvar_head = nn::make_linear(widths.back(), config.latent_dim, rng);
    in = config.decoder_input_dim();
    for (std::size_t w : widths) {
        m.decoder.hidden.push_back(nn::make_linear(in, w, rng));
        in = w;
    }
    m.decoder.norm = nn::CbnParamBank::create(config.decoder_norm_classes(), widths.back(),
                                              config.norm_eps, config.norm_momentum);
    m.decoder.output = nn::make_linear(widths.back(), config.feature_dim, rng);
    return m;
}

std::vector<std::pair<std::string, Matrix*>> C2bnvae::named_parameters() {
    return collect_parameters<C2bnvae, Matrix*>(*this);
}

std::vector<std::pair<std::string, const Matrix*>> C2bnvae::named_parameters() const {
    return collect_parameters<const C2bnvae, const Matrix*>(*this);
}

std::vector<std::pair<std::string, Matrix*>> C2bnvae::named_buffers() {
    return collect_buffers<C2bnvae, Matrix*>(*this);
}

std::vector<std::pair<std::string, const Matrix*>> C2bnvae::named_buffers() const {
    return collect_buffers<const C2bnvae, const Matrix*>(*this);
}

Posterior encode(const Matrix& x, LabelView y, const C2bnvae& model) {
    const ModelConfig& cfg = model.config;
    check_batch(x, y, cfg.feature_dim, "encode");
    Matrix h = concat_cols(x, one_hot(y, cfg.num_classes));
    h = hidden_stack_eval(std::move(h), model.encoder.hidden, model.encoder.norm, y, cfg.leaky_slope);
    return {nn::linear_forward(h, model.encoder.mu_head),
            nn::linear_forward(h, model.encoder.logvar_head)};
}

Matrix decode(const Matrix& z, LabelView y, const C2bnvae& model) {
    const ModelConfig& cfg = model.config;
    check_batch(z, y, cfg.latent_dim, "decode");
    Matrix h = concat_cols(z, one_hot(y, cfg.num_classes));
    h = hidden_stack_eval(std::move(h), model.decoder.hidden, model.decoder.norm, y, cfg.leaky_slope);
    return nn::sigmoid(nn::linear_forward(h, model.decoder.output));
}

Matrix standard_normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

Matrix reparameterize(const Matrix& mu, const Matrix& logvar, std::mt19937_64& rng) {
    require_same_shape(mu, logvar, "reparameterize");
    const Matrix eps = standard_normal(static_cast<std::size_t>(mu.rows()),
                                       static_cast<std::size_t>(mu.cols()), rng);
    const Matrix scale =
        logvar.unaryExpr([](double v) { return std::exp(0.5 * nn::clamp_logvar(v)); });
    return mu + scale.cwiseProduct(eps);
}

LossParts loss(const Matrix& x, const Matrix& x_hat, const Matrix& mu, const Matrix& logvar,
               double kl_weight) {
    LossParts p;
    p.recon = nn::mse_loss(x, x_hat);
    p.regu = nn::kl_gaussian(mu, logvar);
    p.total = p.recon + kl_weight * p.regu;
    return p;
}

TapeForward forward_on_tape(nn::Tape& tape, C2bnvae& model, const Matrix& x, LabelView y,
                            const Matrix& noise, bool training) {
    const ModelConfig& cfg = model.config;
    check_batch(x, y, cfg.feature_dim, "forward");
    const Matrix onehot = one_hot(y, cfg.num_classes);
    TapeForward f;
    const auto x_var = tape.constant(x);
    const auto y_var = tape.constant(onehot);
    auto h = tape.concat_cols(x_var, y_var);
    h = hidden_stack_tape(tape, h, model.encoder.hidden, model.encoder.norm, y, cfg.leaky_slope,
                          training);
    f.mu = tape.linear(h, tape.parameter(model.encoder.mu_head.weights),
                       tape.parameter(model.encoder.mu_head.bias));
    f.logvar = tape.linear(h, tape.parameter(model.encoder.logvar_head.weights),
                           tape.parameter(model.encoder.logvar_head.bias));
    f.z = tape.reparameterize(f.mu, f.logvar, noise);
    auto d = tape.concat_cols(f.z, y_var);
    d = hidden_stack_tape(tape, d, model.decoder.hidden, model.decoder.norm, y, cfg.leaky_slope,
                          training);
    d = tape.linear(d, tape.parameter(model.decoder.output.weights),
                    tape.parameter(model.decoder.output.bias));
    f.x_hat = tape.sigmoid(d);
    f.recon = tape.mse(x_var, f.x_hat);
    f.regu = tape.kl_gaussian(f.mu, f.logvar);
    f.total = tape.add(f.recon, tape.scale(f.regu, cfg.kl_weight));
    return f;
}

TrainResult train(const EncodedDataset& dataset, const ModelConfig& config) {
    config.validate();
    validate(dataset);
    if (dataset.size() == 0) throw DataError("train: dataset is empty");
    if (dataset.feature_dim() != config.feature_dim) {
        throw ShapeError("train: dataset has " + std::to_string(dataset.feature_dim()) +
                         " features, config expects " + std::to_string(config.feature_dim));
    }
    if (dataset.num_classes > config.num_classes) {
        throw LabelError("train: dataset has " + std::to_string(dataset.num_classes) +
                         " classes, config supports " + std::to_string(config.num_classes));
    }
    if (config.epochs > 0 && (dataset.size() < 2 || config.batch_size < 2)) {
        throw DataError("train: every batch would hold a single row; need >= 2 rows per batch");
    }

    TrainResult result;
    result.checkpoint.model = C2bnvae::initialize(config);
    result.checkpoint.schema_fingerprint =
        dataset.schema_fingerprint.empty() ? "unschematized" : dataset.schema_fingerprint;
    C2bnvae& model = result.checkpoint.model;

    std::mt19937_64 shuffle_rng(derive_seed(config.seed, "vae.shuffle"));
    std::mt19937_64 noise_rng(derive_seed(config.seed, "vae.noise"));
    nn::AdamState adam;

    std::vector<Matrix*> params;
    for (auto& [name, p] : model.named_parameters()) params.push_back(p);

    const std::size_t n = dataset.size();
    std::vector<std::size_t> order(n);
    for (std::size_t e = 0; e < config.epochs; ++e) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        for (std::size_t i = n - 1; i > 0; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i);
            std::swap(order[i], order[pick(shuffle_rng)]);
        }
        double sum_recon = 0.0, sum_regu = 0.0, sum_total = 0.0;
        std::size_t seen = 0;
        std::size_t batch_no = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_no) {
            const std::size_t b = std::min(config.batch_size, n - start);
            if (b < 2) continue;
            Matrix x(static_cast<Eigen::Index>(b), dataset.features.cols());
            Labels y(b);
            for (std::size_t i = 0; i < b; ++i) {
                const std::size_t row = order[start + i];
                x.row(static_cast<Eigen::Index>(i)) =
                    dataset.features.row(static_cast<Eigen::Index>(row));
                y[i] = dataset.labels[row];
            }
            const Matrix noise = standard_normal(b, config.latent_dim, noise_rng);
            nn::Tape tape;
            const TapeForward f = forward_on_tape(tape, model, x, y, noise, true);
            const double total = tape.value(f.total)(0, 0);
            if (!std::isfinite(total)) {
                throw TrainingError("non-finite loss at epoch " + std::to_string(e + 1) +
                                    ", batch " + std::to_string(batch_no + 1));
            }
            tape.backward(f.total);
            std::vector<const Matrix*> grads;
            grads.reserve(params.size());
            for (const Matrix* p : params) grads.push_back(&tape.gradient(*p));
            nn::adam_step(params, grads, adam, config.lr);

            const double w = static_cast<double>(b);
            sum_recon += w * tape.value(f.recon)(0, 0);
            sum_regu += w * tape.value(f.regu)(0, 0);
            sum_total += w * total;
            seen += b;
        }
        const double denom = static_cast<double>(seen);
        result.trace.push_back({e + 1, sum_recon / denom, sum_regu / denom, sum_total / denom});
    }
    return result;
}

Matrix generate(std::size_t label, std::size_t n, const ModelCheckpoint& checkpoint,
                std::mt19937_64& rng) {
    const ModelConfig& cfg = checkpoint.config();
    if (label >= cfg.num_classes) {
        throw LabelError("generate: label " + std::to_string(label) + " out of range for " +
                         std::to_string(cfg.num_classes) + " classes");
    }
    if (n == 0) throw ConfigError("generate: n must be >= 1");
    const Matrix z = standard_normal(n, cfg.latent_dim, rng);
    const Labels y(n, label);
    return decode(z, y, checkpoint.model);
}

nn::ArchDescriptor architecture(const ModelConfig& config) {
    using nn::LayerSpec;
    nn::ArchDescriptor arch;
    nn::ComponentSpec enc{"encoder", {}};
    std::size_t in = config.encoder_input_dim();
    for (std::size_t w : config.hidden_widths) {
        enc.layers.push_back(LayerSpec::linear(in, w));
        in = w;
    }
    enc.layers.push_back(LayerSpec::norm(in, config.encoder_norm_classes()));
    enc.layers.push_back(LayerSpec::linear(in, config.latent_dim));
    enc.layers.push_back(LayerSpec::linear(in, config.latent_dim));

    nn::ComponentSpec dec{"decoder", {}};
    in = config.decoder_input_dim();
    for (std::size_t w : config.hidden_widths) {
        dec.layers.push_back(LayerSpec::linear(in, w));
        in = w;
    }
    dec.layers.push_back(LayerSpec::norm(in, config.decoder_norm_classes()));
    dec.layers.push_back(LayerSpec::linear(in, config.feature_dim));
    arch.components = {std::move(enc), std::move(dec)};
    return arch;
}

void write_loss_trace_csv(std::ostream& out, const std::vector<EpochLoss>& trace,
                          const std::string& manifest) {
    out << "# " << manifest << "\n";
    out << "epoch,recon,regu,total\n";
    char buf[128];
    for (const EpochLoss& e : trace) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.recon, e.regu, e.total);
        out << buf;
    }
}

}  // namespace c2bn::vae
