#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "c2bn/cost.hpp"
#include "c2bn/dataset.hpp"
#include "c2bn/matrix.hpp"
#include "c2bn/nn.hpp"
#include "c2bn/tape.hpp"

namespace c2bn::vae {

// conditional: class-selected affine pairs (CBN). batch: one shared pair
// (plain BN), which gives the CVAE baseline with identical widths.
enum class NormKind { conditional, batch };

// Where class-conditional normalization goes when NormKind::conditional.
// With decoder_only the encoder keeps a plain BN layer at the same position.
enum class CbnPlacement { decoder_only, encoder_and_decoder };

struct ModelConfig {
    std::size_t feature_dim = 123;
    std::size_t num_classes = 5;
    std::size_t latent_dim = 32;
    std::vector<std::size_t> hidden_widths{60, 60, 60, 60};
    double lr = 1e-4;
    std::size_t epochs = 120;
    std::size_t batch_size = 128;
    double kl_weight = 1.0;
    NormKind norm = NormKind::conditional;
    CbnPlacement cbn_placement = CbnPlacement::encoder_and_decoder;
    double leaky_slope = nn::kDefaultLeakySlope;
    double norm_eps = 1e-5;
    double norm_momentum = 0.1;
    std::uint64_t seed = 0;

    std::size_t encoder_input_dim() const { return feature_dim + num_classes; }
    std::size_t decoder_input_dim() const { return latent_dim + num_classes; }
    std::size_t encoder_norm_classes() const;
    std::size_t decoder_norm_classes() const;

    // Throws ConfigError on zero widths, bad learning rate, etc.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

std::string to_string(NormKind k);
std::string to_string(CbnPlacement p);
NormKind parse_norm_kind(const std::string& s);
CbnPlacement parse_cbn_placement(const std::string& s);

// Encoder: [x | onehot(y)] -> hidden linears (LeakyReLU) with the
// normalization after the last hidden linear, then twin heads for mu / logvar.
struct Encoder {
    std::vector<nn::LinearLayer> hidden;
    nn::CbnParamBank norm;
    nn::LinearLayer mu_head;
    nn::LinearLayer logvar_head;
};

// Decoder: [z | onehot(y)] -> same hidden pattern -> linear -> logistic.
struct Decoder {
    std::vector<nn::LinearLayer> hidden;
    nn::CbnParamBank norm;
    nn::LinearLayer output;
};

struct C2bnvae {
    ModelConfig config;
    Encoder encoder;
    Decoder decoder;

    // He-initialized weights, zero biases, gamma = 1, beta = 0.
    static C2bnvae initialize(const ModelConfig& config);

    // Fixed order: encoder hidden, encoder norm, heads, decoder hidden,
    // decoder norm, output. Names are stable and used by the checkpoint format.
    std::vector<std::pair<std::string, Matrix*>> named_parameters();
    std::vector<std::pair<std::string, const Matrix*>> named_parameters() const;
    // Running statistics (not trainable), same naming scheme.
    std::vector<std::pair<std::string, Matrix*>> named_buffers();
    std::vector<std::pair<std::string, const Matrix*>> named_buffers() const;
};

struct ModelCheckpoint {
    C2bnvae model;
    std::string schema_fingerprint;
    std::uint32_t format_version = 1;

    const ModelConfig& config() const { return model.config; }
};

struct Posterior {
    Matrix mu;
    Matrix logvar;
};

// Evaluation-mode passes (running statistics, no side effects).
Posterior encode(const Matrix& x, LabelView y, const C2bnvae& model);
Matrix decode(const Matrix& z, LabelView y, const C2bnvae& model);

// z = mu + exp(logvar / 2) * eps, eps ~ N(0, I); logvar is clamped first.
Matrix reparameterize(const Matrix& mu, const Matrix& logvar, std::mt19937_64& rng);

Matrix standard_normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

struct LossParts {
    double total = 0.0;
    double recon = 0.0;
    double regu = 0.0;
};

LossParts loss(const Matrix& x, const Matrix& x_hat, const Matrix& mu, const Matrix& logvar,
               double kl_weight);

// Full forward pass recorded on a tape; `noise` supplies eps for the
// reparameterization. Training mode uses batch statistics and updates the
// running averages.
struct TapeForward {
    nn::Tape::Var mu;
    nn::Tape::Var logvar;
    nn::Tape::Var z;
    nn::Tape::Var x_hat;
    nn::Tape::Var recon;
    nn::Tape::Var regu;
    nn::Tape::Var total;
};

TapeForward forward_on_tape(nn::Tape& tape, C2bnvae& model, const Matrix& x, LabelView y,
                            const Matrix& noise, bool training);

struct EpochLoss {
    std::size_t epoch = 0;  // 1-based
    double recon = 0.0;
    double regu = 0.0;
    double total = 0.0;
};

struct TrainResult {
    ModelCheckpoint checkpoint;
    std::vector<EpochLoss> trace;
};

// Seeded shuffled mini-batches with Adam. The trailing partial batch is used;
// single-row batches are skipped. Throws TrainingError on a non-finite loss.
TrainResult train(const EncodedDataset& dataset, const ModelConfig& config);

// n rows decoded from z ~ N(0, I) in evaluation mode, conditioned on `label`.
Matrix generate(std::size_t label, std::size_t n, const ModelCheckpoint& checkpoint,
                std::mt19937_64& rng);

nn::ArchDescriptor architecture(const ModelConfig& config);

void write_loss_trace_csv(std::ostream& out, const std::vector<EpochLoss>& trace,
                          const std::string& manifest);

}  // namespace c2bn::vae
