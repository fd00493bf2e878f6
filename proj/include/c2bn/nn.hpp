#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "c2bn/matrix.hpp"

namespace c2bn::nn {

inline constexpr double kDefaultLeakySlope = 0.01;
inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;

// weights are [in x out], bias is [1 x out].
struct LinearLayer {
    Matrix weights;
    Matrix bias;

    std::size_t in_dim() const { return static_cast<std::size_t>(weights.rows()); }
    std::size_t out_dim() const { return static_cast<std::size_t>(weights.cols()); }
};

// Class-conditional batch normalization state. Row i of gamma/beta is the
// affine pair of class i. A bank with a single class is plain batch norm.
struct CbnParamBank {
    std::size_t num_classes = 1;
    std::size_t width = 0;
    Matrix gamma;
    Matrix beta;
    double eps = 1e-5;
    Matrix running_mean;  // [1 x width]
    Matrix running_var;   // [1 x width]
    double momentum = 0.1;

    // gamma = 1, beta = 0, running stats (0, 1).
    static CbnParamBank create(std::size_t num_classes, std::size_t width, double eps = 1e-5,
                               double momentum = 0.1);
};

struct AdamState {
    std::uint64_t step_count = 0;
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Normalized activations and per-column 1/sqrt(var + eps), kept for backprop.
struct NormCache {
    Matrix normalized;
    Matrix inv_std;  // [1 x width]
};

Matrix linear_forward(const Matrix& x, const LinearLayer& layer);
Matrix leaky_relu(const Matrix& x, double slope = kDefaultLeakySlope);
Matrix sigmoid(const Matrix& x);

// Pre-affine normalization. Training mode pools mean/population variance over
// the whole batch and folds them into the running averages; evaluation mode
// reads the running averages instead.
NormCache normalize(const Matrix& x, CbnParamBank& bank, bool training);
NormCache normalize_eval(const Matrix& x, const CbnParamBank& bank);

// Per-row affine with the (gamma, beta) row selected by that row's label.
Matrix class_affine(const Matrix& normalized, LabelView labels, const Matrix& gamma,
                    const Matrix& beta);

Matrix cbn_forward(const Matrix& x, LabelView labels, CbnParamBank& bank, bool training);
// Evaluation mode only; leaves the bank untouched.
Matrix cbn_forward(const Matrix& x, LabelView labels, const CbnParamBank& bank);
Matrix batchnorm_forward(const Matrix& x, CbnParamBank& bank, bool training);

Matrix he_init(std::size_t fan_in, std::size_t rows, std::size_t cols, std::mt19937_64& rng);
LinearLayer make_linear(std::size_t in, std::size_t out, std::mt19937_64& rng);

// Bias-corrected Adam. Moment buffers are allocated on the first call.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
               AdamState& state, double lr);

// Mean over every element (batch x features).
double mse_loss(const Matrix& x, const Matrix& x_hat);

// KL(N(mu, exp(logvar)) || N(0, I)): summed over latent dims, averaged over
// the batch. logvar is clamped to [kLogvarMin, kLogvarMax] first.
double kl_gaussian(const Matrix& mu, const Matrix& logvar);

double clamp_logvar(double v);

}  // namespace c2bn::nn
