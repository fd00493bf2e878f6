#include "c2bn/nn.hpp"

#include <algorithm>
#include <cmath>

#include "c2bn/error.hpp"

namespace c2bn::nn {

CbnParamBank CbnParamBank::create(std::size_t num_classes, std::size_t width, double eps,
                                  double momentum) {
    if (num_classes == 0 || width == 0) {
        throw ConfigError("normalization bank needs at least one class and one unit");
    }
    if (!(eps > 0.0)) throw ConfigError("normalization eps must be positive");
    if (!(momentum > 0.0 && momentum < 1.0)) {
        throw ConfigError("normalization momentum must lie in (0,1)");
    }
    const auto c = static_cast<Eigen::Index>(num_classes);
    const auto w = static_cast<Eigen::Index>(width);
    CbnParamBank bank;
    bank.num_classes = num_classes;
    bank.width = width;
    bank.gamma = Matrix::Ones(c, w);
    bank.beta = Matrix::Zero(c, w);
    bank.eps = eps;
    bank.running_mean = Matrix::Zero(1, w);
    bank.running_var = Matrix::Ones(1, w);
    bank.momentum = momentum;
    return bank;
}

Matrix linear_forward(const Matrix& x, const LinearLayer& layer) {
    if (x.cols() != layer.weights.rows()) {
        throw ShapeError("linear_forward: input " + shape_of(x) + " does not fit weights " +
                         shape_of(layer.weights));
    }
    if (layer.bias.rows() != 1 || layer.bias.cols() != layer.weights.cols()) {
        throw ShapeError("linear_forward: bias " + shape_of(layer.bias) + " does not fit weights " +
                         shape_of(layer.weights));
    }
    Matrix out = x * layer.weights;
    out.rowwise() += layer.bias.row(0);
    return out;
}

Matrix leaky_relu(const Matrix& x, double slope) {
    return x.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

Matrix sigmoid(const Matrix& x) {
    return x.unaryExpr([](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
    });
}

namespace {

void check_norm_input(const Matrix& x, const CbnParamBank& bank) {
    if (static_cast<std::size_t>(x.cols()) != bank.width) {
        throw ShapeError("normalization: input " + shape_of(x) + " vs bank width " +
                         std::to_string(bank.width));
    }
    if (x.rows() == 0) throw ShapeError("normalization: empty batch");
}

void check_labels(const Matrix& x, LabelView labels, std::size_t num_classes) {
    if (labels.size() != static_cast<std::size_t>(x.rows())) {
        throw ShapeError("cbn_forward: " + std::to_string(labels.size()) + " labels for input " +
                         shape_of(x));
    }
    for (std::size_t c : labels) {
        if (c >= num_classes) {
            throw LabelError("cbn_forward: label " + std::to_string(c) + " out of range for " +
                             std::to_string(num_classes) + " classes");
        }
    }
}

}  // namespace

NormCache normalize_eval(const Matrix& x, const CbnParamBank& bank) {
    check_norm_input(x, bank);
    NormCache cache;
    cache.inv_std = (bank.running_var.array() + bank.eps).rsqrt().matrix();
    const Matrix centered = x.rowwise() - bank.running_mean.row(0);
    cache.normalized = (centered.array().rowwise() * cache.inv_std.row(0).array()).matrix();
    return cache;
}

NormCache normalize(const Matrix& x, CbnParamBank& bank, bool training) {
    if (!training) return normalize_eval(x, bank);
    check_norm_input(x, bank);
    if (x.rows() < 2) {
        throw ShapeError("normalization: training mode needs a batch of at least 2 rows");
    }
    const double b = static_cast<double>(x.rows());
    const Matrix mean = x.colwise().sum() / b;
    const Matrix centered = x.rowwise() - mean.row(0);
    const Matrix var = centered.array().square().colwise().sum().matrix() / b;
    NormCache cache;
    cache.inv_std = (var.array() + bank.eps).rsqrt().matrix();
    cache.normalized = (centered.array().rowwise() * cache.inv_std.row(0).array()).matrix();
    bank.running_mean = (1.0 - bank.momentum) * bank.running_mean + bank.momentum * mean;
    bank.running_var = (1.0 - bank.momentum) * bank.running_var + bank.momentum * var;
    return cache;
}

Matrix class_affine(const Matrix& normalized, LabelView labels, const Matrix& gamma,
                    const Matrix& beta) {
    if (labels.size() != static_cast<std::size_t>(normalized.rows())) {
        throw ShapeError("normalization: " + std::to_string(labels.size()) + " labels for " +
                         shape_of(normalized));
    }
    require_same_shape(gamma, beta, "normalization gamma/beta");
    if (gamma.cols() != normalized.cols()) {
        throw ShapeError("normalization: affine " + shape_of(gamma) + " vs input " +
                         shape_of(normalized));
    }
    Matrix out(normalized.rows(), normalized.cols());
    for (Eigen::Index r = 0; r < normalized.rows(); ++r) {
        const std::size_t c = labels[static_cast<std::size_t>(r)];
        if (c >= static_cast<std::size_t>(gamma.rows())) {
            throw LabelError("normalization: label " + std::to_string(c) + " out of range for " +
                             std::to_string(gamma.rows()) + " classes");
        }
        const auto ci = static_cast<Eigen::Index>(c);
        out.row(r) = (normalized.row(r).array() * gamma.row(ci).array() + beta.row(ci).array())
                         .matrix();
    }
    return out;
}

Matrix cbn_forward(const Matrix& x, LabelView labels, CbnParamBank& bank, bool training) {
    check_labels(x, labels, bank.num_classes);
    const NormCache cache = normalize(x, bank, training);
    return class_affine(cache.normalized, labels, bank.gamma, bank.beta);
}

Matrix cbn_forward(const Matrix& x, LabelView labels, const CbnParamBank& bank) {
    check_labels(x, labels, bank.num_classes);
    const NormCache cache = normalize_eval(x, bank);
    return class_affine(cache.normalized, labels, bank.gamma, bank.beta);
}

Matrix batchnorm_forward(const Matrix& x, CbnParamBank& bank, bool training) {
    if (bank.num_classes != 1) {
        throw ConfigError("batchnorm_forward expects a single shared affine pair");
    }
    const Labels zeros(static_cast<std::size_t>(x.rows()), 0);
    return cbn_forward(x, zeros, bank, training);
}

Matrix he_init(std::size_t fan_in, std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    if (fan_in == 0) throw ConfigError("he_init: fan_in must be at least 1");
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

LinearLayer make_linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    return LinearLayer{he_init(in, in, out, rng), Matrix::Zero(1, static_cast<Eigen::Index>(out))};
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
               AdamState& state, double lr) {
    if (params.size() != grads.size()) {
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
    }
    if (!(lr > 0.0)) throw ConfigError("adam_step: learning rate must be positive");
    if (state.first_moment.empty()) {
        for (const Matrix* p : params) {
            state.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
            state.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw ShapeError("adam_step: optimizer state tracks " +
                         std::to_string(state.first_moment.size()) + " parameters, got " +
                         std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        require_same_shape(*params[i], *grads[i], "adam_step parameter/gradient");
        require_same_shape(*params[i], state.first_moment[i], "adam_step parameter/moment");
    }
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& m = state.first_moment[i];
        Matrix& v = state.second_moment[i];
        const Matrix& g = *grads[i];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
        params[i]->array() -=
            lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
    }
}

double mse_loss(const Matrix& x, const Matrix& x_hat) {
    require_same_shape(x, x_hat, "mse_loss");
    if (x.size() == 0) return 0.0;
    return (x - x_hat).squaredNorm() / static_cast<double>(x.size());
}

double clamp_logvar(double v) {
    return std::clamp(v, kLogvarMin, kLogvarMax);
}

double kl_gaussian(const Matrix& mu, const Matrix& logvar) {
    require_same_shape(mu, logvar, "kl_gaussian");
    if (mu.rows() == 0) return 0.0;
    double total = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        const double lv = clamp_logvar(logvar.data()[i]);
        const double m = mu.data()[i];
        // 1 + lv - exp(lv) written via expm1 so it stays <= 0 near lv = 0.
        total += -0.5 * (lv - std::expm1(lv) - m * m);
    }
    return total / static_cast<double>(mu.rows());
}

}  // namespace c2bn::nn
