#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "c2bn/matrix.hpp"
#include "c2bn/nn.hpp"
#include "c2bn/tape.hpp"

namespace c2bn::testing {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::string worst;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
// entries whose true gradient is ~0 from dividing noise by noise.
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central finite differences over every entry of every parameter. `build`
// must record the loss on the given tape from the parameters' current values.
inline std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

inline GradCheckResult check_gradients(const std::vector<std::pair<std::string, Matrix*>>& params,
                                       const std::function<nn::Tape::Var(nn::Tape&)>& build,
                                       double h = 1e-6) {
    nn::Tape tape;
    const auto loss = build(tape);
    tape.backward(loss);
    std::vector<Matrix> analytic;
    for (const auto& [name, p] : params) analytic.push_back(tape.gradient(*p));

    auto eval = [&build]() {
        nn::Tape t;
        return t.value(build(t))(0, 0);
    };

    GradCheckResult result;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k].second;
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            const double orig = p.data()[i];
            p.data()[i] = orig + h;
            const double up = eval();
            p.data()[i] = orig - h;
            const double down = eval();
            p.data()[i] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double err = relative_error(analytic[k].data()[i], numeric);
            ++result.checked;
            if (err > result.max_rel_error) {
                result.max_rel_error = err;
                result.worst = params[k].first + "[" + std::to_string(i) + "] analytic=" +
                               fmt_g(analytic[k].data()[i]) +
                               " numeric=" + fmt_g(numeric);
            }
        }
    }
    return result;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                            double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
    return m;
}

// A small random network that threads an input through every tape op the
// model uses: linear, conditional norm, shared norm, LeakyReLU, concat,
// reparameterize, clamp, sigmoid, mse, kl, add/mul/scale/sum.
struct RandomNet {
    Matrix x, target, noise, side;
    Labels labels;
    nn::LinearLayer l1, l2, mu_head, lv_head, out;
    nn::CbnParamBank cbn, bn;
    double slope = 0.01;

    static RandomNet make(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<int> dim(2, 4);
        const int b = dim(rng) + 1;  // >= 3 rows
        const int in = dim(rng), h1 = dim(rng), h2 = dim(rng), lat = dim(rng) - 1, o = dim(rng);
        const int classes = dim(rng);
        RandomNet n;
        n.x = random_matrix(b, in, rng);
        n.target = random_matrix(b, o, rng, 0.3).array().abs().min(0.95).matrix();
        n.noise = random_matrix(b, lat, rng);
        n.side = random_matrix(b, 2, rng);
        std::uniform_int_distribution<std::size_t> lab(0, static_cast<std::size_t>(classes) - 1);
        for (int r = 0; r < b; ++r) n.labels.push_back(lab(rng));
        auto lin = [&rng](int i, int o2) {
            return nn::LinearLayer{random_matrix(i, o2, rng, 0.7), random_matrix(1, o2, rng, 0.2)};
        };
        n.l1 = lin(in, h1);
        n.l2 = lin(h1, h2);
        n.mu_head = lin(h2, lat);
        n.lv_head = lin(h2, lat);
        n.out = lin(lat + 2, o);
        n.cbn = nn::CbnParamBank::create(static_cast<std::size_t>(classes), static_cast<std::size_t>(h1));
        n.cbn.gamma = random_matrix(classes, h1, rng, 0.5).array() + 1.0;
        n.cbn.beta = random_matrix(classes, h1, rng, 0.3);
        n.bn = nn::CbnParamBank::create(1, static_cast<std::size_t>(h2));
        n.bn.gamma = random_matrix(1, h2, rng, 0.5).array() + 1.0;
        n.bn.beta = random_matrix(1, h2, rng, 0.3);
        n.slope = 0.01 + 0.2 * std::uniform_real_distribution<double>(0, 1)(rng);
        return n;
    }

    std::vector<std::pair<std::string, Matrix*>> parameters() {
        return {{"l1.w", &l1.weights},       {"l1.b", &l1.bias},        {"l2.w", &l2.weights},
                {"l2.b", &l2.bias},          {"mu.w", &mu_head.weights}, {"mu.b", &mu_head.bias},
                {"lv.w", &lv_head.weights},  {"lv.b", &lv_head.bias},   {"out.w", &out.weights},
                {"out.b", &out.bias},        {"cbn.gamma", &cbn.gamma}, {"cbn.beta", &cbn.beta},
                {"bn.gamma", &bn.gamma},     {"bn.beta", &bn.beta}};
    }

    nn::Tape::Var build(nn::Tape& t, bool training = true) {
        auto P = [&t](const Matrix& m) { return t.parameter(m); };
        auto h = t.linear(t.constant(x), P(l1.weights), P(l1.bias));
        h = t.norm(h, labels, P(cbn.gamma), P(cbn.beta), cbn, training);
        h = t.leaky_relu(h, slope);
        h = t.linear(h, P(l2.weights), P(l2.bias));
        const Labels zeros(labels.size(), 0);
        h = t.norm(h, zeros, P(bn.gamma), P(bn.beta), bn, training);
        h = t.leaky_relu(h, slope);
        auto mu = t.linear(h, P(mu_head.weights), P(mu_head.bias));
        auto lv = t.clamp(t.linear(h, P(lv_head.weights), P(lv_head.bias)), -10.0, 10.0);
        auto z = t.reparameterize(mu, lv, noise);
        auto d = t.concat_cols(z, t.constant(side));
        auto xh = t.sigmoid(t.linear(d, P(out.weights), P(out.bias)));
        auto recon = t.mse(t.constant(target), xh);
        auto kl = t.kl_gaussian(mu, lv);
        auto extra = t.scale(t.sum(t.mul(mu, mu)), 0.05);
        return t.add(t.add(recon, t.scale(kl, 0.7)), extra);
    }
};

}  // namespace c2bn::testing
