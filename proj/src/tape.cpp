#include "c2bn/tape.hpp"

#include <cmath>

#include "c2bn/error.hpp"

namespace c2bn::nn {

Tape::Var Tape::push(Matrix value, std::function<void(Tape&, const Matrix&)> backprop) {
    nodes_.push_back(Node{std::move(value), Matrix{}, std::move(backprop)});
    return Var{nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
    Node& n = nodes_[v.id];
    if (n.grad.size() == 0) {
        n.grad = g;
    } else {
        n.grad += g;
    }
}

Tape::Var Tape::constant(Matrix value) {
    return push(std::move(value));
}

Tape::Var Tape::parameter(const Matrix& param) {
    if (auto it = params_.find(&param); it != params_.end()) return Var{it->second};
    Var v = push(param);
    params_.emplace(&param, v.id);
    return v;
}

Tape::Var Tape::linear(Var x, Var weights, Var bias) {
    LinearLayer layer{value(weights), value(bias)};
    Matrix out = linear_forward(value(x), layer);
    return push(std::move(out), [x, weights, bias](Tape& t, const Matrix& g) {
        t.accumulate(x, g * t.value(weights).transpose());
        t.accumulate(weights, t.value(x).transpose() * g);
        t.accumulate(bias, g.colwise().sum());
    });
}

Tape::Var Tape::leaky_relu(Var x, double slope) {
    return push(nn::leaky_relu(value(x), slope), [x, slope](Tape& t, const Matrix& g) {
        const Matrix& in = t.value(x);
        Matrix dx = g;
        for (Eigen::Index i = 0; i < dx.size(); ++i) {
            if (!(in.data()[i] > 0.0)) dx.data()[i] *= slope;
        }
        t.accumulate(x, dx);
    });
}

Tape::Var Tape::sigmoid(Var x) {
    Matrix out = nn::sigmoid(value(x));
    const std::size_t self = nodes_.size();
    return push(std::move(out), [x, self](Tape& t, const Matrix& g) {
        const Matrix& s = t.nodes_[self].value;
        t.accumulate(x, (g.array() * s.array() * (1.0 - s.array())).matrix());
    });
}

Tape::Var Tape::norm(Var x, LabelView labels, Var gamma, Var beta, CbnParamBank& bank,
                     bool training) {
    if (labels.size() != static_cast<std::size_t>(value(x).rows())) {
        throw ShapeError("norm: " + std::to_string(labels.size()) + " labels for input " +
                         shape_of(value(x)));
    }
    NormCache cache = normalize(value(x), bank, training);
    Matrix out = class_affine(cache.normalized, labels, value(gamma), value(beta));
    Labels owned(labels.begin(), labels.end());
    return push(std::move(out), [x, gamma, beta, training, cache = std::move(cache),
                                 owned = std::move(owned)](Tape& t, const Matrix& g) {
        const Matrix& gm = t.value(gamma);
        const Matrix& xhat = cache.normalized;
        Matrix dgamma = Matrix::Zero(gm.rows(), gm.cols());
        Matrix dbeta = Matrix::Zero(gm.rows(), gm.cols());
        Matrix dxhat(g.rows(), g.cols());
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
            const auto c = static_cast<Eigen::Index>(owned[static_cast<std::size_t>(r)]);
            dgamma.row(c) += (g.row(r).array() * xhat.row(r).array()).matrix();
            dbeta.row(c) += g.row(r);
            dxhat.row(r) = (g.row(r).array() * gm.row(c).array()).matrix();
        }
        t.accumulate(gamma, dgamma);
        t.accumulate(beta, dbeta);
        if (training) {
            // Batch statistics depend on every row:
            // dx = inv_std / b * (b * dxhat - sum(dxhat) - xhat * sum(dxhat * xhat))
            const double b = static_cast<double>(g.rows());
            const Matrix sum_d = dxhat.colwise().sum();
            const Matrix sum_dx = dxhat.cwiseProduct(xhat).colwise().sum();
            Matrix dx = b * dxhat;
            dx.rowwise() -= sum_d.row(0);
            dx -= (xhat.array().rowwise() * sum_dx.row(0).array()).matrix();
            dx = (dx.array().rowwise() * (cache.inv_std.row(0).array() / b)).matrix();
            t.accumulate(x, dx);
        } else {
            t.accumulate(x, (dxhat.array().rowwise() * cache.inv_std.row(0).array()).matrix());
        }
    });
}

Tape::Var Tape::concat_cols(Var left, Var right) {
    const Eigen::Index lc = value(left).cols();
    const Eigen::Index rc = value(right).cols();
    return push(c2bn::concat_cols(value(left), value(right)),
                [left, right, lc, rc](Tape& t, const Matrix& g) {
                    t.accumulate(left, g.leftCols(lc));
                    t.accumulate(right, g.rightCols(rc));
                });
}

Tape::Var Tape::clamp(Var x, double lo, double hi) {
    Matrix out = value(x).cwiseMax(lo).cwiseMin(hi);
    return push(std::move(out), [x, lo, hi](Tape& t, const Matrix& g) {
        const Matrix& in = t.value(x);
        Matrix dx = g;
        for (Eigen::Index i = 0; i < dx.size(); ++i) {
            if (in.data()[i] < lo || in.data()[i] > hi) dx.data()[i] = 0.0;
        }
        t.accumulate(x, dx);
    });
}

Tape::Var Tape::reparameterize(Var mu, Var logvar, const Matrix& noise) {
    require_same_shape(value(mu), value(logvar), "reparameterize mu/logvar");
    require_same_shape(value(mu), noise, "reparameterize mu/noise");
    const Matrix& lv = value(logvar);
    Matrix scale_term = lv.unaryExpr([](double v) { return std::exp(0.5 * clamp_logvar(v)); });
    Matrix spread = scale_term.cwiseProduct(noise);
    Matrix out = value(mu) + spread;
    return push(std::move(out), [mu, logvar, spread = std::move(spread)](Tape& t, const Matrix& g) {
        t.accumulate(mu, g);
        const Matrix& lv = t.value(logvar);
        Matrix dlv = 0.5 * g.cwiseProduct(spread);
        for (Eigen::Index i = 0; i < dlv.size(); ++i) {
            if (lv.data()[i] < kLogvarMin || lv.data()[i] > kLogvarMax) dlv.data()[i] = 0.0;
        }
        t.accumulate(logvar, dlv);
    });
}

Tape::Var Tape::add(Var a, Var b) {
    require_same_shape(value(a), value(b), "add");
    return push(value(a) + value(b), [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

Tape::Var Tape::mul(Var a, Var b) {
    require_same_shape(value(a), value(b), "mul");
    return push(value(a).cwiseProduct(value(b)), [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a, g.cwiseProduct(t.value(b)));
        t.accumulate(b, g.cwiseProduct(t.value(a)));
    });
}

Tape::Var Tape::scale(Var a, double s) {
    return push(s * value(a), [a, s](Tape& t, const Matrix& g) { t.accumulate(a, s * g); });
}

Tape::Var Tape::sum(Var a) {
    Matrix out(1, 1);
    out(0, 0) = value(a).sum();
    return push(std::move(out), [a](Tape& t, const Matrix& g) {
        const Matrix& in = t.value(a);
        t.accumulate(a, Matrix::Constant(in.rows(), in.cols(), g(0, 0)));
    });
}

Tape::Var Tape::mse(Var a, Var b) {
    Matrix out(1, 1);
    out(0, 0) = mse_loss(value(a), value(b));
    return push(std::move(out), [a, b](Tape& t, const Matrix& g) {
        const Matrix diff = t.value(a) - t.value(b);
        const double k = 2.0 * g(0, 0) / static_cast<double>(diff.size());
        t.accumulate(a, k * diff);
        t.accumulate(b, -k * diff);
    });
}

Tape::Var Tape::kl_gaussian(Var mu, Var logvar) {
    Matrix out(1, 1);
    out(0, 0) = nn::kl_gaussian(value(mu), value(logvar));
    return push(std::move(out), [mu, logvar](Tape& t, const Matrix& g) {
        const Matrix& m = t.value(mu);
        const Matrix& lv = t.value(logvar);
        const double k = g(0, 0) / static_cast<double>(m.rows());
        t.accumulate(mu, k * m);
        Matrix dlv(lv.rows(), lv.cols());
        for (Eigen::Index i = 0; i < lv.size(); ++i) {
            const double v = lv.data()[i];
            dlv.data()[i] = (v < kLogvarMin || v > kLogvarMax) ? 0.0 : 0.5 * k * std::expm1(v);
        }
        t.accumulate(logvar, dlv);
    });
}

void Tape::backward(Var loss) {
    const Matrix& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw ShapeError("backward: loss must be a 1x1 scalar, got " + shape_of(lv));
    }
    for (Node& n : nodes_) n.grad.resize(0, 0);
    nodes_[loss.id].grad = Matrix::Ones(1, 1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.grad.size() == 0 || !n.backprop) continue;
        // The closure may push into earlier nodes only, so the reference stays valid.
        const Matrix g = n.grad;
        n.backprop(*this, g);
    }
    for (const auto& [ptr, id] : params_) {
        Node& n = nodes_[id];
        if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    }
}

const Matrix& Tape::gradient(const Matrix& param) const {
    auto it = params_.find(&param);
    if (it == params_.end()) {
        throw Error("gradient requested for a parameter that is not on the tape");
    }
    return nodes_[it->second].grad;
}

}  // namespace c2bn::nn
