#pragma once

#include <cstddef>
#include <functional>
#include <unordered_map>
#include <vector>

#include "c2bn/matrix.hpp"
#include "c2bn/nn.hpp"

namespace c2bn::nn {

// Reverse-mode recorder. Every op evaluates eagerly and appends a node whose
// backward closure scatters the node's gradient into its inputs. Parameters
// are registered by address, so gradient() can be queried with the same
// Matrix object the model owns.
class Tape {
public:
    struct Var {
        std::size_t id = 0;
    };

    Var constant(Matrix value);
    // Snapshot of the parameter's current value; registering twice returns the same node.
    Var parameter(const Matrix& param);

    const Matrix& value(Var v) const { return nodes_.at(v.id).value; }

    Var linear(Var x, Var weights, Var bias);
    Var leaky_relu(Var x, double slope = kDefaultLeakySlope);
    Var sigmoid(Var x);
    // Pooled-statistics normalization followed by a label-selected affine.
    // Running statistics of `bank` are updated in training mode.
    Var norm(Var x, LabelView labels, Var gamma, Var beta, CbnParamBank& bank, bool training);
    Var concat_cols(Var left, Var right);
    Var clamp(Var x, double lo, double hi);
    // mu + exp(0.5 * clamp(logvar)) * noise; noise is a constant.
    Var reparameterize(Var mu, Var logvar, const Matrix& noise);
    Var add(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var sum(Var a);
    Var mse(Var a, Var b);
    Var kl_gaussian(Var mu, Var logvar);

    // loss must be 1x1. Clears gradients of any earlier backward pass.
    void backward(Var loss);

    // Gradient of the last backward() loss w.r.t. a registered parameter.
    // Throws Error if the parameter was never registered.
    const Matrix& gradient(const Matrix& param) const;

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;  // empty until something flows into it
        std::function<void(Tape&, const Matrix&)> backprop;
    };

    Var push(Matrix value, std::function<void(Tape&, const Matrix&)> backprop = {});
    void accumulate(Var v, const Matrix& g);

    std::vector<Node> nodes_;
    std::unordered_map<const Matrix*, std::size_t> params_;
};

}  // namespace c2bn::nn
