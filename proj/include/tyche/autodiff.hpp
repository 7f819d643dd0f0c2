#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tyche/tensor.hpp"
#include "tyche/types.hpp"

namespace tyche::ad {

// Named learnable tensor with gradient and Adam state.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adam_m, adam_v;

    Param() = default;
    Param(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)) {}

    size_t size() const { return value.size(); }
    void zero_grad() { grad.fill(0.0); }
};

struct Node {
    Tensor val;
    Tensor grad;
    std::function<void()> back;  // pushes this->grad into parents / params

    double scalar() const { return val.v[0]; }
};

// Reverse-mode tape. Owns all nodes of one forward pass; backward() replays
// the tape in reverse creation order.
class Graph {
public:
    Node* make(Tensor val) {
        nodes_.emplace_back(std::make_unique<Node>());
        Node* n = nodes_.back().get();
        n->grad = Tensor::zeros_like(val);
        n->val = std::move(val);
        return n;
    }

    // Seeds root->grad with 1 and propagates.
    void backward(Node* root);

    // Tensor ops ------------------------------------------------------------

    Node* constant(Tensor t) { return make(std::move(t)); }

    // Same-padding convolution with weight [cout][cin][k*k] and bias
    // [cout]x1x1; gradients accumulate directly into the params.
    Node* conv(Node* x, Param& w, Param& b, int k);

    Node* leaky_relu(Node* x, double slope);
    Node* sigmoid(Node* x);
    Node* concat(const std::vector<Node*>& xs);
    Node* maxpool(Node* x);
    Node* upsample(Node* x);

    // Element-wise mean of a set of same-shape tensors. With canonical=true
    // the per-element summands are sorted before accumulation, so the result
    // is bitwise invariant under permutation of xs.
    Node* mean_set(const std::vector<Node*>& xs, bool canonical);

    // Scalar ops -------------------------------------------------------------

    Node* scalar(double v) { return make(Tensor::scalar(v)); }

    // sum_i coef[i] * xs[i] + bias over scalar nodes.
    Node* affine_sum(const std::vector<Node*>& xs, const std::vector<double>& coef, double bias);

    // Passes through xs[idx]; gradient flows only to that component.
    Node* select(const std::vector<Node*>& xs, size_t idx);

    // Loss primitives ---------------------------------------------------------

    // 1 - (2*sum(p*g)+eps) / (sum p + sum g + eps), eps = 1e-5. pred is 1xHxW.
    Node* soft_dice(Node* pred, const LabelMask& truth);
    // Same formula with both arguments soft (used as the GED distance).
    Node* soft_dice_pair(Node* a, Node* b);
    // Mean pixelwise binary cross-entropy, probabilities clamped to
    // [1e-7, 1-1e-7].
    Node* bce_mean(Node* pred, const LabelMask& truth);

    size_t size() const { return nodes_.size(); }

private:
    std::deque<std::unique_ptr<Node>> nodes_;
};

constexpr double kDiceEps = 1e-5;
constexpr double kCeClamp = 1e-7;

}  // namespace tyche::ad
