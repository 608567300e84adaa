#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gslm/tensor.hpp"

namespace gslm {

// Trainable tensor with its gradient accumulator. Gradients accumulate
// additively across uses and must be zeroed before each optimization step.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
    void zero_grad() { grad.fill(0.0); }
};

// Optional destination for parameter gradients; used by batch-parallel
// training so worker threads do not touch the shared Parameter::grad.
using GradSink = std::unordered_map<Parameter*, Tensor>;

// Reverse-mode tape. Nodes are recorded in forward construction order and
// backward() walks them in exact reverse order. One tape per forward pass.
class Tape {
public:
    using Id = int;

    // Leaves.
    Id input(Tensor t);            // constant, no gradient
    Id param(Parameter& p);        // differentiable, bound to external storage

    // Primitives. conv2d is cross-correlation; kernel extents must be odd,
    // bias may be -1 for none. Per-output accumulation order is
    // (c_in, ky, kx), which the direct-loop reference in the tests relies on.
    Id conv2d(Id x, Id w, Id bias, int stride, int padding);
    Id relu(Id x);                 // subgradient 0 at exactly 0
    Id relu_k(Id x, double k);     // clamp to [0,k]; gradient 0 outside (0,k)
    Id sigmoid(Id x);
    Id global_average_pool(Id x);  // CxHxW -> C
    Id scale(Id x, double c);
    Id shift(Id x, double c);
    Id add(Id a, Id b);
    Id add_scaled(Id a, Id b, double beta);  // a + beta*b
    Id mul(Id a, Id b);            // elementwise
    Id sum(Id x);                  // -> scalar

    // Per-channel global-max normalized map: relu(x_c) / max(x_c), with the
    // max taken over raw values; channels whose max is <= 0 come out all
    // zero. Differentiable through both numerator and max.
    Id max_norm_cam(Id logits);

    // Mean binary cross-entropy over classes; predictions clamped to
    // [1e-12, 1-1e-12] with zero gradient where the clamp binds.
    Id bce_mean(Id pred, std::vector<double> target);

    // Masked smooth-L1 (transition point 1): pixels with target < 0 are
    // ignored; per-class mean over supervised pixels, then mean over classes
    // flagged in use_class that have at least one supervised pixel. Returns 0
    // when nothing is supervised. supervised_count_out (optional) receives
    // the number of contributing pixels.
    Id masked_smooth_l1(Id maps, Tensor target, std::vector<char> use_class,
                        long* supervised_count_out = nullptr);

    // Runs reverse accumulation from a scalar loss. Parameter gradients are
    // added into Parameter::grad, or into `sink` when given.
    void backward(Id loss);
    void backward(Id loss, GradSink& sink);

    const Tensor& value(Id id) const { return nodes_[static_cast<size_t>(id)].value; }
    // Gradient of the most recent backward() at a node (testing hook).
    const Tensor& grad(Id id) const;
    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Parameter* bound = nullptr;
        bool needs_grad = false;
        std::function<void(Tape&, Id)> back;  // pulls grad(id) into inputs
    };

    Id push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }
    bool needs(Id id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }
    Tensor& grad_buf(Id id);
    void add_grad(Id id, const Tensor& g);
    void run_backward(Id loss, GradSink* sink);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    std::vector<char> touched_;
};

// Polynomial learning-rate decay: base * (1 - iteration/max_iterations)^power.
double poly_lr(double base_lr, int iteration, int max_iterations, double power);

// Plain SGD step: p <- p - lr * scale(p) * (grad + weight_decay * p), with lr
// from poly_lr and scale(p) taken from the first matching name prefix
// (default 1). Rejects negative rates and out-of-range iterations.
void sgd_step(const std::vector<Parameter*>& params, double base_lr, int iteration,
              int max_iterations, double power, double weight_decay,
              const std::vector<std::pair<std::string, double>>& group_lr_scale);

// SGD with momentum on top of the same decay/scaling rules; momentum 0
// reduces exactly to sgd_step.
class SgdOptimizer {
public:
    SgdOptimizer(double base_lr, int max_iterations, double power, double weight_decay,
                 double momentum, std::vector<std::pair<std::string, double>> group_lr_scale);
    void step(const std::vector<Parameter*>& params, int iteration);

private:
    double base_lr_, power_, weight_decay_, momentum_;
    int max_iterations_;
    std::vector<std::pair<std::string, double>> scales_;
    std::unordered_map<std::string, Tensor> velocity_;
};

}  // namespace gslm
