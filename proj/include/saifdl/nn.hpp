#pragma once

#include "saifdl/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace saifdl::nn {

enum class Activation { ReLU, Identity };

struct LayerSpec {
    Index input_dim = 0;
    Index output_dim = 0;
    Activation activation = Activation::Identity;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Feedforward network. Layer l maps a B x in batch to B x out via
// act(X W_l + b_l) with W_l stored input_dim x output_dim. A classification
// network applies a softmax head to the final layer output ("logits");
// regression returns the raw affine output.
struct Network {
    std::vector<LayerSpec> layers;
    std::vector<Matrix> weights;  // input_dim x output_dim
    std::vector<Vector> biases;   // output_dim
    Task task = Task::Classification;

    Index input_dim() const { return layers.front().input_dim; }
    Index output_dim() const { return layers.back().output_dim; }
    std::int64_t parameter_count() const;
};

/// Glorot-uniform weights U(-a, a), a = sqrt(6 / (fan_in + fan_out)), zero
/// biases. Draw order is pinned: layers first to last, each weight matrix
/// row-major, from the seeded generator in rng.hpp.
Network init_network(const std::vector<LayerSpec>& specs, Task task,
                     std::uint64_t seed);

struct ForwardCache {
    std::vector<Matrix> inputs;       // input batch of each layer
    std::vector<Matrix> preactivations;
};

/// Returns (predictions, cache). Classification rows are softmax
/// probabilities (max-subtracted for stability); regression rows are the
/// affine outputs.
std::pair<Matrix, ForwardCache> forward(const Network& net,
                                        const Eigen::Ref<const Matrix>& X);

enum class LossKind { CrossEntropy, MSE, MAE };

const char* loss_name(LossKind kind);
LossKind loss_from_name(const std::string& name);

/// Base loss and its gradient, both batch means.
///
/// CrossEntropy expects y_pred as softmax probabilities and y_true as class
/// indices; probabilities are clamped to [1e-12, 1] inside the log. Fused
/// contract: the returned gradient is taken w.r.t. the LOGITS,
/// (p - onehot) / B, ready to feed backward() directly. MSE and MAE expect a
/// single-column y_pred and return gradients w.r.t. that output.
std::pair<double, Matrix> base_loss(LossKind kind,
                                    const Eigen::Ref<const Vector>& y_true,
                                    const Eigen::Ref<const Matrix>& y_pred);

struct ParamGrads {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

/// Reverse-mode gradients of a scalar loss w.r.t. every parameter.
/// output_gradient is d(loss)/d(final layer output) — logit space for
/// classification (see base_loss). ReLU passes zero gradient at exactly 0.
ParamGrads backward(const Network& net, const ForwardCache& cache,
                    const Eigen::Ref<const Matrix>& output_gradient);

/// Row-wise vector-Jacobian product of the softmax head: converts a
/// gradient w.r.t. probabilities into one w.r.t. logits.
Matrix softmax_vjp(const Eigen::Ref<const Matrix>& probs,
                   const Eigen::Ref<const Matrix>& grad_probs);

struct AdamState {
    std::int64_t step = 0;
    std::vector<Matrix> m_weights, v_weights;
    std::vector<Vector> m_biases, v_biases;
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

AdamState init_adam(const Network& net, double learning_rate = 0.01,
                    double beta1 = 0.9, double beta2 = 0.999,
                    double epsilon = 1e-8);

/// One bias-corrected Adam update, in place.
void adam_step(AdamState& state, Network& net, const ParamGrads& grads);

// Checkpoint container: versioned JSON with layer specs and parameters,
// weight matrices flattened row-major. Values survive the round trip
// bit-exactly.
void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace saifdl::nn
