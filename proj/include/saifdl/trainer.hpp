#pragma once

#include "saifdl/data.hpp"
#include "saifdl/nn.hpp"
#include "saifdl/penalty.hpp"
#include "saifdl/rulelang.hpp"
#include "saifdl/types.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace saifdl::trainer {

struct TrainingConfig {
    double lambda = 1.0;  // penalty weight, >= 0
    int epochs = 20;
    int batch_size = 32;
    std::uint64_t seed = 42;
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    nn::LossKind loss = nn::LossKind::CrossEntropy;
    double validation_fraction = 0.2;  // in [0, 1)
    bool shuffle = true;
};

struct EpochMetrics {
    int epoch = 0;  // 1-based
    double train_base = 0.0;
    double train_penalty = 0.0;
    double train_total = 0.0;
    double val_base = 0.0;
    double val_penalty = 0.0;
    double val_total = 0.0;
    double val_accuracy = 0.0;  // NaN for regression runs
    double val_satisfaction = 1.0;
};

struct RunResult {
    TrainingConfig config;
    std::vector<EpochMetrics> curves;  // one entry per epoch
    double final_accuracy = 0.0;
    double final_domain_satisfaction = 1.0;
    nn::Network model;
};

/// Combined objective value and gradient: base + lambda * penalty. With
/// lambda == 0 the base pair is returned untouched, so a penalty-free run is
/// bit-identical to a plain one. Both gradients must already live in the
/// same space (logit space for classification; see nn::softmax_vjp).
std::pair<double, Matrix> total_loss(double base_value,
                                     const Eigen::Ref<const Matrix>& base_grad,
                                     double penalty_value,
                                     const Eigen::Ref<const Matrix>& penalty_grad,
                                     double lambda);

/// First (1 - fraction) * B rows become the training split, the remainder
/// validation.
std::pair<data::Dataset, data::Dataset> split_dataset(const data::Dataset& ds,
                                                      double validation_fraction);

/// Epoch/minibatch loop: forward, penalty, loss, backward, Adam update, in
/// that order. Shuffling is Fisher-Yates from a generator seeded with
/// config.seed. Throws DivergedError on a non-finite batch loss.
RunResult train(nn::Network net, const rulelang::RuleSet& rules,
                const data::Dataset& train_data, const data::Dataset& val_data,
                const TrainingConfig& config);

/// Accuracy (classification, argmax with ties to the lowest index) or MSE
/// (regression), plus the exact satisfaction report on the model's
/// predictions.
std::pair<double, penalty::SatisfactionReport> evaluate(
    const nn::Network& net, const rulelang::RuleSet& rules,
    const data::Dataset& dataset);

/// One independent run per lambda value; every run re-initializes the
/// network from the same seed and sees identical data. Results keep the
/// input order.
std::vector<RunResult> sweep_lambda(const std::vector<nn::LayerSpec>& architecture,
                                    Task task, const rulelang::RuleSet& rules,
                                    const data::Dataset& train_data,
                                    const data::Dataset& val_data,
                                    const TrainingConfig& base_config,
                                    const std::vector<double>& lambdas);

}  // namespace saifdl::trainer
