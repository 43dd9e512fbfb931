#include "saifdl/trainer.hpp"

#include "saifdl/rng.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace saifdl::trainer {

using data::Dataset;
using penalty::CompiledRule;
using penalty::SatisfactionReport;

std::pair<double, Matrix> total_loss(double base_value,
                                     const Eigen::Ref<const Matrix>& base_grad,
                                     double penalty_value,
                                     const Eigen::Ref<const Matrix>& penalty_grad,
                                     double lambda) {
    if (lambda == 0.0) return {base_value, base_grad};
    if (base_grad.rows() != penalty_grad.rows() ||
        base_grad.cols() != penalty_grad.cols())
        throw ShapeError("total_loss: gradient shapes differ");
    return {base_value + lambda * penalty_value,
            base_grad + lambda * penalty_grad};
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds,
                                          double validation_fraction) {
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw DomainError("validation_fraction must lie in [0, 1)");
    const Index val_rows = static_cast<Index>(
        std::floor(validation_fraction * static_cast<double>(ds.size())));
    const Index train_rows = ds.size() - val_rows;
    Dataset train{ds.features.topRows(train_rows), ds.labels.head(train_rows),
                  ds.task};
    Dataset val{ds.features.bottomRows(val_rows), ds.labels.tail(val_rows),
                ds.task};
    return {std::move(train), std::move(val)};
}

namespace {

struct SplitMetrics {
    double base = std::numeric_limits<double>::quiet_NaN();
    double penalty = std::numeric_limits<double>::quiet_NaN();
    double total = std::numeric_limits<double>::quiet_NaN();
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    double satisfaction = 1.0;
};

double accuracy_of(const Matrix& probs, const Vector& labels) {
    Index hits = 0;
    for (Index s = 0; s < probs.rows(); ++s)
        if (static_cast<double>(argmax_row(probs.row(s))) == labels[s]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(probs.rows());
}

SplitMetrics measure_split(const nn::Network& net,
                           const std::vector<CompiledRule>& compiled,
                           const rulelang::RuleSet& rules, const Dataset& ds,
                           nn::LossKind loss, double lambda) {
    SplitMetrics m;
    if (ds.size() == 0) return m;  // empty split: losses stay NaN
    auto [predictions, cache] = nn::forward(net, ds.features);
    m.base = nn::base_loss(loss, ds.labels, predictions).first;
    m.penalty =
        compiled.empty()
            ? 0.0
            : penalty::asp_penalty(compiled, ds.features, predictions)
                  .first.total;
    m.total = m.base + lambda * m.penalty;
    if (net.task == Task::Classification)
        m.accuracy = accuracy_of(predictions, ds.labels);
    m.satisfaction =
        penalty::exact_satisfaction(rules, ds.features, predictions, net.task)
            .ratio;
    return m;
}

void check_train_inputs(const nn::Network& net, const Dataset& train_data,
                        const Dataset& val_data, const TrainingConfig& config) {
    if (train_data.size() == 0) throw ShapeError("train: empty training data");
    if (train_data.feature_dim() != net.input_dim())
        throw ShapeError("train: data has " +
                         std::to_string(train_data.feature_dim()) +
                         " features, network expects " +
                         std::to_string(net.input_dim()));
    if (val_data.size() > 0 && val_data.feature_dim() != net.input_dim())
        throw ShapeError("train: validation feature dimension mismatch");
    if (train_data.task != net.task || (val_data.size() > 0 && val_data.task != net.task))
        throw TaskMismatchError("train: dataset task does not match network");
    if (net.task == Task::Regression && net.output_dim() != 1)
        throw ShapeError("train: regression networks need exactly one output");
    if (config.epochs <= 0) throw DomainError("train: epochs must be positive");
    if (config.batch_size <= 0)
        throw DomainError("train: batch_size must be positive");
    if (!(config.lambda >= 0.0) || !std::isfinite(config.lambda))
        throw DomainError("train: lambda must be finite and >= 0");
}

}  // namespace

RunResult train(nn::Network net, const rulelang::RuleSet& rules,
                const Dataset& train_data, const Dataset& val_data,
                const TrainingConfig& config) {
    check_train_inputs(net, train_data, val_data, config);
    const std::vector<CompiledRule> compiled = penalty::compile_rules(
        rules, net.input_dim(), net.output_dim(), net.task);
    const bool penalized = config.lambda > 0.0 && !compiled.empty();

    nn::AdamState adam = nn::init_adam(net, config.learning_rate, config.beta1,
                                       config.beta2, config.epsilon);
    Rng shuffle_rng(config.seed);
    std::vector<Index> order(static_cast<std::size_t>(train_data.size()));
    std::iota(order.begin(), order.end(), Index{0});

    RunResult result;
    result.config = config;
    result.curves.reserve(static_cast<std::size_t>(config.epochs));

    Matrix batch_x;
    Vector batch_y;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        if (config.shuffle) shuffle(order, shuffle_rng);
        const Index n = train_data.size();
        Index batch_index = 0;
        for (Index start = 0; start < n; start += config.batch_size, ++batch_index) {
            const Index count = std::min<Index>(config.batch_size, n - start);
            batch_x.resize(count, train_data.feature_dim());
            batch_y.resize(count);
            for (Index i = 0; i < count; ++i) {
                batch_x.row(i) = train_data.features.row(order[start + i]);
                batch_y[i] = train_data.labels[order[start + i]];
            }

            auto [predictions, cache] = nn::forward(net, batch_x);
            auto [base_value, base_grad] =
                nn::base_loss(config.loss, batch_y, predictions);

            double batch_total = base_value;
            nn::ParamGrads grads;
            if (penalized) {
                auto [report, penalty_grad] =
                    penalty::asp_penalty(compiled, batch_x, predictions);
                Matrix penalty_grad_out =
                    net.task == Task::Classification
                        ? nn::softmax_vjp(predictions, penalty_grad)
                        : std::move(penalty_grad);
                auto [total_value, total_grad] =
                    total_loss(base_value, base_grad, report.total,
                               penalty_grad_out, config.lambda);
                batch_total = total_value;
                grads = nn::backward(net, cache, total_grad);
            } else {
                grads = nn::backward(net, cache, base_grad);
            }
            if (!std::isfinite(batch_total))
                throw DivergedError("train: non-finite loss", epoch, batch_index);
            nn::adam_step(adam, net, grads);
        }

        const SplitMetrics train_m = measure_split(net, compiled, rules,
                                                   train_data, config.loss,
                                                   config.lambda);
        const SplitMetrics val_m = measure_split(net, compiled, rules, val_data,
                                                 config.loss, config.lambda);
        EpochMetrics metrics;
        metrics.epoch = epoch;
        metrics.train_base = train_m.base;
        metrics.train_penalty = train_m.penalty;
        metrics.train_total = train_m.total;
        metrics.val_base = val_m.base;
        metrics.val_penalty = val_m.penalty;
        metrics.val_total = val_m.total;
        metrics.val_accuracy = val_m.accuracy;
        metrics.val_satisfaction = val_m.satisfaction;
        result.curves.push_back(metrics);
    }

    result.final_accuracy = result.curves.back().val_accuracy;
    result.final_domain_satisfaction = result.curves.back().val_satisfaction;
    result.model = std::move(net);
    return result;
}

std::pair<double, SatisfactionReport> evaluate(const nn::Network& net,
                                               const rulelang::RuleSet& rules,
                                               const Dataset& dataset) {
    if (dataset.feature_dim() != net.input_dim())
        throw ShapeError("evaluate: feature dimension mismatch");
    auto [predictions, cache] = nn::forward(net, dataset.features);
    double metric;
    if (net.task == Task::Classification) {
        metric = accuracy_of(predictions, dataset.labels);
    } else {
        metric = nn::base_loss(nn::LossKind::MSE, dataset.labels, predictions)
                     .first;
    }
    SatisfactionReport report = penalty::exact_satisfaction(
        rules, dataset.features, predictions, net.task);
    return {metric, report};
}

std::vector<RunResult> sweep_lambda(const std::vector<nn::LayerSpec>& architecture,
                                    Task task, const rulelang::RuleSet& rules,
                                    const Dataset& train_data,
                                    const Dataset& val_data,
                                    const TrainingConfig& base_config,
                                    const std::vector<double>& lambdas) {
    std::vector<RunResult> results;
    results.reserve(lambdas.size());
    for (double lambda : lambdas) {
        TrainingConfig config = base_config;
        config.lambda = lambda;
        nn::Network net = nn::init_network(architecture, task, config.seed);
        results.push_back(
            train(std::move(net), rules, train_data, val_data, config));
    }
    return results;
}

}  // namespace saifdl::trainer
