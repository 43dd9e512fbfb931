#include "saifdl/penalty.hpp"

#include <cmath>

namespace saifdl::penalty {

using rulelang::BoundRule;
using rulelang::Comparator;
using rulelang::ImplicationRule;
using rulelang::PenaltyVariant;
using rulelang::RuleAst;
using rulelang::RuleSet;

std::pair<double, double> relu_penalty(double violation) {
    if (!std::isfinite(violation))
        throw NumericError("relu_penalty: non-finite violation");
    if (violation > 0.0) return {violation, 1.0};
    return {0.0, 0.0};
}

std::pair<double, double> softplus_penalty(double violation, double k) {
    if (!std::isfinite(violation) || !std::isfinite(k))
        throw NumericError("softplus_penalty: non-finite input");
    if (!(k > 0.0)) throw DomainError("softplus_penalty: k must be positive");
    const double z = k * violation;
    double value;
    if (z > 30.0) {
        value = violation + std::log1p(std::exp(-z)) / k;
    } else {
        value = std::log1p(std::exp(z)) / k;
    }
    const double derivative =
        z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                 : std::exp(z) / (1.0 + std::exp(z));
    return {value, derivative};
}

namespace {

std::pair<double, double> penalty_of(const rulelang::PenaltyKind& kind,
                                     double violation) {
    if (kind.variant == PenaltyVariant::ReLU) return relu_penalty(violation);
    return softplus_penalty(violation, kind.k);
}

bool antecedent_holds(const ImplicationRule& impl,
                      const Eigen::Ref<const Eigen::RowVectorXd>& features) {
    for (const auto& atom : impl.antecedent) {
        if (!rulelang::comparator_holds(atom.comparator,
                                        features[atom.feature_index],
                                        atom.threshold))
            return false;
    }
    return true;
}

}  // namespace

double CompiledRule::applicability(
    const Eigen::Ref<const Eigen::RowVectorXd>& features) const {
    if (features.size() != feature_dim_)
        throw ShapeError("applicability: feature row has size " +
                         std::to_string(features.size()) + ", rule '" + name() +
                         "' was compiled for " + std::to_string(feature_dim_));
    if (const auto* impl = std::get_if<ImplicationRule>(&source_.body))
        return antecedent_holds(*impl, features) ? 1.0 : 0.0;
    return 1.0;
}

double CompiledRule::violation(
    const Eigen::Ref<const Eigen::RowVectorXd>& prediction) const {
    if (prediction.size() != output_dim_)
        throw ShapeError("violation: prediction row has size " +
                         std::to_string(prediction.size()) + ", rule '" +
                         name() + "' was compiled for " +
                         std::to_string(output_dim_));
    return pred_sign_ * prediction[pred_index_] + offset_;
}

std::pair<double, Eigen::RowVectorXd> CompiledRule::penalty_value_and_grad(
    const Eigen::Ref<const Eigen::RowVectorXd>& prediction) const {
    const double v = violation(prediction);
    auto [value, derivative] = penalty_of(source_.penalty, v);
    Eigen::RowVectorXd grad = Eigen::RowVectorXd::Zero(output_dim_);
    grad[pred_index_] = derivative * pred_sign_;
    return {value, std::move(grad)};
}

CompiledRule compile_rule(const RuleAst& rule, Index feature_dim,
                          Index output_dim, Task task) {
    CompiledRule compiled;
    compiled.source_ = rule;
    compiled.feature_dim_ = feature_dim;
    compiled.output_dim_ = output_dim;

    if (const auto* bound = std::get_if<BoundRule>(&rule.body)) {
        if (bound->output_index >= output_dim)
            throw IndexError("rule '" + rule.name + "': output index " +
                             std::to_string(bound->output_index) +
                             " out of range for output dimension " +
                             std::to_string(output_dim));
        compiled.pred_index_ = bound->output_index;
        // output[j] <= c (or <): violation = y[j] - c
        // output[j] >= c (or >): violation = c - y[j]
        // Strictness only matters to the exact oracle.
        if (bound->comparator == Comparator::LE ||
            bound->comparator == Comparator::LT) {
            compiled.pred_sign_ = 1.0;
            compiled.offset_ = -bound->constant;
        } else {
            compiled.pred_sign_ = -1.0;
            compiled.offset_ = bound->constant;
        }
    } else {
        const auto& impl = std::get<ImplicationRule>(rule.body);
        if (task != Task::Classification)
            throw TaskMismatchError("rule '" + rule.name +
                                    "': implication rules require a "
                                    "classification task");
        for (const auto& atom : impl.antecedent) {
            if (atom.feature_index >= feature_dim)
                throw IndexError("rule '" + rule.name + "': feature index " +
                                 std::to_string(atom.feature_index) +
                                 " out of range for feature dimension " +
                                 std::to_string(feature_dim));
        }
        if (impl.target_class >= output_dim)
            throw IndexError("rule '" + rule.name + "': class " +
                             std::to_string(impl.target_class) +
                             " out of range for " + std::to_string(output_dim) +
                             " outputs");
        // violation = margin - p_target
        compiled.pred_index_ = impl.target_class;
        compiled.pred_sign_ = -1.0;
        compiled.offset_ = impl.margin;
    }
    return compiled;
}

std::vector<CompiledRule> compile_rules(const RuleSet& rules, Index feature_dim,
                                        Index output_dim, Task task) {
    std::vector<CompiledRule> compiled;
    compiled.reserve(rules.rules.size());
    for (const RuleAst& rule : rules.rules)
        compiled.push_back(compile_rule(rule, feature_dim, output_dim, task));
    return compiled;
}

std::pair<PenaltyReport, Matrix> asp_penalty(
    const std::vector<CompiledRule>& rules,
    const Eigen::Ref<const Matrix>& features,
    const Eigen::Ref<const Matrix>& predictions) {
    const Index batch = features.rows();
    if (predictions.rows() != batch)
        throw ShapeError("asp_penalty: features have " + std::to_string(batch) +
                         " rows, predictions " +
                         std::to_string(predictions.rows()));
    for (const CompiledRule& rule : rules) {
        if (features.cols() != rule.feature_dim() ||
            predictions.cols() != rule.output_dim())
            throw ShapeError("asp_penalty: batch dimensions do not match rule '" +
                             rule.name() + "'");
    }

    PenaltyReport report;
    Matrix grad = Matrix::Zero(predictions.rows(), predictions.cols());
    report.per_rule.reserve(rules.size());
    if (batch == 0) {
        for (const CompiledRule& rule : rules)
            report.per_rule.emplace_back(rule.name(), 0.0);
        return {std::move(report), std::move(grad)};
    }

    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (const CompiledRule& rule : rules) {
        double sum = 0.0;
        for (Index s = 0; s < batch; ++s) {
            const double gate = rule.applicability(features.row(s));
            if (gate == 0.0) continue;
            auto [value, row_grad] = rule.penalty_value_and_grad(predictions.row(s));
            sum += value;
            grad.row(s) += (rule.weight() * inv_batch) * row_grad;
        }
        const double mean = sum * inv_batch;
        report.per_rule.emplace_back(rule.name(), mean);
        report.total += rule.weight() * mean;
    }
    return {std::move(report), std::move(grad)};
}

SatisfactionReport exact_satisfaction(const RuleSet& rules,
                                      const Eigen::Ref<const Matrix>& features,
                                      const Eigen::Ref<const Matrix>& predictions,
                                      Task task) {
    const Index batch = features.rows();
    if (predictions.rows() != batch)
        throw ShapeError("exact_satisfaction: features have " +
                         std::to_string(batch) + " rows, predictions " +
                         std::to_string(predictions.rows()));

    SatisfactionReport report;
    for (const RuleAst& rule : rules.rules) {
        if (const auto* bound = std::get_if<BoundRule>(&rule.body)) {
            if (bound->output_index >= predictions.cols())
                throw IndexError("rule '" + rule.name +
                                 "': output index out of range");
            for (Index s = 0; s < batch; ++s) {
                ++report.applicable_count;
                const double y = predictions(s, bound->output_index);
                if (rulelang::comparator_holds(bound->comparator, y,
                                               bound->constant))
                    ++report.satisfied_count;
            }
        } else {
            const auto& impl = std::get<ImplicationRule>(rule.body);
            if (task != Task::Classification)
                throw TaskMismatchError("rule '" + rule.name +
                                        "': implication rules require a "
                                        "classification task");
            if (impl.target_class >= predictions.cols())
                throw IndexError("rule '" + rule.name +
                                 "': class out of range");
            for (const auto& atom : impl.antecedent) {
                if (atom.feature_index >= features.cols())
                    throw IndexError("rule '" + rule.name +
                                     "': feature index out of range");
            }
            for (Index s = 0; s < batch; ++s) {
                if (!antecedent_holds(impl, features.row(s))) continue;
                ++report.applicable_count;
                if (argmax_row(predictions.row(s)) == impl.target_class)
                    ++report.satisfied_count;
            }
        }
    }
    report.ratio = report.applicable_count == 0
                       ? 1.0
                       : static_cast<double>(report.satisfied_count) /
                             static_cast<double>(report.applicable_count);
    return report;
}

}  // namespace saifdl::penalty
