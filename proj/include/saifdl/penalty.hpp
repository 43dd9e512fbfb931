#pragma once

#include "saifdl/rulelang.hpp"
#include "saifdl/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace saifdl::penalty {

/// max(0, v) with subgradient 0 at v = 0.
std::pair<double, double> relu_penalty(double violation);

/// (1/k) ln(1 + exp(k v)), overflow-safe; derivative is the logistic
/// sigma(k v). The branch switches at k v = 30, where the correction term
/// drops below double rounding.
std::pair<double, double> softplus_penalty(double violation, double k);

// A rule lowered against fixed feature/output dimensions. Violation and
// gradient are functions of the prediction row only; the antecedent gate is
// a 0/1 function of the raw features. Per-sample penalty is
// applicability(x) * penalty_of(violation(y)).
class CompiledRule {
public:
    const rulelang::RuleAst& source() const { return source_; }
    const std::string& name() const { return source_.name; }
    double weight() const { return source_.weight; }
    Index feature_dim() const { return feature_dim_; }
    Index output_dim() const { return output_dim_; }

    double applicability(const Eigen::Ref<const Eigen::RowVectorXd>& features) const;
    double violation(const Eigen::Ref<const Eigen::RowVectorXd>& prediction) const;

    /// Penalty of the violation and its gradient w.r.t. the prediction row
    /// (the applicability gate is not applied here).
    std::pair<double, Eigen::RowVectorXd> penalty_value_and_grad(
        const Eigen::Ref<const Eigen::RowVectorXd>& prediction) const;

private:
    friend CompiledRule compile_rule(const rulelang::RuleAst&, Index, Index, Task);

    rulelang::RuleAst source_;
    Index feature_dim_ = 0;
    Index output_dim_ = 0;
    // Signed violation is sign * prediction[index] + offset.
    Index pred_index_ = 0;
    double pred_sign_ = 1.0;
    double offset_ = 0.0;
};

/// Binds a rule to dimensions and task; throws IndexError on out-of-range
/// indices and TaskMismatchError for implication rules on regression.
CompiledRule compile_rule(const rulelang::RuleAst& rule, Index feature_dim,
                          Index output_dim, Task task);

std::vector<CompiledRule> compile_rules(const rulelang::RuleSet& rules,
                                        Index feature_dim, Index output_dim,
                                        Task task);

struct PenaltyReport {
    std::vector<std::pair<std::string, double>> per_rule;  // name, batch mean
    double total = 0.0;  // sum of weight * per-rule mean
};

/// Batch penalty — the mean over samples of sum_i gamma_i * P_i — and its
/// gradient w.r.t. the predictions.
std::pair<PenaltyReport, Matrix> asp_penalty(
    const std::vector<CompiledRule>& rules,
    const Eigen::Ref<const Matrix>& features,
    const Eigen::Ref<const Matrix>& predictions);

struct SatisfactionReport {
    std::int64_t applicable_count = 0;
    std::int64_t satisfied_count = 0;
    double ratio = 1.0;  // 1 when nothing is applicable
};

/// Exact, non-differentiable oracle over the rule ASTs. A (sample, rule)
/// pair is applicable iff the antecedent holds (bound rules always apply);
/// a bound rule is satisfied iff its comparator holds exactly, an
/// implication iff the argmax class (ties to the lowest index) equals the
/// target. Kept independent of the differentiable path above.
SatisfactionReport exact_satisfaction(const rulelang::RuleSet& rules,
                                      const Eigen::Ref<const Matrix>& features,
                                      const Eigen::Ref<const Matrix>& predictions,
                                      Task task);

}  // namespace saifdl::penalty
