#pragma once

#include "saifdl/types.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace saifdl::rulelang {

// Line-oriented constraint language with two rule forms:
//
//   rule cap: output[0] <= 4.2 weight 1.5 penalty softplus k=10
//   rule hot: if feature[0] > 0.8 and feature[1] < 0.3 then class 1 margin 0.6
//
// Omitted clauses materialize to weight 1, penalty relu, margin 0.5.
// Comments run from '#' to end of line; newlines are ordinary whitespace.

enum class Comparator { LT, LE, GT, GE };

const char* comparator_text(Comparator cmp);
bool comparator_holds(Comparator cmp, double lhs, double rhs);

enum class PenaltyVariant { ReLU, Softplus };

struct PenaltyKind {
    PenaltyVariant variant = PenaltyVariant::ReLU;
    double k = 0.0;  // sharpness, Softplus only

    friend bool operator==(const PenaltyKind&, const PenaltyKind&) = default;
};

struct FeatureAtom {
    std::int64_t feature_index = 0;  // bound-checked at compile time, not parse time
    Comparator comparator = Comparator::GT;
    double threshold = 0.0;

    friend bool operator==(const FeatureAtom&, const FeatureAtom&) = default;
};

struct BoundRule {
    std::int64_t output_index = 0;
    Comparator comparator = Comparator::LE;
    double constant = 0.0;

    friend bool operator==(const BoundRule&, const BoundRule&) = default;
};

struct ImplicationRule {
    std::vector<FeatureAtom> antecedent;  // conjunction, never empty
    std::int64_t target_class = 0;
    double margin = 0.5;  // in (0, 1]

    friend bool operator==(const ImplicationRule&, const ImplicationRule&) = default;
};

struct SourceSpan {
    int begin_line = 0;
    int begin_column = 0;
    int end_line = 0;
    int end_column = 0;
};

struct RuleAst {
    std::string name;
    std::variant<BoundRule, ImplicationRule> body;
    double weight = 1.0;  // gamma, > 0
    PenaltyKind penalty;
    SourceSpan span;

    // Structural equality; source spans are deliberately excluded so that
    // reformatted rules compare equal.
    friend bool operator==(const RuleAst& a, const RuleAst& b) {
        return a.name == b.name && a.body == b.body && a.weight == b.weight &&
               a.penalty == b.penalty;
    }
};

struct RuleSet {
    std::vector<RuleAst> rules;

    friend bool operator==(const RuleSet&, const RuleSet&) = default;
};

enum class TokenKind {
    Rule,
    Output,
    Feature,
    If,
    And,
    Then,
    Class,
    Weight,
    Penalty,
    Margin,
    Relu,
    Softplus,
    K,
    Ident,
    Int,
    Num,
    Colon,
    LBracket,
    RBracket,
    Equals,
    Le,
    Ge,
    Lt,
    Gt,
    End,
};

struct Token {
    TokenKind kind = TokenKind::End;
    std::string text;            // identifier spelling
    double number = 0.0;         // Int and Num
    std::int64_t integer = 0;    // Int only
    int line = 1;
    int column = 1;
};

std::vector<Token> tokenize(std::string_view source);

/// Parses and validates; throws LexError/ParseError/ValidationError on the
/// first problem encountered.
RuleSet parse_rules(std::string_view source);

/// Canonical text form: one rule per line, every optional clause spelled
/// out, numbers in shortest round-trip notation. parse_rules(format_rules(r))
/// reproduces r.
std::string format_rules(const RuleSet& rules);

}  // namespace saifdl::rulelang
