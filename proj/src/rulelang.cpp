#include "saifdl/rulelang.hpp"

#include "saifdl/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace saifdl::rulelang {

const char* comparator_text(Comparator cmp) {
    switch (cmp) {
        case Comparator::LT: return "<";
        case Comparator::LE: return "<=";
        case Comparator::GT: return ">";
        case Comparator::GE: return ">=";
    }
    return "";
}

bool comparator_holds(Comparator cmp, double lhs, double rhs) {
    switch (cmp) {
        case Comparator::LT: return lhs < rhs;
        case Comparator::LE: return lhs <= rhs;
        case Comparator::GT: return lhs > rhs;
        case Comparator::GE: return lhs >= rhs;
    }
    return false;
}

namespace {

const std::unordered_map<std::string_view, TokenKind>& keyword_table() {
    static const std::unordered_map<std::string_view, TokenKind> table = {
        {"rule", TokenKind::Rule},       {"output", TokenKind::Output},
        {"feature", TokenKind::Feature}, {"if", TokenKind::If},
        {"and", TokenKind::And},         {"then", TokenKind::Then},
        {"class", TokenKind::Class},     {"weight", TokenKind::Weight},
        {"penalty", TokenKind::Penalty}, {"margin", TokenKind::Margin},
        {"relu", TokenKind::Relu},       {"softplus", TokenKind::Softplus},
        {"k", TokenKind::K},
    };
    return table;
}

class Lexer {
public:
    explicit Lexer(std::string_view source) : src_(source) {}

    std::vector<Token> run() {
        std::vector<Token> tokens;
        while (true) {
            skip_trivia();
            if (at_end()) break;
            tokens.push_back(next_token());
        }
        Token end;
        end.kind = TokenKind::End;
        end.line = line_;
        end.column = column_;
        tokens.push_back(end);
        return tokens;
    }

private:
    bool at_end() const { return pos_ >= src_.size(); }
    char peek() const { return src_[pos_]; }

    char advance() {
        char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            column_ = 1;
        } else {
            ++column_;
        }
        return c;
    }

    void skip_trivia() {
        while (!at_end()) {
            char c = peek();
            if (c == '#') {
                while (!at_end() && peek() != '\n') advance();
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance();
            } else {
                break;
            }
        }
    }

    Token next_token() {
        Token tok;
        tok.line = line_;
        tok.column = column_;
        char c = peek();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string word;
            while (!at_end()) {
                char w = peek();
                if (std::isalnum(static_cast<unsigned char>(w)) || w == '_') {
                    word.push_back(advance());
                } else {
                    break;
                }
            }
            auto it = keyword_table().find(word);
            tok.kind = it != keyword_table().end() ? it->second : TokenKind::Ident;
            tok.text = std::move(word);
            return tok;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '-') {
            return lex_number(tok);
        }
        switch (c) {
            case ':': advance(); tok.kind = TokenKind::Colon; return tok;
            case '[': advance(); tok.kind = TokenKind::LBracket; return tok;
            case ']': advance(); tok.kind = TokenKind::RBracket; return tok;
            case '=': advance(); tok.kind = TokenKind::Equals; return tok;
            case '<':
                advance();
                if (!at_end() && peek() == '=') {
                    advance();
                    tok.kind = TokenKind::Le;
                } else {
                    tok.kind = TokenKind::Lt;
                }
                return tok;
            case '>':
                advance();
                if (!at_end() && peek() == '=') {
                    advance();
                    tok.kind = TokenKind::Ge;
                } else {
                    tok.kind = TokenKind::Gt;
                }
                return tok;
            default:
                throw LexError(std::string("unexpected character '") + c + "'",
                               tok.line, tok.column);
        }
    }

    // INT = [0-9]+; NUM adds optional sign, fraction, exponent. A literal
    // with sign, '.', or exponent lexes as Num, otherwise as Int.
    Token lex_number(Token tok) {
        std::string text;
        bool is_int = true;
        if (peek() == '-') {
            text.push_back(advance());
            is_int = false;
            if (at_end() || !std::isdigit(static_cast<unsigned char>(peek())))
                throw LexError("expected digit after '-'", tok.line, tok.column);
        }
        auto take_digits = [&] {
            while (!at_end() && std::isdigit(static_cast<unsigned char>(peek())))
                text.push_back(advance());
        };
        take_digits();
        if (!at_end() && peek() == '.') {
            text.push_back(advance());
            is_int = false;
            if (at_end() || !std::isdigit(static_cast<unsigned char>(peek())))
                throw LexError("expected digit after '.'", tok.line, tok.column);
            take_digits();
        }
        if (!at_end() && (peek() == 'e' || peek() == 'E')) {
            text.push_back(advance());
            is_int = false;
            if (!at_end() && (peek() == '+' || peek() == '-'))
                text.push_back(advance());
            if (at_end() || !std::isdigit(static_cast<unsigned char>(peek())))
                throw LexError("expected digit in exponent", tok.line, tok.column);
            take_digits();
        }
        if (!parse_double(text, tok.number))
            throw LexError("number out of range: " + text, tok.line, tok.column);
        if (is_int) {
            std::int64_t idx = 0;
            if (!parse_index(text, idx))
                throw LexError("integer out of range: " + text, tok.line,
                               tok.column);
            tok.kind = TokenKind::Int;
            tok.integer = idx;
        } else {
            tok.kind = TokenKind::Num;
        }
        tok.text = std::move(text);
        return tok;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
};

const char* token_name(TokenKind kind) {
    switch (kind) {
        case TokenKind::Rule: return "'rule'";
        case TokenKind::Output: return "'output'";
        case TokenKind::Feature: return "'feature'";
        case TokenKind::If: return "'if'";
        case TokenKind::And: return "'and'";
        case TokenKind::Then: return "'then'";
        case TokenKind::Class: return "'class'";
        case TokenKind::Weight: return "'weight'";
        case TokenKind::Penalty: return "'penalty'";
        case TokenKind::Margin: return "'margin'";
        case TokenKind::Relu: return "'relu'";
        case TokenKind::Softplus: return "'softplus'";
        case TokenKind::K: return "'k'";
        case TokenKind::Ident: return "identifier";
        case TokenKind::Int: return "integer";
        case TokenKind::Num: return "number";
        case TokenKind::Colon: return "':'";
        case TokenKind::LBracket: return "'['";
        case TokenKind::RBracket: return "']'";
        case TokenKind::Equals: return "'='";
        case TokenKind::Le: return "'<='";
        case TokenKind::Ge: return "'>='";
        case TokenKind::Lt: return "'<'";
        case TokenKind::Gt: return "'>'";
        case TokenKind::End: return "end of input";
    }
    return "?";
}

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    RuleSet run() {
        RuleSet set;
        std::unordered_set<std::string> names;
        while (peek().kind != TokenKind::End) {
            RuleAst rule = parse_rule(names);
            names.insert(rule.name);
            set.rules.push_back(std::move(rule));
        }
        return set;
    }

private:
    const Token& peek() const { return tokens_[pos_]; }
    const Token& previous() const { return tokens_[pos_ - 1]; }

    const Token& expect(TokenKind kind) {
        if (peek().kind != kind)
            throw ParseError(std::string("expected ") + token_name(kind) +
                                 ", found " + token_name(peek().kind),
                             peek().line, peek().column);
        return tokens_[pos_++];
    }

    bool accept(TokenKind kind) {
        if (peek().kind != kind) return false;
        ++pos_;
        return true;
    }

    // Numeric literal: Int tokens are valid where the grammar says NUM.
    double expect_number() {
        if (peek().kind == TokenKind::Num || peek().kind == TokenKind::Int)
            return tokens_[pos_++].number;
        throw ParseError(std::string("expected number, found ") +
                             token_name(peek().kind),
                         peek().line, peek().column);
    }

    std::int64_t expect_int() {
        if (peek().kind != TokenKind::Int)
            throw ParseError(std::string("expected integer, found ") +
                                 token_name(peek().kind),
                             peek().line, peek().column);
        return tokens_[pos_++].integer;
    }

    Comparator expect_comparator() {
        switch (peek().kind) {
            case TokenKind::Le: ++pos_; return Comparator::LE;
            case TokenKind::Ge: ++pos_; return Comparator::GE;
            case TokenKind::Lt: ++pos_; return Comparator::LT;
            case TokenKind::Gt: ++pos_; return Comparator::GT;
            default:
                throw ParseError(std::string("expected comparator, found ") +
                                     token_name(peek().kind),
                                 peek().line, peek().column);
        }
    }

    RuleAst parse_rule(const std::unordered_set<std::string>& names) {
        const Token& kw = expect(TokenKind::Rule);
        RuleAst rule;
        rule.span.begin_line = kw.line;
        rule.span.begin_column = kw.column;
        const Token& name = expect(TokenKind::Ident);
        if (names.contains(name.text))
            throw ValidationError("duplicate rule name '" + name.text + "'",
                                  name.line, name.column);
        rule.name = name.text;
        expect(TokenKind::Colon);

        if (peek().kind == TokenKind::Output) {
            rule.body = parse_bound();
        } else if (peek().kind == TokenKind::If) {
            rule.body = parse_implication();
        } else {
            throw ParseError(std::string("expected 'output' or 'if', found ") +
                                 token_name(peek().kind),
                             peek().line, peek().column);
        }

        if (accept(TokenKind::Weight)) {
            const Token& at = peek();
            rule.weight = expect_number();
            if (!(rule.weight > 0))
                throw ValidationError("rule weight must be positive", at.line,
                                      at.column);
        }
        if (accept(TokenKind::Penalty)) rule.penalty = parse_penalty_kind();

        rule.span.end_line = previous().line;
        rule.span.end_column = previous().column;
        return rule;
    }

    BoundRule parse_bound() {
        expect(TokenKind::Output);
        expect(TokenKind::LBracket);
        BoundRule bound;
        bound.output_index = expect_int();
        expect(TokenKind::RBracket);
        bound.comparator = expect_comparator();
        bound.constant = expect_number();
        return bound;
    }

    ImplicationRule parse_implication() {
        expect(TokenKind::If);
        ImplicationRule impl;
        impl.antecedent.push_back(parse_atom());
        while (accept(TokenKind::And)) impl.antecedent.push_back(parse_atom());
        expect(TokenKind::Then);
        expect(TokenKind::Class);
        impl.target_class = expect_int();
        if (accept(TokenKind::Margin)) {
            const Token& at = peek();
            impl.margin = expect_number();
            if (!(impl.margin > 0.0 && impl.margin <= 1.0))
                throw ValidationError("margin must lie in (0, 1]", at.line,
                                      at.column);
        }
        return impl;
    }

    FeatureAtom parse_atom() {
        expect(TokenKind::Feature);
        expect(TokenKind::LBracket);
        FeatureAtom atom;
        atom.feature_index = expect_int();
        expect(TokenKind::RBracket);
        atom.comparator = expect_comparator();
        atom.threshold = expect_number();
        return atom;
    }

    PenaltyKind parse_penalty_kind() {
        PenaltyKind kind;
        if (accept(TokenKind::Relu)) {
            kind.variant = PenaltyVariant::ReLU;
            return kind;
        }
        if (accept(TokenKind::Softplus)) {
            kind.variant = PenaltyVariant::Softplus;
            expect(TokenKind::K);
            expect(TokenKind::Equals);
            const Token& at = peek();
            kind.k = expect_number();
            if (!(kind.k > 0))
                throw ValidationError("softplus sharpness k must be positive",
                                      at.line, at.column);
            return kind;
        }
        throw ParseError(std::string("expected 'relu' or 'softplus', found ") +
                             token_name(peek().kind),
                         peek().line, peek().column);
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<Token> tokenize(std::string_view source) {
    return Lexer(source).run();
}

RuleSet parse_rules(std::string_view source) {
    return Parser(tokenize(source)).run();
}

std::string format_rules(const RuleSet& rules) {
    std::string out;
    for (const RuleAst& rule : rules.rules) {
        out += "rule ";
        out += rule.name;
        out += ": ";
        if (const auto* bound = std::get_if<BoundRule>(&rule.body)) {
            out += "output[" + std::to_string(bound->output_index) + "] ";
            out += comparator_text(bound->comparator);
            out += " " + format_double(bound->constant);
        } else {
            const auto& impl = std::get<ImplicationRule>(rule.body);
            out += "if ";
            for (std::size_t i = 0; i < impl.antecedent.size(); ++i) {
                const FeatureAtom& atom = impl.antecedent[i];
                if (i > 0) out += " and ";
                out += "feature[" + std::to_string(atom.feature_index) + "] ";
                out += comparator_text(atom.comparator);
                out += " " + format_double(atom.threshold);
            }
            out += " then class " + std::to_string(impl.target_class);
            out += " margin " + format_double(impl.margin);
        }
        out += " weight " + format_double(rule.weight);
        out += " penalty ";
        if (rule.penalty.variant == PenaltyVariant::ReLU) {
            out += "relu";
        } else {
            out += "softplus k=" + format_double(rule.penalty.k);
        }
        out += "\n";
    }
    return out;
}

}  // namespace saifdl::rulelang
