#pragma once

#include "relunet/model.hpp"

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace relunet {

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position)
        : Error(what + " at position " + std::to_string(position)), position_(position) {}
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

/// Raised when an expression evaluates to a non-finite value.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Immutable syntax tree over the variable x. Grammar (loosest first):
///
///   expr   := term (('+' | '-') term)*
///   term   := unary (('*' | '/') unary)*
///   unary  := ('-' | '+') unary | power
///   power  := atom ('^' unary)?          right associative
///   atom   := number | x | pi | e | name '(' args ')' | '(' expr ')'
///
/// Functions: sin cos exp tanh cosh sech abs sqrt (one argument), pow (two).
class Expression {
public:
    enum class Op { Number, Variable, Add, Sub, Mul, Div, Pow, Neg, Call };

    struct Node {
        Op op = Op::Number;
        double value = 0.0;
        std::string name;  // function name for Call
        std::vector<std::shared_ptr<const Node>> args;
    };

    explicit Expression(std::shared_ptr<const Node> root) : root_(std::move(root)) {}

    double operator()(double x) const;

    /// Fully parenthesized, round-trippable form.
    std::string to_string() const;

    /// True when the tree never references x.
    bool is_constant() const;

    const Node& root() const { return *root_; }

private:
    std::shared_ptr<const Node> root_;
};

Expression parse_expression(std::string_view src);

}  // namespace relunet
