#include "relunet/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>

namespace relunet {
namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Op = Expression::Op;

constexpr std::string_view kUnaryFunctions[] = {"sin", "cos", "exp", "tanh", "cosh", "sech", "abs", "sqrt"};

bool is_unary_function(std::string_view name) {
    for (auto f : kUnaryFunctions) {
        if (f == name) return true;
    }
    return false;
}

NodePtr make(Op op, std::vector<NodePtr> args = {}, double value = 0.0, std::string name = {}) {
    auto n = std::make_shared<Expression::Node>();
    n->op = op;
    n->value = value;
    n->name = std::move(name);
    n->args = std::move(args);
    return n;
}

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    NodePtr parse() {
        skip_space();
        if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
        NodePtr e = expr();
        skip_space();
        if (pos_ != src_.size()) throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
        return e;
    }

private:
    void skip_space() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char ch) {
        skip_space();
        if (pos_ < src_.size() && src_[pos_] == ch) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char ch) {
        if (!accept(ch)) {
            if (pos_ >= src_.size()) throw ParseError(std::string("expected '") + ch + "' but input ended", pos_);
            throw ParseError(std::string("expected '") + ch + "'", pos_);
        }
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+')) {
                lhs = make(Op::Add, {lhs, term()});
            } else if (accept('-')) {
                lhs = make(Op::Sub, {lhs, term()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr term() {
        NodePtr lhs = unary();
        for (;;) {
            if (accept('*')) {
                lhs = make(Op::Mul, {lhs, unary()});
            } else if (accept('/')) {
                lhs = make(Op::Div, {lhs, unary()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr unary() {
        if (accept('-')) return make(Op::Neg, {unary()});
        if (accept('+')) return unary();
        return power();
    }

    NodePtr power() {
        NodePtr base = atom();
        if (accept('^')) return make(Op::Pow, {base, unary()});
        return base;
    }

    NodePtr atom() {
        skip_space();
        if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
        const char ch = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') return identifier();
        if (accept('(')) {
            NodePtr inner = expr();
            expect(')');
            return inner;
        }
        throw ParseError(std::string("unexpected '") + ch + "'", pos_);
    }

    NodePtr number() {
        const std::size_t start = pos_;
        const std::string tail(src_.substr(pos_));
        char* end = nullptr;
        const double v = std::strtod(tail.c_str(), &end);
        if (end == tail.c_str()) throw ParseError("malformed number", start);
        pos_ += static_cast<std::size_t>(end - tail.c_str());
        return make(Op::Number, {}, v);
    }

    NodePtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
            ++pos_;
        }
        const std::string name(src_.substr(start, pos_ - start));
        if (name == "x") return make(Op::Variable);
        if (name == "pi") return make(Op::Number, {}, std::numbers::pi);
        if (name == "e") return make(Op::Number, {}, std::numbers::e);
        if (is_unary_function(name)) {
            expect('(');
            NodePtr arg = expr();
            expect(')');
            return make(Op::Call, {arg}, 0.0, name);
        }
        if (name == "pow") {
            expect('(');
            NodePtr base = expr();
            expect(',');
            NodePtr exponent = expr();
            expect(')');
            return make(Op::Pow, {base, exponent});
        }
        throw ParseError("unknown identifier '" + name + "'", start);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

double call(const std::string& name, double v) {
    if (name == "sin") return std::sin(v);
    if (name == "cos") return std::cos(v);
    if (name == "exp") return std::exp(v);
    if (name == "tanh") return std::tanh(v);
    if (name == "cosh") return std::cosh(v);
    if (name == "sech") return 1.0 / std::cosh(v);
    if (name == "abs") return std::fabs(v);
    if (name == "sqrt") {
        if (v < 0.0) throw DomainError("sqrt of negative argument");
        return std::sqrt(v);
    }
    throw DomainError("unknown function '" + name + "'");
}

double eval(const Expression::Node& n, double x) {
    double r = 0.0;
    switch (n.op) {
        case Op::Number: return n.value;
        case Op::Variable: return x;
        case Op::Add: r = eval(*n.args[0], x) + eval(*n.args[1], x); break;
        case Op::Sub: r = eval(*n.args[0], x) - eval(*n.args[1], x); break;
        case Op::Mul: r = eval(*n.args[0], x) * eval(*n.args[1], x); break;
        case Op::Div: {
            const double den = eval(*n.args[1], x);
            if (den == 0.0) throw DomainError("division by zero");
            r = eval(*n.args[0], x) / den;
            break;
        }
        case Op::Pow: r = std::pow(eval(*n.args[0], x), eval(*n.args[1], x)); break;
        case Op::Neg: r = -eval(*n.args[0], x); break;
        case Op::Call: r = call(n.name, eval(*n.args[0], x)); break;
    }
    if (!std::isfinite(r)) throw DomainError("expression is not finite at x = " + std::to_string(x));
    return r;
}

void print(const Expression::Node& n, std::string& out) {
    auto binary = [&](const char* sym) {
        out += '(';
        print(*n.args[0], out);
        out += sym;
        print(*n.args[1], out);
        out += ')';
    };
    switch (n.op) {
        case Op::Number: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", n.value);
            out += buf;
            break;
        }
        case Op::Variable: out += 'x'; break;
        case Op::Add: binary(" + "); break;
        case Op::Sub: binary(" - "); break;
        case Op::Mul: binary(" * "); break;
        case Op::Div: binary(" / "); break;
        case Op::Pow: binary(" ^ "); break;
        case Op::Neg:
            out += "(-";
            print(*n.args[0], out);
            out += ')';
            break;
        case Op::Call:
            out += n.name;
            out += '(';
            print(*n.args[0], out);
            out += ')';
            break;
    }
}

bool references_x(const Expression::Node& n) {
    if (n.op == Op::Variable) return true;
    for (const auto& a : n.args) {
        if (references_x(*a)) return true;
    }
    return false;
}

}  // namespace

double Expression::operator()(double x) const { return eval(*root_, x); }

std::string Expression::to_string() const {
    std::string out;
    print(*root_, out);
    return out;
}

bool Expression::is_constant() const { return !references_x(*root_); }

Expression parse_expression(std::string_view src) { return Expression(Parser(src).parse()); }

}  // namespace relunet
