#pragma once

// Recursive-descent parser and evaluator for scalar expressions in one
// variable, used by the CLI to read coefficient functions from text.
//
// Grammar (EBNF):
//   expression := term { ("+" | "-") term }
//   term       := factor { ("*" | "/") factor }
//   factor     := "-" factor | power
//   power      := primary [ "^" factor ]          (right associative)
//   primary    := number | "x" | "pi"
//               | function "(" expression ")"
//               | "(" expression ")"
//   function   := "sin" | "cos" | "tan" | "exp" | "log" | "sqrt" | "abs" | "sign"
//   number     := unsigned decimal literal, optional exponent
//
// "^" binds tighter than unary minus: -x^2 parses as -(x^2).

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

namespace chebkrylov {

enum class UnaryOp { negate, sin_fn, cos_fn, tan_fn, exp_fn, log_fn, sqrt_fn, abs_fn, sign_fn };
enum class BinaryOp { add, subtract, multiply, divide, power };

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    enum class Kind { number, variable, pi_constant, unary, binary };
    Kind kind;
    double value = 0.0;
    UnaryOp unary_op = UnaryOp::negate;
    BinaryOp binary_op = BinaryOp::add;
    ExprPtr lhs;
    ExprPtr rhs;
};

/// Immutable expression tree; cheap to copy and share across threads.
struct ExprAst {
    ExprPtr root;
};

class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& message, std::size_t offset)
        : std::runtime_error(message + " at offset " + std::to_string(offset)),
          offset_(offset) {}
    std::size_t offset() const { return offset_; }

  private:
    std::size_t offset_;
};

class EvalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline const char* unary_name(UnaryOp op) {
    switch (op) {
        case UnaryOp::negate: return "-";
        case UnaryOp::sin_fn: return "sin";
        case UnaryOp::cos_fn: return "cos";
        case UnaryOp::tan_fn: return "tan";
        case UnaryOp::exp_fn: return "exp";
        case UnaryOp::log_fn: return "log";
        case UnaryOp::sqrt_fn: return "sqrt";
        case UnaryOp::abs_fn: return "abs";
        case UnaryOp::sign_fn: return "sign";
    }
    return "?";
}

inline char binary_name(BinaryOp op) {
    switch (op) {
        case BinaryOp::add: return '+';
        case BinaryOp::subtract: return '-';
        case BinaryOp::multiply: return '*';
        case BinaryOp::divide: return '/';
        case BinaryOp::power: return '^';
    }
    return '?';
}

class Parser {
  public:
    explicit Parser(std::string_view text) : text_(text) {}

    ExprPtr run() {
        if (text_.empty()) throw ParseError("empty expression", 0);
        auto node = expression();
        skip_space();
        if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
        return node;
    }

  private:
    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_space();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    ExprPtr expression() {
        auto node = term();
        while (true) {
            if (accept('+'))
                node = make_binary(BinaryOp::add, node, term());
            else if (accept('-'))
                node = make_binary(BinaryOp::subtract, node, term());
            else
                return node;
        }
    }

    ExprPtr term() {
        auto node = factor();
        while (true) {
            if (accept('*'))
                node = make_binary(BinaryOp::multiply, node, factor());
            else if (accept('/'))
                node = make_binary(BinaryOp::divide, node, factor());
            else
                return node;
        }
    }

    ExprPtr factor() {
        if (accept('-')) return make_unary(UnaryOp::negate, factor());
        return power();
    }

    ExprPtr power() {
        auto base = primary();
        if (accept('^')) return make_binary(BinaryOp::power, base, factor());
        return base;
    }

    ExprPtr primary() {
        skip_space();
        if (pos_ >= text_.size()) throw ParseError("expected expression", pos_);
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        if (c == '(') {
            ++pos_;
            auto node = expression();
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            return node;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    ExprPtr number() {
        const std::size_t start = pos_;
        const char* begin = text_.data() + pos_;
        char* end = nullptr;
        const double value = std::strtod(begin, &end);
        if (end == begin) throw ParseError("invalid number", start);
        // strtod accepts a leading sign, but '-' is handled as an operator
        pos_ += static_cast<std::size_t>(end - begin);
        auto node = std::make_shared<ExprNode>();
        node->kind = ExprNode::Kind::number;
        node->value = value;
        return node;
    }

    ExprPtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               std::isalnum(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        const std::string_view name = text_.substr(start, pos_ - start);
        if (name == "x") {
            auto node = std::make_shared<ExprNode>();
            node->kind = ExprNode::Kind::variable;
            return node;
        }
        if (name == "pi") {
            auto node = std::make_shared<ExprNode>();
            node->kind = ExprNode::Kind::pi_constant;
            return node;
        }
        UnaryOp op;
        if (name == "sin") op = UnaryOp::sin_fn;
        else if (name == "cos") op = UnaryOp::cos_fn;
        else if (name == "tan") op = UnaryOp::tan_fn;
        else if (name == "exp") op = UnaryOp::exp_fn;
        else if (name == "log") op = UnaryOp::log_fn;
        else if (name == "sqrt") op = UnaryOp::sqrt_fn;
        else if (name == "abs") op = UnaryOp::abs_fn;
        else if (name == "sign") op = UnaryOp::sign_fn;
        else
            throw ParseError("unknown identifier '" + std::string(name) + "'", start);
        if (!accept('(')) throw ParseError("expected '(' after function name", pos_);
        auto arg = expression();
        if (!accept(')')) throw ParseError("expected ')'", pos_);
        return make_unary(op, arg);
    }

    static ExprPtr make_unary(UnaryOp op, ExprPtr child) {
        auto node = std::make_shared<ExprNode>();
        node->kind = ExprNode::Kind::unary;
        node->unary_op = op;
        node->lhs = std::move(child);
        return node;
    }

    static ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs) {
        auto node = std::make_shared<ExprNode>();
        node->kind = ExprNode::Kind::binary;
        node->binary_op = op;
        node->lhs = std::move(lhs);
        node->rhs = std::move(rhs);
        return node;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

inline double eval_node(const ExprNode& node, double x) {
    switch (node.kind) {
        case ExprNode::Kind::number: return node.value;
        case ExprNode::Kind::variable: return x;
        case ExprNode::Kind::pi_constant: return 3.14159265358979323846;
        case ExprNode::Kind::unary: {
            const double a = eval_node(*node.lhs, x);
            switch (node.unary_op) {
                case UnaryOp::negate: return -a;
                case UnaryOp::sin_fn: return std::sin(a);
                case UnaryOp::cos_fn: return std::cos(a);
                case UnaryOp::tan_fn: return std::tan(a);
                case UnaryOp::exp_fn: return std::exp(a);
                case UnaryOp::log_fn:
                    if (a <= 0.0) throw EvalError("log of non-positive value in node 'log'");
                    return std::log(a);
                case UnaryOp::sqrt_fn:
                    if (a < 0.0) throw EvalError("sqrt of negative value in node 'sqrt'");
                    return std::sqrt(a);
                case UnaryOp::abs_fn: return std::abs(a);
                case UnaryOp::sign_fn: return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
            }
            break;
        }
        case ExprNode::Kind::binary: {
            const double a = eval_node(*node.lhs, x);
            const double b = eval_node(*node.rhs, x);
            switch (node.binary_op) {
                case BinaryOp::add: return a + b;
                case BinaryOp::subtract: return a - b;
                case BinaryOp::multiply: return a * b;
                case BinaryOp::divide:
                    if (b == 0.0) throw EvalError("division by zero in node '/'");
                    return a / b;
                case BinaryOp::power: {
                    const double r = std::pow(a, b);
                    if (std::isnan(r)) throw EvalError("invalid power in node '^'");
                    return r;
                }
            }
            break;
        }
    }
    throw EvalError("malformed expression node");
}

inline void print_node(const ExprNode& node, std::string& out) {
    switch (node.kind) {
        case ExprNode::Kind::number: {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", node.value);
            out += buf;
            return;
        }
        case ExprNode::Kind::variable: out += 'x'; return;
        case ExprNode::Kind::pi_constant: out += "pi"; return;
        case ExprNode::Kind::unary:
            if (node.unary_op == UnaryOp::negate) {
                out += "(-";
                print_node(*node.lhs, out);
                out += ')';
            } else {
                out += unary_name(node.unary_op);
                out += '(';
                print_node(*node.lhs, out);
                out += ')';
            }
            return;
        case ExprNode::Kind::binary:
            out += '(';
            print_node(*node.lhs, out);
            out += binary_name(node.binary_op);
            print_node(*node.rhs, out);
            out += ')';
            return;
    }
}

} // namespace detail

/// Parse an expression; throws ParseError with a character offset.
inline ExprAst parse(std::string_view text) { return ExprAst{detail::Parser(text).run()}; }

/// Evaluate at x with IEEE doubles; domain violations throw EvalError.
inline double eval_at(const ExprAst& ast, double x) {
    if (!ast.root) throw EvalError("empty expression");
    return detail::eval_node(*ast.root, x);
}

/// Fully parenthesized rendering; parsing it back yields an identical tree.
inline std::string to_string(const ExprAst& ast) {
    std::string out;
    if (ast.root) detail::print_node(*ast.root, out);
    return out;
}

inline bool operator==(const ExprNode& a, const ExprNode& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case ExprNode::Kind::number: return a.value == b.value;
        case ExprNode::Kind::variable:
        case ExprNode::Kind::pi_constant: return true;
        case ExprNode::Kind::unary: return a.unary_op == b.unary_op && *a.lhs == *b.lhs;
        case ExprNode::Kind::binary:
            return a.binary_op == b.binary_op && *a.lhs == *b.lhs && *a.rhs == *b.rhs;
    }
    return false;
}

inline bool operator==(const ExprAst& a, const ExprAst& b) {
    if (!a.root || !b.root) return a.root == b.root;
    return *a.root == *b.root;
}

/// True when the tree contains abs or sign, whose kinks require
/// user-supplied breakpoints.
inline bool contains_nonsmooth(const ExprAst& ast) {
    const auto walk = [](const ExprNode& node, auto&& self) -> bool {
        if (node.kind == ExprNode::Kind::unary &&
            (node.unary_op == UnaryOp::abs_fn || node.unary_op == UnaryOp::sign_fn))
            return true;
        if (node.lhs && self(*node.lhs, self)) return true;
        if (node.rhs && self(*node.rhs, self)) return true;
        return false;
    };
    return ast.root && walk(*ast.root, walk);
}

} // namespace chebkrylov
