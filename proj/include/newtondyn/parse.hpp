#pragma once

#include <cctype>
#include <charconv>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "poly.hpp"

namespace newtondyn {

/// Syntax or vocabulary error in polynomial text. Columns are 1-based.
class ParseError : public InvalidInput {
public:
    ParseError(int line, int column, const std::string& msg)
        : InvalidInput("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg),
          line_(line), column_(column)
    {
    }
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

/// Expression tree for polynomial text such as `3*x^2*y - 1.5*y^3 + 2`.
/// Supports + - * ^ (non-negative integer powers), parentheses and
/// juxtaposition (`2x`, `x(x-1)`).
struct Expr {
    enum class Kind { Number, Variable, Add, Sub, Mul, Neg, Pow };
    Kind kind = Kind::Number;
    double value = 0.0;
    std::string name;
    int exponent = 0;
    int line = 1;
    int column = 1;
    std::vector<std::shared_ptr<const Expr>> args;
};

namespace detail {

class ExprParser {
public:
    explicit ExprParser(std::string_view text) : text_(text) {}

    std::shared_ptr<const Expr> parse()
    {
        skip_ws();
        if (pos_ >= text_.size()) fail("empty expression");
        auto e = parse_sum();
        skip_ws();
        if (pos_ < text_.size()) fail(std::string("unexpected '") + text_[pos_] + "'");
        return e;
    }

private:
    using Ptr = std::shared_ptr<const Expr>;

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_, column(), msg); }

    int column() const { return static_cast<int>(pos_ - line_start_) + 1; }

    void skip_ws()
    {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            if (text_[pos_] == '\n') {
                ++line_;
                line_start_ = pos_ + 1;
            }
            ++pos_;
        }
    }

    char peek()
    {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    Ptr node(Expr::Kind k, std::vector<Ptr> args = {}) const
    {
        auto e = std::make_shared<Expr>();
        e->kind = k;
        e->line = line_;
        e->column = column();
        e->args = std::move(args);
        return e;
    }

    Ptr parse_sum()
    {
        Ptr lhs = parse_product();
        for (char c = peek(); c == '+' || c == '-'; c = peek()) {
            ++pos_;
            Ptr rhs = parse_product();
            lhs = node(c == '+' ? Expr::Kind::Add : Expr::Kind::Sub, {lhs, rhs});
        }
        return lhs;
    }

    bool starts_factor(char c) const
    {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '(' || c == '_';
    }

    Ptr parse_product()
    {
        Ptr lhs = parse_unary();
        while (true) {
            const char c = peek();
            if (c == '*') {
                ++pos_;
                lhs = node(Expr::Kind::Mul, {lhs, parse_unary()});
            } else if (starts_factor(c)) {
                lhs = node(Expr::Kind::Mul, {lhs, parse_unary()});
            } else {
                return lhs;
            }
        }
    }

    Ptr parse_unary()
    {
        const char c = peek();
        if (c == '-' || c == '+') {
            ++pos_;
            Ptr inner = parse_unary();
            return c == '-' ? node(Expr::Kind::Neg, {inner}) : inner;
        }
        return parse_power();
    }

    Ptr parse_power()
    {
        Ptr base = parse_primary();
        if (peek() == '^') {
            ++pos_;
            skip_ws();
            const std::size_t start = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            if (start == pos_ || (pos_ < text_.size() && text_[pos_] == '.'))
                fail("exponent must be a non-negative integer");
            int e = 0;
            const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, e);
            if (res.ec != std::errc{} || e > 4096) fail("exponent out of range");
            auto p = std::make_shared<Expr>();
            p->kind = Expr::Kind::Pow;
            p->exponent = e;
            p->args = {base};
            return p;
        }
        return base;
    }

    Ptr parse_primary()
    {
        const char c = peek();
        if (c == '\0') fail("unexpected end of expression");
        if (c == '(') {
            ++pos_;
            Ptr inner = parse_sum();
            if (peek() != ')') fail("expected ')'");
            ++pos_;
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            auto e = node(Expr::Kind::Number);
            const char* first = text_.data() + pos_;
            const char* last = text_.data() + text_.size();
            double v = 0.0;
            const auto res = std::from_chars(first, last, v);
            if (res.ec != std::errc{}) fail("malformed number");
            pos_ += static_cast<std::size_t>(res.ptr - first);
            std::const_pointer_cast<Expr>(e)->value = v;
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            auto e = node(Expr::Kind::Variable);
            const std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                ++pos_;
            std::const_pointer_cast<Expr>(e)->name = std::string(text_.substr(start, pos_ - start));
            return e;
        }
        fail(std::string("unexpected '") + c + "'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_start_ = 0;
    int line_ = 1;
};

} // namespace detail

inline std::shared_ptr<const Expr> parse_expression(std::string_view text)
{
    return detail::ExprParser(text).parse();
}

/// Folds an expression tree into a ring R. `constant(double)` lifts numbers,
/// `variable(const Expr&)` resolves identifiers (and throws for unknown ones).
template <class R, class ConstFn, class VarFn>
R evaluate_expr(const Expr& e, ConstFn&& constant, VarFn&& variable)
{
    switch (e.kind) {
    case Expr::Kind::Number: return constant(e.value);
    case Expr::Kind::Variable: return variable(e);
    case Expr::Kind::Add:
        return evaluate_expr<R>(*e.args[0], constant, variable) + evaluate_expr<R>(*e.args[1], constant, variable);
    case Expr::Kind::Sub:
        return evaluate_expr<R>(*e.args[0], constant, variable) - evaluate_expr<R>(*e.args[1], constant, variable);
    case Expr::Kind::Mul:
        return evaluate_expr<R>(*e.args[0], constant, variable) * evaluate_expr<R>(*e.args[1], constant, variable);
    case Expr::Kind::Neg: return -evaluate_expr<R>(*e.args[0], constant, variable);
    case Expr::Kind::Pow: return pow(evaluate_expr<R>(*e.args[0], constant, variable), e.exponent);
    }
    throw InvalidInput("corrupt expression tree");
}

/// Bivariate real polynomial in `x` and `y`.
inline MultiPoly parse_plane_poly(std::string_view text)
{
    const auto e = parse_expression(text);
    return evaluate_expr<MultiPoly>(
        *e, [](double v) { return MultiPoly::constant(v); },
        [](const Expr& v) {
            if (v.name == "x") return MultiPoly::x();
            if (v.name == "y") return MultiPoly::y();
            throw ParseError(v.line, v.column, "unknown variable '" + v.name + "' (expected x or y)");
        });
}

inline PlaneMap parse_plane_map(std::string_view first, std::string_view second)
{
    return {parse_plane_poly(first), parse_plane_poly(second)};
}

/// Complex univariate polynomial in `var`; `i` is the imaginary unit and any
/// name in `params` is substituted by its value.
inline UniComplexPoly evaluate_complex_poly(const Expr& e, std::string_view var = "z",
                                            const std::map<std::string, cplx>& params = {})
{
    return evaluate_expr<UniComplexPoly>(
        e, [](double v) { return UniComplexPoly::constant(v); },
        [&](const Expr& v) {
            if (v.name == var) return UniComplexPoly::z();
            if (v.name == "i") return UniComplexPoly::constant(cplx(0.0, 1.0));
            if (auto it = params.find(v.name); it != params.end()) return UniComplexPoly::constant(it->second);
            throw ParseError(v.line, v.column,
                             "unknown identifier '" + v.name + "' (expected " + std::string(var) + ")");
        });
}

inline UniComplexPoly parse_complex_poly(std::string_view text, std::string_view var = "z",
                                         const std::map<std::string, cplx>& params = {})
{
    return evaluate_complex_poly(*parse_expression(text), var, params);
}

} // namespace newtondyn
