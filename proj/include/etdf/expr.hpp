#pragma once

// Tiny arithmetic-expression parser for config-defined right-hand sides:
// operators + - * / ^, functions sin cos exp, state symbols x1..xn, input u,
// and the constant pi. Autonomous systems only (time enters via appended
// states, never as a symbol).

#include <cctype>
#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace etdf {

struct ExprError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Expr {
public:
    double eval(std::span<const double> x, double u) const {
        switch (kind_) {
            case Kind::constant: return value_;
            case Kind::state: return x[index_];
            case Kind::input: return u;
            case Kind::add: return a_->eval(x, u) + b_->eval(x, u);
            case Kind::sub: return a_->eval(x, u) - b_->eval(x, u);
            case Kind::mul: return a_->eval(x, u) * b_->eval(x, u);
            case Kind::div: return a_->eval(x, u) / b_->eval(x, u);
            case Kind::pow: return std::pow(a_->eval(x, u), b_->eval(x, u));
            case Kind::neg: return -a_->eval(x, u);
            case Kind::fn_sin: return std::sin(a_->eval(x, u));
            case Kind::fn_cos: return std::cos(a_->eval(x, u));
            case Kind::fn_exp: return std::exp(a_->eval(x, u));
        }
        return 0;  // unreachable
    }

    static std::unique_ptr<Expr> parse(const std::string& text, std::size_t dim) {
        Parser p{text, 0, dim};
        auto e = p.expression();
        p.skip_ws();
        if (p.pos != text.size())
            throw ExprError("expression: trailing input at '" + text.substr(p.pos) + "'");
        return e;
    }

private:
    enum class Kind { constant, state, input, add, sub, mul, div, pow, neg, fn_sin, fn_cos, fn_exp };

    Expr(Kind k, double v, std::size_t idx, std::unique_ptr<Expr> a, std::unique_ptr<Expr> b)
        : kind_(k), value_(v), index_(idx), a_(std::move(a)), b_(std::move(b)) {}

    static std::unique_ptr<Expr> make(Kind k, std::unique_ptr<Expr> a = nullptr,
                                      std::unique_ptr<Expr> b = nullptr, double v = 0,
                                      std::size_t idx = 0) {
        return std::unique_ptr<Expr>(new Expr(k, v, idx, std::move(a), std::move(b)));
    }

    struct Parser {
        const std::string& s;
        std::size_t pos;
        std::size_t dim;

        void skip_ws() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool eat(char c) {
            skip_ws();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }
        char peek() {
            skip_ws();
            return pos < s.size() ? s[pos] : '\0';
        }

        std::unique_ptr<Expr> expression() {
            auto e = term();
            for (;;) {
                if (eat('+'))
                    e = make(Kind::add, std::move(e), term());
                else if (eat('-'))
                    e = make(Kind::sub, std::move(e), term());
                else
                    return e;
            }
        }
        std::unique_ptr<Expr> term() {
            auto e = factor();
            for (;;) {
                if (eat('*'))
                    e = make(Kind::mul, std::move(e), factor());
                else if (eat('/'))
                    e = make(Kind::div, std::move(e), factor());
                else
                    return e;
            }
        }
        std::unique_ptr<Expr> factor() {  // right-associative ^
            auto base = unary();
            if (eat('^')) return make(Kind::pow, std::move(base), factor());
            return base;
        }
        std::unique_ptr<Expr> unary() {
            if (eat('-')) return make(Kind::neg, unary());
            if (eat('+')) return unary();
            return primary();
        }
        std::unique_ptr<Expr> primary() {
            skip_ws();
            if (pos >= s.size()) throw ExprError("expression: unexpected end of input");
            const char c = s[pos];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                std::size_t used = 0;
                const double v = std::stod(s.substr(pos), &used);
                pos += used;
                return make(Kind::constant, nullptr, nullptr, v);
            }
            if (c == '(') {
                ++pos;
                auto e = expression();
                if (!eat(')')) throw ExprError("expression: missing ')'");
                return e;
            }
            if (std::isalpha(static_cast<unsigned char>(c))) {
                std::size_t end = pos;
                while (end < s.size() && (std::isalnum(static_cast<unsigned char>(s[end])) ||
                                          s[end] == '_'))
                    ++end;
                const std::string name = s.substr(pos, end - pos);
                pos = end;
                if (name == "u") return make(Kind::input);
                if (name == "pi") return make(Kind::constant, nullptr, nullptr, M_PI);
                if (name == "sin" || name == "cos" || name == "exp") {
                    if (!eat('(')) throw ExprError("expression: '" + name + "' needs '('");
                    auto arg = expression();
                    if (!eat(')')) throw ExprError("expression: missing ')'");
                    const Kind k = (name == "sin")   ? Kind::fn_sin
                                   : (name == "cos") ? Kind::fn_cos
                                                     : Kind::fn_exp;
                    return make(k, std::move(arg));
                }
                if (name.size() >= 2 && name[0] == 'x') {
                    const std::string idx = name.substr(1);
                    for (char d : idx)
                        if (!std::isdigit(static_cast<unsigned char>(d)))
                            throw ExprError("expression: unknown symbol '" + name + "'");
                    const std::size_t i = std::stoul(idx);
                    if (i < 1 || i > dim)
                        throw ExprError("expression: state index out of range in '" + name + "'");
                    return make(Kind::state, nullptr, nullptr, 0, i - 1);
                }
                throw ExprError("expression: unknown symbol '" + name + "'");
            }
            throw ExprError(std::string("expression: unexpected character '") + c + "'");
        }
    };

    Kind kind_ = Kind::constant;
    double value_ = 0;
    std::size_t index_ = 0;
    std::unique_ptr<Expr> a_, b_;
};

}  // namespace etdf
