#include "qdae/expr/parser.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "qdae/error.hpp"

namespace qdae::expr {

namespace {

class Parser {
public:
    Parser(std::string_view text, const std::set<std::string, std::less<>>& params) : s_(text), params_(params) {}

    Expression run() {
        Expression e = expr();
        skip();
        if (pos_ < s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        return e;
    }

private:
    std::string_view s_;
    const std::set<std::string, std::less<>>& params_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const { fail_at(pos_, msg); }

    [[noreturn]] void fail_at(std::size_t at, const std::string& msg) const {
        int line = 1, col = 1;
        for (std::size_t i = 0; i < at && i < s_.size(); ++i) {
            if (s_[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(msg, line, col);
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool peek(char c) {
        skip();
        return pos_ < s_.size() && s_[pos_] == c;
    }

    void expect(char c) {
        if (!peek(c)) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    bool number_ahead(std::size_t at) const {
        if (at >= s_.size()) return false;
        char c = s_[at];
        if (std::isdigit(static_cast<unsigned char>(c))) return true;
        return c == '.' && at + 1 < s_.size() && std::isdigit(static_cast<unsigned char>(s_[at + 1]));
    }

    // Scans [-]digits[.digits][e[+-]digits] starting at pos_.
    double number() {
        std::size_t start = pos_;
        std::size_t i = pos_;
        if (i < s_.size() && s_[i] == '-') ++i;
        auto digits = [&] {
            while (i < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i]))) ++i;
        };
        digits();
        if (i < s_.size() && s_[i] == '.') {
            ++i;
            digits();
        }
        if (i < s_.size() && (s_[i] == 'e' || s_[i] == 'E')) {
            std::size_t j = i + 1;
            if (j < s_.size() && (s_[j] == '+' || s_[j] == '-')) ++j;
            if (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) {
                i = j;
                digits();
            }
        }
        double v = 0.0;
        auto [end, ec] = std::from_chars(s_.data() + start, s_.data() + i, v);
        if (ec != std::errc() || end != s_.data() + i) fail_at(start, "malformed number");
        pos_ = i;
        return v;
    }

    std::string ident() {
        std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        return std::string(s_.substr(start, pos_ - start));
    }

    Expression expr() {
        Expression e = term();
        for (;;) {
            if (peek('+')) {
                ++pos_;
                e = Expression::binary(NodeKind::Add, e, term());
            } else if (peek('-')) {
                ++pos_;
                e = Expression::binary(NodeKind::Sub, e, term());
            } else {
                return e;
            }
        }
    }

    Expression term() {
        Expression e = factor();
        for (;;) {
            if (peek('*')) {
                ++pos_;
                e = Expression::binary(NodeKind::Mul, e, factor());
            } else if (peek('/')) {
                ++pos_;
                e = Expression::binary(NodeKind::Div, e, factor());
            } else {
                return e;
            }
        }
    }

    Expression factor() {
        Expression b = base();
        if (peek('^')) {
            ++pos_;
            skip();
            if (!(number_ahead(pos_) || (pos_ < s_.size() && s_[pos_] == '-' && number_ahead(pos_ + 1))))
                fail("exponent must be a numeric literal");
            return Expression::power(b, number());
        }
        return b;
    }

    Expression base() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        char c = s_[pos_];
        if (c == '-') {
            if (number_ahead(pos_ + 1)) return Expression::constant(number());
            ++pos_;
            return Expression::unary(NodeKind::Neg, base());
        }
        if (number_ahead(pos_)) return Expression::constant(number());
        if (c == '(') {
            ++pos_;
            Expression e = expr();
            expect(')');
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t at = pos_;
            std::string name = ident();
            if (!peek('(')) {
                if (params_.count(name)) return Expression::parameter(name);
                return Expression::variable(name);
            }
            ++pos_;
            if (name == "der") return derivative_tail(1);
            NodeKind k;
            if (name == "sin")
                k = NodeKind::Sin;
            else if (name == "cos")
                k = NodeKind::Cos;
            else if (name == "exp")
                k = NodeKind::Exp;
            else
                fail_at(at, "unknown function '" + name + "'");
            Expression arg = expr();
            expect(')');
            return Expression::unary(k, arg);
        }
        fail(std::string("unexpected '") + c + "'");
    }

    // After "der(" has been consumed: either a name or a nested der(...).
    Expression derivative_tail(int order) {
        skip();
        std::size_t at = pos_;
        if (pos_ >= s_.size() || !(std::isalpha(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
            fail("der() expects a variable name");
        std::string name = ident();
        Expression out;
        if (name == "der" && peek('(')) {
            ++pos_;
            out = derivative_tail(order + 1);
        } else {
            if (params_.count(name)) fail_at(at, "der() of parameter '" + name + "'");
            out = Expression::derivative(name, order);
        }
        expect(')');
        return out;
    }
};

int precedence(const Expression& e) {
    switch (e.kind()) {
        case NodeKind::Add:
        case NodeKind::Sub:
            return 1;
        case NodeKind::Mul:
        case NodeKind::Div:
            return 2;
        case NodeKind::Pow:
            return 3;
        default:
            return 4;
    }
}

void print(const Expression& e, std::string& out);

void print_wrapped(const Expression& e, bool wrap, std::string& out) {
    if (wrap) out += '(';
    print(e, out);
    if (wrap) out += ')';
}

void print(const Expression& e, std::string& out) {
    switch (e.kind()) {
        case NodeKind::Constant:
            out += format_double(e.value());
            return;
        case NodeKind::Parameter:
        case NodeKind::Variable:
            out += e.name();
            return;
        case NodeKind::Derivative:
            for (int i = 0; i < e.order(); ++i) out += "der(";
            out += e.name();
            out.append(static_cast<std::size_t>(e.order()), ')');
            return;
        case NodeKind::Neg: {
            Expression u = e.lhs();
            out += '-';
            print_wrapped(u, u.is_constant() || precedence(u) < 4, out);
            return;
        }
        case NodeKind::Sin:
        case NodeKind::Cos:
        case NodeKind::Exp:
            out += e.kind() == NodeKind::Sin ? "sin(" : e.kind() == NodeKind::Cos ? "cos(" : "exp(";
            print(e.lhs(), out);
            out += ')';
            return;
        case NodeKind::Pow: {
            Expression u = e.lhs();
            print_wrapped(u, precedence(u) < 4, out);
            out += '^';
            out += format_double(e.value());
            return;
        }
        default: {
            int p = precedence(e);
            Expression l = e.lhs(), r = e.rhs();
            print_wrapped(l, precedence(l) < p, out);
            switch (e.kind()) {
                case NodeKind::Add:
                    out += " + ";
                    break;
                case NodeKind::Sub:
                    out += " - ";
                    break;
                case NodeKind::Mul:
                    out += '*';
                    break;
                default:
                    out += '/';
                    break;
            }
            print_wrapped(r, precedence(r) <= p, out);
            return;
        }
    }
}

}  // namespace

Expression parse_expression(std::string_view text, const std::set<std::string, std::less<>>& parameters) {
    return Parser(text, parameters).run();
}

std::string to_string(const Expression& e) {
    std::string out;
    print(e, out);
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, end);
    // Keep literals parseable: "1e+20" reads fine, but bare "inf"/"nan" would become identifiers.
    if (!std::isfinite(v)) throw DomainError("cannot print non-finite constant");
    return s;
}

}  // namespace qdae::expr
