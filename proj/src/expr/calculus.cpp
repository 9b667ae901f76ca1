#include "qdae/expr/calculus.hpp"

#include <cmath>

#include "qdae/error.hpp"

namespace qdae::expr {

namespace {

Expression zero() { return Expression::constant(0.0); }
Expression one() { return Expression::constant(1.0); }

// Chain rule over the operator set; `leaf` supplies the derivative of symbols.
template <typename Leaf>
Expression derive(const Expression& e, const Leaf& leaf) {
    switch (e.kind()) {
        case NodeKind::Constant:
            return zero();
        case NodeKind::Parameter:
        case NodeKind::Variable:
        case NodeKind::Derivative:
            return leaf(e);
        case NodeKind::Neg:
            return -derive(e.lhs(), leaf);
        case NodeKind::Sin: {
            Expression u = e.lhs();
            return cos(u) * derive(u, leaf);
        }
        case NodeKind::Cos: {
            Expression u = e.lhs();
            return -(sin(u) * derive(u, leaf));
        }
        case NodeKind::Exp: {
            Expression u = e.lhs();
            return e * derive(u, leaf);
        }
        case NodeKind::Add:
            return derive(e.lhs(), leaf) + derive(e.rhs(), leaf);
        case NodeKind::Sub:
            return derive(e.lhs(), leaf) - derive(e.rhs(), leaf);
        case NodeKind::Mul: {
            Expression u = e.lhs(), v = e.rhs();
            return derive(u, leaf) * v + u * derive(v, leaf);
        }
        case NodeKind::Div: {
            Expression u = e.lhs(), v = e.rhs();
            Expression du = derive(u, leaf), dv = derive(v, leaf);
            if (dv.is_constant(0.0)) return du / v;
            return (du * v - u * dv) / pow(v, 2.0);
        }
        case NodeKind::Pow: {
            Expression u = e.lhs();
            double c = e.value();
            return Expression::constant(c) * pow(u, c - 1.0) * derive(u, leaf);
        }
    }
    return zero();
}

}  // namespace

Expression differentiate(const Expression& e, std::string_view var) {
    return derive(e, [var](const Expression& s) {
        return (s.kind() == NodeKind::Variable && s.name() == var) ? one() : zero();
    });
}

Expression differentiate_time(const Expression& e) {
    return derive(e, [](const Expression& s) {
        switch (s.kind()) {
            case NodeKind::Variable:
                return Expression::derivative(s.name(), 1);
            case NodeKind::Derivative:
                return Expression::derivative(s.name(), s.order() + 1);
            default:
                return zero();
        }
    });
}

std::string derivative_key(std::string_view name, int order) {
    std::string key = "der(";
    key += name;
    if (order != 1) key += "," + std::to_string(order);
    key += ")";
    return key;
}

double evaluate(const Expression& e, const Bindings& b) {
    auto lookup = [&](const std::string& key) {
        auto it = b.find(key);
        if (it == b.end()) throw DomainError("unbound name '" + key + "'");
        return it->second;
    };
    switch (e.kind()) {
        case NodeKind::Constant:
            return e.value();
        case NodeKind::Parameter:
        case NodeKind::Variable:
            return lookup(e.name());
        case NodeKind::Derivative:
            return lookup(derivative_key(e.name(), e.order()));
        case NodeKind::Neg:
            return -evaluate(e.lhs(), b);
        case NodeKind::Sin:
            return std::sin(evaluate(e.lhs(), b));
        case NodeKind::Cos:
            return std::cos(evaluate(e.lhs(), b));
        case NodeKind::Exp:
            return std::exp(evaluate(e.lhs(), b));
        case NodeKind::Add: {
            double l = evaluate(e.lhs(), b);
            return l + evaluate(e.rhs(), b);
        }
        case NodeKind::Sub: {
            double l = evaluate(e.lhs(), b);
            return l - evaluate(e.rhs(), b);
        }
        case NodeKind::Mul: {
            double l = evaluate(e.lhs(), b);
            return l * evaluate(e.rhs(), b);
        }
        case NodeKind::Div: {
            double l = evaluate(e.lhs(), b);
            double r = evaluate(e.rhs(), b);
            if (r == 0.0) throw DomainError("division by zero");
            return l / r;
        }
        case NodeKind::Pow:
            return std::pow(evaluate(e.lhs(), b), e.value());
    }
    return 0.0;
}

CompiledExpression::CompiledExpression(const Expression& e,
                                       const std::map<std::string, std::size_t, std::less<>>& slots) {
    emit(e, slots);
    std::size_t depth = 0;
    for (const auto& ins : code_) {
        switch (ins.op) {
            case Op::Const:
            case Op::Load:
                ++depth;
                break;
            case Op::Add:
            case Op::Sub:
            case Op::Mul:
            case Op::Div:
                --depth;
                break;
            default:
                break;
        }
        max_depth_ = std::max(max_depth_, depth);
    }
}

void CompiledExpression::emit(const Expression& e, const std::map<std::string, std::size_t, std::less<>>& slots) {
    auto load = [&](const std::string& key) {
        auto it = slots.find(key);
        if (it == slots.end()) throw DomainError("unbound name '" + key + "'");
        code_.push_back({Op::Load, it->second, 0.0});
    };
    switch (e.kind()) {
        case NodeKind::Constant:
            code_.push_back({Op::Const, 0, e.value()});
            return;
        case NodeKind::Parameter:
        case NodeKind::Variable:
            load(e.name());
            return;
        case NodeKind::Derivative:
            load(derivative_key(e.name(), e.order()));
            return;
        case NodeKind::Pow:
            emit(e.lhs(), slots);
            if (e.value() == 2.0)
                code_.push_back({Op::Square, 0, 0.0});
            else
                code_.push_back({Op::Pow, 0, e.value()});
            return;
        case NodeKind::Neg:
        case NodeKind::Sin:
        case NodeKind::Cos:
        case NodeKind::Exp: {
            emit(e.lhs(), slots);
            Op op = e.kind() == NodeKind::Neg   ? Op::Neg
                    : e.kind() == NodeKind::Sin ? Op::Sin
                    : e.kind() == NodeKind::Cos ? Op::Cos
                                                : Op::Exp;
            code_.push_back({op, 0, 0.0});
            return;
        }
        default: {
            emit(e.lhs(), slots);
            emit(e.rhs(), slots);
            Op op = e.kind() == NodeKind::Add   ? Op::Add
                    : e.kind() == NodeKind::Sub ? Op::Sub
                    : e.kind() == NodeKind::Mul ? Op::Mul
                                                : Op::Div;
            code_.push_back({op, 0, 0.0});
            return;
        }
    }
}

double CompiledExpression::operator()(std::span<const double> values) const {
    std::vector<double> stack;
    return evaluate(values, stack);
}

double CompiledExpression::evaluate(std::span<const double> values, std::vector<double>& stack) const {
    if (code_.empty()) return 0.0;
    stack.resize(max_depth_ + 1);
    std::size_t top = 0;  // number of live entries
    double* s = stack.data();
    for (const auto& ins : code_) {
        switch (ins.op) {
            case Op::Const:
                s[top++] = ins.value;
                break;
            case Op::Load:
                s[top++] = values[ins.slot];
                break;
            case Op::Neg:
                s[top - 1] = -s[top - 1];
                break;
            case Op::Sin:
                s[top - 1] = std::sin(s[top - 1]);
                break;
            case Op::Cos:
                s[top - 1] = std::cos(s[top - 1]);
                break;
            case Op::Exp:
                s[top - 1] = std::exp(s[top - 1]);
                break;
            case Op::Square:
                s[top - 1] = s[top - 1] * s[top - 1];
                break;
            case Op::Pow:
                s[top - 1] = std::pow(s[top - 1], ins.value);
                break;
            case Op::Add:
                --top;
                s[top - 1] = s[top - 1] + s[top];
                break;
            case Op::Sub:
                --top;
                s[top - 1] = s[top - 1] - s[top];
                break;
            case Op::Mul:
                --top;
                s[top - 1] = s[top - 1] * s[top];
                break;
            case Op::Div:
                --top;
                if (s[top] == 0.0) throw DomainError("division by zero");
                s[top - 1] = s[top - 1] / s[top];
                break;
        }
    }
    return s[0];
}

}  // namespace qdae::expr
