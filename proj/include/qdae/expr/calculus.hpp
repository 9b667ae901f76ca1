#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qdae/expr/expression.hpp"

namespace qdae::expr {

/// Exact partial derivative with respect to the variable `var`. Parameters and
/// derivative refs are treated as independent of `var`.
Expression differentiate(const Expression& e, std::string_view var);

/// Total time derivative: x -> der(x), der(x, k) -> der(x, k+1), chain rule
/// through every operator. Parameters and constants have zero derivative.
Expression differentiate_time(const Expression& e);

/// Name -> value table for tree-walking evaluation.
using Bindings = std::map<std::string, double, std::less<>>;

/// Key used in Bindings for a derivative ref, e.g. "der(x)" or "der(x,2)".
std::string derivative_key(std::string_view name, int order);

/// Tree-walking evaluation; throws DomainError on unbound names or division by zero.
double evaluate(const Expression& e, const Bindings& b);

/// Flat postfix program evaluated against a slot array. Built once per
/// expression and symbol layout; evaluation allocates nothing beyond a small
/// reusable stack supplied by the caller.
class CompiledExpression {
public:
    CompiledExpression() = default;

    /// `slots` maps every symbol key (variable name, parameter name or
    /// derivative_key) to its index in the value array.
    CompiledExpression(const Expression& e, const std::map<std::string, std::size_t, std::less<>>& slots);

    double operator()(std::span<const double> values) const;
    double evaluate(std::span<const double> values, std::vector<double>& stack) const;

    bool is_constant() const noexcept { return code_.size() == 1 && code_[0].op == Op::Const; }
    std::size_t size() const noexcept { return code_.size(); }

private:
    enum class Op : unsigned char { Const, Load, Neg, Sin, Cos, Exp, Add, Sub, Mul, Div, Pow, Square };
    struct Instr {
        Op op;
        std::size_t slot = 0;
        double value = 0.0;
    };
    void emit(const Expression& e, const std::map<std::string, std::size_t, std::less<>>& slots);

    std::vector<Instr> code_;
    std::size_t max_depth_ = 0;
};

}  // namespace qdae::expr
