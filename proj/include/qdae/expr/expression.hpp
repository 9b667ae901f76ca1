#pragma once

// Immutable symbolic expression trees for model right-hand sides.
//
// Nodes are shared and never mutated after construction, so an Expression can
// be copied freely and read from any number of threads.

#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>

namespace qdae::expr {

enum class NodeKind {
    Constant,
    Parameter,
    Variable,
    Derivative,  // time derivative of a variable, order >= 1
    Neg,
    Sin,
    Cos,
    Exp,
    Add,
    Sub,
    Mul,
    Div,
    Pow,  // exponent is always a constant
};

class Expression;

namespace detail {
struct Node;
}

class Expression {
public:
    /// The zero constant.
    Expression();

    NodeKind kind() const noexcept;
    /// Constant value, or the exponent of a Pow node.
    double value() const noexcept;
    /// Symbol name for Parameter/Variable/Derivative nodes.
    const std::string& name() const noexcept;
    /// Derivative order (>= 1) for Derivative nodes, 0 otherwise.
    int order() const noexcept;
    /// Operand of unary nodes, left operand of binary nodes, base of Pow.
    Expression lhs() const;
    Expression rhs() const;

    bool is_constant() const noexcept { return kind() == NodeKind::Constant; }
    bool is_constant(double v) const noexcept { return is_constant() && value() == v; }
    bool is_symbol() const noexcept;
    bool is_unary() const noexcept;
    bool is_binary() const noexcept;

    // Raw constructors: build exactly the requested node, no folding.
    static Expression constant(double v);
    static Expression parameter(std::string name);
    static Expression variable(std::string name);
    static Expression derivative(std::string name, int order = 1);
    static Expression unary(NodeKind kind, Expression operand);
    static Expression binary(NodeKind kind, Expression lhs, Expression rhs);
    static Expression power(Expression base, double exponent);

    const detail::Node* node() const noexcept { return node_.get(); }
    explicit Expression(std::shared_ptr<const detail::Node> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<const detail::Node> node_;
};

namespace detail {
struct Node {
    NodeKind kind = NodeKind::Constant;
    double value = 0.0;
    std::string name;
    int order = 0;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
};
}  // namespace detail

// Folding constructors: constant folding plus zero/one elimination. These are
// what the differentiation code uses; the parser uses the raw constructors.
Expression operator+(const Expression& a, const Expression& b);
Expression operator-(const Expression& a, const Expression& b);
Expression operator*(const Expression& a, const Expression& b);
Expression operator/(const Expression& a, const Expression& b);
Expression operator-(const Expression& a);
Expression sin(const Expression& a);
Expression cos(const Expression& a);
Expression exp(const Expression& a);
Expression pow(const Expression& base, double exponent);

bool structurally_equal(const Expression& a, const Expression& b);

/// Names of all Variable refs (Derivative refs excluded).
std::set<std::string> free_variables(const Expression& e);
std::set<std::string> free_parameters(const Expression& e);
/// Derivative refs as (name, order) pairs.
std::set<std::pair<std::string, int>> derivative_refs(const Expression& e);
/// Highest derivative order at which `name` occurs; 0 for a plain ref, -1 if absent.
int max_order(const Expression& e, std::string_view name);

std::size_t node_count(const Expression& e);

/// Replaces every Variable ref whose name is a key of `map`.
Expression substitute_variables(const Expression& e, const std::map<std::string, Expression>& map);
/// Replaces Derivative refs of order 1 whose name is a key of `map`.
Expression substitute_derivatives(const Expression& e, const std::map<std::string, Expression>& map);

}  // namespace qdae::expr
