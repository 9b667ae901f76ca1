#include "qdae/expr/expression.hpp"

#include <cmath>
#include <algorithm>
#include <functional>
#include <optional>

#include "qdae/error.hpp"

namespace qdae::expr {

namespace {

using NodePtr = std::shared_ptr<const detail::Node>;

NodePtr make_node(detail::Node n) { return std::make_shared<const detail::Node>(std::move(n)); }

const NodePtr& zero_node() {
    static const NodePtr z = make_node(detail::Node{});
    return z;
}

bool is_unary_kind(NodeKind k) {
    return k == NodeKind::Neg || k == NodeKind::Sin || k == NodeKind::Cos || k == NodeKind::Exp;
}

bool is_binary_kind(NodeKind k) {
    return k == NodeKind::Add || k == NodeKind::Sub || k == NodeKind::Mul || k == NodeKind::Div;
}

}  // namespace

Expression::Expression() : node_(zero_node()) {}

NodeKind Expression::kind() const noexcept { return node_->kind; }
double Expression::value() const noexcept { return node_->value; }
const std::string& Expression::name() const noexcept { return node_->name; }
int Expression::order() const noexcept { return node_->order; }

Expression Expression::lhs() const {
    if (!node_->lhs) throw Error("expression node has no operand");
    return Expression(node_->lhs);
}

Expression Expression::rhs() const {
    if (!node_->rhs) throw Error("expression node has no right operand");
    return Expression(node_->rhs);
}

bool Expression::is_symbol() const noexcept {
    auto k = kind();
    return k == NodeKind::Parameter || k == NodeKind::Variable || k == NodeKind::Derivative;
}

bool Expression::is_unary() const noexcept { return is_unary_kind(kind()); }
bool Expression::is_binary() const noexcept { return is_binary_kind(kind()); }

Expression Expression::constant(double v) {
    if (v == 0.0 && !std::signbit(v)) return Expression();
    detail::Node n;
    n.value = v;
    return Expression(make_node(std::move(n)));
}

Expression Expression::parameter(std::string name) {
    detail::Node n;
    n.kind = NodeKind::Parameter;
    n.name = std::move(name);
    return Expression(make_node(std::move(n)));
}

Expression Expression::variable(std::string name) {
    detail::Node n;
    n.kind = NodeKind::Variable;
    n.name = std::move(name);
    return Expression(make_node(std::move(n)));
}

Expression Expression::derivative(std::string name, int order) {
    if (order < 1) throw ConfigError("derivative order must be >= 1");
    detail::Node n;
    n.kind = NodeKind::Derivative;
    n.name = std::move(name);
    n.order = order;
    return Expression(make_node(std::move(n)));
}

Expression Expression::unary(NodeKind kind, Expression operand) {
    if (!is_unary_kind(kind)) throw ConfigError("not a unary node kind");
    detail::Node n;
    n.kind = kind;
    n.lhs = operand.node_;
    return Expression(make_node(std::move(n)));
}

Expression Expression::binary(NodeKind kind, Expression lhs, Expression rhs) {
    if (!is_binary_kind(kind)) throw ConfigError("not a binary node kind");
    detail::Node n;
    n.kind = kind;
    n.lhs = lhs.node_;
    n.rhs = rhs.node_;
    return Expression(make_node(std::move(n)));
}

Expression Expression::power(Expression base, double exponent) {
    detail::Node n;
    n.kind = NodeKind::Pow;
    n.value = exponent;
    n.lhs = base.node_;
    return Expression(make_node(std::move(n)));
}

Expression operator+(const Expression& a, const Expression& b) {
    if (a.is_constant() && b.is_constant()) return Expression::constant(a.value() + b.value());
    if (a.is_constant(0.0)) return b;
    if (b.is_constant(0.0)) return a;
    return Expression::binary(NodeKind::Add, a, b);
}

Expression operator-(const Expression& a, const Expression& b) {
    if (a.is_constant() && b.is_constant()) return Expression::constant(a.value() - b.value());
    if (b.is_constant(0.0)) return a;
    if (a.is_constant(0.0)) return -b;
    return Expression::binary(NodeKind::Sub, a, b);
}

Expression operator*(const Expression& a, const Expression& b) {
    if (a.is_constant() && b.is_constant()) return Expression::constant(a.value() * b.value());
    if (a.is_constant(0.0) || b.is_constant(0.0)) return Expression::constant(0.0);
    if (a.is_constant(1.0)) return b;
    if (b.is_constant(1.0)) return a;
    return Expression::binary(NodeKind::Mul, a, b);
}

Expression operator/(const Expression& a, const Expression& b) {
    if (b.is_constant(0.0)) return Expression::binary(NodeKind::Div, a, b);  // left for evaluate to report
    if (a.is_constant() && b.is_constant()) return Expression::constant(a.value() / b.value());
    if (a.is_constant(0.0)) return Expression::constant(0.0);
    if (b.is_constant(1.0)) return a;
    return Expression::binary(NodeKind::Div, a, b);
}

Expression operator-(const Expression& a) {
    if (a.is_constant()) return Expression::constant(-a.value());
    return Expression::unary(NodeKind::Neg, a);
}

Expression sin(const Expression& a) {
    if (a.is_constant()) return Expression::constant(std::sin(a.value()));
    return Expression::unary(NodeKind::Sin, a);
}

Expression cos(const Expression& a) {
    if (a.is_constant()) return Expression::constant(std::cos(a.value()));
    return Expression::unary(NodeKind::Cos, a);
}

Expression exp(const Expression& a) {
    if (a.is_constant()) return Expression::constant(std::exp(a.value()));
    return Expression::unary(NodeKind::Exp, a);
}

Expression pow(const Expression& base, double exponent) {
    if (exponent == 0.0) return Expression::constant(1.0);
    if (exponent == 1.0) return base;
    if (base.is_constant()) return Expression::constant(std::pow(base.value(), exponent));
    return Expression::power(base, exponent);
}

bool structurally_equal(const Expression& a, const Expression& b) {
    const detail::Node* x = a.node();
    const detail::Node* y = b.node();
    if (x == y) return true;
    if (x->kind != y->kind) return false;
    switch (x->kind) {
        case NodeKind::Constant:
            return x->value == y->value;
        case NodeKind::Parameter:
        case NodeKind::Variable:
            return x->name == y->name;
        case NodeKind::Derivative:
            return x->name == y->name && x->order == y->order;
        case NodeKind::Pow:
            return x->value == y->value && structurally_equal(a.lhs(), b.lhs());
        default:
            break;
    }
    if (a.is_unary()) return structurally_equal(a.lhs(), b.lhs());
    return structurally_equal(a.lhs(), b.lhs()) && structurally_equal(a.rhs(), b.rhs());
}

namespace {

void visit(const Expression& e, const std::function<void(const Expression&)>& fn) {
    fn(e);
    if (e.kind() == NodeKind::Pow || e.is_unary()) {
        visit(e.lhs(), fn);
    } else if (e.is_binary()) {
        visit(e.lhs(), fn);
        visit(e.rhs(), fn);
    }
}

}  // namespace

std::set<std::string> free_variables(const Expression& e) {
    std::set<std::string> out;
    visit(e, [&](const Expression& n) {
        if (n.kind() == NodeKind::Variable) out.insert(n.name());
    });
    return out;
}

std::set<std::string> free_parameters(const Expression& e) {
    std::set<std::string> out;
    visit(e, [&](const Expression& n) {
        if (n.kind() == NodeKind::Parameter) out.insert(n.name());
    });
    return out;
}

std::set<std::pair<std::string, int>> derivative_refs(const Expression& e) {
    std::set<std::pair<std::string, int>> out;
    visit(e, [&](const Expression& n) {
        if (n.kind() == NodeKind::Derivative) out.emplace(n.name(), n.order());
    });
    return out;
}

int max_order(const Expression& e, std::string_view name) {
    int best = -1;
    visit(e, [&](const Expression& n) {
        if (n.name() != name) return;
        if (n.kind() == NodeKind::Variable) best = std::max(best, 0);
        if (n.kind() == NodeKind::Derivative) best = std::max(best, n.order());
    });
    return best;
}

std::size_t node_count(const Expression& e) {
    std::size_t count = 0;
    visit(e, [&](const Expression&) { ++count; });
    return count;
}

namespace {

Expression rebuild(const Expression& e, const std::function<std::optional<Expression>(const Expression&)>& leaf) {
    if (e.is_symbol()) {
        if (auto r = leaf(e)) return *r;
        return e;
    }
    switch (e.kind()) {
        case NodeKind::Constant:
            return e;
        case NodeKind::Neg:
            return -rebuild(e.lhs(), leaf);
        case NodeKind::Sin:
            return sin(rebuild(e.lhs(), leaf));
        case NodeKind::Cos:
            return cos(rebuild(e.lhs(), leaf));
        case NodeKind::Exp:
            return exp(rebuild(e.lhs(), leaf));
        case NodeKind::Pow:
            return pow(rebuild(e.lhs(), leaf), e.value());
        case NodeKind::Add:
            return rebuild(e.lhs(), leaf) + rebuild(e.rhs(), leaf);
        case NodeKind::Sub:
            return rebuild(e.lhs(), leaf) - rebuild(e.rhs(), leaf);
        case NodeKind::Mul:
            return rebuild(e.lhs(), leaf) * rebuild(e.rhs(), leaf);
        case NodeKind::Div:
            return rebuild(e.lhs(), leaf) / rebuild(e.rhs(), leaf);
        default:
            return e;
    }
}

}  // namespace

Expression substitute_variables(const Expression& e, const std::map<std::string, Expression>& map) {
    return rebuild(e, [&](const Expression& n) -> std::optional<Expression> {
        if (n.kind() != NodeKind::Variable) return std::nullopt;
        auto it = map.find(n.name());
        if (it == map.end()) return std::nullopt;
        return it->second;
    });
}

Expression substitute_derivatives(const Expression& e, const std::map<std::string, Expression>& map) {
    return rebuild(e, [&](const Expression& n) -> std::optional<Expression> {
        if (n.kind() != NodeKind::Derivative || n.order() != 1) return std::nullopt;
        auto it = map.find(n.name());
        if (it == map.end()) return std::nullopt;
        return it->second;
    });
}

}  // namespace qdae::expr
