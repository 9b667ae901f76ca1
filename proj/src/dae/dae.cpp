#include "qdae/dae/dae.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "qdae/error.hpp"
#include "qdae/expr/calculus.hpp"
#include "qdae/expr/parser.hpp"

namespace qdae::dae {

using expr::CompiledExpression;
using expr::Expression;

namespace {

constexpr int kRoundBudget = 10;
constexpr double kRcondMin = 1e-12;

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

bool valid_name(std::string_view s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    return s != "der" && s != "sin" && s != "cos" && s != "exp";
}

std::map<std::string, Expression> derivative_map(const DaeSystem& d) {
    std::map<std::string, Expression> m;
    for (std::size_t i = 0; i < d.states.size(); ++i) m[d.states[i]] = d.f[i];
    return m;
}

// Levels 0..c of algebraic equation k with der(x) replaced by f after each step.
std::vector<Expression> constraint_levels(const DaeSystem& d, std::size_t k,
                                          const std::map<std::string, Expression>& fmap) {
    int c = d.reduced() ? d.differentiations[k] : 0;
    std::vector<Expression> out{d.g[k]};
    for (int l = 1; l <= c; ++l) {
        Expression h = expr::substitute_derivatives(expr::differentiate_time(out.back()), fmap);
        if (!expr::derivative_refs(h).empty())
            throw ConfigError("constraint " + std::to_string(k) + " involves derivatives of algebraic variables");
        out.push_back(h);
    }
    return out;
}

SlotMap dae_slots(const DaeSystem& d, const std::vector<std::string>& pnames) {
    SlotMap s;
    std::size_t i = 0;
    for (const auto& n : d.states) s[n] = i++;
    for (const auto& n : d.algebraics) s[n] = i++;
    for (const auto& n : pnames) s[n] = i++;
    return s;
}

std::vector<std::string> param_names(const ParamMap& p) {
    std::vector<std::string> out;
    for (const auto& kv : p) out.push_back(kv.first);
    return out;
}

struct Sparse {
    std::size_t row, col;
    CompiledExpression code;
};

std::string row_list(const std::vector<std::size_t>& rows) {
    std::string s;
    for (std::size_t r : rows) {
        if (!s.empty()) s += ", ";
        s += "constraint " + std::to_string(r);
    }
    return s;
}

void check_rcond(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu, const Eigen::MatrixXd& jac) {
    double rc = jac.size() ? lu.rcond() : 1.0;
    if (!(rc >= kRcondMin))
        throw SingularMatrixError("dg/dy is singular (reciprocal condition " + std::to_string(rc) +
                                  "); nearly dependent: " + row_list(dependent_rows(jac)));
}

}  // namespace

void DaeSystem::validate() const {
    if (f.size() != states.size()) throw ConfigError("need one differential equation per state");
    if (g.size() != algebraics.size())
        throw ConfigError("have " + std::to_string(g.size()) + " algebraic equations for " +
                          std::to_string(algebraics.size()) + " algebraic variables");
    if (x0.size() != states.size() || y0.size() != algebraics.size())
        throw ConfigError("initial values do not match the variable counts");
    std::set<std::string> vars;
    for (const auto& n : states)
        if (!vars.insert(n).second) throw ConfigError("duplicate variable '" + n + "'");
    for (const auto& n : algebraics)
        if (!vars.insert(n).second) throw ConfigError("duplicate variable '" + n + "'");
    for (const auto& kv : params)
        if (vars.count(kv.first)) throw ConfigError("'" + kv.first + "' is both a parameter and a variable");
    auto check = [&](const Expression& e, const std::string& where) {
        for (const auto& v : expr::free_variables(e))
            if (!vars.count(v)) throw ConfigError("undeclared variable '" + v + "' in " + where);
        for (const auto& p : expr::free_parameters(e))
            if (!params.count(p)) throw ConfigError("undeclared parameter '" + p + "' in " + where);
        if (!expr::derivative_refs(e).empty()) throw ConfigError("derivative reference in " + where);
    };
    for (std::size_t i = 0; i < f.size(); ++i) check(f[i], "der(" + states[i] + ")");
    for (std::size_t k = 0; k < g.size(); ++k) check(g[k], "constraint " + std::to_string(k));
    if (reduced() && differentiations.size() != g.size())
        throw ConfigError("differentiation counts do not match the constraints");
}

DaeSystem parse_model(std::string_view text) {
    struct Decl {
        std::string kind, name, value;
        int line, value_col;
    };
    struct Eq {
        std::string lhs, rhs;
        int line, lhs_col, rhs_col;
    };
    std::vector<Decl> decls;
    std::vector<Eq> eqs;

    int lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view raw = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++lineno;
        if (auto h = raw.find('#'); h != std::string_view::npos) raw = raw.substr(0, h);
        std::size_t a = 0;
        while (a < raw.size() && std::isspace(static_cast<unsigned char>(raw[a]))) ++a;
        if (a == raw.size()) continue;
        std::size_t b = a;
        while (b < raw.size() && !std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
        std::string kw(raw.substr(a, b - a));
        std::size_t eqpos = raw.find('=', b);
        if (eqpos == std::string_view::npos) throw ParseError("expected '='", lineno, static_cast<int>(raw.size()) + 1);
        std::string lhs = trim(raw.substr(b, eqpos - b));
        std::string rhs = trim(raw.substr(eqpos + 1));
        std::size_t rstart = eqpos + 1;
        while (rstart < raw.size() && std::isspace(static_cast<unsigned char>(raw[rstart]))) ++rstart;
        int lhs_col = static_cast<int>(b) + 1;
        while (static_cast<std::size_t>(lhs_col - 1) < raw.size() &&
               std::isspace(static_cast<unsigned char>(raw[static_cast<std::size_t>(lhs_col - 1)])))
            ++lhs_col;
        if (rhs.empty()) throw ParseError("missing value", lineno, static_cast<int>(rstart) + 1);
        if (kw == "param" || kw == "state" || kw == "alg") {
            if (!valid_name(lhs)) throw ParseError("invalid name '" + lhs + "'", lineno, lhs_col);
            decls.push_back({kw, lhs, rhs, lineno, static_cast<int>(rstart) + 1});
        } else if (kw == "eq") {
            eqs.push_back({lhs, rhs, lineno, lhs_col, static_cast<int>(rstart) + 1});
        } else {
            throw ParseError("unknown statement '" + kw + "'", lineno, static_cast<int>(a) + 1);
        }
    }

    DaeSystem d;
    std::set<std::string, std::less<>> pset;
    std::set<std::string> declared;
    for (const auto& dc : decls)
        if (dc.kind == "param") pset.insert(dc.name);

    expr::Bindings known;
    auto value_of = [&](const Decl& dc) {
        Expression e;
        try {
            e = expr::parse_expression(dc.value, pset);
        } catch (const ParseError& pe) {
            throw ParseError(pe.message(), dc.line, dc.value_col + pe.column() - 1);
        }
        for (const auto& v : expr::free_variables(e))
            throw ParseError("value refers to variable '" + v + "'", dc.line, dc.value_col);
        if (!expr::derivative_refs(e).empty()) throw ParseError("value contains der()", dc.line, dc.value_col);
        for (const auto& p : expr::free_parameters(e))
            if (!known.count(p))
                throw ParseError("parameter '" + p + "' used before its declaration", dc.line, dc.value_col);
        try {
            return expr::evaluate(e, known);
        } catch (const DomainError& de) {
            throw ParseError(de.what(), dc.line, dc.value_col);
        }
    };
    for (const auto& dc : decls) {
        if (!declared.insert(dc.name).second)
            throw ParseError("duplicate declaration of '" + dc.name + "'", dc.line, 1);
        double v = value_of(dc);
        if (dc.kind == "param") {
            d.params[dc.name] = v;
            known[dc.name] = v;
        } else if (dc.kind == "state") {
            d.states.push_back(dc.name);
            d.x0.push_back(v);
        } else {
            d.algebraics.push_back(dc.name);
            d.y0.push_back(v);
        }
    }

    std::set<std::string> vars(d.states.begin(), d.states.end());
    vars.insert(d.algebraics.begin(), d.algebraics.end());
    std::vector<std::optional<Expression>> f(d.states.size());
    for (const auto& q : eqs) {
        Expression e;
        try {
            e = expr::parse_expression(q.rhs, pset);
        } catch (const ParseError& pe) {
            throw ParseError(pe.message(), q.line, q.rhs_col + pe.column() - 1);
        }
        for (const auto& v : expr::free_variables(e))
            if (!vars.count(v)) throw ParseError("undeclared variable '" + v + "'", q.line, q.rhs_col);
        if (!expr::derivative_refs(e).empty())
            throw ParseError("der() is only allowed on the left-hand side", q.line, q.rhs_col);
        if (q.lhs == "0") {
            d.g.push_back(e);
            continue;
        }
        Expression l;
        try {
            l = expr::parse_expression(q.lhs, pset);
        } catch (const ParseError& pe) {
            throw ParseError(pe.message(), q.line, q.lhs_col + pe.column() - 1);
        }
        if (l.kind() != expr::NodeKind::Derivative || l.order() != 1)
            throw ParseError("left-hand side must be 0 or der(NAME)", q.line, q.lhs_col);
        auto it = std::find(d.states.begin(), d.states.end(), l.name());
        if (it == d.states.end()) throw ParseError("'" + l.name() + "' is not a state", q.line, q.lhs_col);
        auto& slot = f[static_cast<std::size_t>(it - d.states.begin())];
        if (slot) throw ParseError("second equation for der(" + l.name() + ")", q.line, q.lhs_col);
        slot = e;
    }
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (!f[i]) throw ConfigError("no equation for der(" + d.states[i] + ")");
        d.f.push_back(*f[i]);
    }
    d.validate();
    return d;
}

std::string format_model(const DaeSystem& d) {
    std::ostringstream os;
    for (const auto& [k, v] : d.params) os << "param " << k << " = " << expr::format_double(v) << '\n';
    for (std::size_t i = 0; i < d.states.size(); ++i)
        os << "state " << d.states[i] << " = " << expr::format_double(d.x0[i]) << '\n';
    for (std::size_t i = 0; i < d.algebraics.size(); ++i)
        os << "alg " << d.algebraics[i] << " = " << expr::format_double(d.y0[i]) << '\n';
    for (std::size_t i = 0; i < d.states.size(); ++i)
        os << "eq der(" << d.states[i] << ") = " << expr::to_string(d.f[i]) << '\n';
    for (std::size_t k = 0; k < d.g.size(); ++k) os << "eq 0 = " << expr::to_string(d.g[k]) << '\n';
    for (const auto& le : d.lineage)
        os << "# derived from constraint " << le.parent << ", order " << le.order << ": 0 = "
           << expr::to_string(le.residual) << '\n';
    return os.str();
}

DaeSystem pantelides_reduce(const DaeSystem& d) {
    d.validate();
    const std::size_t nx = d.states.size(), ny = d.algebraics.size();
    const std::size_t neq = nx + ny, nv = nx + ny;

    std::vector<std::string> names = d.states;
    names.insert(names.end(), d.algebraics.begin(), d.algebraics.end());
    std::vector<int> level(nv, 0);
    for (std::size_t i = 0; i < nx; ++i) level[i] = 1;

    std::vector<Expression> eq(neq);
    std::vector<int> diffs(neq, 0);
    for (std::size_t i = 0; i < nx; ++i) eq[i] = Expression::derivative(d.states[i]) - d.f[i];
    for (std::size_t k = 0; k < ny; ++k) eq[nx + k] = d.g[k];

    std::vector<DerivedEquation> lineage;
    std::vector<long> assign(nv, -1);
    std::vector<char> eq_color, var_color;

    auto incident = [&](std::size_t e, std::size_t v) { return expr::max_order(eq[e], names[v]) == level[v]; };

    std::function<bool(std::size_t)> augment = [&](std::size_t e) {
        eq_color[e] = 1;
        for (std::size_t v = 0; v < nv; ++v)
            if (assign[v] < 0 && incident(e, v)) {
                assign[v] = static_cast<long>(e);
                return true;
            }
        for (std::size_t v = 0; v < nv; ++v)
            if (!var_color[v] && incident(e, v)) {
                var_color[v] = 1;
                if (augment(static_cast<std::size_t>(assign[v]))) {
                    assign[v] = static_cast<long>(e);
                    return true;
                }
            }
        return false;
    };

    int rounds = 0;
    for (std::size_t k = 0; k < neq; ++k) {
        for (;;) {
            eq_color.assign(neq, 0);
            var_color.assign(nv, 0);
            if (augment(k)) break;
            if (++rounds > kRoundBudget) {
                std::string msg = "structurally singular after " + std::to_string(kRoundBudget) +
                                  " differentiation rounds; unmatched equations:";
                for (std::size_t e = k; e < neq; ++e) {
                    msg += ' ';
                    msg += e < nx ? "der(" + d.states[e] + ")" : "constraint " + std::to_string(e - nx);
                }
                throw StructuralError(msg);
            }
            for (std::size_t e = 0; e < neq; ++e) {
                if (!eq_color[e]) continue;
                eq[e] = expr::differentiate_time(eq[e]);
                ++diffs[e];
                if (e >= nx) lineage.push_back({e - nx, diffs[e], eq[e]});
            }
            for (std::size_t v = 0; v < nv; ++v)
                if (var_color[v]) ++level[v];
        }
    }
    // A solvable system whose reduction needs der(der(x)) or der(y) as an
    // unknown is outside the semi-explicit form handled downstream.
    for (std::size_t e = 0; e < nx; ++e)
        if (diffs[e] > 0)
            throw ConfigError("index reduction would differentiate the equation for der(" + d.states[e] +
                              "); unsupported");
    for (std::size_t v = 0; v < nv; ++v)
        if (level[v] != (v < nx ? 1 : 0))
            throw ConfigError("index reduction requires der(" + names[v] + ") of order " + std::to_string(level[v]) +
                              "; unsupported");

    DaeSystem out = d;
    out.differentiations.assign(diffs.begin() + static_cast<std::ptrdiff_t>(nx), diffs.end());
    out.lineage = std::move(lineage);
    return out;
}

std::vector<Expression> active_constraints(const DaeSystem& d) {
    auto fmap = derivative_map(d);
    std::vector<Expression> h;
    for (std::size_t k = 0; k < d.g.size(); ++k) h.push_back(constraint_levels(d, k, fmap).back());
    return h;
}

OdeSystem to_explicit_ode(const DaeSystem& d) {
    d.validate();
    std::vector<std::string> vars = d.states;
    vars.insert(vars.end(), d.algebraics.begin(), d.algebraics.end());
    if (d.algebraics.empty()) return OdeSystem(vars, d.f, d.params);

    struct Program {
        std::size_t nx, ny;
        std::vector<CompiledExpression> f;
        std::vector<Sparse> hy, hx;
    };
    auto prog = std::make_shared<Program>();
    prog->nx = d.states.size();
    prog->ny = d.algebraics.size();
    auto slots = dae_slots(d, param_names(d.params));
    for (const auto& e : d.f) prog->f.emplace_back(e, slots);
    auto h = active_constraints(d);
    for (std::size_t k = 0; k < h.size(); ++k) {
        for (std::size_t j = 0; j < prog->ny; ++j) {
            Expression dj = expr::differentiate(h[k], d.algebraics[j]);
            if (!dj.is_constant(0.0)) prog->hy.push_back({k, j, CompiledExpression(dj, slots)});
        }
        for (std::size_t i = 0; i < prog->nx; ++i) {
            Expression di = expr::differentiate(h[k], d.states[i]);
            if (!di.is_constant(0.0)) prog->hx.push_back({k, i, CompiledExpression(di, slots)});
        }
    }

    auto fn = [prog](std::span<const double> z, std::span<const double> params, std::span<double> dz) {
        const std::size_t nx = prog->nx, ny = prog->ny;
        std::vector<double> values(z.begin(), z.end());
        values.insert(values.end(), params.begin(), params.end());
        std::vector<double> stack;
        for (std::size_t i = 0; i < nx; ++i) dz[i] = prog->f[i].evaluate(values, stack);
        Eigen::MatrixXd jy = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ny), static_cast<Eigen::Index>(ny));
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ny));
        for (const auto& s : prog->hy)
            jy(static_cast<Eigen::Index>(s.row), static_cast<Eigen::Index>(s.col)) = s.code.evaluate(values, stack);
        for (const auto& s : prog->hx)
            rhs(static_cast<Eigen::Index>(s.row)) += s.code.evaluate(values, stack) * dz[s.col];
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jy);
        check_rcond(lu, jy);
        Eigen::VectorXd yd = -lu.solve(rhs);
        for (std::size_t j = 0; j < ny; ++j) dz[nx + j] = yd(static_cast<Eigen::Index>(j));
    };
    return OdeSystem(vars, fn, d.params);
}

std::vector<double> consistent_initialize(const DaeSystem& d, std::span<const double> x0,
                                          std::span<const double> y_guess, const ParamMap* params) {
    const std::size_t nx = d.states.size(), ny = d.algebraics.size();
    if (x0.size() != nx || y_guess.size() != ny) throw ConfigError("initial values do not match the variable counts");
    std::vector<std::string> pn = param_names(d.params);
    auto slots = dae_slots(d, pn);

    std::vector<double> values(x0.begin(), x0.end());
    values.insert(values.end(), y_guess.begin(), y_guess.end());
    for (const auto& n : pn) {
        double v = d.params.find(n)->second;
        if (params) {
            auto it = params->find(n);
            if (it != params->end()) v = it->second;
        }
        values.push_back(v);
    }

    auto fmap = derivative_map(d);
    std::vector<std::vector<Expression>> levels;
    std::vector<CompiledExpression> h;
    std::vector<Sparse> jac;
    for (std::size_t k = 0; k < ny; ++k) {
        levels.push_back(constraint_levels(d, k, fmap));
        const Expression& hk = levels.back().back();
        h.emplace_back(hk, slots);
        for (std::size_t j = 0; j < ny; ++j) {
            Expression dj = expr::differentiate(hk, d.algebraics[j]);
            if (!dj.is_constant(0.0)) jac.push_back({k, j, CompiledExpression(dj, slots)});
        }
    }

    std::vector<double> stack;
    auto residual = [&](const std::vector<double>& vals, Eigen::VectorXd& r) {
        r.resize(static_cast<Eigen::Index>(ny));
        for (std::size_t k = 0; k < ny; ++k) r(static_cast<Eigen::Index>(k)) = h[k].evaluate(vals, stack);
        double m = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
        return std::isfinite(m) ? m : INFINITY;
    };

    Eigen::VectorXd r;
    double norm = residual(values, r);
    int iter = 0;
    while (norm > 1e-10) {
        if (++iter > 50) {
            Eigen::Index worst = 0;
            r.cwiseAbs().maxCoeff(&worst);
            throw ConvergenceError("consistent initialization did not converge in 50 iterations; max residual " +
                                   std::to_string(norm) + " in constraint " + std::to_string(worst));
        }
        Eigen::MatrixXd jy = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ny), static_cast<Eigen::Index>(ny));
        for (const auto& s : jac)
            jy(static_cast<Eigen::Index>(s.row), static_cast<Eigen::Index>(s.col)) = s.code.evaluate(values, stack);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jy);
        check_rcond(lu, jy);
        Eigen::VectorXd step = lu.solve(r);
        double lambda = 1.0;
        std::vector<double> trial = values;
        Eigen::VectorXd rt;
        double tn = INFINITY;
        for (int half = 0; half < 30; ++half) {
            for (std::size_t j = 0; j < ny; ++j) trial[nx + j] = values[nx + j] - lambda * step(static_cast<Eigen::Index>(j));
            tn = residual(trial, rt);
            if (tn < norm) break;
            lambda *= 0.5;
        }
        values = trial;
        r = rt;
        norm = tn;
    }

    for (std::size_t k = 0; k < ny; ++k)
        for (std::size_t l = 0; l + 1 < levels[k].size(); ++l) {
            double v = CompiledExpression(levels[k][l], slots).evaluate(values, stack);
            if (!(std::abs(v) <= 1e-8))
                throw ConfigError("initial states violate constraint " + std::to_string(k) + " at derivative level " +
                                  std::to_string(l) + " (residual " + std::to_string(v) + ")");
        }
    return {values.begin() + static_cast<std::ptrdiff_t>(nx), values.begin() + static_cast<std::ptrdiff_t>(nx + ny)};
}

ConstraintCheck::ConstraintCheck(const DaeSystem& d, const std::vector<std::string>& param_names)
    : nz_(d.states.size() + d.algebraics.size()) {
    auto slots = dae_slots(d, param_names);
    auto fmap = derivative_map(d);
    for (std::size_t k = 0; k < d.g.size(); ++k)
        for (const auto& e : constraint_levels(d, k, fmap)) code_.emplace_back(e, slots);
}

std::vector<double> ConstraintCheck::residuals(std::span<const double> z, std::span<const double> param_values) const {
    if (z.size() != nz_) throw ConfigError("state size mismatch");
    std::vector<double> values(z.begin(), z.end());
    values.insert(values.end(), param_values.begin(), param_values.end());
    std::vector<double> stack, out;
    out.reserve(code_.size());
    for (const auto& c : code_) out.push_back(c.evaluate(values, stack));
    return out;
}

double ConstraintCheck::max_residual(std::span<const double> z, std::span<const double> param_values) const {
    double m = 0.0;
    for (double r : residuals(z, param_values)) {
        if (!std::isfinite(r)) return INFINITY;
        m = std::max(m, std::abs(r));
    }
    return m;
}

std::vector<std::size_t> dependent_rows(const Eigen::MatrixXd& jac) {
    if (jac.rows() == 0) return {};
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeFullU);
    Eigen::VectorXd u = svd.matrixU().col(jac.rows() - 1);
    double top = u.cwiseAbs().maxCoeff();
    std::vector<std::size_t> rows;
    for (Eigen::Index i = 0; i < u.size(); ++i)
        if (std::abs(u(i)) >= 0.1 * top) rows.push_back(static_cast<std::size_t>(i));
    return rows;
}

}  // namespace qdae::dae
