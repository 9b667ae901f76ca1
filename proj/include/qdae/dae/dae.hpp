#pragma once

// Semi-explicit DAEs: der(x_i) = f_i(x, y), 0 = g_k(x, y).

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "qdae/dae/ode.hpp"
#include "qdae/expr/expression.hpp"

namespace qdae::dae {

/// An equation introduced by index reduction: `order` time-derivatives of
/// algebraic equation `parent`, kept in raw form (with der() refs).
struct DerivedEquation {
    std::size_t parent = 0;
    int order = 1;
    expr::Expression residual;
};

struct DaeSystem {
    std::vector<std::string> states;
    std::vector<std::string> algebraics;
    ParamMap params;
    std::vector<expr::Expression> f;  // der(states[i]) = f[i]
    std::vector<expr::Expression> g;  // 0 = g[k]
    std::vector<double> x0;           // initial states
    std::vector<double> y0;           // algebraic guesses

    /// Times each algebraic equation was differentiated by pantelides_reduce.
    /// Empty for an unreduced system.
    std::vector<int> differentiations;
    std::vector<DerivedEquation> lineage;

    /// Throws ConfigError on count mismatches or undeclared names.
    void validate() const;
    bool reduced() const noexcept { return !differentiations.empty(); }
};

/// Model text: `param N = v`, `state N = v`, `alg N = v`, `eq der(N) = e`,
/// `eq 0 = e`; one statement per line, `#` starts a comment. Values may be
/// constant expressions over previously declared parameters.
DaeSystem parse_model(std::string_view text);
/// Inverse of parse_model; derived equations are listed as comments.
std::string format_model(const DaeSystem& d);

/// Pantelides structural index reduction. Algebraic equations that cannot be
/// matched are replaced by their time derivatives until every equation is
/// matched to a distinct highest-order unknown (der(x) or y).
/// Throws StructuralError after 10 differentiation rounds.
DaeSystem pantelides_reduce(const DaeSystem& d);

/// The constraint actually imposed on y: each g_k differentiated as often as
/// reduction requires, with der(x) replaced by f after every differentiation.
std::vector<expr::Expression> active_constraints(const DaeSystem& d);

/// z = [x; y], dx/dt = f, dy/dt = -(dh/dy)^{-1} (dh/dx) f for the active
/// constraints h. Throws SingularMatrixError when dh/dy has condition
/// estimate above 1e12 at an evaluation point.
OdeSystem to_explicit_ode(const DaeSystem& d);

/// Newton on the active constraints for y with x fixed; exact Jacobian,
/// step halving on residual growth, at most 50 iterations, stops at
/// ||h||_inf <= 1e-10. Parameter values default to d.params.
std::vector<double> consistent_initialize(const DaeSystem& d, std::span<const double> x0,
                                          std::span<const double> y_guess, const ParamMap* params = nullptr);

/// Evaluates every original constraint g_k and the intermediate derivative
/// levels of reduced ones at z = [x; y].
class ConstraintCheck {
public:
    ConstraintCheck(const DaeSystem& d, const std::vector<std::string>& param_names);
    /// max |residual| over all constraint levels.
    double max_residual(std::span<const double> z, std::span<const double> param_values) const;
    std::vector<double> residuals(std::span<const double> z, std::span<const double> param_values) const;

private:
    std::size_t nz_ = 0;
    std::vector<expr::CompiledExpression> code_;
};

/// Rows of dh/dy that take part in its near-null space, for diagnostics.
std::vector<std::size_t> dependent_rows(const Eigen::MatrixXd& jac);

}  // namespace qdae::dae
