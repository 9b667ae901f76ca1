#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qdae/expr/calculus.hpp"
#include "qdae/expr/expression.hpp"

namespace qdae::dae {

using ParamMap = std::map<std::string, double, std::less<>>;
using SlotMap = std::map<std::string, std::size_t, std::less<>>;

/// dz/dt = f(z). The right-hand side is either a list of Expressions over the
/// variables and parameters, or an opaque evaluator (the implicit-function
/// form produced by to_explicit_ode). Parameter values are part of the value
/// and may be changed between steps by disturbance events.
class OdeSystem {
public:
    /// Receives z, the parameter values (in parameter_names() order) and writes dz.
    using Implicit = std::function<void(std::span<const double> z, std::span<const double> params, std::span<double> dz)>;

    OdeSystem(std::vector<std::string> variables, std::vector<expr::Expression> rhs, ParamMap params);
    OdeSystem(std::vector<std::string> variables, Implicit fn, ParamMap params);

    std::size_t size() const noexcept { return vars_.size(); }
    const std::vector<std::string>& variables() const noexcept { return vars_; }
    std::size_t index(std::string_view name) const;

    bool symbolic() const noexcept { return !implicit_; }
    const std::vector<expr::Expression>& rhs() const noexcept { return rhs_; }

    const std::vector<std::string>& parameter_names() const noexcept { return pnames_; }
    const std::vector<double>& parameter_values() const noexcept { return pvalues_; }
    double parameter(std::string_view name) const;
    void set_parameter(std::string_view name, double value);
    ParamMap parameters() const;

    /// Variables first, then parameters; the layout compiled programs expect.
    SlotMap slots() const;

    void eval(std::span<const double> z, std::span<double> dz) const;
    std::vector<double> eval(std::span<const double> z) const;

private:
    std::size_t param_index(std::string_view name) const;

    std::vector<std::string> vars_;
    std::vector<expr::Expression> rhs_;
    std::shared_ptr<const std::vector<expr::CompiledExpression>> code_;
    Implicit implicit_;
    std::vector<std::string> pnames_;
    std::vector<double> pvalues_;
};

}  // namespace qdae::dae
