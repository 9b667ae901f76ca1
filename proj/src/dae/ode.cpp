#include "qdae/dae/ode.hpp"

#include <algorithm>

#include "qdae/error.hpp"

namespace qdae::dae {

namespace {

void split(const ParamMap& params, std::vector<std::string>& names, std::vector<double>& values) {
    for (const auto& [k, v] : params) {
        names.push_back(k);
        values.push_back(v);
    }
}

}  // namespace

OdeSystem::OdeSystem(std::vector<std::string> variables, std::vector<expr::Expression> rhs, ParamMap params)
    : vars_(std::move(variables)), rhs_(std::move(rhs)) {
    if (rhs_.size() != vars_.size()) throw ConfigError("need one right-hand side per variable");
    split(params, pnames_, pvalues_);
    SlotMap s = slots();
    if (s.size() != vars_.size() + pnames_.size()) throw ConfigError("variable and parameter names must be distinct");
    auto code = std::make_shared<std::vector<expr::CompiledExpression>>();
    code->reserve(rhs_.size());
    for (const auto& e : rhs_) code->emplace_back(e, s);
    code_ = std::move(code);
}

OdeSystem::OdeSystem(std::vector<std::string> variables, Implicit fn, ParamMap params)
    : vars_(std::move(variables)), implicit_(std::move(fn)) {
    if (!implicit_) throw ConfigError("implicit right-hand side is empty");
    split(params, pnames_, pvalues_);
}

std::size_t OdeSystem::index(std::string_view name) const {
    auto it = std::find(vars_.begin(), vars_.end(), name);
    if (it == vars_.end()) throw ConfigError("no variable named '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - vars_.begin());
}

std::size_t OdeSystem::param_index(std::string_view name) const {
    auto it = std::lower_bound(pnames_.begin(), pnames_.end(), name);
    if (it == pnames_.end() || *it != name) throw ConfigError("no parameter named '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - pnames_.begin());
}

double OdeSystem::parameter(std::string_view name) const { return pvalues_[param_index(name)]; }

void OdeSystem::set_parameter(std::string_view name, double value) { pvalues_[param_index(name)] = value; }

ParamMap OdeSystem::parameters() const {
    ParamMap m;
    for (std::size_t i = 0; i < pnames_.size(); ++i) m[pnames_[i]] = pvalues_[i];
    return m;
}

SlotMap OdeSystem::slots() const {
    SlotMap s;
    for (std::size_t i = 0; i < vars_.size(); ++i) s[vars_[i]] = i;
    for (std::size_t i = 0; i < pnames_.size(); ++i) s[pnames_[i]] = vars_.size() + i;
    return s;
}

void OdeSystem::eval(std::span<const double> z, std::span<double> dz) const {
    if (z.size() != vars_.size() || dz.size() != vars_.size()) throw ConfigError("state size mismatch");
    if (implicit_) {
        implicit_(z, pvalues_, dz);
        return;
    }
    std::vector<double> values(vars_.size() + pvalues_.size());
    std::copy(z.begin(), z.end(), values.begin());
    std::copy(pvalues_.begin(), pvalues_.end(), values.begin() + static_cast<std::ptrdiff_t>(vars_.size()));
    std::vector<double> stack;
    for (std::size_t i = 0; i < code_->size(); ++i) dz[i] = (*code_)[i].evaluate(values, stack);
}

std::vector<double> OdeSystem::eval(std::span<const double> z) const {
    std::vector<double> dz(z.size());
    eval(z, dz);
    return dz;
}

}  // namespace qdae::dae
