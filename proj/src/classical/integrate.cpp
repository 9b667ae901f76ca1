#include "qdae/classical/integrate.hpp"

#include <algorithm>
#include <cmath>

#include "qdae/error.hpp"

namespace qdae::classical {

std::size_t Trace::column(std::string_view name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ConfigError("trace has no variable '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - names.begin());
}

std::vector<double> Trace::series(std::string_view name) const {
    std::size_t c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
}

Trace integrate_fixed(dae::OdeSystem ode, std::span<const double> z0, double dt, double T,
                      const std::vector<Event>& events, const Stepper& step, const std::string& method) {
    if (!(dt > 0.0)) throw ConfigError("step size must be positive");
    if (!(T >= dt)) throw ConfigError("horizon must be at least one step");
    if (z0.size() != ode.size()) throw ConfigError("initial state size mismatch");
    for (const auto& e : events)
        if (e.time < 0.0 || e.time > T) throw ConfigError("event '" + e.label + "' lies outside [0, T]");

    const auto n = static_cast<std::size_t>(std::llround(T / dt));
    Trace tr;
    tr.names = ode.variables();
    tr.metadata["method"] = method;
    tr.times.reserve(n + 1);
    tr.rows.reserve(n + 1);

    std::vector<double> z(z0.begin(), z0.end());
    for (std::size_t s = 0;; ++s) {
        const double t = static_cast<double>(s) * dt;
        tr.times.push_back(t);
        tr.rows.push_back(z);
        if (s == n) break;
        try {
            for (const auto& e : events)
                if (std::abs(t - e.time) < dt / 2) e.apply(ode, z);
            step(ode, t, dt, z);
        } catch (const Error& err) {
            tr.complete = false;
            tr.error = "t = " + std::to_string(t) + ": " + err.what();
            return tr;
        }
        for (std::size_t i = 0; i < z.size(); ++i)
            if (!std::isfinite(z[i])) {
                tr.complete = false;
                tr.error = "t = " + std::to_string(t + dt) + ": non-finite value of " + tr.names[i];
                return tr;
            }
    }
    return tr;
}

void euler_step(const dae::OdeSystem& ode, double dt, std::vector<double>& z) {
    std::vector<double> k = ode.eval(z);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += dt * k[i];
}

void rk4_step(const dae::OdeSystem& ode, double dt, std::vector<double>& z) {
    const std::size_t n = z.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    ode.eval(z, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + 0.5 * dt * k1[i];
    ode.eval(tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + 0.5 * dt * k2[i];
    ode.eval(tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + dt * k3[i];
    ode.eval(tmp, k4);
    for (std::size_t i = 0; i < n; ++i) z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

Trace forward_euler(const dae::OdeSystem& ode, std::span<const double> z0, double dt, double T,
                    const std::vector<Event>& events) {
    return integrate_fixed(
        ode, z0, dt, T, events,
        [](const dae::OdeSystem& o, double, double h, std::vector<double>& z) { euler_step(o, h, z); },
        "classical-euler");
}

Trace rk4(const dae::OdeSystem& ode, std::span<const double> z0, double dt, double T,
          const std::vector<Event>& events) {
    return integrate_fixed(
        ode, z0, dt, T, events,
        [](const dae::OdeSystem& o, double, double h, std::vector<double>& z) { rk4_step(o, h, z); },
        "classical-rk4");
}

double rmse(const Trace& a, const Trace& b, std::string_view variable) {
    if (a.times.size() != b.times.size()) throw ConfigError("time grids differ in length");
    for (std::size_t i = 0; i < a.times.size(); ++i)
        if (std::abs(a.times[i] - b.times[i]) > 1e-9 * std::max(1.0, std::abs(a.times[i])))
            throw ConfigError("time grids differ at row " + std::to_string(i));
    if (a.times.empty()) return 0.0;
    std::size_t ca = a.column(variable), cb = b.column(variable);
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        double d = a.rows[i][ca] - b.rows[i][cb];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(a.rows.size()));
}

}  // namespace qdae::classical
