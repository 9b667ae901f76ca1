#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qdae/dae/ode.hpp"

namespace qdae::classical {

/// Time-stamped values on a uniform grid. An aborted run keeps the rows it
/// produced, sets complete = false and records the reason in `error`.
struct Trace {
    std::vector<std::string> names;
    std::vector<double> times;
    std::vector<std::vector<double>> rows;
    std::map<std::string, std::string> metadata;
    bool complete = true;
    std::string error;

    std::size_t column(std::string_view name) const;
    std::vector<double> series(std::string_view name) const;
};

/// A scheduled change applied at a step boundary: it may edit parameters
/// of the system and the state itself (e.g. re-solving algebraic variables).
struct Event {
    double time = 0.0;
    std::string label;
    std::function<void(dae::OdeSystem&, std::vector<double>&)> apply;
};

/// Advances z in place by one step of size dt starting at time t.
using Stepper = std::function<void(const dae::OdeSystem&, double t, double dt, std::vector<double>& z)>;

/// Generic fixed-step driver: round(T/dt)+1 rows at t = s*dt. Events whose
/// time lies within dt/2 of a grid point fire after that row is recorded.
/// qdae::Error or a non-finite state stops the run with a partial trace.
Trace integrate_fixed(dae::OdeSystem ode, std::span<const double> z0, double dt, double T,
                      const std::vector<Event>& events, const Stepper& step, const std::string& method);

Trace forward_euler(const dae::OdeSystem& ode, std::span<const double> z0, double dt, double T,
                    const std::vector<Event>& events = {});
Trace rk4(const dae::OdeSystem& ode, std::span<const double> z0, double dt, double T,
          const std::vector<Event>& events = {});

void euler_step(const dae::OdeSystem& ode, double dt, std::vector<double>& z);
void rk4_step(const dae::OdeSystem& ode, double dt, std::vector<double>& z);

/// Root-mean-square difference of one variable; throws ConfigError when the
/// time grids differ.
double rmse(const Trace& a, const Trace& b, std::string_view variable);

}  // namespace qdae::classical
