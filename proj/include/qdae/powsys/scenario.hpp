#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qdae/classical/integrate.hpp"
#include "qdae/dae/dae.hpp"
#include "qdae/powsys/models.hpp"

namespace qdae::powsys {

struct Scenario {
    struct Disturbance {
        double time = 0;
        std::vector<LoadChange> loads;
    };

    std::string model;  // smib | wscc-internal | wscc-dae
    std::string name;
    std::string system = "wscc9.json";
    double dt = 0.01;
    double T = 0;
    std::map<std::string, double> params;   // parameter overrides
    std::map<std::string, double> initial;  // absolute initial values
    std::map<std::string, double> offsets;  // added to the operating point
    std::vector<Disturbance> events;
    ZMode z_mode = ZMode::Balanced;
};

Scenario parse_scenario(std::string_view json_text);
Scenario load_scenario(const std::string& path);
/// <data_dir>/scenarios/<model>-<name>.json
std::string scenario_path(const std::string& data_dir, const std::string& model, const std::string& name);
/// QDAE_DATA if set, else the configured default.
std::string default_data_dir();

/// Everything a run needs: the explicit ODE, its start point and events.
struct Experiment {
    Scenario scenario;
    dae::OdeSystem ode;
    std::vector<double> z0;
    std::vector<classical::Event> events;
    std::optional<dae::DaeSystem> dae;                      // reduced generic model
    std::shared_ptr<const dae::ConstraintCheck> constraints;  // generic model only
};

Experiment build_experiment(const Scenario& s, const std::string& data_dir);

}  // namespace qdae::powsys
