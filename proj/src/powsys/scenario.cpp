#include "qdae/powsys/scenario.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qdae/error.hpp"

#ifndef QDAE_DEFAULT_DATA_DIR
#define QDAE_DEFAULT_DATA_DIR "data"
#endif

namespace qdae::powsys {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, double> number_map(const json& j, const char* key) {
    std::map<std::string, double> out;
    if (!j.contains(key)) return out;
    for (const auto& [k, v] : j.at(key).items()) {
        if (!v.is_number()) throw ConfigError(std::string(key) + "." + k + " must be a number");
        out[k] = v.get<double>();
    }
    return out;
}

std::string sfx(std::string_view base, std::size_t i) { return std::string(base) + "_" + std::to_string(i + 1); }

void set_pc(dae::OdeSystem& ode, const Eigen::VectorXd& p0, const std::vector<Governor>& govs, double z) {
    ode.set_parameter("Z", z);
    for (std::size_t i = 0; i < govs.size(); ++i)
        ode.set_parameter(sfx("PC", i), p0(static_cast<Eigen::Index>(i)) + govs[i].kpf * z);
}

void apply_overrides(dae::OdeSystem& ode, const Scenario& s) {
    for (const auto& [k, v] : s.params) ode.set_parameter(k, v);
}

void apply_initial(const dae::OdeSystem& ode, const Scenario& s, std::vector<double>& z) {
    for (const auto& [k, v] : s.initial) z[ode.index(k)] = v;
    for (const auto& [k, v] : s.offsets) z[ode.index(k)] += v;
}

Experiment smib(const Scenario& s) {
    dae::OdeSystem ode = build_smib(5.0, 10.0, 1.7);
    apply_overrides(ode, s);
    std::vector<double> z0{0.0, 0.0};
    apply_initial(ode, s, z0);
    if (!s.events.empty()) throw ConfigError("the single-machine model has no load buses");
    return {s, std::move(ode), std::move(z0), {}, std::nullopt, nullptr};
}

Experiment internal_node(const Scenario& s, const SystemData& data) {
    InternalNode in = build_internal_node(data);
    apply_overrides(in.ode, s);
    apply_initial(in.ode, s, in.z0);
    auto base = std::make_shared<const InternalNodeModel>(in.model);
    std::vector<classical::Event> events;
    for (const auto& ev : s.events) {
        auto govs = data.governors;
        auto changes = ev.loads;
        const ZMode mode = s.z_mode;
        events.push_back({ev.time, "load change", [base, govs, changes, mode](dae::OdeSystem& ode, std::vector<double>& z) {
                              InternalNodeModel md = model_from_parameters(*base, ode);
                              std::vector<double> delta;
                              for (std::size_t i = 0; i < md.m; ++i) delta.push_back(z[ode.index(sfx("delta", i))]);
                              InternalNodeModel next = apply_disturbance(md, changes, delta);
                              set_network_parameters(ode, next);
                              const double zc = mode == ZMode::Nominal ? ode.parameter("Z") + total_change(changes)
                                                                       : balanced_z(next, govs);
                              set_pc(ode, base->p0, govs, zc);
                          }});
    }
    return {s, std::move(in.ode), std::move(in.z0), std::move(events), std::nullopt, nullptr};
}

Experiment generic(const Scenario& s, const SystemData& data) {
    auto gm = std::make_shared<GenericModel>(build_generic_dae(data));
    dae::DaeSystem& d = gm->dae;
    for (const auto& [k, v] : s.params) {
        if (!d.params.count(k)) throw ConfigError("no parameter named '" + k + "'");
        d.params[k] = v;
    }
    auto shift = [&](const std::string& k, double v, bool offset) {
        for (std::size_t i = 0; i < d.states.size(); ++i)
            if (d.states[i] == k) {
                d.x0[i] = offset ? d.x0[i] + v : v;
                return;
            }
        throw ConfigError("no state named '" + k + "'");
    };
    for (const auto& [k, v] : s.initial) shift(k, v, false);
    for (const auto& [k, v] : s.offsets) shift(k, v, true);

    auto reduced = std::make_shared<const dae::DaeSystem>(dae::pantelides_reduce(d));
    dae::OdeSystem ode = dae::to_explicit_ode(*reduced);
    std::vector<double> y = dae::consistent_initialize(*reduced, d.x0, d.y0);
    std::vector<double> z0 = d.x0;
    z0.insert(z0.end(), y.begin(), y.end());

    const Eigen::VectorXd p0 = Eigen::Map<const Eigen::VectorXd>(gm->p0.data(), static_cast<Eigen::Index>(gm->p0.size()));
    std::vector<classical::Event> events;
    for (const auto& ev : s.events) {
        auto changes = ev.loads;
        const ZMode mode = s.z_mode;
        events.push_back({ev.time, "load change",
                          [gm, reduced, data, changes, mode, p0](dae::OdeSystem& ode, std::vector<double>& z) {
                              for (const auto& c : changes) {
                                  if (c.bus >= data.net.buses) throw ConfigError("load change at a bus that does not exist");
                                  ode.set_parameter(sfx("PL", c.bus), ode.parameter(sfx("PL", c.bus)) + c.dp);
                                  ode.set_parameter(sfx("QL", c.bus), ode.parameter(sfx("QL", c.bus)) + c.dq);
                              }
                              const double zc = mode == ZMode::Nominal ? ode.parameter("Z") + total_change(changes)
                                                                       : generic_balanced_z(*gm, data, ode.parameters());
                              set_pc(ode, p0, data.governors, zc);
                              const std::size_t nx = reduced->states.size();
                              const dae::ParamMap params = ode.parameters();
                              std::vector<double> y = dae::consistent_initialize(
                                  *reduced, std::span<const double>(z).first(nx), std::span<const double>(z).subspan(nx),
                                  &params);
                              std::copy(y.begin(), y.end(), z.begin() + static_cast<std::ptrdiff_t>(nx));
                          }});
    }
    auto check = std::make_shared<const dae::ConstraintCheck>(*reduced, ode.parameter_names());
    return {s, std::move(ode), std::move(z0), std::move(events), *reduced, std::move(check)};
}

}  // namespace

Scenario parse_scenario(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), 1, static_cast<int>(e.byte));
    }
    Scenario s;
    try {
        s.model = j.at("model").get<std::string>();
        s.name = j.at("name").get<std::string>();
        s.system = j.value("system", s.system);
        s.dt = j.value("dt", s.dt);
        s.T = j.at("T").get<double>();
        s.params = number_map(j, "params");
        s.initial = number_map(j, "initial");
        s.offsets = number_map(j, "offsets");
        const std::string zm = j.value("z_mode", "balanced");
        if (zm == "balanced")
            s.z_mode = ZMode::Balanced;
        else if (zm == "nominal")
            s.z_mode = ZMode::Nominal;
        else
            throw ConfigError("z_mode must be 'balanced' or 'nominal'");
        if (j.contains("events"))
            for (const auto& e : j.at("events")) {
                Scenario::Disturbance d;
                d.time = e.at("time").get<double>();
                for (const auto& l : e.at("loads")) {
                    const int bus = l.at("bus").get<int>();
                    if (bus < 1) throw ConfigError("bus numbers start at 1");
                    d.loads.push_back({static_cast<std::size_t>(bus - 1), l.value("p", 0.0), l.value("q", 0.0)});
                }
                s.events.push_back(std::move(d));
            }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    if (!(s.dt > 0) || !(s.T >= s.dt)) throw ConfigError("scenario needs dt > 0 and T >= dt");
    for (const auto& e : s.events)
        if (e.time < 0 || e.time > s.T) throw ConfigError("event time outside [0, T]");
    return s;
}

Scenario load_scenario(const std::string& path) { return parse_scenario(read_file(path)); }

std::string scenario_path(const std::string& data_dir, const std::string& model, const std::string& name) {
    return data_dir + "/scenarios/" + model + "-" + name + ".json";
}

std::string default_data_dir() {
    if (const char* env = std::getenv("QDAE_DATA"); env && *env) return env;
    return QDAE_DEFAULT_DATA_DIR;
}

Experiment build_experiment(const Scenario& s, const std::string& data_dir) {
    if (s.model == "smib") return smib(s);
    if (s.model != "wscc-internal" && s.model != "wscc-dae") throw ConfigError("unknown model '" + s.model + "'");
    SystemData data = load_system(data_dir + "/" + s.system);
    return s.model == "wscc-internal" ? internal_node(s, data) : generic(s, data);
}

}  // namespace qdae::powsys
