#include "qdae/cli/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "qdae/error.hpp"
#include "qdae/powsys/models.hpp"
#include "qdae/powsys/scenario.hpp"
#include "qdae/qsolve/qsolve.hpp"

namespace qdae::cli {

using nlohmann::json;

namespace {

bool builtin_model(const std::string& m) { return m == "smib" || m == "wscc-internal" || m == "wscc-dae"; }

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool looks_like_path(const std::string& s) {
    return s.find('/') != std::string::npos || (s.size() > 5 && s.ends_with(".json"));
}

// The ODE, start point, events and grid a run needs, whatever the source.
struct Setup {
    powsys::Scenario scenario;
    dae::OdeSystem ode;
    std::vector<double> z0;
    std::vector<classical::Event> events;
    std::shared_ptr<const dae::ConstraintCheck> constraints;
};

Setup from_model_file(const RunConfig& cfg, const std::string& data_dir) {
    dae::DaeSystem d = dae::parse_model(read_text(cfg.model));
    powsys::Scenario s;
    s.model = cfg.model;
    if (!cfg.scenario.empty()) {
        s = powsys::load_scenario(looks_like_path(cfg.scenario) ? cfg.scenario
                                                                : powsys::scenario_path(data_dir, "model", cfg.scenario));
        if (!s.events.empty()) throw ConfigError("load-change events need a power-system model");
    }
    for (const auto& [k, v] : s.params) {
        if (!d.params.count(k)) throw ConfigError("no parameter named '" + k + "'");
        d.params[k] = v;
    }
    auto set = [&](const std::string& k, double v, bool offset) {
        for (std::size_t i = 0; i < d.states.size(); ++i)
            if (d.states[i] == k) {
                d.x0[i] = offset ? d.x0[i] + v : v;
                return;
            }
        throw ConfigError("no state named '" + k + "'");
    };
    for (const auto& [k, v] : s.initial) set(k, v, false);
    for (const auto& [k, v] : s.offsets) set(k, v, true);

    dae::DaeSystem reduced = dae::pantelides_reduce(d);
    dae::OdeSystem ode = dae::to_explicit_ode(reduced);
    std::vector<double> z0 = reduced.x0;
    std::shared_ptr<const dae::ConstraintCheck> check;
    if (!reduced.algebraics.empty()) {
        std::vector<double> y = dae::consistent_initialize(reduced, reduced.x0, reduced.y0);
        z0.insert(z0.end(), y.begin(), y.end());
        check = std::make_shared<const dae::ConstraintCheck>(reduced, ode.parameter_names());
    }
    return {std::move(s), std::move(ode), std::move(z0), {}, std::move(check)};
}

Setup prepare(const RunConfig& cfg, const std::string& data_dir) {
    Setup st = [&] {
        if (!builtin_model(cfg.model)) return from_model_file(cfg, data_dir);
        if (cfg.scenario.empty()) throw ConfigError("model '" + cfg.model + "' needs --scenario");
        powsys::Scenario s = powsys::load_scenario(
            looks_like_path(cfg.scenario) ? cfg.scenario : powsys::scenario_path(data_dir, cfg.model, cfg.scenario));
        if (s.model != cfg.model) throw ConfigError("scenario is for model '" + s.model + "', not '" + cfg.model + "'");
        if (cfg.dt) s.dt = *cfg.dt;
        if (cfg.tmax) s.T = *cfg.tmax;
        powsys::Experiment ex = powsys::build_experiment(s, data_dir);
        return Setup{std::move(ex.scenario), std::move(ex.ode), std::move(ex.z0), std::move(ex.events),
                     std::move(ex.constraints)};
    }();
    if (cfg.dt) st.scenario.dt = *cfg.dt;
    if (cfg.tmax) st.scenario.T = *cfg.tmax;
    if (!(st.scenario.T > 0)) throw ConfigError("no horizon: pass --tmax or a scenario");
    if (!(st.scenario.dt > 0) || st.scenario.T < st.scenario.dt) throw ConfigError("need dt > 0 and T >= dt");
    return st;
}

json scenario_json(const powsys::Scenario& s) {
    json ev = json::array();
    for (const auto& e : s.events) {
        json loads = json::array();
        for (const auto& l : e.loads) loads.push_back({{"bus", l.bus + 1}, {"p", l.dp}, {"q", l.dq}});
        ev.push_back({{"time", e.time}, {"loads", loads}});
    }
    return {{"name", s.name},
            {"system", s.system},
            {"params", s.params},
            {"initial", s.initial},
            {"offsets", s.offsets},
            {"z_mode", s.z_mode == powsys::ZMode::Balanced ? "balanced" : "nominal"},
            {"events", ev}};
}

}  // namespace

void RunConfig::validate() const {
    if (model.empty()) throw ConfigError("--model is required");
    if (method != "classical-euler" && method != "classical-rk4" && method != "quantum")
        throw ConfigError("method must be classical-euler, classical-rk4 or quantum");
    if (dt && !(*dt > 0)) throw ConfigError("--dt must be positive");
    if (tmax && !(*tmax > 0)) throw ConfigError("--tmax must be positive");
    if (!(eps > 0 && eps <= 0.1)) throw ConfigError("--eps must lie in (0, 0.1]");
    if (!(kappa > 0)) throw ConfigError("--kappa must be positive");
    if (taylor_k < 1) throw ConfigError("--taylor-k must be at least 1");
    if (clock_qubits < 2 || clock_qubits > 60) throw ConfigError("--clock-qubits must lie in [2, 60]");
}

RunResult run(const RunConfig& cfg) {
    cfg.validate();
    const std::string data_dir = cfg.data_dir.empty() ? powsys::default_data_dir() : cfg.data_dir;
    const auto start = std::chrono::steady_clock::now();
    Setup st = prepare(cfg, data_dir);
    const double dt = st.scenario.dt, T = st.scenario.T;

    RunResult res;
    json manifest = {{"model", cfg.model},
                     {"scenario", cfg.scenario},
                     {"method", cfg.method},
                     {"dt", dt},
                     {"tmax", T},
                     {"seed", cfg.seed},
                     {"data_dir", data_dir},
                     {"variables", st.ode.variables()},
                     {"scenario_settings", scenario_json(st.scenario)}};

    if (cfg.method == "quantum") {
        qsolve::QuantumConfig q;
        q.eps = cfg.eps;
        q.scale_eps = cfg.scale_eps;
        q.kappa = cfg.kappa;
        q.taylor_k = cfg.taylor_k;
        q.clock_qubits = cfg.clock_qubits;
        qsolve::QuantumRun qr = qsolve::integrate(st.ode, st.z0, dt, T, st.events, q);
        res.trace = std::move(qr.trace);
        manifest["quantum"] = {{"eps", q.eps},
                               {"scale_eps", q.scale_eps},
                               {"kappa", q.kappa},
                               {"taylor_k", q.taylor_k},
                               {"clock_qubits", q.clock_qubits},
                               {"dense_qubit_limit", q.dense_qubit_limit},
                               {"empty_branches", qr.empty_branches}};
    } else {
        const bool use_rk4 = cfg.method == "classical-rk4";
        double worst = 0.0;
        if (st.constraints) worst = st.constraints->max_residual(st.z0, st.ode.parameter_values());
        auto check = st.constraints;
        classical::Stepper step = [&worst, check, use_rk4](const dae::OdeSystem& o, double, double h,
                                                           std::vector<double>& z) {
            if (use_rk4)
                classical::rk4_step(o, h, z);
            else
                classical::euler_step(o, h, z);
            if (check) worst = std::max(worst, check->max_residual(z, o.parameter_values()));
        };
        res.trace = classical::integrate_fixed(st.ode, st.z0, dt, T, st.events, step, cfg.method);
        if (check) {
            res.constraint_residual = worst;
            manifest["constraint_residual"] = worst;
        }
    }
    manifest["rows"] = res.trace.rows.size();
    manifest["complete"] = res.trace.complete;
    manifest["error"] = res.trace.error;
    manifest["metadata"] = res.trace.metadata;
    manifest["elapsed_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    res.manifest = std::move(manifest);
    return res;
}

std::string manifest_path(const std::string& csv_path) {
    std::string stem = csv_path;
    if (stem.ends_with(".csv")) stem.resize(stem.size() - 4);
    return stem + ".manifest.json";
}

std::string default_output(const RunConfig& cfg) {
    std::string model = cfg.model;
    if (auto p = model.find_last_of('/'); p != std::string::npos) model = model.substr(p + 1);
    std::string scen = cfg.scenario;
    if (auto p = scen.find_last_of('/'); p != std::string::npos) scen = scen.substr(p + 1);
    if (scen.ends_with(".json")) scen.resize(scen.size() - 5);
    return model + (scen.empty() ? "" : "-" + scen) + "-" + cfg.method + ".csv";
}

void write_csv(const classical::Trace& trace, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot write '" + path + "'");
    std::fputs("t", f);
    for (const auto& n : trace.names) std::fprintf(f, ",%s", n.c_str());
    std::fputc('\n', f);
    for (std::size_t r = 0; r < trace.rows.size(); ++r) {
        std::fprintf(f, "%.17g", trace.times[r]);
        for (double v : trace.rows[r]) std::fprintf(f, ",%.17g", v);
        std::fputc('\n', f);
    }
    const bool bad = std::ferror(f) != 0;
    if (std::fclose(f) != 0 || bad) throw IoError("error writing '" + path + "'");
}

classical::Trace read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    classical::Trace tr;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty trace file", 1, 1);
    {
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        if (cell != "t") throw ParseError("trace header must start with 't'", 1, 1);
        while (std::getline(ss, cell, ',')) tr.names.push_back(cell);
    }
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t end = line.find(',', pos);
            if (end == std::string::npos) end = line.size();
            try {
                std::size_t used = 0;
                row.push_back(std::stod(line.substr(pos, end - pos), &used));
                if (used != end - pos) throw std::invalid_argument("trailing text");
            } catch (const std::exception&) {
                throw ParseError("bad number in trace", lineno, static_cast<int>(pos) + 1);
            }
            pos = end + 1;
        }
        if (row.size() != tr.names.size() + 1) throw ParseError("wrong number of columns", lineno, 1);
        tr.times.push_back(row.front());
        tr.rows.emplace_back(row.begin() + 1, row.end());
    }
    return tr;
}

void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("error writing '" + path + "'");
}

std::vector<Comparison> compare(const classical::Trace& a, const classical::Trace& b,
                                const std::vector<std::string>& variables,
                                const std::map<std::string, double>& thresholds) {
    std::vector<std::string> vars = variables;
    if (vars.empty())
        for (const auto& n : a.names)
            if (std::find(b.names.begin(), b.names.end(), n) != b.names.end()) vars.push_back(n);
    std::vector<Comparison> out;
    for (const auto& v : vars) {
        if (std::find(a.names.begin(), a.names.end(), v) == a.names.end() ||
            std::find(b.names.begin(), b.names.end(), v) == b.names.end())
            throw ConfigError("variable '" + v + "' missing from one of the traces");
        Comparison c{v, classical::rmse(a, b, v), std::nullopt};
        if (auto it = thresholds.find(v); it != thresholds.end())
            c.threshold = it->second;
        else if (auto all = thresholds.find("*"); all != thresholds.end())
            c.threshold = all->second;
        out.push_back(c);
    }
    return out;
}

std::map<std::string, double> default_thresholds(const std::string& model, const std::string& scenario) {
    if (model == "smib" && scenario == "normal") return {{"delta", 2 * 0.0005}, {"w", 2 * 0.0009}};
    if (model == "smib" && scenario == "pole-slip") return {{"delta", 2 * 0.0036}, {"w", 2 * 0.007}};
    return {};
}

void write_report(const std::vector<Comparison>& rows, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot write '" + path + "'");
    std::fputs("variable,rmse,threshold,pass\n", f);
    for (const auto& c : rows) {
        std::fprintf(f, "%s,%.17g,", c.variable.c_str(), c.rmse);
        if (c.threshold) std::fprintf(f, "%.17g", *c.threshold);
        std::fprintf(f, ",%d\n", c.pass() ? 1 : 0);
    }
    if (std::fclose(f) != 0) throw IoError("error writing '" + path + "'");
}

std::string reduce_listing(const dae::DaeSystem& reduced) {
    std::ostringstream os;
    os << dae::format_model(reduced);
    const std::size_t nx = reduced.states.size(), ny = reduced.algebraics.size();
    os << "# explicit ODE: " << nx + ny << " variables (" << nx << " differential, " << ny << " algebraic)\n";
    for (const auto& x : reduced.states) os << "#   " << x << '\n';
    for (const auto& y : reduced.algebraics) os << "#   " << y << "  (rate from the differentiated constraints)\n";
    return os.str();
}

namespace {

int report(const std::exception& e, int code) {
    std::cerr << "qdae: " << e.what() << '\n';
    return code;
}

template <class F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const IoError& e) {
        return report(e, kIo);
    } catch (const ConfigError& e) {
        return report(e, kConfig);
    } catch (const ParseError& e) {
        return report(e, kConfig);
    } catch (const Error& e) {
        return report(e, kNumeric);
    }
}

std::map<std::string, double> parse_thresholds(const std::vector<std::string>& items) {
    std::map<std::string, double> out;
    for (const auto& it : items) {
        const auto eq = it.find('=');
        const std::string name = eq == std::string::npos ? "*" : it.substr(0, eq);
        const std::string val = eq == std::string::npos ? it : it.substr(eq + 1);
        try {
            std::size_t used = 0;
            const double v = std::stod(val, &used);
            if (used != val.size() || !(v >= 0)) throw std::invalid_argument(val);
            out[name] = v;
        } catch (const std::exception&) {
            throw ConfigError("bad threshold '" + it + "'");
        }
    }
    return out;
}

std::map<std::string, double> thresholds_from_manifest(const std::string& csv) {
    std::ifstream in(manifest_path(csv));
    if (!in) return {};
    try {
        json m = json::parse(in);
        std::string scen = m.value("scenario", "");
        return default_thresholds(m.value("model", ""), scen);
    } catch (const json::exception&) {
        return {};
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Classical and simulated-quantum integration of power-system models"};
    app.require_subcommand(1);

    RunConfig rc;
    auto* run_cmd = app.add_subcommand("run", "integrate a model and write its trace");
    run_cmd->add_option("--model", rc.model, "smib, wscc-internal, wscc-dae or a model file")->required();
    run_cmd->add_option("--scenario", rc.scenario, "scenario name or file");
    run_cmd->add_option("--method", rc.method, "classical-euler, classical-rk4 or quantum")
        ->capture_default_str();
    run_cmd->add_option("--dt", rc.dt, "step size (s)");
    run_cmd->add_option("--tmax", rc.tmax, "horizon (s)");
    run_cmd->add_option("--eps", rc.eps, "pointer coupling cap")->capture_default_str();
    run_cmd->add_option("--kappa", rc.kappa, "per-step coupling bound eps*||A||")->capture_default_str();
    run_cmd->add_flag("!--fixed-eps", rc.scale_eps, "use --eps on every step");
    run_cmd->add_option("--taylor-k", rc.taylor_k, "Taylor order of the evolution")->capture_default_str();
    run_cmd->add_option("--clock-qubits", rc.clock_qubits, "HHL clock register size")->capture_default_str();
    run_cmd->add_option("--out", rc.out, "trace CSV (manifest goes next to it)");
    run_cmd->add_option("--seed", rc.seed, "recorded in the manifest")->capture_default_str();
    run_cmd->add_option("--data-dir", rc.data_dir, "parameter data (default: $QDAE_DATA or the built-in path)");

    std::string ca, cb, cout_path;
    std::vector<std::string> cvars, cthr;
    auto* cmp_cmd = app.add_subcommand("compare", "per-variable RMSE between two traces");
    cmp_cmd->add_option("a", ca, "first trace CSV")->required();
    cmp_cmd->add_option("b", cb, "second trace CSV")->required();
    cmp_cmd->add_option("--variables", cvars, "variables to compare (default: all shared)")->delimiter(',');
    cmp_cmd->add_option("--threshold", cthr, "VALUE or NAME=VALUE; fail when an RMSE exceeds it");
    cmp_cmd->add_option("--out", cout_path, "report CSV");

    std::string rmodel, rout, rdata;
    auto* red_cmd = app.add_subcommand("reduce", "index-reduce a DAE and list the explicit ODE");
    red_cmd->add_option("--model", rmodel, "model file or wscc-dae")->required();
    red_cmd->add_option("--out", rout, "listing file (default: stdout)");
    red_cmd->add_option("--data-dir", rdata, "parameter data directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc_cli = app.exit(e);
        return rc_cli == 0 ? kOk : kConfig;
    }

    if (*run_cmd)
        return guarded([&] {
            RunResult res = run(rc);
            const std::string out = rc.out.empty() ? default_output(rc) : rc.out;
            res.manifest["out"] = out;
            write_csv(res.trace, out);
            write_json(res.manifest, manifest_path(out));
            if (!res.trace.complete) {
                std::cerr << "qdae: run stopped at " << res.trace.error << '\n';
                return static_cast<int>(kNumeric);
            }
            std::cout << out << ": " << res.trace.rows.size() << " rows\n";
            return static_cast<int>(kOk);
        });

    if (*cmp_cmd)
        return guarded([&] {
            classical::Trace a = read_csv(ca), b = read_csv(cb);
            std::map<std::string, double> thr = cthr.empty() ? thresholds_from_manifest(ca) : parse_thresholds(cthr);
            std::vector<Comparison> rows;
            try {
                rows = compare(a, b, cvars, thr);
            } catch (const ConfigError& e) {
                const std::string what = e.what();
                return report(e, what.rfind("time grids", 0) == 0 ? kNumeric : kConfig);
            }
            if (!cout_path.empty()) write_report(rows, cout_path);
            bool ok = true;
            for (const auto& c : rows) {
                std::cout << c.variable << " rmse " << c.rmse;
                if (c.threshold) std::cout << " threshold " << *c.threshold << (c.pass() ? " ok" : " EXCEEDED");
                std::cout << '\n';
                ok = ok && c.pass();
            }
            return static_cast<int>(ok ? kOk : kThreshold);
        });

    return guarded([&] {
        dae::DaeSystem d;
        if (rmodel == "wscc-dae") {
            const std::string dir = rdata.empty() ? powsys::default_data_dir() : rdata;
            d = powsys::build_generic_dae(powsys::load_system(dir + "/wscc9.json")).dae;
        } else if (builtin_model(rmodel)) {
            throw ConfigError("model '" + rmodel + "' is already an explicit ODE");
        } else {
            d = dae::parse_model(read_text(rmodel));
        }
        dae::DaeSystem reduced = dae::pantelides_reduce(d);
        dae::to_explicit_ode(reduced);
        const std::string text = reduce_listing(reduced);
        if (rout.empty()) {
            std::cout << text;
        } else {
            std::ofstream out(rout);
            if (!(out << text)) throw IoError("cannot write '" + rout + "'");
        }
        return static_cast<int>(kOk);
    });
}

}  // namespace qdae::cli
