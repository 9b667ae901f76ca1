#include <cmath>
#include <numbers>

#include <doctest.h>

#include "qdae/error.hpp"
#include "qdae/powsys/models.hpp"
#include "qdae/powsys/network.hpp"
#include "qdae/powsys/scenario.hpp"

using namespace qdae;
using namespace qdae::powsys;

namespace {

const std::string kData = QDAE_TEST_DATA;

SystemData wscc() { return load_system(kData + "/wscc9.json"); }

double deg(double d) { return d * std::numbers::pi / 180; }

double max_abs(std::span<const double> v) {
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

Scenario quiet(const std::string& model, double T) {
    Scenario s;
    s.model = model;
    s.name = "quiet";
    s.T = T;
    return s;
}

}  // namespace

TEST_CASE("power flow of the nine-bus system") {
    SystemData sys = wscc();
    CHECK(sys.net.machines == 3);
    CHECK(sys.net.buses == 9);
    PowerFlow pf = solve_power_flow(sys.net);
    CHECK(pf.residual <= 1e-10);
    // Published solution, four significant digits.
    const double v[] = {1.04, 1.025, 1.025, 1.0258, 0.9956, 1.0127, 1.0258, 1.0159, 1.0324};
    const double a[] = {0, 9.2800, 4.6648, -2.2168, -3.9888, -3.6874, 3.7197, 0.7275, 1.9667};
    for (Eigen::Index k = 0; k < 9; ++k) {
        INFO("bus ", k + 1);
        CHECK(std::abs(pf.v(k) - v[k]) <= 1e-4);
        CHECK(std::abs(pf.theta(k) - deg(a[k])) <= deg(1e-3));
    }
    CHECK(std::abs(pf.s_gen(0) - cplx(0.7164, 0.2705)) <= 1e-3);
    CHECK(std::abs(pf.s_gen(1) - cplx(1.63, 0.0665)) <= 1e-3);
    CHECK(std::abs(pf.s_gen(2) - cplx(0.85, -0.1086)) <= 1e-3);
    Eigen::VectorXd mis = power_mismatch(sys.net, ybus(sys.net), pf.v, pf.theta, pf.s_gen);
    CHECK(mis.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("system data errors") {
    CHECK_THROWS_AS(load_system(kData + "/missing.json"), IoError);
    CHECK_THROWS_AS(parse_system("{ not json"), ParseError);
    CHECK_THROWS_AS(parse_system("{}"), ConfigError);
    Network empty;
    empty.buses = 2;
    empty.machines = 1;
    CHECK_THROWS_AS(solve_power_flow(empty), Error);
}

TEST_CASE("single machine") {
    dae::OdeSystem smib = build_smib(5, 10, 1.7);
    CHECK(smib.variables() == std::vector<std::string>{"delta", "w"});
    auto f0 = smib.eval(std::vector<double>{0, 0});
    CHECK(f0[0] == 0.0);
    CHECK(f0[1] == 5.0);
    auto fe = smib.eval(std::vector<double>{std::numbers::pi / 6, 0});
    CHECK(std::abs(fe[1]) <= 1e-14);
    auto fw = smib.eval(std::vector<double>{0, 2});
    CHECK(fw[0] == 2.0);
    CHECK(fw[1] == doctest::Approx(5 - 3.4));
}

TEST_CASE("internal-node reduction") {
    SystemData sys = wscc();
    InternalNode in = build_internal_node(sys);
    const InternalNodeModel& md = in.model;
    CHECK(in.ode.size() == 12);
    // Published internal voltages and reduced admittance matrix.
    const double e[] = {1.0566, 1.0502, 1.0170}, da[] = {2.2717, 19.7315, 13.1752};
    for (Eigen::Index i = 0; i < 3; ++i) {
        CHECK(std::abs(md.e(i) - e[i]) <= 1e-4);
        CHECK(std::abs(md.delta0(i) - deg(da[i])) <= deg(1e-2));
    }
    CMatrix want(3, 3);
    want << cplx(0.846, -2.988), cplx(0.287, 1.513), cplx(0.210, 1.226), cplx(0.287, 1.513), cplx(0.420, -2.724),
        cplx(0.213, 1.088), cplx(0.210, 1.226), cplx(0.213, 1.088), cplx(0.277, -2.368);
    CHECK((md.yint - want).cwiseAbs().maxCoeff() <= 1e-3);

    // Against the unreduced network: Y_C E + Y_D V = 0 and I = Y_A E + Y_B V = Y_int E.
    std::vector<double> delta{0.1, 0.5, -0.3};
    Eigen::VectorXcd ea(3);
    for (Eigen::Index i = 0; i < 3; ++i) ea(i) = std::polar(md.e(i), delta[static_cast<std::size_t>(i)]);
    Eigen::VectorXcd vb = bus_voltages(md, delta);
    CHECK((md.yc * ea + md.yd * vb).norm() <= 1e-12);
    Eigen::VectorXcd cur = md.ya * ea + md.yb * vb;
    CHECK((cur - md.yint * ea).norm() <= 1e-12);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        CHECK(electrical_power(i, delta, md) == doctest::Approx((ea(ii) * std::conj(cur(ii))).real()).epsilon(1e-12));
    }
    CHECK_THROWS_AS(electrical_power(3, delta, md), ConfigError);

    // At the operating point the machines deliver the power-flow output.
    PowerFlow pf = solve_power_flow(sys.net);
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(md.p0(i) == doctest::Approx(pf.s_gen(i).real()).epsilon(1e-9));
    auto v0 = bus_voltages(md, std::vector<double>(md.delta0.data(), md.delta0.data() + 3));
    for (Eigen::Index k = 0; k < 9; ++k) CHECK(std::abs(v0(k) - std::polar(pf.v(k), pf.theta(k))) <= 1e-9);
    CHECK(max_abs(in.ode.eval(in.z0)) <= 1e-9);
}

TEST_CASE("load changes as admittances") {
    SystemData sys = wscc();
    InternalNode in = build_internal_node(sys);
    std::vector<double> d(in.model.delta0.data(), in.model.delta0.data() + 3);
    auto vb = bus_voltages(in.model, d);
    InternalNodeModel next = apply_disturbance(in.model, {{5, 0.1, 0.1}, {4, 0.1, 0.1}}, d);
    for (Eigen::Index k : {4, 5}) {
        const cplx added = next.y_load(k) - in.model.y_load(k);
        // The new admittance draws the requested power at the voltages seen at the event.
        const cplx s = std::norm(vb(k)) * std::conj(added);
        CHECK(std::abs(s - cplx(0.1, 0.1)) <= 1e-12);
    }
    CHECK(next.y_load(7) == in.model.y_load(7));
    CHECK(total_change({{5, 0.1, 0.1}, {4, 0.1, 0.1}}) == doctest::Approx(0.2));
    CHECK_THROWS_AS(apply_disturbance(in.model, {{9, 0.1, 0}}, d), ConfigError);

    // Constant-impedance loads draw less than the nominal change once the voltages sag
    // (or more once they rise), so compensation has the sign of the change but a smaller size.
    // That it actually balances is checked by simulation below.
    const double zi = balanced_z(next, sys.governors);
    CHECK(zi > 0.0);
    CHECK(zi < 0.2);
    InternalNodeModel lower = apply_disturbance(in.model, {{5, -0.1, -0.1}, {7, -0.1, -0.1}}, d);
    const double zd = balanced_z(lower, sys.governors);
    CHECK(zd < 0.0);
    CHECK(zd > -0.2);
    CHECK(std::abs(balanced_z(in.model, sys.governors)) <= 1e-10);
}

TEST_CASE("internal-node disturbances") {
    for (const char* name : {"decrease", "increase"}) {
        Experiment ex = build_experiment(load_scenario(scenario_path(kData, "wscc-internal", name)), kData);
        classical::Trace tr = classical::rk4(ex.ode, ex.z0, 0.01, 30.0, ex.events);
        REQUIRE(tr.complete);
        auto dw = tr.series("dw_1");
        const double lo = *std::min_element(dw.begin(), dw.end()), hi = *std::max_element(dw.begin(), dw.end());
        INFO(name);
        // Quiet until the event.
        CHECK(std::abs(dw[500]) <= 1e-9);
        if (std::string(name) == "decrease") {
            CHECK(hi > 1e-3);
        } else {
            CHECK(lo < -1e-3);
        }
        // With balanced compensation the speed deviation dies out.
        for (const char* w : {"dw_1", "dw_2", "dw_3"}) CHECK(std::abs(tr.series(w).back()) <= 1e-3);
    }
}

TEST_CASE("generic model") {
    SystemData sys = wscc();
    GenericModel gm = build_generic_dae(sys);
    CHECK(gm.dae.states.size() == 27);
    CHECK(gm.dae.algebraics.size() == 24);
    gm.dae.validate();
    // Electrical output at the initial point equals the power-flow dispatch.
    auto at = [&](const std::string& n) {
        for (std::size_t i = 0; i < gm.dae.states.size(); ++i)
            if (gm.dae.states[i] == n) return gm.dae.x0[i];
        for (std::size_t k = 0; k < gm.dae.algebraics.size(); ++k)
            if (gm.dae.algebraics[k] == n) return gm.dae.y0[k];
        FAIL("no variable ", n);
        return 0.0;
    };
    for (std::size_t i = 0; i < 3; ++i) {
        const std::string s = "_" + std::to_string(i + 1);
        const auto& mc = sys.machines[i];
        const double pe = readout_power(at("Edp" + s), at("Eqp" + s), at("Id" + s), at("Iq" + s), mc.Xdp, mc.Xqp);
        CHECK(pe == doctest::Approx(gm.pf.s_gen(static_cast<Eigen::Index>(i)).real()).epsilon(1e-10));
        CHECK(at("omega" + s) == sys.ws);
    }
    CHECK(readout_power(1, 2, 3, 4, 0.5, 0.25) == doctest::Approx(1 * 3 + 2 * 4 - 0.25 * 12));
    CHECK(std::abs(generic_balanced_z(gm, sys, gm.dae.params)) <= 1e-8);
}

TEST_CASE("generic model equilibrium and initialization") {
    Experiment ex = build_experiment(quiet("wscc-dae", 10.0), kData);
    REQUIRE(ex.dae);
    REQUIRE(ex.constraints);
    CHECK(ex.ode.size() == 51);
    CHECK(max_abs(ex.ode.eval(ex.z0)) <= 1e-6);

    // Flat start for the algebraic variables reaches the same point.
    const dae::DaeSystem& d = *ex.dae;
    const std::size_t nx = d.states.size();
    std::vector<double> flat;
    for (const auto& n : d.algebraics) flat.push_back(n.rfind("V_", 0) == 0 ? 1.0 : 0.0);
    std::vector<double> y = dae::consistent_initialize(d, std::span<const double>(ex.z0).first(nx), flat);
    for (std::size_t k = 0; k < y.size(); ++k) CHECK(std::abs(y[k] - ex.z0[nx + k]) <= 1e-8);

    classical::Trace tr = classical::rk4(ex.ode, ex.z0, 0.01, 10.0);
    REQUIRE(tr.complete);
    double drift = 0;
    for (std::size_t i = 0; i < ex.z0.size(); ++i) drift = std::max(drift, std::abs(tr.rows.back()[i] - ex.z0[i]));
    CHECK(drift <= 1e-6);
    CHECK(ex.constraints->max_residual(tr.rows.back(), ex.ode.parameter_values()) <= 1e-8);
}

TEST_CASE("generic model disturbance") {
    Experiment ex = build_experiment(load_scenario(scenario_path(kData, "wscc-dae", "small")), kData);
    classical::Trace tr = classical::rk4(ex.ode, ex.z0, 0.01, 40.0, ex.events);
    REQUIRE(tr.complete);
    const double ws = ex.ode.parameter("ws");
    auto w1 = tr.series("omega_1");
    // More load slows the machines down right after the event.
    double lo = 1e300;
    for (std::size_t s = 1501; s < 1800; ++s) lo = std::min(lo, w1[s]);
    CHECK(lo < ws - 1e-3);
    for (const char* w : {"omega_1", "omega_2", "omega_3"}) CHECK(std::abs(tr.series(w).back() - ws) <= 1e-3);
    for (int k = 1; k <= 9; ++k) {
        const double v = tr.series("V_" + std::to_string(k)).back();
        CHECK(v > 0.9);
        CHECK(v < 1.1);
    }
}

TEST_CASE("scenario files") {
    Scenario s = load_scenario(scenario_path(kData, "smib", "normal"));
    CHECK(s.model == "smib");
    CHECK(s.T == 20);
    CHECK(s.params.at("K3") == 1.7);
    Experiment ex = build_experiment(s, kData);
    CHECK(ex.z0 == std::vector<double>{-1, 7});
    CHECK(ex.ode.parameter("K3") == 1.7);

    Scenario w = load_scenario(scenario_path(kData, "wscc-internal", "increase"));
    REQUIRE(w.events.size() == 1);
    CHECK(w.events[0].time == 5);
    CHECK(w.events[0].loads[0].bus == 4);
    CHECK(w.z_mode == ZMode::Balanced);

    CHECK_THROWS_AS(load_scenario(scenario_path(kData, "smib", "nothing")), IoError);
    CHECK_THROWS_AS(parse_scenario(R"({"model": "smib", "name": "x", "T": 1, "z_mode": "odd"})"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(R"({"model": "smib", "name": "x", "T": 0})"), ConfigError);
    CHECK_THROWS_AS(build_experiment(quiet("wscc-other", 1.0), kData), ConfigError);
    Scenario bad = quiet("wscc-dae", 1.0);
    bad.offsets["nothing"] = 1;
    CHECK_THROWS_AS(build_experiment(bad, kData), ConfigError);
}
