#include <cmath>

#include <doctest.h>

#include "qdae/classical/integrate.hpp"
#include "qdae/error.hpp"
#include "qdae/expr/parser.hpp"
#include "qdae/powsys/models.hpp"

using namespace qdae;
using namespace qdae::classical;
using dae::OdeSystem;

namespace {

OdeSystem ode_of(std::vector<std::string> vars, std::vector<std::string> rhs, dae::ParamMap params = {}) {
    std::set<std::string, std::less<>> pnames;
    for (const auto& [k, v] : params) pnames.insert(k);
    std::vector<expr::Expression> e;
    for (const auto& r : rhs) e.push_back(expr::parse_expression(r, pnames));
    return OdeSystem(std::move(vars), std::move(e), std::move(params));
}

double final_error(const Trace& tr, double exact) { return std::abs(tr.rows.back()[0] - exact); }

}  // namespace

TEST_CASE("constant and linear decay") {
    OdeSystem zero = ode_of({"x"}, {"0"});
    Trace c = forward_euler(zero, std::vector<double>{2.5}, 0.1, 1.0);
    REQUIRE(c.rows.size() == 11);
    for (const auto& r : c.rows) CHECK(r[0] == 2.5);
    CHECK(c.times.back() == doctest::Approx(1.0));

    OdeSystem decay = ode_of({"x"}, {"-x"});
    std::vector<double> z{1.0};
    euler_step(decay, 0.01, z);
    CHECK(z[0] == doctest::Approx(0.99).epsilon(1e-15));

    Trace r = rk4(decay, std::vector<double>{1.0}, 0.01, 1.0);
    CHECK(final_error(r, std::exp(-1.0)) <= 1e-9);
    CHECK(r.metadata.at("method") == "classical-rk4");
    CHECK(forward_euler(decay, std::vector<double>{1.0}, 0.5, 1.0).metadata.at("method") == "classical-euler");
}

TEST_CASE("grid and argument checks") {
    OdeSystem decay = ode_of({"x"}, {"-x"});
    CHECK(rk4(decay, std::vector<double>{1.0}, 0.01, 20.0).rows.size() == 2001);
    CHECK_THROWS_AS(rk4(decay, std::vector<double>{1.0}, 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(rk4(decay, std::vector<double>{1.0}, 0.1, 0.05), ConfigError);
    CHECK_THROWS_AS(rk4(decay, std::vector<double>{1.0, 2.0}, 0.1, 1.0), ConfigError);
    std::vector<Event> late{{2.0, "late", [](OdeSystem&, std::vector<double>&) {}}};
    CHECK_THROWS_AS(rk4(decay, std::vector<double>{1.0}, 0.1, 1.0, late), ConfigError);
}

TEST_CASE("convergence orders") {
    OdeSystem decay = ode_of({"x"}, {"-x"});
    const double exact = std::exp(-1.0);
    const double e1 = final_error(forward_euler(decay, std::vector<double>{1.0}, 0.01, 1.0), exact);
    const double e2 = final_error(forward_euler(decay, std::vector<double>{1.0}, 0.005, 1.0), exact);
    CHECK(std::log2(e1 / e2) == doctest::Approx(1.0).epsilon(0.02));
    const double r1 = final_error(rk4(decay, std::vector<double>{1.0}, 0.1, 1.0), exact);
    const double r2 = final_error(rk4(decay, std::vector<double>{1.0}, 0.05, 1.0), exact);
    CHECK(std::log2(r1 / r2) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("oscillator energy") {
    OdeSystem osc = ode_of({"q", "p"}, {"p", "-q"});
    Trace r = rk4(osc, std::vector<double>{1.0, 0.0}, 0.01, 10.0);
    double drift = 0;
    for (const auto& row : r.rows) drift = std::max(drift, std::abs(row[0] * row[0] + row[1] * row[1] - 1.0));
    CHECK(drift <= 1e-8);
    CHECK(r.series("q").back() == doctest::Approx(std::cos(10.0)).epsilon(1e-8));
    // Euler gains energy by (1 + h^2) per step.
    Trace e = forward_euler(osc, std::vector<double>{1.0, 0.0}, 0.01, 10.0);
    const auto& last = e.rows.back();
    CHECK(last[0] * last[0] + last[1] * last[1] == doctest::Approx(std::pow(1.0001, 1000)).epsilon(1e-10));
}

TEST_CASE("rmse") {
    OdeSystem decay = ode_of({"x"}, {"-x"});
    Trace a = rk4(decay, std::vector<double>{1.0}, 0.1, 1.0);
    Trace b = a;
    CHECK(rmse(a, b, "x") == 0.0);
    for (auto& r : b.rows) r[0] += 0.5;
    CHECK(rmse(a, b, "x") == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rmse(b, a, "x") == rmse(a, b, "x"));
    Trace c = rk4(decay, std::vector<double>{1.0}, 0.05, 1.0);
    CHECK_THROWS_AS(rmse(a, c, "x"), ConfigError);
    CHECK_THROWS_AS(rmse(a, a, "y"), ConfigError);
}

TEST_CASE("events fire after the matching row") {
    OdeSystem ramp = ode_of({"x"}, {"k"}, {{"k", 0.0}});
    std::vector<Event> ev{{0.5, "switch on", [](OdeSystem& o, std::vector<double>&) { o.set_parameter("k", 1.0); }},
                          {0.8, "jump", [](OdeSystem&, std::vector<double>& z) { z[0] += 10.0; }}};
    Trace t = forward_euler(ramp, std::vector<double>{0.0}, 0.1, 1.0, ev);
    auto x = t.series("x");
    CHECK(x[5] == 0.0);
    CHECK(x[6] == doctest::Approx(0.1));
    CHECK(x[8] == doctest::Approx(0.3));
    CHECK(x[9] == doctest::Approx(10.4));
    CHECK(x[10] == doctest::Approx(10.5));
    // The caller's system is untouched.
    CHECK(ramp.parameter("k") == 0.0);
}

TEST_CASE("failures leave a partial trace") {
    OdeSystem blow = ode_of({"x", "s"}, {"1", "1/(x - 1)"});
    Trace t = rk4(blow, std::vector<double>{0.0, 0.0}, 0.25, 2.0);
    CHECK_FALSE(t.complete);
    CHECK(t.rows.size() == 4);
    CHECK(t.error.find("t = 0.75") != std::string::npos);

    OdeSystem grow = ode_of({"x"}, {"x^3"});
    Trace g = forward_euler(grow, std::vector<double>{10.0}, 1.0, 10.0);
    CHECK_FALSE(g.complete);
    CHECK(g.error.find("non-finite") != std::string::npos);
}

TEST_CASE("single machine reference") {
    OdeSystem smib = powsys::build_smib(5.0, 10.0, 1.7);
    const std::vector<double> z0{-1.0, 7.0};
    Trace fine = rk4(smib, z0, 1e-4, 20.0);
    Trace coarse = rk4(smib, z0, 0.01, 20.0);
    Trace euler = forward_euler(smib, z0, 0.01, 20.0);
    const double delta_fine = fine.series("delta").back();
    CHECK(std::abs(coarse.series("delta").back() - delta_fine) <= 1e-6);
    CHECK(std::abs(euler.series("delta").back() - delta_fine) <= 1e-3);
    // Settles at asin(K1/K2) without slipping a pole.
    CHECK(delta_fine == doctest::Approx(std::asin(0.5)).epsilon(1e-4));
    CHECK(std::abs(fine.series("w").back()) <= 1e-4);
}
