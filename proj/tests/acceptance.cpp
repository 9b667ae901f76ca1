// One line per acceptance criterion; exit status is nonzero if any fails.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qdae/cli/cli.hpp"
#include "qdae/dae/dae.hpp"
#include "qdae/error.hpp"
#include "qdae/expr/parser.hpp"
#include "qdae/hhl/hhl.hpp"
#include "qdae/powsys/models.hpp"
#include "qdae/powsys/scenario.hpp"
#include "qdae/qsolve/qsolve.hpp"

using namespace qdae;
using cplx = std::complex<double>;

namespace {

const std::string kData = QDAE_TEST_DATA;
constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!ok) detail << " [failed: " << what << "]";
    }
};

cli::RunResult run(const std::string& model, const std::string& scenario, const std::string& method) {
    cli::RunConfig c;
    c.model = model;
    c.scenario = scenario;
    c.method = method;
    c.data_dir = kData;
    cli::RunResult r = cli::run(c);
    if (!r.trace.complete) throw Error(model + "/" + scenario + " " + method + " stopped: " + r.trace.error);
    return r;
}

// ---------------------------------------------------------------------------

void smib_normal(Outcome& o) {
    auto q = run("smib", "normal", "quantum"), c = run("smib", "normal", "classical-euler");
    const double rd = classical::rmse(q.trace, c.trace, "delta"), rw = classical::rmse(q.trace, c.trace, "w");
    const double secs = q.manifest["elapsed_s"].get<double>();
    o.detail << "rmse delta " << rd << ", w " << rw << ", quantum run " << secs << " s";
    o.require(rd <= 1e-3, "delta rmse <= 0.001");
    o.require(rw <= 2e-3, "w rmse <= 0.002");
    o.require(secs < 60, "runtime under 1 min");
}

void smib_pole_slip(Outcome& o) {
    auto q = run("smib", "pole-slip", "quantum"), c = run("smib", "pole-slip", "classical-euler");
    const double rd = classical::rmse(q.trace, c.trace, "delta"), rw = classical::rmse(q.trace, c.trace, "w");
    const double fq = q.trace.series("delta").back(), fc = c.trace.series("delta").back();
    const double target = std::asin(0.5) + 4 * kPi;
    o.detail << "rmse delta " << rd << ", w " << rw << "; final delta quantum " << fq << ", euler " << fc
             << ", target " << target;
    o.require(rd <= 5e-3, "delta rmse <= 0.005");
    o.require(rw <= 1e-2, "w rmse <= 0.01");
    o.require(std::abs(fq - target) <= 0.2, "final delta within 0.2 rad of 0.5236 + 4 pi");
}

void wscc_internal(Outcome& o) {
    powsys::InternalNode in = powsys::build_internal_node(powsys::load_system(kData + "/wscc9.json"));
    o.detail << in.ode.size() << " states";
    o.require(in.ode.size() == 12, "12 states");
    for (const char* name : {"decrease", "increase"}) {
        auto q = run("wscc-internal", name, "quantum"), c = run("wscc-internal", name, "classical-euler");
        double worst = 0;
        for (const auto& v : c.trace.names) worst = std::max(worst, classical::rmse(q.trace, c.trace, v));
        double slip = 0;
        for (const auto* tr : {&q.trace, &c.trace})
            for (const char* w : {"dw_1", "dw_2", "dw_3"}) slip = std::max(slip, std::abs(tr->series(w).back()));
        const auto d1 = q.trace.series("delta_1");
        const double before = d1[499], after = d1.back();
        o.detail << "; " << name << ": max rmse " << worst << ", final |dw| " << slip << ", delta_1 " << before
                 << " -> " << after;
        o.require(worst <= 1e-2, std::string(name) + " rmse <= 0.01");
        o.require(slip <= 1e-3, std::string(name) + " speeds settle");
        o.require(std::string(name) == "decrease" ? after > before : after < before,
                  std::string(name) + " angle direction");
    }
}

void wscc_generic(Outcome& o) {
    powsys::SystemData sys = powsys::load_system(kData + "/wscc9.json");
    powsys::GenericModel gm = powsys::build_generic_dae(sys);
    o.detail << gm.dae.states.size() << " differential + " << gm.dae.algebraics.size() << " algebraic";
    o.require(gm.dae.states.size() == 27 && gm.dae.algebraics.size() == 24, "27 + 24 variables");
    dae::OdeSystem ode = dae::to_explicit_ode(dae::pantelides_reduce(gm.dae));
    o.detail << ", explicit ODE of " << ode.size();

    for (const char* name : {"small", "large"}) {
        auto r = run("wscc-dae", name, "classical-rk4");
        const auto& tr = r.trace;
        const double ws = sys.ws;
        const std::size_t at15 = 1500;
        double wdev15 = 0, vdev15 = 0, wdev_end = 0, vlo = 1e300, vhi = -1e300;
        for (int i = 1; i <= 3; ++i) {
            auto w = tr.series("omega_" + std::to_string(i));
            wdev15 = std::max(wdev15, std::abs(w[at15] - ws));
            wdev_end = std::max(wdev_end, std::abs(w.back() - ws));
        }
        for (int k = 1; k <= 9; ++k) {
            auto v = tr.series("V_" + std::to_string(k));
            vdev15 = std::max(vdev15, std::abs(v[at15] - gm.pf.v(k - 1)));
            vlo = std::min(vlo, v.back());
            vhi = std::max(vhi, v.back());
        }
        const double g = r.constraint_residual.value_or(1e300);
        o.detail << "; " << name << ": at 15 s |w-ws| " << wdev15 << ", |V-V0| " << vdev15 << "; final |w-ws| "
                 << wdev_end << ", V in [" << vlo << ", " << vhi << "], max |g| " << g;
        o.require(wdev15 <= 1e-3 && vdev15 <= 1e-2, std::string(name) + " back at equilibrium by 15 s");
        o.require(wdev_end <= 1e-3, std::string(name) + " speeds settle");
        o.require(vlo >= 0.9 && vhi <= 1.1, std::string(name) + " voltages near 1 pu");
        o.require(g <= 1e-4, std::string(name) + " algebraic residual");
    }
}

// ---------------------------------------------------------------------------

hhl::Matrix random_unitary(Eigen::Index n, std::mt19937& rng) {
    std::normal_distribution<double> g;
    hhl::Matrix a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = {g(rng), g(rng)};
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(a);
    return qr.householderQ();
}

hhl::Vector random_vector(Eigen::Index n, std::mt19937& rng) {
    std::normal_distribution<double> g;
    hhl::Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = {g(rng), g(rng)};
    return v;
}

// Identity padding adds eigenvalue 1, so c must also stay below its clock reading.
hhl::HhlConfig clamp_c(const hhl::LinearSystem& sys, hhl::HhlConfig cfg) {
    for (double l : hhl::decompose(sys.m).values) cfg.c = std::min(cfg.c, std::abs(hhl::clock_eigenvalue(l, cfg)));
    return cfg;
}

double direction_error(const hhl::Matrix& m, const hhl::Vector& b, const hhl::HhlConfig& raw) {
    hhl::LinearSystem sys = hhl::hermitian_embed(m, b);
    const hhl::HhlConfig cfg = clamp_c(sys, raw);
    hhl::Vector s = hhl::extract(sys, hhl::solve(sys, cfg));
    hhl::Vector d = m.partialPivLu().solve(b);
    return (s / s.norm() - d / d.norm()).norm();
}

void hhl_suite(Outcome& o) {
    std::mt19937 rng(2024);
    double dyadic = 0;
    for (int i = 0; i < 50; ++i) {
        const Eigen::Index n = std::uniform_int_distribution<Eigen::Index>(1, 8)(rng);
        const int nc = 6;
        std::uniform_int_distribution<int> k(1, (1 << (nc - 1)) - 1), sign(0, 1);
        Eigen::VectorXd lam(n);
        for (Eigen::Index j = 0; j < n; ++j) lam(j) = (sign(rng) ? 1 : -1) * 2 * kPi * k(rng) / std::ldexp(1.0, nc);
        hhl::Matrix u = random_unitary(n, rng);
        hhl::Matrix m = u * lam.cast<cplx>().asDiagonal() * u.adjoint();
        m = (m + m.adjoint()) / 2.0;
        hhl::HhlConfig cfg;
        cfg.clock_qubits = nc;
        cfg.t = 1.0;
        cfg.c = 0.9 * lam.cwiseAbs().minCoeff();
        cfg.signed_phases = true;
        dyadic = std::max(dyadic, direction_error(m, random_vector(n, rng), cfg));
    }

    double general = 0, roundtrip = 0;
    for (int i = 0; i < 50; ++i) {
        const Eigen::Index n = std::uniform_int_distribution<Eigen::Index>(2, 8)(rng);
        std::uniform_real_distribution<double> sv(1.0, 2.0);
        Eigen::VectorXd s(n);
        for (Eigen::Index j = 0; j < n; ++j) s(j) = sv(rng);
        hhl::Matrix m = random_unitary(n, rng) * s.cast<cplx>().asDiagonal() * random_unitary(n, rng);
        hhl::Vector b = random_vector(n, rng);
        hhl::LinearSystem sys = hhl::hermitian_embed(m, b);
        hhl::HhlConfig cfg = hhl::choose_config(sys.m);
        cfg.clock_qubits = 8;
        general = std::max(general, direction_error(m, b, cfg));

        // Round trip with a clock fine enough to be exact at double precision.
        hhl::HhlConfig fine = hhl::choose_config(sys.m);
        fine.clock_qubits = 44;
        hhl::Vector x = hhl::extract(sys, hhl::solve(sys, fine));
        hhl::Vector d = m.partialPivLu().solve(b);
        roundtrip = std::max(roundtrip, (x - d).norm() / d.norm());
    }
    o.detail << "dyadic max error " << dyadic << ", general (n_c = 8) max error " << general
             << ", embedding round trip " << roundtrip;
    o.require(dyadic <= 1e-9, "dyadic <= 1e-9");
    o.require(general <= 1e-2, "general <= 1e-2");
    o.require(roundtrip <= 1e-8, "round trip <= 1e-8");
}

qsolve::QuadraticSystem random_quadratic(std::size_t n, std::mt19937& rng) {
    std::normal_distribution<double> g;
    qsolve::QuadraticSystem q;
    q.n = n;
    q.center.assign(n, 0.0);
    q.a.assign(n, std::vector<double>((n + 1) * (n + 1), 0.0));
    for (auto& row : q.a)
        for (std::size_t v = 0; v <= n; ++v)
            for (std::size_t k = v; k <= n; ++k) row[v * (n + 1) + k] = g(rng);
    return q;
}

void function_evaluation(Outcome& o) {
    std::mt19937 rng(7);
    std::normal_distribution<double> g;
    double worst_ratio = 0, identity = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(trial % 4);
        qsolve::QuadraticSystem q = random_quadratic(n, rng);
        std::vector<double> u(n);
        double s = 0;
        for (double& x : u) s += (x = g(rng)) * x;
        for (double& x : u) x /= std::sqrt(s);
        const int nq = qsolve::data_qubits(n);
        qcore::QuantumState zs = qsolve::encode(u);
        qcore::QuantumState zz = qcore::tensor(zs.relabel({{"data1", nq}}), zs.relabel({{"data2", nq}}));
        qcore::LinearOperator a = qsolve::build_A(q);
        std::vector<cplx> azz = a.apply(std::span<const cplx>(zz.amplitudes()));

        // Amplitude identity: <j+1, 0| A |z>|z> = sum a w_v w_k / 2.
        std::vector<double> w{1.0};
        w.insert(w.end(), u.begin(), u.end());
        for (std::size_t j = 0; j < n; ++j) {
            double want = 0;
            for (std::size_t v = 0; v <= n; ++v)
                for (std::size_t k = v; k <= n; ++k) want += q.coeff(j, v, k) * w[v] * w[k] / 2;
            identity = std::max(identity, std::abs(azz[(j + 1) << nq] - want));
        }

        // Pointer-1 branch against eps A|z>|z>.
        qcore::QuantumState psi = qcore::tensor(zz, qcore::QuantumState::basis({{"pointer", 1}}, 0));
        qcore::LinearOperator h = qsolve::build_hamiltonian(a);
        const double an = qsolve::coefficient_norm(q);
        for (double eps : {1e-2, 1e-3, 1e-4}) {
            qcore::QuantumState ev = qcore::evolve_apply(h, psi, eps, 12);
            double err = 0;
            for (std::size_t i = 0; i < azz.size(); ++i)
                err = std::max(err, std::abs(ev.amplitudes()[(i << 1) | 1] - eps * azz[i]));
            // C = ||A||^2 bounds the second-order term.
            worst_ratio = std::max(worst_ratio, err / (an * an * eps * eps));
        }
    }
    o.detail << "max |branch - eps A zz| / (||A||^2 eps^2) = " << worst_ratio << ", amplitude identity error "
             << identity;
    o.require(worst_ratio <= 1.0, "branch within C eps^2");
    o.require(identity <= 1e-10, "amplitude identity");
}

dae::OdeSystem as_implicit(const dae::OdeSystem& sym) {
    return dae::OdeSystem(
        sym.variables(),
        [sym](std::span<const double> z, std::span<const double>, std::span<double> dz) { sym.eval(z, dz); },
        sym.parameters());
}

double coefficient_gap(const qsolve::QuadraticSystem& a, const qsolve::QuadraticSystem& b) {
    double gap = 0, scale = 0;
    for (std::size_t j = 0; j < a.n; ++j)
        for (std::size_t i = 0; i < a.a[j].size(); ++i) {
            gap = std::max(gap, std::abs(a.a[j][i] - b.a[j][i]));
            scale = std::max(scale, std::abs(a.a[j][i]));
        }
    return gap / scale;
}

void quadratization(Outcome& o) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-2, 2);
    std::set<std::string, std::less<>> ps{"p"};
    std::vector<expr::Expression> rhs{expr::parse_expression("x*y - 3*z^2 + p", ps),
                                      expr::parse_expression("2*x - y*z + 0.5", ps),
                                      expr::parse_expression("x^2 + y^2 - p*z", ps)};
    dae::OdeSystem poly({"x", "y", "z"}, rhs, {{"p", 1.5}});
    double exact = 0;
    for (int i = 0; i < 10; ++i) {
        std::vector<double> c{u(rng), u(rng), u(rng)}, p{u(rng), u(rng), u(rng)}, xi(3);
        for (int k = 0; k < 3; ++k) xi[static_cast<std::size_t>(k)] = p[static_cast<std::size_t>(k)] - c[static_cast<std::size_t>(k)];
        auto model = qsolve::quadratize(poly, c).eval(xi);
        auto truth = poly.eval(p);
        for (std::size_t j = 0; j < 3; ++j) exact = std::max(exact, std::abs(model[j] - truth[j]));
    }

    dae::OdeSystem smib = powsys::build_smib(5, 10, 1.7);
    powsys::InternalNode in = powsys::build_internal_node(powsys::load_system(kData + "/wscc9.json"));
    dae::OdeSystem smib_fd = as_implicit(smib), in_fd = as_implicit(in.ode);
    double gap_smib = 0, gap_wscc = 0;
    std::uniform_real_distribution<double> off(-0.2, 0.2);
    for (int i = 0; i < 10; ++i) {
        std::vector<double> zs{u(rng), 5 * u(rng)};
        gap_smib = std::max(gap_smib, coefficient_gap(qsolve::quadratize(smib, zs), qsolve::quadratize(smib_fd, zs)));
        std::vector<double> zw = in.z0;
        for (double& x : zw) x += off(rng);
        gap_wscc = std::max(gap_wscc, coefficient_gap(qsolve::quadratize(in.ode, zw), qsolve::quadratize(in_fd, zw)));
    }
    o.detail << "polynomial residual " << exact << "; symbolic vs difference quotients: SMIB " << gap_smib
             << ", WSCC internal-node " << gap_wscc;
    o.require(exact <= 1e-12, "exact on quadratics");
    o.require(gap_smib <= 1e-6 && gap_wscc <= 1e-6, "difference quotients within 1e-6");
}

void index_reduction(Outcome& o) {
    dae::DaeSystem toy = dae::parse_model("param p = 1\nstate x = 1\nalg y = 0\neq der(x) = y\neq 0 = x - p\n");
    dae::DaeSystem r = dae::pantelides_reduce(toy);
    const bool lineage = r.lineage.size() == 1 && r.lineage[0].parent == 0 && r.lineage[0].order == 1 &&
                         expr::structurally_equal(r.lineage[0].residual, expr::differentiate_time(toy.g[0]));
    o.detail << "toy lineage " << (lineage ? "ok" : "wrong");
    o.require(lineage, "toy lineage");

    dae::DaeSystem osc = dae::pantelides_reduce(dae::parse_model(
        "param c = 1\nstate x1 = 0.3\nstate x2 = 0.7\nalg y = 0\neq der(x1) = x2 + y\neq der(x2) = -x1\neq 0 = x1 + x2 - c\n"));
    dae::OdeSystem ode = dae::to_explicit_ode(osc);
    std::vector<double> z0 = osc.x0, y = dae::consistent_initialize(osc, osc.x0, osc.y0);
    z0.insert(z0.end(), y.begin(), y.end());
    classical::Trace tr = classical::rk4(ode, z0, 0.01, 20.0);
    dae::ConstraintCheck check(osc, ode.parameter_names());
    double worst = 0;
    for (const auto& row : tr.rows) worst = std::max(worst, check.max_residual(row, ode.parameter_values()));

    auto w = run("wscc-dae", "large", "classical-rk4");
    const double gw = w.constraint_residual.value_or(1e300);
    o.detail << "; index-2 oscillator max |g| " << worst << " over 20 s; WSCC generic max |g| " << gw;
    o.require(tr.complete && worst <= 1e-6, "oscillator constraints");
    o.require(gw <= 1e-6, "WSCC constraints");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
        {"SMIB normal operation", smib_normal},
        {"SMIB pole slipping", smib_pole_slip},
        {"WSCC internal-node model", wscc_internal},
        {"WSCC generic model", wscc_generic},
        {"HHL oracle suite", hhl_suite},
        {"quantum function evaluation", function_evaluation},
        {"quadratization", quadratization},
        {"index reduction", index_reduction},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " [error: " << e.what() << "]";
        }
        failed += o.pass ? 0 : 1;
        std::printf("criterion %zu %s: %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
