#include "qdae/qsolve/qsolve.hpp"

#include <cmath>

#include "qdae/error.hpp"
#include "qdae/expr/calculus.hpp"

namespace qdae::qsolve {

using qcore::LinearOperator;
using qcore::Matrix;
using qcore::QuantumState;
using qcore::Register;

namespace {

constexpr cplx kI{0.0, 1.0};

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

std::vector<double> QuadraticSystem::eval(std::span<const double> x) const {
    if (x.size() != n) throw ConfigError("point has the wrong dimension");
    std::vector<double> w(n + 1, 1.0);
    std::copy(x.begin(), x.end(), w.begin() + 1);
    std::vector<double> out(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t v = 0; v <= n; ++v)
            for (std::size_t k = v; k <= n; ++k) out[j] += coeff(j, v, k) * w[v] * w[k];
    return out;
}

struct Quadratizer::Impl {
    struct Term {
        std::size_t v, k;
        expr::CompiledExpression code;
    };
    std::vector<std::string> vars;
    bool symbolic = false;
    std::vector<expr::CompiledExpression> f;
    std::vector<std::vector<Term>> grad, hess;  // grad uses v = 0
};

Quadratizer::Quadratizer(const dae::OdeSystem& ode) {
    auto impl = std::make_shared<Impl>();
    impl->vars = ode.variables();
    impl->symbolic = ode.symbolic();
    if (impl->symbolic) {
        auto slots = ode.slots();
        const auto& names = ode.variables();
        for (const auto& e : ode.rhs()) {
            impl->f.emplace_back(e, slots);
            std::vector<Impl::Term> g, h;
            for (std::size_t k = 0; k < names.size(); ++k) {
                expr::Expression dk = expr::differentiate(e, names[k]);
                if (dk.is_constant(0.0)) continue;
                g.push_back({0, k, expr::CompiledExpression(dk, slots)});
                for (std::size_t v = 0; v <= k; ++v) {
                    expr::Expression dvk = expr::differentiate(dk, names[v]);
                    if (!dvk.is_constant(0.0)) h.push_back({v, k, expr::CompiledExpression(dvk, slots)});
                }
            }
            impl->grad.push_back(std::move(g));
            impl->hess.push_back(std::move(h));
        }
    }
    impl_ = std::move(impl);
}

QuadraticSystem Quadratizer::operator()(const dae::OdeSystem& ode, std::span<const double> center) const {
    const Impl& m = *impl_;
    const std::size_t n = m.vars.size();
    if (ode.variables() != m.vars) throw ConfigError("system does not match the quadratizer");
    if (center.size() != n) throw ConfigError("expansion point has the wrong dimension");
    QuadraticSystem q;
    q.n = n;
    q.center.assign(center.begin(), center.end());
    q.a.assign(n, std::vector<double>((n + 1) * (n + 1), 0.0));
    auto at = [n](std::size_t v, std::size_t k) { return v * (n + 1) + k; };

    if (m.symbolic) {
        std::vector<double> values(center.begin(), center.end());
        const auto& pv = ode.parameter_values();
        values.insert(values.end(), pv.begin(), pv.end());
        std::vector<double> stack;
        for (std::size_t j = 0; j < n; ++j) {
            auto& a = q.a[j];
            a[0] = m.f[j].evaluate(values, stack);
            for (const auto& t : m.grad[j]) a[at(0, t.k + 1)] = t.code.evaluate(values, stack);
            for (const auto& t : m.hess[j]) {
                double h = t.code.evaluate(values, stack);
                a[at(t.v + 1, t.k + 1)] = t.v == t.k ? 0.5 * h : h;
            }
        }
        return q;
    }

    std::vector<double> z(center.begin(), center.end()), f0 = ode.eval(z);
    std::vector<double> step(n);
    for (std::size_t k = 0; k < n; ++k) step[k] = 1e-4 * std::max(1.0, std::abs(z[k]));
    auto eval_at = [&](std::size_t a, double sa, std::size_t b, double sb) {
        std::vector<double> p = z;
        p[a] += sa * step[a];
        if (b < n) p[b] += sb * step[b];
        return ode.eval(p);
    };
    for (std::size_t j = 0; j < n; ++j) q.a[j][0] = f0[j];
    for (std::size_t k = 0; k < n; ++k) {
        auto fp = eval_at(k, 1, n, 0), fm = eval_at(k, -1, n, 0);
        const double hk = step[k];
        for (std::size_t j = 0; j < n; ++j) {
            q.a[j][at(0, k + 1)] = (fp[j] - fm[j]) / (2 * hk);
            q.a[j][at(k + 1, k + 1)] = 0.5 * (fp[j] - 2 * f0[j] + fm[j]) / (hk * hk);
        }
        for (std::size_t v = 0; v < k; ++v) {
            auto fpp = eval_at(v, 1, k, 1), fpm = eval_at(v, 1, k, -1);
            auto fmp = eval_at(v, -1, k, 1), fmm = eval_at(v, -1, k, -1);
            const double d = 4 * step[v] * hk;
            for (std::size_t j = 0; j < n; ++j) q.a[j][at(v + 1, k + 1)] = (fpp[j] - fpm[j] - fmp[j] + fmm[j]) / d;
        }
    }
    return q;
}

QuadraticSystem quadratize(const dae::OdeSystem& ode, std::span<const double> center) {
    return Quadratizer(ode)(ode, center);
}

QuadraticSystem in_encoded_coordinates(const QuadraticSystem& q, double r) {
    const std::size_t n = q.n;
    const auto m = static_cast<Eigen::Index>(n + 1);
    // xi = T w, w = (1, u): xi_0 = 1, xi_k = r u_k - center_k.
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    t(0, 0) = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto i = static_cast<Eigen::Index>(k + 1);
        t(i, 0) = -q.center[k];
        t(i, i) = r;
    }
    QuadraticSystem out;
    out.n = n;
    out.center = q.center;
    out.a.assign(n, std::vector<double>((n + 1) * (n + 1), 0.0));
    Eigen::MatrixXd s(m, m);
    for (std::size_t j = 0; j < n; ++j) {
        for (Eigen::Index v = 0; v < m; ++v)
            for (Eigen::Index k = v; k < m; ++k) {
                double c = q.a[j][static_cast<std::size_t>(v * m + k)];
                s(v, k) = s(k, v) = v == k ? c : 0.5 * c;
            }
        Eigen::MatrixXd b = t.transpose() * s * t;
        for (Eigen::Index v = 0; v < m; ++v)
            for (Eigen::Index k = v; k < m; ++k)
                out.a[j][static_cast<std::size_t>(v * m + k)] = v == k ? b(v, k) : 2.0 * b(v, k);
    }
    return out;
}

int data_qubits(std::size_t n) {
    int q = 1;
    while ((std::size_t{1} << q) < n + 1) ++q;
    return q;
}

QuantumState encode(std::span<const double> u) {
    double s = 0.0;
    for (double x : u) s += x * x;
    if (u.empty() || std::abs(std::sqrt(s) - 1.0) > 1e-10) throw ConfigError("encode expects a unit vector");
    const int nq = data_qubits(u.size());
    std::vector<cplx> amps(std::size_t{1} << nq, 0.0);
    const double h = 1.0 / std::sqrt(2.0);
    amps[0] = h;
    for (std::size_t j = 0; j < u.size(); ++j) amps[j + 1] = u[j] * h;
    return QuantumState(std::move(amps), {{"data", nq}});
}

std::vector<double> decode(const QuantumState& s, std::size_t n) {
    if (n + 1 > s.dim()) throw ConfigError("state too small to hold the requested vector");
    std::vector<double> u(n);
    for (std::size_t j = 0; j < n; ++j) u[j] = std::sqrt(2.0) * s.amplitudes()[j + 1].real();
    return u;
}

LinearOperator build_A(const QuadraticSystem& q) {
    const int nq = data_qubits(q.n);
    const std::size_t dim = std::size_t{1} << (2 * nq);
    Matrix a = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t j = 0; j < q.n; ++j)
        for (std::size_t v = 0; v <= q.n; ++v)
            for (std::size_t k = v; k <= q.n; ++k) {
                double c = q.coeff(j, v, k);
                if (c != 0.0)
                    a(static_cast<Eigen::Index>((j + 1) << nq), static_cast<Eigen::Index>((v << nq) | k)) = c;
            }
    return LinearOperator(std::move(a));
}

double coefficient_norm(const QuadraticSystem& q) {
    double s = 0.0;
    for (const auto& row : q.a)
        for (double c : row) s += c * c;
    return std::sqrt(s);
}

CoefficientOperator::CoefficientOperator(const QuadraticSystem& q) : nq_(data_qubits(q.n)) {
    for (std::size_t j = 0; j < q.n; ++j)
        for (std::size_t v = 0; v <= q.n; ++v)
            for (std::size_t k = v; k <= q.n; ++k) {
                double c = q.coeff(j, v, k);
                if (c != 0.0) entries_.push_back({(j + 1) << nq_, (v << nq_) | k, c});
            }
}

void CoefficientOperator::apply(std::span<const cplx> x, std::span<cplx> out) const {
    if (x.size() != dim() || out.size() != dim()) throw ConfigError("operand has the wrong dimension");
    std::fill(out.begin(), out.end(), cplx{});
    for (const auto& e : entries_) out[e.row] += e.value * x[e.col];
}

void CoefficientOperator::apply_adjoint(std::span<const cplx> y, std::span<cplx> out) const {
    if (y.size() != dim() || out.size() != dim()) throw ConfigError("operand has the wrong dimension");
    std::fill(out.begin(), out.end(), cplx{});
    for (const auto& e : entries_) out[e.col] += e.value * y[e.row];
}

qcore::Action CoefficientOperator::hamiltonian() const {
    auto self = std::make_shared<const CoefficientOperator>(*this);
    return [self](std::span<const cplx> x, std::span<cplx> out) {
        if (x.size() != 2 * self->dim() || out.size() != x.size()) throw ConfigError("operand has the wrong dimension");
        std::fill(out.begin(), out.end(), cplx{});
        for (const auto& e : self->entries_) {
            out[(e.row << 1) | 1] += kI * e.value * x[e.col << 1];
            out[e.col << 1] -= kI * e.value * x[(e.row << 1) | 1];
        }
    };
}

LinearOperator build_hamiltonian(const LinearOperator& a) {
    const auto d = static_cast<Eigen::Index>(a.dim());
    const Matrix& m = a.matrix();
    Matrix h = Matrix::Zero(2 * d, 2 * d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) {
            if (m(r, c) != cplx{}) h((r << 1) | 1, c << 1) = kI * m(r, c);
            if (m(c, r) != cplx{}) h(r << 1, (c << 1) | 1) = -kI * std::conj(m(c, r));
        }
    return LinearOperator(std::move(h), true);
}

std::vector<double> Readout::values(std::size_t n) const {
    if (n + 1 > state.dim()) throw ConfigError("readout too small for the requested length");
    std::vector<double> f(n);
    for (std::size_t j = 0; j < n; ++j) f[j] = scale * state.amplitudes()[j + 1].real();
    return f;
}

Readout eval_f_quantum(const QuantumState& zstate, const QuadraticSystem& q, double eps, int k, bool matrix_free) {
    if (!(eps > 0.0 && eps <= 0.1)) throw ConfigError("eps must lie in (0, 0.1]");
    const int nq = data_qubits(q.n);
    if (zstate.qubits() != nq) throw ConfigError("encoded state does not match the system dimension");
    QuantumState pair = qcore::tensor(zstate.relabel({{"data1", nq}}), zstate.relabel({{"data2", nq}}));
    QuantumState psi = qcore::tensor(pair, QuantumState::basis({{"pointer", 1}}, 0));

    QuantumState evolved = matrix_free
                               ? qcore::evolve_apply(CoefficientOperator(q).hamiltonian(), psi, eps, k)
                               : qcore::evolve_apply(build_hamiltonian(build_A(q)), psi, eps, k);
    auto p1 = qcore::postselect(evolved, "pointer", 1);
    auto p2 = qcore::postselect(p1.state, "data2", 0);
    const double branch = evolved.norm() * std::sqrt(p1.probability * p2.probability);
    return {p2.state.relabel({{"data", nq}}), 2.0 * branch / eps, p1.probability * p2.probability};
}

std::vector<double> Encoded::physical() const {
    std::vector<double> z(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) z[i] = r * u[i];
    return z;
}

Encoded Encoded::from_physical(std::span<const double> z) {
    Encoded e;
    double s = 0.0;
    for (double x : z) s += x * x;
    e.r = std::sqrt(s);
    e.u.assign(z.size(), 0.0);
    if (e.r == 0.0) {
        if (!e.u.empty()) e.u[0] = 1.0;
        return e;
    }
    for (std::size_t i = 0; i < z.size(); ++i) e.u[i] = z[i] / e.r;
    return e;
}

EulerHhl::EulerHhl(std::size_t n, int clock_qubits) : n_(n), p_(next_pow2(n)) {
    if (n == 0) throw ConfigError("empty system");
    hhl::Matrix m = matrix();
    hhl::Vector b = hhl::Vector::Zero(m.rows());
    b(0) = 1.0;
    auto sys = hhl::hermitian_embed(m, b);
    cfg_ = hhl::choose_config(sys.m);
    cfg_.clock_qubits = clock_qubits;
    spec_ = hhl::decompose(sys.m);
}

hhl::Matrix EulerHhl::matrix() const {
    const auto p = static_cast<Eigen::Index>(p_);
    hhl::Matrix m = hhl::Matrix::Identity(2 * p, 2 * p);
    m.bottomLeftCorner(p, p) = -hhl::Matrix::Identity(p, p);
    return m;
}

Encoded EulerHhl::step(const Encoded& z, std::span<const double> f, double dt) const {
    if (!(dt > 0.0)) throw ConfigError("step size must be positive");
    if (z.u.size() != n_ || f.size() != n_) throw ConfigError("step operands have the wrong dimension");
    const auto p = static_cast<Eigen::Index>(p_);
    hhl::Vector b = hhl::Vector::Zero(2 * p);
    for (std::size_t i = 0; i < n_; ++i) {
        b(static_cast<Eigen::Index>(i)) = z.r * z.u[i];
        b(p + static_cast<Eigen::Index>(i)) = dt * f[i];
    }
    if (b.norm() == 0.0) return z;
    auto sys = hhl::hermitian_embed(matrix(), b);
    auto res = hhl::solve(sys, cfg_, spec_);
    hhl::Vector s = hhl::extract(sys, res);
    std::vector<double> s1(n_);
    for (std::size_t i = 0; i < n_; ++i) s1[i] = s(p + static_cast<Eigen::Index>(i)).real();
    return Encoded::from_physical(s1);
}

Encoded euler_step(const Encoded& z, std::span<const double> f, double dt, int clock_qubits) {
    return EulerHhl(z.u.size(), clock_qubits).step(z, f, dt);
}

QuantumRun integrate(const dae::OdeSystem& ode, std::span<const double> z0, double dt, double T,
                     const std::vector<classical::Event>& events, const QuantumConfig& cfg) {
    if (cfg.taylor_k < 1) throw ConfigError("Taylor order must be at least 1");
    if (!(cfg.eps > 0.0 && cfg.eps <= 0.1)) throw ConfigError("eps must lie in (0, 0.1]");
    if (cfg.scale_eps && !(cfg.kappa > 0.0)) throw ConfigError("kappa must be positive");
    const std::size_t n = ode.size();
    Quadratizer quad(ode);
    EulerHhl euler(n, cfg.clock_qubits);
    const int nq = data_qubits(n);
    const bool matrix_free = 2 * nq + 1 > cfg.dense_qubit_limit;

    QuantumRun run;
    auto stepper = [&](const dae::OdeSystem& o, double t, double h, std::vector<double>& z) {
        StepRecord rec;
        rec.time = t;
        Encoded enc = Encoded::from_physical(z);
        rec.u = enc.u;
        rec.r = enc.r;
        rec.z = z;
        QuadraticSystem q = in_encoded_coordinates(quad(o, z), enc.r);
        rec.eps = cfg.eps;
        if (cfg.scale_eps) {
            const double an = coefficient_norm(q);
            if (an > 0.0) rec.eps = std::min(cfg.eps, cfg.kappa / an);
        }
        std::vector<double> f(n, 0.0);
        const QuantumState zs = encode(enc.u);
        for (;;) {
            try {
                Readout ro = eval_f_quantum(zs, q, rec.eps, cfg.taylor_k, matrix_free);
                f = ro.values(n);
                rec.readout.resize(n);
                for (std::size_t j = 0; j < n; ++j) rec.readout[j] = ro.state.amplitudes()[j + 1].real();
                rec.readout_scale = ro.scale;
                break;
            } catch (const EmptyBranchError&) {
                // a small f tolerates a larger eps: the distortion is relative to f
                if (rec.eps < cfg.eps) {
                    rec.eps = cfg.eps;
                    continue;
                }
                rec.empty_branch = true;
                ++run.empty_branches;
                break;
            }
        }
        run.steps.push_back(std::move(rec));
        z = euler.step(enc, f, h).physical();
    };
    run.trace = classical::integrate_fixed(ode, z0, dt, T, events, stepper, "quantum");
    auto& md = run.trace.metadata;
    md["eps"] = std::to_string(cfg.eps);
    md["scale_eps"] = cfg.scale_eps ? "true" : "false";
    md["kappa"] = std::to_string(cfg.kappa);
    md["taylor_k"] = std::to_string(cfg.taylor_k);
    md["clock_qubits"] = std::to_string(cfg.clock_qubits);
    md["hamiltonian"] = matrix_free ? "matrix-free" : "dense";
    md["empty_branches"] = std::to_string(run.empty_branches);
    return run;
}

}  // namespace qdae::qsolve
