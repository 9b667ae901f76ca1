#include "qdae/powsys/models.hpp"

#include <cmath>
#include <functional>
#include <numbers>

#include "qdae/error.hpp"
#include "qdae/expr/parser.hpp"

namespace qdae::powsys {

namespace {

using Eigen::Index;

std::string sfx(std::string_view base, std::size_t i) { return std::string(base) + "_" + std::to_string(i + 1); }
std::string sfx(std::string_view base, std::size_t i, std::size_t j) { return sfx(sfx(base, i), j); }

std::set<std::string, std::less<>> names_of(const dae::ParamMap& p) {
    std::set<std::string, std::less<>> s;
    for (const auto& kv : p) s.insert(kv.first);
    return s;
}

// Newton with a central-difference Jacobian; F must be square.
Eigen::VectorXd newton(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn, Eigen::VectorXd x,
                       const char* what, double tol = 1e-10) {
    Eigen::VectorXd r = fn(x);
    for (int it = 0; r.cwiseAbs().maxCoeff() > tol; ++it) {
        if (it == 50)
            throw ConvergenceError(std::string(what) + " did not converge; residual " +
                                   std::to_string(r.cwiseAbs().maxCoeff()));
        Eigen::MatrixXd jac(r.size(), x.size());
        for (Index k = 0; k < x.size(); ++k) {
            const double h = 1e-7 * std::max(1.0, std::abs(x(k)));
            Eigen::VectorXd xp = x, xm = x;
            xp(k) += h;
            xm(k) -= h;
            jac.col(k) = (fn(xp) - fn(xm)) / (2 * h);
        }
        x -= jac.partialPivLu().solve(r);
        r = fn(x);
    }
    return x;
}

}  // namespace

dae::OdeSystem build_smib(double k1, double k2, double k3) {
    dae::ParamMap p{{"K1", k1}, {"K2", k2}, {"K3", k3}};
    auto ps = names_of(p);
    return dae::OdeSystem({"delta", "w"},
                          {expr::parse_expression("w", ps), expr::parse_expression("K1 - K2*sin(delta) - K3*w", ps)}, p);
}

double total_change(const std::vector<LoadChange>& changes) {
    double z = 0;
    for (const auto& c : changes) z += c.dp;
    return z;
}

// ---------------------------------------------------------------------------

CMatrix kron_reduce(const CMatrix& ya, const CMatrix& yb, const CMatrix& yc, const CMatrix& yd) {
    Eigen::PartialPivLU<CMatrix> lu(yd);
    if (!(lu.rcond() > 1e-12)) throw SingularMatrixError("Y_D is singular");
    return ya - yb * lu.solve(yc);
}

void InternalNodeModel::rebuild() {
    const auto mi = static_cast<Index>(m), ni = static_cast<Index>(n);
    ya = CMatrix::Zero(mi, mi);
    yb = CMatrix::Zero(mi, ni);
    yd = ynet;
    for (Index k = 0; k < ni; ++k) yd(k, k) += y_load(k);
    for (Index i = 0; i < mi; ++i) {
        const cplx yg = 1.0 / cplx(0.0, xdp(i));
        ya(i, i) = yg;
        yb(i, i) = -yg;
        yd(i, i) += yg;
    }
    yc = yb.transpose();
    yint = kron_reduce(ya, yb, yc, yd);
}

InternalNodeModel build_internal_node_model(const SystemData& data, const PowerFlow& pf) {
    const auto& net = data.net;
    InternalNodeModel md;
    md.m = net.machines;
    md.n = net.buses;
    const auto mi = static_cast<Index>(md.m), ni = static_cast<Index>(md.n);
    md.ynet = ybus(net);
    md.xdp.resize(mi);
    md.e.resize(mi);
    md.delta0.resize(mi);
    md.y_load.resize(ni);
    for (Index k = 0; k < ni; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        md.y_load(k) = cplx(net.pl[ku], -net.ql[ku]) / (pf.v(k) * pf.v(k));
    }
    for (Index i = 0; i < mi; ++i) {
        md.xdp(i) = data.machines[static_cast<std::size_t>(i)].Xdp;
        const cplx v = std::polar(pf.v(i), pf.theta(i));
        const cplx ig = std::conj(pf.s_gen(i) / v);
        const cplx e = v + cplx(0.0, md.xdp(i)) * ig;
        md.e(i) = std::abs(e);
        md.delta0(i) = std::arg(e);
    }
    md.rebuild();
    md.p0.resize(mi);
    std::vector<double> d(md.delta0.data(), md.delta0.data() + mi);
    for (std::size_t i = 0; i < md.m; ++i) md.p0(static_cast<Index>(i)) = electrical_power(i, d, md);
    return md;
}

double electrical_power(std::size_t i, std::span<const double> delta, const InternalNodeModel& md) {
    if (i >= md.m || delta.size() != md.m) throw ConfigError("machine index or angle count out of range");
    const auto ii = static_cast<Index>(i);
    double p = md.e(ii) * md.e(ii) * md.yint(ii, ii).real();
    for (std::size_t j = 0; j < md.m; ++j) {
        if (j == i) continue;
        const auto jj = static_cast<Index>(j);
        const double ee = md.e(ii) * md.e(jj);
        const double dij = delta[i] - delta[j];
        p += ee * md.yint(ii, jj).imag() * std::sin(dij) + ee * md.yint(ii, jj).real() * std::cos(dij);
    }
    return p;
}

Eigen::VectorXcd bus_voltages(const InternalNodeModel& md, std::span<const double> delta) {
    Eigen::VectorXcd ea(static_cast<Index>(md.m));
    for (std::size_t i = 0; i < md.m; ++i) ea(static_cast<Index>(i)) = std::polar(md.e(static_cast<Index>(i)), delta[i]);
    return -md.yd.partialPivLu().solve(md.yc * ea);
}

InternalNodeModel apply_disturbance(const InternalNodeModel& md, const std::vector<LoadChange>& changes,
                                    std::span<const double> delta) {
    InternalNodeModel out = md;
    if (changes.empty()) return out;
    Eigen::VectorXcd vb = bus_voltages(md, delta);
    for (const auto& c : changes) {
        if (c.bus >= md.n) throw ConfigError("load change at a bus that does not exist");
        const auto k = static_cast<Index>(c.bus);
        out.y_load(k) += cplx(c.dp, -c.dq) / std::norm(vb(k));
    }
    out.rebuild();
    return out;
}

double balanced_z(const InternalNodeModel& md, const std::vector<Governor>& govs) {
    const std::size_t m = md.m;
    auto fn = [&](const Eigen::VectorXd& x) {
        std::vector<double> d(md.delta0.data(), md.delta0.data() + m);
        for (std::size_t i = 1; i < m; ++i) d[i] += x(static_cast<Index>(i - 1));
        const double z = x(static_cast<Index>(m - 1));
        Eigen::VectorXd r(static_cast<Index>(m));
        for (std::size_t i = 0; i < m; ++i)
            r(static_cast<Index>(i)) = electrical_power(i, d, md) - md.p0(static_cast<Index>(i)) - govs[i].kpf * z;
        return r;
    };
    Eigen::VectorXd x = newton(fn, Eigen::VectorXd::Zero(static_cast<Index>(m)), "balanced load-change solve");
    return x(static_cast<Index>(m - 1));
}

void set_network_parameters(dae::OdeSystem& ode, const InternalNodeModel& md) {
    for (std::size_t i = 0; i < md.m; ++i) {
        const auto ii = static_cast<Index>(i);
        ode.set_parameter(sfx("G", i, i), md.yint(ii, ii).real());
        for (std::size_t j = 0; j < md.m; ++j) {
            if (j == i) continue;
            const auto jj = static_cast<Index>(j);
            const double ee = md.e(ii) * md.e(jj);
            ode.set_parameter(sfx("C", i, j), ee * md.yint(ii, jj).imag());
            ode.set_parameter(sfx("D", i, j), ee * md.yint(ii, jj).real());
        }
    }
    for (std::size_t k = 0; k < md.n; ++k) {
        ode.set_parameter(sfx("GL", k), md.y_load(static_cast<Index>(k)).real());
        ode.set_parameter(sfx("BL", k), md.y_load(static_cast<Index>(k)).imag());
    }
}

InternalNodeModel model_from_parameters(const InternalNodeModel& base, const dae::OdeSystem& ode) {
    InternalNodeModel md = base;
    for (std::size_t k = 0; k < md.n; ++k)
        md.y_load(static_cast<Index>(k)) = cplx(ode.parameter(sfx("GL", k)), ode.parameter(sfx("BL", k)));
    md.rebuild();
    return md;
}

InternalNode build_internal_node(const SystemData& data) {
    PowerFlow pf = solve_power_flow(data.net);
    InternalNodeModel md = build_internal_node_model(data, pf);
    const std::size_t m = md.m;

    dae::ParamMap p{{"ws", data.ws}, {"Z", 0.0}};
    for (std::size_t i = 0; i < m; ++i) {
        p[sfx("E", i)] = md.e(static_cast<Index>(i));
        p[sfx("H", i)] = data.machines[i].H;
        p[sfx("Damp", i)] = data.machines[i].D;
        p[sfx("TCH", i)] = data.governors[i].TCH;
        p[sfx("TSV", i)] = data.governors[i].TSV;
        p[sfx("RD", i)] = data.governors[i].RD;
        p[sfx("PC", i)] = md.p0(static_cast<Index>(i));
        p[sfx("G", i, i)] = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            if (j != i) p[sfx("C", i, j)] = p[sfx("D", i, j)] = 0.0;
    }
    for (std::size_t k = 0; k < md.n; ++k) p[sfx("GL", k)] = p[sfx("BL", k)] = 0.0;
    auto ps = names_of(p);

    std::vector<std::string> vars;
    std::vector<expr::Expression> rhs;
    std::vector<double> z0;
    for (std::size_t i = 0; i < m; ++i) {
        const std::string d = sfx("delta", i), w = sfx("dw", i), tm = sfx("TM", i), psv = sfx("PSV", i);
        std::string pe = sfx("E", i) + "^2*" + sfx("G", i, i);
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            const std::string dij = "(" + d + " - " + sfx("delta", j) + ")";
            pe += " + " + sfx("C", i, j) + "*sin" + dij + " + " + sfx("D", i, j) + "*cos" + dij;
        }
        vars.insert(vars.end(), {d, w, tm, psv});
        rhs.push_back(expr::parse_expression(w, ps));
        rhs.push_back(expr::parse_expression(
            "ws/(2*" + sfx("H", i) + ")*(" + tm + " - (" + pe + ") - " + sfx("Damp", i) + "*" + w + ")", ps));
        rhs.push_back(expr::parse_expression("(" + psv + " - " + tm + ")/" + sfx("TCH", i), ps));
        rhs.push_back(expr::parse_expression(
            "(" + sfx("PC", i) + " - " + psv + " - " + w + "/(ws*" + sfx("RD", i) + "))/" + sfx("TSV", i), ps));
        const double p0 = md.p0(static_cast<Index>(i));
        z0.insert(z0.end(), {md.delta0(static_cast<Index>(i)), 0.0, p0, p0});
    }
    dae::OdeSystem ode(vars, rhs, p);
    set_network_parameters(ode, md);
    return {std::move(md), std::move(ode), std::move(z0)};
}

// ---------------------------------------------------------------------------

double readout_power(double edp, double eqp, double id, double iq, double xdp, double xqp) {
    return edp * id + eqp * iq + (xqp - xdp) * id * iq;
}

GenericModel build_generic_dae(const SystemData& data) {
    const auto& net = data.net;
    const std::size_t m = net.machines, n = net.buses;
    GenericModel gm;
    gm.pf = solve_power_flow(net);
    const PowerFlow& pf = gm.pf;
    dae::DaeSystem& d = gm.dae;
    auto& p = d.params;
    p["ws"] = data.ws;
    p["Z"] = 0.0;

    const CMatrix y = ybus(net);
    for (std::size_t k = 0; k < n; ++k) {
        p[sfx("PL", k)] = net.pl[k];
        p[sfx("QL", k)] = net.ql[k];
        for (std::size_t l = 0; l < n; ++l) {
            const cplx ykl = y(static_cast<Index>(k), static_cast<Index>(l));
            if (ykl == cplx{}) continue;
            p[sfx("Y", k, l)] = std::abs(ykl);
            p[sfx("alpha", k, l)] = std::arg(ykl);
        }
    }

    std::vector<double> id0(m), iq0(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& mc = data.machines[i];
        const auto& ex = data.exciters[i];
        const auto& gv = data.governors[i];
        const auto ii = static_cast<Index>(i);
        const cplx v = std::polar(pf.v(ii), pf.theta(ii));
        const cplx ig = std::conj(pf.s_gen(ii) / v);
        const double delta = std::arg(v + cplx(mc.Rs, mc.Xq) * ig);
        const cplx rot = std::polar(1.0, -(delta - std::numbers::pi / 2));
        const cplx idq = ig * rot, vdq = v * rot;
        const double id = idq.real(), iq = idq.imag(), vd = vdq.real(), vq = vdq.imag();
        const double edp = vd + mc.Rs * id - mc.Xqp * iq;
        const double eqp = vq + mc.Rs * iq + mc.Xdp * id;
        const double efd = eqp + (mc.Xd - mc.Xdp) * id;
        const double vr = (ex.KE + ex.Ae * std::exp(ex.Be * efd)) * efd;
        const double rf = ex.KF / ex.TF * efd;
        const double pm = readout_power(edp, eqp, id, iq, mc.Xdp, mc.Xqp);
        id0[i] = id;
        iq0[i] = iq;
        gm.p0.push_back(pm);

        const std::pair<const char*, double> consts[] = {
            {"Xd", mc.Xd},   {"Xdp", mc.Xdp}, {"Xq", mc.Xq},  {"Xqp", mc.Xqp}, {"Rs", mc.Rs},   {"Tdo", mc.Tdo},
            {"Tqo", mc.Tqo}, {"H", mc.H},     {"D", mc.D},    {"KA", ex.KA},   {"TA", ex.TA},   {"KE", ex.KE},
            {"TE", ex.TE},   {"KF", ex.KF},   {"TF", ex.TF},  {"Ae", ex.Ae},   {"Be", ex.Be},   {"TCH", gv.TCH},
            {"TSV", gv.TSV}, {"RD", gv.RD},   {"PC", pm},     {"Vref", pf.v(ii) + vr / ex.KA}};
        for (const auto& [k, val] : consts) p[sfx(k, i)] = val;

        for (const char* s : {"Edp", "Eqp", "delta", "omega", "Efd", "Rf", "VR", "TM", "PSV"}) d.states.push_back(sfx(s, i));
        d.x0.insert(d.x0.end(), {edp, eqp, delta, data.ws, efd, rf, vr, pm, pm});
    }
    for (std::size_t i = 0; i < m; ++i) {
        d.algebraics.push_back(sfx("Id", i));
        d.algebraics.push_back(sfx("Iq", i));
        d.y0.insert(d.y0.end(), {id0[i], iq0[i]});
    }
    for (std::size_t k = 0; k < n; ++k) {
        d.algebraics.push_back(sfx("V", k));
        d.y0.push_back(pf.v(static_cast<Index>(k)));
    }
    for (std::size_t k = 0; k < n; ++k) {
        d.algebraics.push_back(sfx("theta", k));
        d.y0.push_back(pf.theta(static_cast<Index>(k)));
    }

    auto ps = names_of(p);
    auto parse = [&](const std::string& s) { return expr::parse_expression(s, ps); };
    for (std::size_t i = 0; i < m; ++i) {
        auto P = [&](const char* b) { return sfx(b, i); };
        const std::string dt = "(" + P("delta") + " - " + P("theta") + ")";
        d.f.push_back(parse("(-" + P("Edp") + " + (" + P("Xq") + " - " + P("Xqp") + ")*" + P("Iq") + ")/" + P("Tqo")));
        d.f.push_back(parse("(-" + P("Eqp") + " - (" + P("Xd") + " - " + P("Xdp") + ")*" + P("Id") + " + " + P("Efd") +
                            ")/" + P("Tdo")));
        d.f.push_back(parse(P("omega") + " - ws"));
        d.f.push_back(parse("ws/(2*" + P("H") + ")*(" + P("TM") + " - " + P("Edp") + "*" + P("Id") + " - " + P("Eqp") +
                            "*" + P("Iq") + " - (" + P("Xqp") + " - " + P("Xdp") + ")*" + P("Id") + "*" + P("Iq") +
                            " - " + P("D") + "*(" + P("omega") + " - ws))"));
        d.f.push_back(parse("(-(" + P("KE") + " + " + P("Ae") + "*exp(" + P("Be") + "*" + P("Efd") + "))*" + P("Efd") +
                            " + " + P("VR") + ")/" + P("TE")));
        d.f.push_back(parse("(-" + P("Rf") + " + " + P("KF") + "/" + P("TF") + "*" + P("Efd") + ")/" + P("TF")));
        d.f.push_back(parse("(-" + P("VR") + " + " + P("KA") + "*" + P("Rf") + " - " + P("KA") + "*" + P("KF") + "/" +
                            P("TF") + "*" + P("Efd") + " + " + P("KA") + "*(" + P("Vref") + " - " + P("V") + "))/" +
                            P("TA")));
        d.f.push_back(parse("(-" + P("TM") + " + " + P("PSV") + ")/" + P("TCH")));
        d.f.push_back(parse("(-" + P("PSV") + " + " + P("PC") + " - (" + P("omega") + "/ws - 1)/" + P("RD") + ")/" +
                            P("TSV")));
        d.g.push_back(parse(P("Edp") + " - " + P("V") + "*sin" + dt + " - " + P("Rs") + "*" + P("Id") + " + " + P("Xqp") +
                            "*" + P("Iq")));
        d.g.push_back(parse(P("Eqp") + " - " + P("V") + "*cos" + dt + " - " + P("Rs") + "*" + P("Iq") + " - " + P("Xdp") +
                            "*" + P("Id")));
    }
    for (std::size_t k = 0; k < n; ++k) {
        const std::string vk = sfx("V", k), tk = sfx("theta", k);
        std::string pk = "-" + sfx("PL", k), qk = "-" + sfx("QL", k);
        if (k < m) {
            const std::string dt = "(" + sfx("delta", k) + " - " + tk + ")";
            pk += " + " + sfx("Id", k) + "*" + vk + "*sin" + dt + " + " + sfx("Iq", k) + "*" + vk + "*cos" + dt;
            qk += " + " + sfx("Id", k) + "*" + vk + "*cos" + dt + " - " + sfx("Iq", k) + "*" + vk + "*sin" + dt;
        }
        for (std::size_t l = 0; l < n; ++l) {
            if (!p.count(sfx("Y", k, l))) continue;
            const std::string ykl = sfx("Y", k, l), akl = sfx("alpha", k, l);
            if (l == k) {
                pk += " - " + vk + "^2*" + ykl + "*cos(-" + akl + ")";
                qk += " - " + vk + "^2*" + ykl + "*sin(-" + akl + ")";
            } else {
                const std::string arg = "(" + tk + " - " + sfx("theta", l) + " - " + akl + ")";
                pk += " - " + vk + "*" + sfx("V", l) + "*" + ykl + "*cos" + arg;
                qk += " - " + vk + "*" + sfx("V", l) + "*" + ykl + "*sin" + arg;
            }
        }
        d.g.push_back(parse(pk));
        d.g.push_back(parse(qk));
    }
    d.validate();
    return gm;
}

double generic_balanced_z(const GenericModel& gm, const SystemData& data, const dae::ParamMap& params) {
    const dae::DaeSystem& d = gm.dae;
    const std::size_t nx = d.states.size(), ny = d.algebraics.size(), m = data.net.machines;
    dae::SlotMap slots;
    std::vector<double> base;
    for (std::size_t i = 0; i < nx; ++i) {
        slots[d.states[i]] = base.size();
        base.push_back(d.x0[i]);
    }
    for (std::size_t k = 0; k < ny; ++k) {
        slots[d.algebraics[k]] = base.size();
        base.push_back(d.y0[k]);
    }
    for (const auto& [k, v] : d.params) {
        slots[k] = base.size();
        auto it = params.find(k);
        base.push_back(it != params.end() ? it->second : v);
    }
    std::vector<expr::CompiledExpression> f, g;
    for (const auto& e : d.f) f.emplace_back(e, slots);
    for (const auto& e : d.g) g.emplace_back(e, slots);

    // Unknowns: every state except omega_i (held at ws) and delta_1 (reference), all algebraics, Z.
    std::vector<std::size_t> unknown, eqs;
    for (std::size_t i = 0; i < nx; ++i) {
        const auto& s = d.states[i];
        if (s.rfind("omega_", 0) == 0 || s == "delta_1") continue;
        unknown.push_back(i);
    }
    for (std::size_t k = 0; k < ny; ++k) unknown.push_back(nx + k);
    for (std::size_t i = 0; i < nx; ++i)
        if (d.states[i].rfind("delta_", 0) != 0) eqs.push_back(i);
    std::vector<std::size_t> pc(m);
    for (std::size_t i = 0; i < m; ++i) pc[i] = slots.at(sfx("PC", i));

    const auto nu = static_cast<Index>(unknown.size() + 1);
    std::vector<double> stack;
    auto fn = [&](const Eigen::VectorXd& x) {
        std::vector<double> vals = base;
        for (std::size_t u = 0; u < unknown.size(); ++u) vals[unknown[u]] = x(static_cast<Index>(u));
        const double z = x(nu - 1);
        for (std::size_t i = 0; i < m; ++i) vals[pc[i]] = gm.p0[i] + data.governors[i].kpf * z;
        Eigen::VectorXd r(static_cast<Index>(eqs.size() + ny));
        Index row = 0;
        for (std::size_t e : eqs) r(row++) = f[e].evaluate(vals, stack);
        for (std::size_t k = 0; k < ny; ++k) r(row++) = g[k].evaluate(vals, stack);
        return r;
    };
    if (static_cast<Index>(eqs.size() + ny) != nu) throw ConfigError("steady-state system is not square");
    Eigen::VectorXd x0(nu);
    for (std::size_t u = 0; u < unknown.size(); ++u) x0(static_cast<Index>(u)) = base[unknown[u]];
    x0(nu - 1) = 0.0;
    return newton(fn, x0, "steady-state solve")(nu - 1);
}

}  // namespace qdae::powsys
