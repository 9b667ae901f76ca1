#include "qdae/powsys/network.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "qdae/error.hpp"

namespace qdae::powsys {

using nlohmann::json;

namespace {

double num(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number())
        throw ConfigError(std::string("missing numeric field '") + key + "'");
    return j.at(key).get<double>();
}

double num_or(const json& j, const char* key, double fallback) { return j.contains(key) ? num(j, key) : fallback; }

std::size_t bus_index(const json& j, const char* key, std::size_t buses) {
    double b = num(j, key);
    if (b < 1 || b > static_cast<double>(buses) || b != std::floor(b))
        throw ConfigError(std::string("field '") + key + "' is not a bus number");
    return static_cast<std::size_t>(b) - 1;
}

}  // namespace

void SystemData::validate() const {
    const std::size_t m = net.machines;
    if (m == 0 || m > net.buses) throw ConfigError("generator count must be between 1 and the bus count");
    if (machines.size() != m || exciters.size() != m || governors.size() != m)
        throw ConfigError("need one machine, exciter and governor per generator");
    if (net.vset.size() != m || net.pgen.size() != m) throw ConfigError("need a setpoint per generator");
    if (!(ws > 0)) throw ConfigError("synchronous speed must be positive");
    double kpf = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& g = machines[i];
        if (!(g.Tdo > 0 && g.Tqo > 0 && g.H > 0)) throw ConfigError("machine time constants must be positive");
        if (!(g.Xd >= g.Xdp && g.Xdp > 0 && g.Xq >= g.Xqp && g.Xqp > 0))
            throw ConfigError("machine reactances must satisfy X >= X' > 0");
        const auto& e = exciters[i];
        if (!(e.TE > 0 && e.TF > 0 && e.TA > 0)) throw ConfigError("exciter time constants must be positive");
        const auto& gv = governors[i];
        if (!(gv.TCH > 0 && gv.TSV > 0 && gv.RD > 0)) throw ConfigError("governor constants must be positive");
        kpf += gv.kpf;
    }
    if (std::abs(kpf - 1.0) > 1e-9) throw ConfigError("participation factors must sum to 1");
    for (const auto& br : net.branches)
        if (br.from >= net.buses || br.to >= net.buses || br.from == br.to) throw ConfigError("bad branch endpoints");
}

SystemData parse_system(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), 1, static_cast<int>(e.byte));
    }
    SystemData d;
    try {
        d.name = j.value("name", "");
        d.ws = 2.0 * std::numbers::pi * num(j, "frequency_hz");
        auto& net = d.net;
        net.buses = static_cast<std::size_t>(num(j, "buses"));
        net.pl.assign(net.buses, 0.0);
        net.ql.assign(net.buses, 0.0);
        for (const auto& l : j.at("loads")) {
            std::size_t b = bus_index(l, "bus", net.buses);
            net.pl[b] += num(l, "p");
            net.ql[b] += num(l, "q");
        }
        for (const auto& br : j.at("branches"))
            net.branches.push_back({bus_index(br, "from", net.buses), bus_index(br, "to", net.buses), num(br, "r"),
                                    num(br, "x"), num_or(br, "b", 0.0)});
        const auto& gens = j.at("generators");
        net.machines = gens.size();
        for (std::size_t i = 0; i < gens.size(); ++i) {
            const auto& g = gens[i];
            if (bus_index(g, "bus", net.buses) != i) throw ConfigError("generators must sit on buses 1..m in order");
            net.vset.push_back(num(g, "v"));
            net.pgen.push_back(num_or(g, "p", 0.0));
            const auto& mc = g.at("machine");
            d.machines.push_back({num(mc, "H"), num_or(mc, "D", 0.0), num(mc, "Xd"), num(mc, "Xdp"), num(mc, "Xq"),
                                  num(mc, "Xqp"), num_or(mc, "Rs", 0.0), num(mc, "Tdo"), num(mc, "Tqo")});
            const auto& ex = g.at("exciter");
            d.exciters.push_back({num(ex, "KA"), num(ex, "TA"), num(ex, "KE"), num(ex, "TE"), num(ex, "KF"),
                                  num(ex, "TF"), num_or(ex, "Ae", 0.0039), num_or(ex, "Be", 1.555)});
            const auto& gv = g.at("governor");
            d.governors.push_back({num(gv, "TCH"), num(gv, "TSV"), num(gv, "RD"), num(gv, "kpf")});
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("system data: ") + e.what());
    }
    d.validate();
    return d;
}

SystemData load_system(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_system(ss.str());
}

CMatrix ybus(const Network& net) {
    const auto n = static_cast<Eigen::Index>(net.buses);
    CMatrix y = CMatrix::Zero(n, n);
    for (const auto& br : net.branches) {
        const cplx ys = 1.0 / cplx(br.r, br.x);
        const cplx sh(0.0, br.b / 2);
        const auto f = static_cast<Eigen::Index>(br.from), t = static_cast<Eigen::Index>(br.to);
        y(f, f) += ys + sh;
        y(t, t) += ys + sh;
        y(f, t) -= ys;
        y(t, f) -= ys;
    }
    return y;
}

Eigen::VectorXd power_mismatch(const Network& net, const CMatrix& y, const Eigen::VectorXd& v,
                               const Eigen::VectorXd& theta, const Eigen::VectorXcd& s_gen) {
    const auto n = static_cast<Eigen::Index>(net.buses);
    const auto m = static_cast<Eigen::Index>(net.machines);
    Eigen::VectorXcd vc(n);
    for (Eigen::Index k = 0; k < n; ++k) vc(k) = std::polar(v(k), theta(k));
    Eigen::VectorXcd s = vc.cwiseProduct((y * vc).conjugate());
    Eigen::VectorXd out(n + (n - m));
    for (Eigen::Index k = 0; k < n; ++k) {
        cplx sg = k < m ? s_gen(k) : cplx{};
        out(k) = s(k).real() - (sg.real() - net.pl[static_cast<std::size_t>(k)]);
        if (k >= m) out(n + k - m) = s(k).imag() - (sg.imag() - net.ql[static_cast<std::size_t>(k)]);
    }
    return out;
}

PowerFlow solve_power_flow(const Network& net, double tol) {
    if (net.machines == 0 || net.machines > net.buses || net.vset.size() != net.machines ||
        net.pgen.size() != net.machines || net.pl.size() != net.buses || net.ql.size() != net.buses)
        throw ConfigError("network description is incomplete");
    for (const auto& br : net.branches)
        if (br.from >= net.buses || br.to >= net.buses) throw ConfigError("bad branch endpoints");
    const auto n = static_cast<Eigen::Index>(net.buses);
    const auto m = static_cast<Eigen::Index>(net.machines);
    const CMatrix y = ybus(net);
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n), th = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < m; ++i) v(i) = net.vset[static_cast<std::size_t>(i)];
    Eigen::VectorXcd sg = Eigen::VectorXcd::Zero(m);
    for (Eigen::Index i = 1; i < m; ++i) sg(i) = net.pgen[static_cast<std::size_t>(i)];

    // Unknowns: theta at buses 2..n, V at load buses. Equations: P at 2..n, Q at load buses.
    const Eigen::Index nu = (n - 1) + (n - m);
    auto unpack = [&](const Eigen::VectorXd& x, Eigen::VectorXd& vv, Eigen::VectorXd& tt) {
        vv = v;
        tt = th;
        tt.tail(n - 1) = x.head(n - 1);
        vv.tail(n - m) = x.tail(n - m);
    };
    auto residual = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd vv, tt;
        unpack(x, vv, tt);
        Eigen::VectorXd mis = power_mismatch(net, y, vv, tt, sg);
        Eigen::VectorXd r(nu);
        r.head(n - 1) = mis.segment(1, n - 1);
        r.tail(n - m) = mis.tail(n - m);
        return r;
    };
    Eigen::VectorXd x(nu);
    x.head(n - 1) = th.tail(n - 1);
    x.tail(n - m) = v.tail(n - m);

    PowerFlow pf;
    Eigen::VectorXd r = residual(x);
    while (r.cwiseAbs().maxCoeff() > tol) {
        if (++pf.iterations > 30)
            throw ConvergenceError("power flow did not converge; mismatch " + std::to_string(r.cwiseAbs().maxCoeff()));
        Eigen::MatrixXd jac(nu, nu);
        for (Eigen::Index k = 0; k < nu; ++k) {
            const double h = 1e-7;
            Eigen::VectorXd xp = x, xm = x;
            xp(k) += h;
            xm(k) -= h;
            jac.col(k) = (residual(xp) - residual(xm)) / (2 * h);
        }
        x -= jac.partialPivLu().solve(r);
        r = residual(x);
    }
    unpack(x, pf.v, pf.theta);

    Eigen::VectorXcd vc(n);
    for (Eigen::Index k = 0; k < n; ++k) vc(k) = std::polar(pf.v(k), pf.theta(k));
    Eigen::VectorXcd s = vc.cwiseProduct((y * vc).conjugate());
    pf.s_gen.resize(m);
    for (Eigen::Index i = 0; i < m; ++i)
        pf.s_gen(i) = s(i) + cplx(net.pl[static_cast<std::size_t>(i)], net.ql[static_cast<std::size_t>(i)]);
    pf.residual = power_mismatch(net, y, pf.v, pf.theta, pf.s_gen).cwiseAbs().maxCoeff();
    return pf;
}

}  // namespace qdae::powsys
