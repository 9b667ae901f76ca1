#pragma once

// Test-system data, bus admittance matrix and Newton power flow. Buses are
// numbered from 1 in files and from 0 in code; generator buses come first.

#include <complex>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace qdae::powsys {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

struct Machine {
    double H = 0, D = 0;  // inertia constant (s), damping (pu)
    double Xd = 0, Xdp = 0, Xq = 0, Xqp = 0, Rs = 0;
    double Tdo = 0, Tqo = 0;
};

struct Exciter {
    double KA = 0, TA = 0, KE = 0, TE = 0, KF = 0, TF = 0;
    double Ae = 0.0039, Be = 1.555;  // S_E(Efd) = Ae exp(Be Efd)
};

struct Governor {
    double TCH = 0, TSV = 0, RD = 0, kpf = 0;
};

struct Branch {
    std::size_t from = 0, to = 0;
    double r = 0, x = 0, b = 0;  // b is the total line charging
};

struct Network {
    std::size_t buses = 0;
    std::size_t machines = 0;
    std::vector<Branch> branches;
    std::vector<double> pl, ql;       // per bus
    std::vector<double> vset, pgen;   // per generator; pgen[0] (slack) is ignored
};

struct SystemData {
    std::string name;
    double ws = 0;
    Network net;
    std::vector<Machine> machines;
    std::vector<Exciter> exciters;
    std::vector<Governor> governors;

    void validate() const;
};

SystemData parse_system(std::string_view json_text);
SystemData load_system(const std::string& path);

CMatrix ybus(const Network& net);

struct PowerFlow {
    Eigen::VectorXd v, theta;
    Eigen::VectorXcd s_gen;  // generator complex output per generator bus
    double residual = 0;     // max mismatch
    int iterations = 0;
};

/// Newton power flow: bus 1 slack, generator buses PV, the rest PQ.
/// Throws ConvergenceError if the mismatch is not below tol in 30 iterations.
PowerFlow solve_power_flow(const Network& net, double tol = 1e-10);

/// Mismatch of P at every bus and Q at load buses for given voltages.
Eigen::VectorXd power_mismatch(const Network& net, const CMatrix& y, const Eigen::VectorXd& v,
                               const Eigen::VectorXd& theta, const Eigen::VectorXcd& s_gen);

}  // namespace qdae::powsys
