#pragma once

#include <span>
#include <vector>

#include "qdae/dae/dae.hpp"
#include "qdae/dae/ode.hpp"
#include "qdae/powsys/network.hpp"

namespace qdae::powsys {

/// der(delta) = w, der(w) = K1 - K2 sin(delta) - K3 w.
dae::OdeSystem build_smib(double k1, double k2, double k3);

struct LoadChange {
    std::size_t bus = 0;  // 0-based
    double dp = 0, dq = 0;
};

/// Total active load change of a list of load changes.
double total_change(const std::vector<LoadChange>& changes);

enum class ZMode { Nominal, Balanced };

// ---------------------------------------------------------------------------
// Internal-node model: constant-impedance loads, network reduced onto the
// generator internal buses behind X'd.

struct InternalNodeModel {
    std::size_t m = 0, n = 0;
    Eigen::VectorXd e;        // internal voltage magnitudes
    Eigen::VectorXd delta0;   // operating-point angles
    Eigen::VectorXd p0;       // operating-point electrical output
    Eigen::VectorXd xdp;
    CMatrix ynet;             // network Y-bus without loads
    Eigen::VectorXcd y_load;  // load admittance per bus
    CMatrix ya, yb, yc, yd, yint;

    /// Recomputes Y_D and Y_int from ynet, y_load and xdp.
    void rebuild();
};

InternalNodeModel build_internal_node_model(const SystemData& data, const PowerFlow& pf);
CMatrix kron_reduce(const CMatrix& ya, const CMatrix& yb, const CMatrix& yc, const CMatrix& yd);

/// E_i^2 G_ii + sum_{j != i} (C_ij sin(delta_i - delta_j) + D_ij cos(delta_i - delta_j)).
double electrical_power(std::size_t i, std::span<const double> delta, const InternalNodeModel& model);
/// Bus voltages -Y_D^{-1} Y_C E_A for internal angles delta.
Eigen::VectorXcd bus_voltages(const InternalNodeModel& model, std::span<const double> delta);

/// Loads re-expressed as admittances at the bus voltages seen for angles delta.
InternalNodeModel apply_disturbance(const InternalNodeModel& model, const std::vector<LoadChange>& changes,
                                    std::span<const double> delta);

/// Z for which the model has a synchronous equilibrium with
/// P_C = p0 + kpf Z (angles of machines 2..m free, machine 1 as reference).
double balanced_z(const InternalNodeModel& model, const std::vector<Governor>& govs);

struct InternalNode {
    InternalNodeModel model;
    dae::OdeSystem ode;
    std::vector<double> z0;
};

/// States per machine: delta_i, dw_i (speed minus ws), TM_i, PSV_i.
InternalNode build_internal_node(const SystemData& data);

/// Writes the network coefficients of `model` into the ODE parameters.
void set_network_parameters(dae::OdeSystem& ode, const InternalNodeModel& model);
/// Reconstructs the model a set of ODE parameters describes.
InternalNodeModel model_from_parameters(const InternalNodeModel& base, const dae::OdeSystem& ode);

// ---------------------------------------------------------------------------
// Generic model: two-axis machines, IEEE type 1 exciters, governors and
// power-balance network equations.

/// E'd I_d + E'q I_q + (X'q - X'd) I_d I_q.
double readout_power(double edp, double eqp, double id, double iq, double xdp, double xqp);

struct GenericModel {
    dae::DaeSystem dae;
    std::vector<double> p0;  // dispatched generation
    PowerFlow pf;
};

/// States per machine: Edp, Eqp, delta, omega, Efd, Rf, VR, TM, PSV (suffix _i);
/// algebraic: Id_i, Iq_i per machine, V_k, theta_k per bus. Initialized at
/// the power-flow operating point.
GenericModel build_generic_dae(const SystemData& data);

/// Synchronous steady state of the generic model under the given parameter
/// values with P_C = p0 + kpf Z; returns Z. Starts from the model's x0/y0.
double generic_balanced_z(const GenericModel& model, const SystemData& data, const dae::ParamMap& params);

}  // namespace qdae::powsys
