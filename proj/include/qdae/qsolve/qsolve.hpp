#pragma once

// Quantum nonlinear ODE stepping: second-order Taylor model of the right-hand
// side, amplitude encoding, the pointer-qubit Hamiltonian that writes A|z>|z>
// onto the pointer-1 branch, and an HHL solve for the forward-Euler update.

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "qdae/classical/integrate.hpp"
#include "qdae/dae/ode.hpp"
#include "qdae/hhl/hhl.hpp"
#include "qdae/qcore/state.hpp"

namespace qdae::qsolve {

using qcore::cplx;

/// f_j(z) ~ sum_{v<=k} a[j][v][k] xi_v xi_k with xi_0 = 1 and xi_k = z_k - center_k.
/// Coefficients are stored flat: a[j][v * (n + 1) + k], zero for v > k.
struct QuadraticSystem {
    std::size_t n = 0;
    std::vector<double> center;
    std::vector<std::vector<double>> a;

    double coeff(std::size_t j, std::size_t v, std::size_t k) const { return a[j][v * (n + 1) + k]; }
    /// sum_{v<=k} a[j][v][k] w_v w_k for w = (1, x).
    std::vector<double> eval(std::span<const double> x) const;
};

/// Builds Taylor models of one OdeSystem's right-hand side. Symbolic systems
/// get exact compiled derivatives; implicit ones use central differences.
class Quadratizer {
public:
    explicit Quadratizer(const dae::OdeSystem& ode);
    /// Parameter values are taken from `ode`, which must have the same
    /// variables as the one the Quadratizer was built from.
    QuadraticSystem operator()(const dae::OdeSystem& ode, std::span<const double> center) const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

QuadraticSystem quadratize(const dae::OdeSystem& ode, std::span<const double> center);

/// Rewrites q over w = (1, u) with z = r u, i.e. the monomials the encoded
/// state |z> = (1, u)/sqrt(2) supplies.
QuadraticSystem in_encoded_coordinates(const QuadraticSystem& q, double r);

/// Data qubits for n variables plus the leading 1: ceil(log2(n + 1)), at least 1.
int data_qubits(std::size_t n);

/// (1, u)/sqrt(2) on a "data" register; u must have unit norm to 1e-10.
qcore::QuantumState encode(std::span<const double> u);
std::vector<double> decode(const qcore::QuantumState& s, std::size_t n);

/// A = sum a[j][v][k] |j 0><v k| over two copies of the data register.
qcore::LinearOperator build_A(const QuadraticSystem& q);
/// Frobenius norm of A, i.e. of the coefficient tensor.
double coefficient_norm(const QuadraticSystem& q);

/// The same operator as a coefficient list, for registers too large to
/// hold densely.
class CoefficientOperator {
public:
    explicit CoefficientOperator(const QuadraticSystem& q);
    int qubits() const noexcept { return 2 * nq_; }
    std::size_t dim() const noexcept { return std::size_t{1} << qubits(); }
    void apply(std::span<const cplx> x, std::span<cplx> out) const;          // out = A x
    void apply_adjoint(std::span<const cplx> y, std::span<cplx> out) const;  // out = A^H y
    /// H = iA (x) |1><0| - iA^H (x) |0><1|, pointer as the least significant qubit.
    qcore::Action hamiltonian() const;

private:
    struct Entry {
        std::size_t row, col;
        double value;
    };
    int nq_ = 1;
    std::vector<Entry> entries_;
};

qcore::LinearOperator build_hamiltonian(const qcore::LinearOperator& a);

struct QuantumConfig {
    /// Pointer coupling time. With scale_eps the step uses
    /// min(eps, kappa / ||A||_F), which bounds the relative distortion of the
    /// pointer branch, about (eps ||A||)^2 / 6, independently of the state.
    double eps = 1e-3;
    bool scale_eps = true;
    double kappa = 1e-2;
    int taylor_k = 10;
    int clock_qubits = 40;
    /// Hamiltonians on more qubits than this are applied matrix-free.
    int dense_qubit_limit = 11;
};

struct Readout {
    qcore::QuantumState state;  // data register after both post-selections
    double scale = 0.0;         // f ~ scale * amplitudes[1..n]
    double probability = 0.0;   // pointer-1 and data2-0 branch mass
    std::vector<double> values(std::size_t n) const;
};

/// Evolves |z>|z>|0>_P for time eps, keeps pointer = 1, then data2 = 0.
/// Throws EmptyBranchError when either branch is empty.
Readout eval_f_quantum(const qcore::QuantumState& zstate, const QuadraticSystem& q, double eps, int k,
                       bool matrix_free = false);

struct Encoded {
    std::vector<double> u;
    double r = 0.0;
    std::vector<double> physical() const;
    static Encoded from_physical(std::span<const double> z);
};

/// Forward Euler as the block system [[I, 0], [-I, I]] s = [z; dt f], solved
/// through HHL on its Hermitian embedding; s1 = z + dt f. The embedding and
/// its spectrum are built once per dimension.
class EulerHhl {
public:
    EulerHhl(std::size_t n, int clock_qubits);
    Encoded step(const Encoded& z, std::span<const double> f, double dt) const;
    const hhl::HhlConfig& config() const noexcept { return cfg_; }
    std::size_t block() const noexcept { return p_; }
    hhl::Matrix matrix() const;

private:
    std::size_t n_, p_;
    hhl::HhlConfig cfg_;
    hhl::Spectrum spec_;
};

Encoded euler_step(const Encoded& z, std::span<const double> f, double dt, int clock_qubits);

struct StepRecord {
    double time = 0.0;
    std::vector<double> u;        // encoded unit vector
    double r = 0.0;               // its norm bookkeeping: z = r * u
    std::vector<double> z;
    std::vector<double> readout;  // normalized f direction from the pointer branch
    double readout_scale = 0.0;
    double eps = 0.0;  // pointer coupling used for this step
    bool empty_branch = false;
};

struct QuantumRun {
    classical::Trace trace;
    std::vector<StepRecord> steps;
    std::size_t empty_branches = 0;
};

/// Per step: re-expand at z(t), encode, read f through the pointer branch and
/// take one HHL Euler step. An empty pointer branch means f ~ 0 to within
/// the readout's resolution; the step then keeps z and is counted.
QuantumRun integrate(const dae::OdeSystem& ode, std::span<const double> z0, double dt, double T,
                     const std::vector<classical::Event>& events, const QuantumConfig& cfg);

}  // namespace qdae::qsolve
