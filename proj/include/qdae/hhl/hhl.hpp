#pragma once

// Simulated HHL. Phase estimation is carried out on the exact eigenbasis of M
// with the clock register's binary-fraction rounding applied to each phase;
// the conditioned rotation and ancilla post-selection follow from there.

#include <cstddef>

#include <Eigen/Dense>

#include "qdae/qcore/state.hpp"

namespace qdae::hhl {

using qcore::cplx;
using qcore::Matrix;
using Vector = Eigen::VectorXcd;

struct LinearSystem {
    Matrix m;             // Hermitian, power-of-two dimension
    Vector b;             // unit norm
    double b_norm = 1.0;  // norm of the caller's right-hand side
    bool embedded = false;
    std::size_t size = 0;    // caller's dimension
    std::size_t offset = 0;  // where the caller's solution starts inside s
};

/// Pads M (identity) and b (zeros) to a power of two. Hermitian input is kept
/// as is; otherwise returns [[0, M], [M^H, 0]] with b_hat = [b; 0], whose
/// solution carries M^{-1} b in its lower block.
LinearSystem hermitian_embed(const Matrix& m, const Vector& b);

struct HhlConfig {
    int clock_qubits = 8;
    double t = 1.0;                // U = exp(iMt)
    double c = 0.0;                // rotation scale, c <= min |lambda|
    bool signed_phases = true;     // two's-complement clock readout
};

HhlConfig choose_config(const Matrix& m);

/// Eigendecomposition of a Hermitian matrix, reusable across right-hand sides.
struct Spectrum {
    Eigen::VectorXd values;
    Matrix vectors;  // columns are eigenvectors
};

Spectrum decompose(const Matrix& m);

/// Eigenvalue as read back from the clock register. Throws ConfigError if the
/// phase falls outside the clock window or rounds to zero.
double clock_eigenvalue(double lambda, const HhlConfig& cfg);

struct Result {
    Vector direction;          // unit vector proportional to M^{-1} b
    double norm = 0.0;         // estimate of ||M^{-1} b|| for the caller's b
    double probability = 0.0;  // ancilla = 1 branch mass
};

Result solve(const LinearSystem& sys, const HhlConfig& cfg);
Result solve(const LinearSystem& sys, const HhlConfig& cfg, const Spectrum& spec);

/// The caller's solution vector, norm and embedding undone.
Vector extract(const LinearSystem& sys, const Result& r);

/// Register contents right after the conditioned rotation, layout
/// {clock, input, ancilla}. Only for small instances (at most 22 qubits).
qcore::QuantumState state_after_rotation(const LinearSystem& sys, const HhlConfig& cfg);
/// Same after the clock has been uncomputed back to |0>.
qcore::QuantumState state_after_uncompute(const LinearSystem& sys, const HhlConfig& cfg);

}  // namespace qdae::hhl
