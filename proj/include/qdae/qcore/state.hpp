#pragma once

// Dense state-vector simulation.
//
// Basis ordering: registers are listed most significant first, so for a layout
// {a, b} the basis index is (value_a << qubits_b) | value_b.

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace qdae::qcore {

using cplx = std::complex<double>;
using Matrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Register {
    std::string name;
    int qubits = 0;
};

int total_qubits(const std::vector<Register>& layout);

class QuantumState {
public:
    /// `normalized` states must have unit norm to 1e-10; pass false for
    /// intermediate results such as truncated-Taylor evolutions.
    QuantumState(std::vector<cplx> amplitudes, std::vector<Register> layout, bool normalized = true);

    static QuantumState basis(std::vector<Register> layout, std::size_t index);

    const std::vector<cplx>& amplitudes() const noexcept { return amps_; }
    const std::vector<Register>& layout() const noexcept { return layout_; }
    std::size_t dim() const noexcept { return amps_.size(); }
    int qubits() const noexcept { return qubits_; }
    bool normalized() const noexcept { return normalized_; }
    double norm() const;

    /// Same amplitudes under new register names/sizes (total qubits must match).
    QuantumState relabel(std::vector<Register> layout) const;
    /// Scales to unit norm and marks the result normalized.
    QuantumState normalize() const;

private:
    std::vector<cplx> amps_;
    std::vector<Register> layout_;
    int qubits_ = 0;
    bool normalized_ = true;
};

class LinearOperator {
public:
    LinearOperator() = default;
    /// Throws ConfigError if the matrix is not square with a power-of-two
    /// dimension, or if `hermitian` is claimed but ||M - M^H||_max > 1e-12.
    explicit LinearOperator(Matrix m, bool hermitian = false);

    static LinearOperator identity(int qubits);

    const Matrix& matrix() const noexcept { return m_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(m_.rows()); }
    int qubits() const noexcept { return qubits_; }
    bool hermitian() const noexcept { return hermitian_; }

    std::vector<cplx> apply(std::span<const cplx> v) const;
    QuantumState apply(const QuantumState& s) const;

private:
    Matrix m_;
    int qubits_ = 0;
    bool hermitian_ = false;
};

/// Matrix-free operator action: out = H v.
using Action = std::function<void(std::span<const cplx> v, std::span<cplx> out)>;

QuantumState tensor(const QuantumState& a, const QuantumState& b);
LinearOperator tensor(const LinearOperator& a, const LinearOperator& b);

/// Propagator sum_{j=0..K} (-iHt)^j / j!.
LinearOperator evolve(const LinearOperator& h, double t, int k);
/// Applies the truncated series to a state without forming the propagator.
/// The result is marked unnormalized.
QuantumState evolve_apply(const LinearOperator& h, const QuantumState& s, double t, int k);
QuantumState evolve_apply(const Action& h, const QuantumState& s, double t, int k);

struct Postselected {
    QuantumState state;
    double probability = 0.0;
};

/// Keeps the branch where `reg` reads `outcome`, drops that register and
/// renormalizes. probability is the branch mass over the total mass.
/// Throws EmptyBranchError when probability < 1e-14.
Postselected postselect(const QuantumState& s, std::string_view reg, std::size_t outcome);

std::vector<cplx> amplitudes(const QuantumState& s);

}  // namespace qdae::qcore
