#include "qdae/qcore/state.hpp"

#include <cmath>
#include <set>

#include "qdae/error.hpp"
#include "qdae/kernels/dense.hpp"

namespace qdae::qcore {

namespace {

constexpr double kNormTol = 1e-10;
constexpr double kHermTol = 1e-12;
constexpr double kEmptyBranch = 1e-14;

double norm2(std::span<const cplx> v) {
    double s = 0.0;
    for (const auto& a : v) s += std::norm(a);
    return s;
}

int log2_exact(std::size_t n) {
    if (n == 0 || (n & (n - 1)) != 0) return -1;
    int q = 0;
    while ((std::size_t{1} << q) < n) ++q;
    return q;
}

void check_layout(const std::vector<Register>& layout) {
    std::set<std::string, std::less<>> names;
    for (const auto& r : layout) {
        if (r.qubits < 1) throw ConfigError("register '" + r.name + "' must have at least one qubit");
        if (!names.insert(r.name).second) throw ConfigError("duplicate register name '" + r.name + "'");
    }
}

}  // namespace

int total_qubits(const std::vector<Register>& layout) {
    int n = 0;
    for (const auto& r : layout) n += r.qubits;
    return n;
}

QuantumState::QuantumState(std::vector<cplx> amplitudes, std::vector<Register> layout, bool normalized)
    : amps_(std::move(amplitudes)), layout_(std::move(layout)), normalized_(normalized) {
    check_layout(layout_);
    qubits_ = total_qubits(layout_);
    if (qubits_ > 30 || amps_.size() != (std::size_t{1} << qubits_))
        throw ConfigError("amplitude count " + std::to_string(amps_.size()) + " does not match " +
                          std::to_string(qubits_) + " qubits");
    if (normalized_ && std::abs(norm2(amps_) - 1.0) > kNormTol)
        throw ConfigError("state is not normalized (norm^2 = " + std::to_string(norm2(amps_)) + ")");
}

QuantumState QuantumState::basis(std::vector<Register> layout, std::size_t index) {
    std::vector<cplx> a(std::size_t{1} << total_qubits(layout));
    if (index >= a.size()) throw ConfigError("basis index out of range");
    a[index] = 1.0;
    return QuantumState(std::move(a), std::move(layout));
}

double QuantumState::norm() const { return std::sqrt(norm2(amps_)); }

QuantumState QuantumState::relabel(std::vector<Register> layout) const {
    if (total_qubits(layout) != qubits_) throw ConfigError("relabel must keep the qubit count");
    return QuantumState(amps_, std::move(layout), normalized_);
}

QuantumState QuantumState::normalize() const {
    double n = norm();
    if (n == 0.0) throw DomainError("cannot normalize the zero vector");
    std::vector<cplx> a(amps_);
    for (auto& x : a) x /= n;
    return QuantumState(std::move(a), layout_, true);
}

LinearOperator::LinearOperator(Matrix m, bool hermitian) : m_(std::move(m)), hermitian_(hermitian) {
    if (m_.rows() != m_.cols()) throw ConfigError("operator must be square");
    qubits_ = log2_exact(static_cast<std::size_t>(m_.rows()));
    if (qubits_ < 0) throw ConfigError("operator dimension must be a power of two");
    if (hermitian_) {
        double dev = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
        if (dev > kHermTol) throw ConfigError("operator flagged Hermitian deviates by " + std::to_string(dev));
    }
}

LinearOperator LinearOperator::identity(int qubits) {
    auto n = static_cast<Eigen::Index>(std::size_t{1} << qubits);
    return LinearOperator(Matrix::Identity(n, n), true);
}

std::vector<cplx> LinearOperator::apply(std::span<const cplx> v) const {
    if (v.size() != dim()) throw ConfigError("operator/vector dimension mismatch");
    std::vector<cplx> out(dim());
    kernels::matvec(m_.data(), v.data(), out.data(), dim(), dim());
    return out;
}

QuantumState LinearOperator::apply(const QuantumState& s) const {
    return QuantumState(apply(std::span<const cplx>(s.amplitudes())), s.layout(), false);
}

QuantumState tensor(const QuantumState& a, const QuantumState& b) {
    std::vector<Register> layout = a.layout();
    layout.insert(layout.end(), b.layout().begin(), b.layout().end());
    std::vector<cplx> amps(a.dim() * b.dim());
    for (std::size_t i = 0; i < a.dim(); ++i)
        for (std::size_t j = 0; j < b.dim(); ++j) amps[i * b.dim() + j] = a.amplitudes()[i] * b.amplitudes()[j];
    return QuantumState(std::move(amps), std::move(layout), a.normalized() && b.normalized());
}

LinearOperator tensor(const LinearOperator& a, const LinearOperator& b) {
    const auto na = a.matrix().rows(), nb = b.matrix().rows();
    Matrix m(na * nb, na * nb);
    for (Eigen::Index i = 0; i < na; ++i)
        for (Eigen::Index j = 0; j < na; ++j) m.block(i * nb, j * nb, nb, nb) = a.matrix()(i, j) * b.matrix();
    return LinearOperator(std::move(m), a.hermitian() && b.hermitian());
}

LinearOperator evolve(const LinearOperator& h, double t, int k) {
    if (k < 1) throw ConfigError("Taylor truncation order must be >= 1");
    const auto n = static_cast<Eigen::Index>(h.dim());
    const std::size_t d = h.dim();
    Matrix step = cplx(0.0, -t) * h.matrix();
    Matrix term = Matrix::Identity(n, n);
    Matrix sum = term;
    Matrix next(n, n);
    for (int j = 1; j <= k; ++j) {
        kernels::matmul(term.data(), step.data(), next.data(), d, d, d);
        next /= static_cast<double>(j);
        term.swap(next);
        sum += term;
    }
    return LinearOperator(std::move(sum));
}

QuantumState evolve_apply(const Action& h, const QuantumState& s, double t, int k) {
    if (k < 1) throw ConfigError("Taylor truncation order must be >= 1");
    const std::size_t d = s.dim();
    std::vector<cplx> sum(s.amplitudes());
    std::vector<cplx> term(s.amplitudes());
    std::vector<cplx> next(d);
    for (int j = 1; j <= k; ++j) {
        h(term, next);
        const cplx f(0.0, -t / j);
        for (std::size_t i = 0; i < d; ++i) {
            term[i] = f * next[i];
            sum[i] += term[i];
        }
    }
    return QuantumState(std::move(sum), s.layout(), false);
}

QuantumState evolve_apply(const LinearOperator& h, const QuantumState& s, double t, int k) {
    if (h.dim() != s.dim()) throw ConfigError("operator/state dimension mismatch");
    return evolve_apply(
        [&h](std::span<const cplx> v, std::span<cplx> out) {
            kernels::matvec(h.matrix().data(), v.data(), out.data(), h.dim(), h.dim());
        },
        s, t, k);
}

Postselected postselect(const QuantumState& s, std::string_view reg, std::size_t outcome) {
    const auto& layout = s.layout();
    int below = 0;  // qubits less significant than the register
    std::size_t pos = layout.size();
    for (std::size_t i = layout.size(); i-- > 0;) {
        if (layout[i].name == reg) {
            pos = i;
            break;
        }
        below += layout[i].qubits;
    }
    if (pos == layout.size()) throw ConfigError("no register named '" + std::string(reg) + "'");
    if (layout.size() == 1) throw ConfigError("cannot post-select the only register");
    const int width = layout[pos].qubits;
    if (outcome >= (std::size_t{1} << width)) throw ConfigError("outcome out of register range");

    const std::size_t low = std::size_t{1} << below;
    const std::size_t high = s.dim() >> (below + width);
    std::vector<cplx> kept(low * high);
    for (std::size_t h = 0; h < high; ++h)
        for (std::size_t l = 0; l < low; ++l)
            kept[h * low + l] = s.amplitudes()[(((h << width) | outcome) << below) | l];

    const double total = norm2(s.amplitudes());
    const double branch = norm2(kept);
    const double p = total > 0.0 ? branch / total : 0.0;
    if (!(p >= kEmptyBranch))
        throw EmptyBranchError("post-selection of " + std::string(reg) + "=" + std::to_string(outcome) +
                               " has probability " + std::to_string(p));
    const double scale = 1.0 / std::sqrt(branch);
    for (auto& a : kept) a *= scale;
    std::vector<Register> rest;
    for (std::size_t i = 0; i < layout.size(); ++i)
        if (i != pos) rest.push_back(layout[i]);
    return {QuantumState(std::move(kept), std::move(rest)), p};
}

std::vector<cplx> amplitudes(const QuantumState& s) { return s.amplitudes(); }

}  // namespace qdae::qcore
