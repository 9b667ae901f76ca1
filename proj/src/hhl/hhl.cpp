#include "qdae/hhl/hhl.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "qdae/error.hpp"

namespace qdae::hhl {

namespace {

constexpr double kDyadicTol = 1e-9;
constexpr int kMaxDyadicClock = 30;
constexpr int kDefaultClock = 8;

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

bool is_hermitian(const Matrix& m) { return m.rows() == m.cols() && (m - m.adjoint()).cwiseAbs().maxCoeff() <= 1e-12; }

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// Clock index (two's complement when signed) for a rounded phase k.
std::size_t clock_index(long long k, int nc) {
    const long long mod = 1LL << nc;
    return static_cast<std::size_t>(((k % mod) + mod) % mod);
}

long long clock_round(double lambda, const HhlConfig& cfg) {
    const double scale = std::ldexp(1.0, cfg.clock_qubits);
    const double phase = lambda * cfg.t / (2.0 * std::numbers::pi);
    const double lo = cfg.signed_phases ? -0.5 : 0.0;
    const double hi = cfg.signed_phases ? 0.5 : 1.0;
    const long long k = std::llround(phase * scale);
    const long long kmin = std::llround(lo * scale);
    const long long kmax = std::llround(hi * scale) - 1;
    if (k < kmin || k > kmax)
        throw ConfigError("eigenvalue " + fmt(lambda) + " has phase " + fmt(phase) + " outside the clock window [" +
                          fmt(lo) + ", " + fmt(hi) + ")");
    if (k == 0) throw ConfigError("eigenvalue " + fmt(lambda) + " rounds to zero on a " +
                                  std::to_string(cfg.clock_qubits) + "-qubit clock");
    return k;
}

void check_config(const HhlConfig& cfg) {
    if (cfg.clock_qubits < 1 || cfg.clock_qubits > 52) throw ConfigError("clock qubits must be in [1, 52]");
    if (!(cfg.t > 0.0)) throw ConfigError("evolution time must be positive");
    if (!(cfg.c > 0.0)) throw ConfigError("rotation scale c must be positive");
}

struct Branches {
    Eigen::VectorXcd beta;     // <u_j|b>
    Eigen::VectorXd lambda;    // clock eigenvalues
    std::vector<long long> k;  // clock readings
};

Branches branches(const LinearSystem& sys, const HhlConfig& cfg, const Spectrum& spec) {
    check_config(cfg);
    if (spec.vectors.rows() != sys.m.rows()) throw ConfigError("spectrum does not match the system");
    Branches br;
    br.beta = spec.vectors.adjoint() * sys.b;
    br.lambda.resize(spec.values.size());
    for (Eigen::Index j = 0; j < spec.values.size(); ++j) {
        long long k = clock_round(spec.values(j), cfg);
        br.k.push_back(k);
        br.lambda(j) = 2.0 * std::numbers::pi * static_cast<double>(k) / (std::ldexp(1.0, cfg.clock_qubits) * cfg.t);
        if (std::abs(cfg.c / br.lambda(j)) > 1.0 + 1e-12)
            throw ConfigError("rotation scale c = " + fmt(cfg.c) + " exceeds clock eigenvalue " + fmt(br.lambda(j)));
    }
    return br;
}

}  // namespace

LinearSystem hermitian_embed(const Matrix& m, const Vector& b) {
    if (m.rows() != m.cols()) throw ConfigError("system matrix must be square");
    if (b.size() != m.rows()) throw ConfigError("right-hand side has the wrong length");
    const double bn = b.norm();
    if (bn == 0.0) throw ConfigError("right-hand side is zero");
    const auto n = static_cast<std::size_t>(m.rows());
    const auto p = static_cast<Eigen::Index>(next_pow2(n));
    const auto ni = static_cast<Eigen::Index>(n);

    Matrix padded = Matrix::Identity(p, p);
    padded.topLeftCorner(ni, ni) = m;
    Vector bp = Vector::Zero(p);
    bp.head(ni) = b / bn;

    LinearSystem sys;
    sys.b_norm = bn;
    sys.size = n;
    if (is_hermitian(m)) {
        sys.m = std::move(padded);
        sys.b = std::move(bp);
        sys.offset = 0;
        return sys;
    }
    sys.embedded = true;
    sys.m = Matrix::Zero(2 * p, 2 * p);
    sys.m.topRightCorner(p, p) = padded;
    sys.m.bottomLeftCorner(p, p) = padded.adjoint();
    sys.b = Vector::Zero(2 * p);
    sys.b.head(p) = bp;
    sys.offset = static_cast<std::size_t>(p);
    return sys;
}

Spectrum decompose(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
    if (es.info() != Eigen::Success) throw ConvergenceError("eigendecomposition failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

HhlConfig choose_config(const Matrix& m) {
    if (!is_hermitian(m)) throw ConfigError("choose_config needs a Hermitian matrix");
    Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(m, Eigen::EigenvaluesOnly).eigenvalues();
    const double amax = ev.cwiseAbs().maxCoeff();
    const double amin = ev.cwiseAbs().minCoeff();
    if (amin == 0.0) throw SingularMatrixError("matrix has a zero eigenvalue");

    HhlConfig cfg;
    cfg.signed_phases = ev.minCoeff() < 0.0;
    // Unsigned: the largest eigenvalue sits at phase 1/2. Signed: max |lambda| at 3/8.
    const double top = cfg.signed_phases ? 0.375 : 0.5;
    cfg.t = 2.0 * std::numbers::pi * top / amax;
    cfg.c = 0.9 * amin;
    cfg.clock_qubits = kDefaultClock;
    for (int nc = 1; nc <= kMaxDyadicClock; ++nc) {
        const double scale = std::ldexp(1.0, nc);
        bool exact = true;
        for (Eigen::Index j = 0; j < ev.size() && exact; ++j) {
            double x = ev(j) * cfg.t / (2.0 * std::numbers::pi) * scale;
            double r = std::round(x);
            exact = std::abs(x - r) <= kDyadicTol * scale && r != 0.0;
            if (cfg.signed_phases) exact = exact && r >= -scale / 2 && r <= scale / 2 - 1;
            else exact = exact && r <= scale - 1;
        }
        if (exact) {
            cfg.clock_qubits = nc;
            break;
        }
    }
    return cfg;
}

double clock_eigenvalue(double lambda, const HhlConfig& cfg) {
    check_config(cfg);
    long long k = clock_round(lambda, cfg);
    return 2.0 * std::numbers::pi * static_cast<double>(k) / (std::ldexp(1.0, cfg.clock_qubits) * cfg.t);
}

Result solve(const LinearSystem& sys, const HhlConfig& cfg) { return solve(sys, cfg, decompose(sys.m)); }

Result solve(const LinearSystem& sys, const HhlConfig& cfg, const Spectrum& spec) {
    Branches br = branches(sys, cfg, spec);
    // Ancilla-1 amplitudes in the eigenbasis: beta_j * c / lambda_j.
    Eigen::VectorXcd amp(br.beta.size());
    double inv2 = 0.0;
    for (Eigen::Index j = 0; j < amp.size(); ++j) {
        amp(j) = br.beta(j) * (cfg.c / br.lambda(j));
        inv2 += std::norm(br.beta(j)) / (br.lambda(j) * br.lambda(j));
    }
    Result r;
    r.probability = cfg.c * cfg.c * inv2;
    if (r.probability < 1e-14)
        throw EmptyBranchError("ancilla branch probability " + fmt(r.probability) + " below 1e-14");
    Vector s = spec.vectors * amp;
    r.direction = s / s.norm();
    r.norm = sys.b_norm * std::sqrt(inv2);
    return r;
}

Vector extract(const LinearSystem& sys, const Result& r) {
    return r.norm * r.direction.segment(static_cast<Eigen::Index>(sys.offset), static_cast<Eigen::Index>(sys.size));
}

namespace {

qcore::QuantumState materialize(const LinearSystem& sys, const HhlConfig& cfg, bool uncomputed) {
    const auto dim = static_cast<std::size_t>(sys.m.rows());
    int nin = 0;
    while ((std::size_t{1} << nin) < dim) ++nin;
    if (nin == 0) nin = 1;
    if (cfg.clock_qubits + nin + 1 > 22) throw ConfigError("register too large to materialize");
    Spectrum spec = decompose(sys.m);
    Branches br = branches(sys, cfg, spec);

    const std::size_t in_dim = std::size_t{1} << nin;
    std::vector<cplx> amps((std::size_t{1} << cfg.clock_qubits) * in_dim * 2);
    for (Eigen::Index j = 0; j < br.beta.size(); ++j) {
        const double ratio = cfg.c / br.lambda(j);
        const double keep = std::sqrt(std::max(0.0, 1.0 - ratio * ratio));
        const std::size_t clk = uncomputed ? 0 : clock_index(br.k[static_cast<std::size_t>(j)], cfg.clock_qubits);
        for (std::size_t i = 0; i < dim; ++i) {
            cplx a = br.beta(j) * spec.vectors(static_cast<Eigen::Index>(i), j);
            std::size_t base = ((clk * in_dim) + i) * 2;
            amps[base] += a * keep;
            amps[base + 1] += a * ratio;
        }
    }
    return qcore::QuantumState(std::move(amps),
                               {{"clock", cfg.clock_qubits}, {"input", nin}, {"ancilla", 1}});
}

}  // namespace

qcore::QuantumState state_after_rotation(const LinearSystem& sys, const HhlConfig& cfg) {
    return materialize(sys, cfg, false);
}

qcore::QuantumState state_after_uncompute(const LinearSystem& sys, const HhlConfig& cfg) {
    return materialize(sys, cfg, true);
}

}  // namespace qdae::hhl
