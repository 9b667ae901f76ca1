#include "qdae/kernels/dense.hpp"


#ifdef QDAE_HAVE_OPENMP
#include <omp.h>
#endif

namespace qdae::kernels {

namespace {

constexpr std::size_t kParallelThreshold = 1u << 14;  // multiply-adds

inline cplx dot_row(const cplx* row, const cplx* x, std::size_t n) {
    double re = 0.0, im = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double ar = row[j].real(), ai = row[j].imag();
        const double xr = x[j].real(), xi = x[j].imag();
        re += ar * xr - ai * xi;
        im += ar * xi + ai * xr;
    }
    return {re, im};
}

// One output row of C = A B, accumulated over k in ascending order.
inline void gemm_row(const cplx* arow, const cplx* b, cplx* crow, std::size_t k, std::size_t m) {
    for (std::size_t j = 0; j < m; ++j) crow[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
        const cplx av = arow[p];
        if (av == cplx(0.0)) continue;
        const cplx* brow = b + p * m;
        for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
}

}  // namespace

void matvec_serial(const cplx* a, const cplx* x, cplx* y, std::size_t rows, std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) y[i] = dot_row(a + i * cols, x, cols);
}

void matvec_omp(const cplx* a, const cplx* x, cplx* y, std::size_t rows, std::size_t cols) {
#ifdef QDAE_HAVE_OPENMP
    const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) y[i] = dot_row(a + static_cast<std::size_t>(i) * cols, x, cols);
#else
    matvec_serial(a, x, y, rows, cols);
#endif
}

void matmul_serial(const cplx* a, const cplx* b, cplx* c, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) gemm_row(a + i * k, b, c + i * m, k, m);
}

void matmul_omp(const cplx* a, const cplx* b, cplx* c, std::size_t n, std::size_t k, std::size_t m) {
#ifdef QDAE_HAVE_OPENMP
    const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        const auto r = static_cast<std::size_t>(i);
        gemm_row(a + r * k, b, c + r * m, k, m);
    }
#else
    matmul_serial(a, b, c, n, k, m);
#endif
}

void matvec(const cplx* a, const cplx* x, cplx* y, std::size_t rows, std::size_t cols) {
    if (parallel_enabled() && rows * cols >= kParallelThreshold)
        matvec_omp(a, x, y, rows, cols);
    else
        matvec_serial(a, x, y, rows, cols);
}

void matmul(const cplx* a, const cplx* b, cplx* c, std::size_t n, std::size_t k, std::size_t m) {
    if (parallel_enabled() && n * k * m >= kParallelThreshold)
        matmul_omp(a, b, c, n, k, m);
    else
        matmul_serial(a, b, c, n, k, m);
}

bool parallel_enabled() noexcept {
#ifdef QDAE_HAVE_OPENMP
    return omp_get_max_threads() > 1;
#else
    return false;
#endif
}

}  // namespace qdae::kernels
