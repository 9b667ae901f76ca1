#pragma once

// Dense complex kernels on row-major storage.
//
// Every output element is produced by one thread with a fixed inner summation
// order, so the parallel and serial variants agree bit for bit.

#include <complex>
#include <cstddef>

namespace qdae::kernels {

using cplx = std::complex<double>;

/// y = A x, A is rows x cols.
void matvec_serial(const cplx* a, const cplx* x, cplx* y, std::size_t rows, std::size_t cols);
void matvec_omp(const cplx* a, const cplx* x, cplx* y, std::size_t rows, std::size_t cols);

/// C = A B, A is n x k, B is k x m.
void matmul_serial(const cplx* a, const cplx* b, cplx* c, std::size_t n, std::size_t k, std::size_t m);
void matmul_omp(const cplx* a, const cplx* b, cplx* c, std::size_t n, std::size_t k, std::size_t m);

/// Picks the parallel kernel when it is compiled in and the problem is big enough.
void matvec(const cplx* a, const cplx* x, cplx* y, std::size_t rows, std::size_t cols);
void matmul(const cplx* a, const cplx* b, cplx* c, std::size_t n, std::size_t k, std::size_t m);

bool parallel_enabled() noexcept;

}  // namespace qdae::kernels
