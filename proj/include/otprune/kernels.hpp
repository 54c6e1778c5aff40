#pragma once

#include <cstddef>
#include <vector>

// Dense kernels backing the tape. Each kernel has a serial reference
// implementation and an OpenMP variant parallelized over output elements.
// Every output element is reduced serially by exactly one thread, so the
// parallel results are bit-identical to the serial reference for any
// thread count.

namespace otp::kern {

// C[r x m] = A[r x k] * B[k x m], row-major.
void mm_nn_serial(const double* a, const double* b, double* c, int r, int k, int m);
void mm_nn(const double* a, const double* b, double* c, int r, int k, int m);

// C[r x m] = A[r x k] * B[m x k]^T.
void mm_nt_serial(const double* a, const double* b, double* c, int r, int k, int m);
void mm_nt(const double* a, const double* b, double* c, int r, int k, int m);

// C[k x m] = A[r x k]^T * B[r x m].
void mm_tn_serial(const double* a, const double* b, double* c, int r, int k, int m);
void mm_tn(const double* a, const double* b, double* c, int r, int k, int m);

// y[r] = M[r x c] * x[c].
void matvec_serial(const double* m, const double* x, double* y, int r, int c);
void matvec(const double* m, const double* x, double* y, int r, int c);

// Work threshold (multiply-adds) below which the dispatching kernels stay
// serial; OpenMP spawn overhead dominates under it on small batches.
inline constexpr long kParallelWorkThreshold = 1 << 16;

// log(sum_i exp(x[i*stride])) over n strided entries, max-shifted.
// All entries -inf yields -inf.
double logsumexp(const double* x, int n, int stride = 1);

}  // namespace otp::kern
