#include "otprune/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace otp::kern {

namespace {
inline bool big_enough(long r, long k, long m) {
#ifdef OTPRUNE_HAVE_OPENMP
  return r * k * m >= kParallelWorkThreshold;
#else
  (void)r;
  (void)k;
  (void)m;
  return false;
#endif
}
}  // namespace

void mm_nn_serial(const double* a, const double* b, double* c, int r, int k, int m) {
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += a[i * k + t] * b[t * m + j];
      c[i * m + j] = acc;
    }
  }
}

void mm_nn(const double* a, const double* b, double* c, int r, int k, int m) {
  if (!big_enough(r, k, m)) {
    mm_nn_serial(a, b, c, r, k, m);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += a[i * k + t] * b[t * m + j];
      c[i * m + j] = acc;
    }
  }
}

void mm_nt_serial(const double* a, const double* b, double* c, int r, int k, int m) {
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += a[i * k + t] * b[j * k + t];
      c[i * m + j] = acc;
    }
  }
}

void mm_nt(const double* a, const double* b, double* c, int r, int k, int m) {
  if (!big_enough(r, k, m)) {
    mm_nt_serial(a, b, c, r, k, m);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += a[i * k + t] * b[j * k + t];
      c[i * m + j] = acc;
    }
  }
}

void mm_tn_serial(const double* a, const double* b, double* c, int r, int k, int m) {
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int t = 0; t < r; ++t) acc += a[t * k + i] * b[t * m + j];
      c[i * m + j] = acc;
    }
  }
}

void mm_tn(const double* a, const double* b, double* c, int r, int k, int m) {
  if (!big_enough(r, k, m)) {
    mm_tn_serial(a, b, c, r, k, m);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int t = 0; t < r; ++t) acc += a[t * k + i] * b[t * m + j];
      c[i * m + j] = acc;
    }
  }
}

void matvec_serial(const double* m, const double* x, double* y, int r, int c) {
  for (int i = 0; i < r; ++i) {
    double acc = 0.0;
    for (int j = 0; j < c; ++j) acc += m[i * c + j] * x[j];
    y[i] = acc;
  }
}

void matvec(const double* m, const double* x, double* y, int r, int c) {
  if (!big_enough(r, c, 1)) {
    matvec_serial(m, x, y, r, c);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < r; ++i) {
    double acc = 0.0;
    for (int j = 0; j < c; ++j) acc += m[i * c + j] * x[j];
    y[i] = acc;
  }
}

double logsumexp(const double* x, int n, int stride) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) mx = std::max(mx, x[i * stride]);
  if (!std::isfinite(mx)) return mx;  // all -inf (or a stray +inf propagates)
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::exp(x[i * stride] - mx);
  return mx + std::log(acc);
}

}  // namespace otp::kern
