#pragma once

#include <cstddef>

// Dense kernels behind the model's linear algebra. Every kernel exists in a
// serial reference form and an OpenMP form that splits work over disjoint
// output rows only; the per-element reduction order is identical in both, so
// results are bitwise equal for any thread count. The serial forms are the
// ground truth the parallel forms are tested against.
//
// Matrix layout is row-major throughout.

namespace unmtlab::kernels {

inline int g_threads = 1;
inline void set_threads(int n) { g_threads = n < 1 ? 1 : n; }
inline int threads() { return g_threads; }

// Fixed-order dot product. Per-lane partial sums keep the loop vectorizable
// without reassociating the reduction; the horizontal sum order is fixed.
template <typename T>
inline T dot_span(const T* __restrict__ a, const T* __restrict__ b, size_t k) {
  constexpr size_t kLanes = 16;
  T acc[kLanes] = {};
  size_t i = 0;
  for (; i + kLanes <= k; i += kLanes) {
    for (size_t l = 0; l < kLanes; ++l) acc[l] += a[i + l] * b[i + l];
  }
  T tail{};
  for (; i < k; ++i) tail += a[i] * b[i];
  T s{};
  for (size_t l = 0; l < kLanes; ++l) s += acc[l];
  return s + tail;
}

template <typename T>
inline void axpy_span(T* __restrict__ y, T a, const T* __restrict__ x, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

namespace serial {

// C[m,n] = A[m,k] * B[n,k]^T   (both operands scanned along contiguous rows)
template <typename T>
void matmul_nt(T* __restrict__ c, const T* __restrict__ a, const T* __restrict__ b,
               size_t m, size_t n, size_t k, bool accumulate = false) {
  for (size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    T* ci = c + i * n;
    for (size_t j = 0; j < n; ++j) {
      T v = dot_span(ai, b + j * k, k);
      ci[j] = accumulate ? ci[j] + v : v;
    }
  }
}

// C[m,n] = A[m,k] * B[k,n]   (inner loop is an axpy over contiguous B rows)
template <typename T>
void matmul_nn(T* __restrict__ c, const T* __restrict__ a, const T* __restrict__ b,
               size_t m, size_t n, size_t k, bool accumulate = false) {
  for (size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    if (!accumulate) {
      for (size_t j = 0; j < n; ++j) ci[j] = T{};
    }
    const T* ai = a + i * k;
    for (size_t r = 0; r < k; ++r) axpy_span(ci, ai[r], b + r * n, n);
  }
}

// C[m,n] = A[k,m]^T * B[k,n]  (gradient of weights: dW = dY^T * X)
template <typename T>
void matmul_tn(T* __restrict__ c, const T* __restrict__ a, const T* __restrict__ b,
               size_t m, size_t n, size_t k, bool accumulate = false) {
  for (size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    if (!accumulate) {
      for (size_t j = 0; j < n; ++j) ci[j] = T{};
    }
    for (size_t r = 0; r < k; ++r) axpy_span(ci, a[r * m + i], b + r * n, n);
  }
}

}  // namespace serial

namespace omp {

template <typename T>
void matmul_nt(T* __restrict__ c, const T* __restrict__ a, const T* __restrict__ b,
               size_t m, size_t n, size_t k, bool accumulate = false) {
#pragma omp parallel for schedule(static) num_threads(g_threads)
  for (size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    T* ci = c + i * n;
    for (size_t j = 0; j < n; ++j) {
      T v = dot_span(ai, b + j * k, k);
      ci[j] = accumulate ? ci[j] + v : v;
    }
  }
}

template <typename T>
void matmul_nn(T* __restrict__ c, const T* __restrict__ a, const T* __restrict__ b,
               size_t m, size_t n, size_t k, bool accumulate = false) {
#pragma omp parallel for schedule(static) num_threads(g_threads)
  for (size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    if (!accumulate) {
      for (size_t j = 0; j < n; ++j) ci[j] = T{};
    }
    const T* ai = a + i * k;
    for (size_t r = 0; r < k; ++r) axpy_span(ci, ai[r], b + r * n, n);
  }
}

template <typename T>
void matmul_tn(T* __restrict__ c, const T* __restrict__ a, const T* __restrict__ b,
               size_t m, size_t n, size_t k, bool accumulate = false) {
#pragma omp parallel for schedule(static) num_threads(g_threads)
  for (size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    if (!accumulate) {
      for (size_t j = 0; j < n; ++j) ci[j] = T{};
    }
    for (size_t r = 0; r < k; ++r) axpy_span(ci, a[r * m + i], b + r * n, n);
  }
}

}  // namespace omp

// Dispatchers used by the model. With one thread they take the serial path.
template <typename T>
inline void matmul_nt(T* c, const T* a, const T* b, size_t m, size_t n, size_t k,
                      bool accumulate = false) {
  if (g_threads > 1)
    omp::matmul_nt(c, a, b, m, n, k, accumulate);
  else
    serial::matmul_nt(c, a, b, m, n, k, accumulate);
}

template <typename T>
inline void matmul_nn(T* c, const T* a, const T* b, size_t m, size_t n, size_t k,
                      bool accumulate = false) {
  if (g_threads > 1)
    omp::matmul_nn(c, a, b, m, n, k, accumulate);
  else
    serial::matmul_nn(c, a, b, m, n, k, accumulate);
}

template <typename T>
inline void matmul_tn(T* c, const T* a, const T* b, size_t m, size_t n, size_t k,
                      bool accumulate = false) {
  if (g_threads > 1)
    omp::matmul_tn(c, a, b, m, n, k, accumulate);
  else
    serial::matmul_tn(c, a, b, m, n, k, accumulate);
}

}  // namespace unmtlab::kernels
