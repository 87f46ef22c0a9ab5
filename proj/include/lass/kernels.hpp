#pragma once

#include <cstddef>

// Unrolled inner loops for the hot paths. Strict FP mode keeps the compiler
// from vectorizing reductions on its own; eight independent accumulators give
// it a reassociation-free SIMD mapping. Accumulation order is fixed, so
// results stay bit-deterministic run to run.
namespace lass::ad {

template <typename S>
inline double dot_n(const S* a, const S* b, size_t n) {
  double c0 = 0, c1 = 0, c2 = 0, c3 = 0, c4 = 0, c5 = 0, c6 = 0, c7 = 0;
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    c0 += static_cast<double>(a[i]) * b[i];
    c1 += static_cast<double>(a[i + 1]) * b[i + 1];
    c2 += static_cast<double>(a[i + 2]) * b[i + 2];
    c3 += static_cast<double>(a[i + 3]) * b[i + 3];
    c4 += static_cast<double>(a[i + 4]) * b[i + 4];
    c5 += static_cast<double>(a[i + 5]) * b[i + 5];
    c6 += static_cast<double>(a[i + 6]) * b[i + 6];
    c7 += static_cast<double>(a[i + 7]) * b[i + 7];
  }
  double tail = 0;
  for (; i < n; ++i) tail += static_cast<double>(a[i]) * b[i];
  return ((c0 + c1) + (c2 + c3)) + ((c4 + c5) + (c6 + c7)) + tail;
}

template <typename S>
inline double sum_n(const S* a, size_t n) {
  double c0 = 0, c1 = 0, c2 = 0, c3 = 0;
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    c0 += static_cast<double>(a[i]);
    c1 += static_cast<double>(a[i + 1]);
    c2 += static_cast<double>(a[i + 2]);
    c3 += static_cast<double>(a[i + 3]);
  }
  double tail = 0;
  for (; i < n; ++i) tail += static_cast<double>(a[i]);
  return (c0 + c1) + (c2 + c3) + tail;
}

// y[i] += a * x[i]
template <typename S>
inline void axpy_n(S* y, const S* x, S a, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace lass::ad
