#include "canopi/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

// AVX2/FMA variants. Compiled with per-function target attributes so the
// translation unit builds regardless of the global -m flags; the dispatcher
// in kernels.cpp only selects these when CPUID reports avx2+fma.

namespace canopi::kernels::detail {

__attribute__((target("avx2,fma"))) void axpy_avx2(double* y, const double* x,
                                                   double a, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d y0 = _mm256_loadu_pd(y + i);
    __m256d y1 = _mm256_loadu_pd(y + i + 4);
    y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), y0);
    y1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), y1);
    _mm256_storeu_pd(y + i, y0);
    _mm256_storeu_pd(y + i + 4, y1);
  }
  for (; i + 4 <= n; i += 4) {
    __m256d y0 = _mm256_loadu_pd(y + i);
    y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), y0);
    _mm256_storeu_pd(y + i, y0);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

__attribute__((target("avx2,fma"))) void scale_sub_avx2(double* y, double scale,
                                                        const double* x,
                                                        double a,
                                                        std::size_t n) {
  const __m256d vs = _mm256_set1_pd(scale);
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_mul_pd(_mm256_loadu_pd(y + i), vs);
    yv = _mm256_fnmadd_pd(va, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] = y[i] * scale - a * x[i];
}

__attribute__((target("avx2,fma"))) void screen_column_avx2(
    double* out, const double* p, const double* lam, double pj,
    const double* cap, std::size_t n) {
  const __m256d vpj = _mm256_set1_pd(pj);
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d flow = _mm256_fmadd_pd(_mm256_loadu_pd(lam + i), vpj,
                                   _mm256_loadu_pd(p + i));
    flow = _mm256_andnot_pd(sign_mask, flow);  // |flow|
    _mm256_storeu_pd(out + i, _mm256_sub_pd(flow, _mm256_loadu_pd(cap + i)));
  }
  for (; i < n; ++i) {
    double f = p[i] + lam[i] * pj;
    out[i] = (f < 0 ? -f : f) - cap[i];
  }
}

__attribute__((target("avx2,fma"))) double dot_avx2(const double* x,
                                                    const double* y,
                                                    std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                           _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  acc0 = _mm256_add_pd(acc0, acc1);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc0);
  double s = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

}  // namespace canopi::kernels::detail

#endif  // x86_64
