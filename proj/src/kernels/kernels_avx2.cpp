#include <immintrin.h>

#include "cbf/kernels.hpp"

// Compiled with -mavx2 and -ffp-contract=off; only called after the runtime
// check in kernels.cpp.

namespace cbf::kernels::avx2 {

void project_halfspace(int m, std::size_t n, const double* u_des, const double* a,
                       const double* b, double* u_out, double* margin_out) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d dot = zero;
    __m256d norm2 = zero;
    for (int i = 0; i < m; ++i) {
      const __m256d ai = _mm256_loadu_pd(a + i * n + j);
      const __m256d ui = _mm256_loadu_pd(u_des + i * n + j);
      dot = _mm256_add_pd(dot, _mm256_mul_pd(ai, ui));
      norm2 = _mm256_add_pd(norm2, _mm256_mul_pd(ai, ai));
    }
    const __m256d margin = _mm256_sub_pd(dot, _mm256_loadu_pd(b + j));
    _mm256_storeu_pd(margin_out + j, margin);
    const __m256d violated = _mm256_cmp_pd(margin, zero, _CMP_LT_OQ);
    const __m256d nonzero = _mm256_cmp_pd(norm2, zero, _CMP_GT_OQ);
    const __m256d raw = _mm256_div_pd(_mm256_sub_pd(zero, margin), norm2);
    const __m256d step = _mm256_blendv_pd(zero, raw, _mm256_and_pd(violated, nonzero));
    for (int i = 0; i < m; ++i) {
      const __m256d ai = _mm256_loadu_pd(a + i * n + j);
      const __m256d ui = _mm256_loadu_pd(u_des + i * n + j);
      _mm256_storeu_pd(u_out + i * n + j, _mm256_add_pd(ui, _mm256_mul_pd(ai, step)));
    }
  }
  if (j < n) {
    // Tail: the scalar reference on the remaining instances, addressed with
    // the full stride.
    for (; j < n; ++j) {
      double dot = 0.0, norm2 = 0.0;
      for (int i = 0; i < m; ++i) {
        const double ai = a[i * n + j];
        dot = dot + ai * u_des[i * n + j];
        norm2 = norm2 + ai * ai;
      }
      const double margin = dot - b[j];
      margin_out[j] = margin;
      const double step = (margin < 0.0 && norm2 > 0.0) ? (0.0 - margin) / norm2 : 0.0;
      for (int i = 0; i < m; ++i) u_out[i * n + j] = u_des[i * n + j] + a[i * n + j] * step;
    }
  }
}

void sym2_eigen_extremes(std::size_t n, const double* a, const double* b, const double* c,
                         double* lo, double* hi) {
  const __m256d half = _mm256_set1_pd(0.5);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d va = _mm256_loadu_pd(a + j);
    const __m256d vb = _mm256_loadu_pd(b + j);
    const __m256d vc = _mm256_loadu_pd(c + j);
    const __m256d mean = _mm256_mul_pd(_mm256_add_pd(va, vc), half);
    const __m256d diff = _mm256_mul_pd(_mm256_sub_pd(va, vc), half);
    const __m256d radius =
        _mm256_sqrt_pd(_mm256_add_pd(_mm256_mul_pd(diff, diff), _mm256_mul_pd(vb, vb)));
    _mm256_storeu_pd(lo + j, _mm256_sub_pd(mean, radius));
    _mm256_storeu_pd(hi + j, _mm256_add_pd(mean, radius));
  }
  if (j < n) scalar::sym2_eigen_extremes(n - j, a + j, b + j, c + j, lo + j, hi + j);
}

}  // namespace cbf::kernels::avx2
