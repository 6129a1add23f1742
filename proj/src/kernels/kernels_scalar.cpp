#include <cmath>

#include "cbf/kernels.hpp"

namespace cbf::kernels::scalar {

void project_halfspace(int m, std::size_t n, const double* u_des, const double* a,
                       const double* b, double* u_out, double* margin_out) {
  for (std::size_t j = 0; j < n; ++j) {
    double dot = 0.0;
    double norm2 = 0.0;
    for (int i = 0; i < m; ++i) {
      const double ai = a[i * n + j];
      dot = dot + ai * u_des[i * n + j];
      norm2 = norm2 + ai * ai;
    }
    const double margin = dot - b[j];
    margin_out[j] = margin;
    // Step along a only when the constraint is violated and a is nonzero.
    const double step = (margin < 0.0 && norm2 > 0.0) ? (-margin) / norm2 : 0.0;
    for (int i = 0; i < m; ++i) u_out[i * n + j] = u_des[i * n + j] + a[i * n + j] * step;
  }
}

void sym2_eigen_extremes(std::size_t n, const double* a, const double* b, const double* c,
                         double* lo, double* hi) {
  for (std::size_t j = 0; j < n; ++j) {
    const double mean = (a[j] + c[j]) * 0.5;
    const double half = (a[j] - c[j]) * 0.5;
    const double radius = std::sqrt(half * half + b[j] * b[j]);
    lo[j] = mean - radius;
    hi[j] = mean + radius;
  }
}

}  // namespace cbf::kernels::scalar
