#pragma once

#include <cstddef>
#include <span>

// Batched arithmetic kernels behind the verification sweeps and the bound
// estimator. Each kernel has a portable scalar reference and an AVX2
// variant; the variant is picked at runtime from CPUID. Both variants use the
// same operation order and no fused multiply-add, so they agree bit for bit.
//
// Layout is structure-of-arrays: component i of instance j lives at
// [i * n + j] where n is the batch size.

namespace cbf::kernels {

enum class Isa { scalar, avx2 };

/// Best variant supported by this CPU and build.
Isa active_isa();
/// True when the AVX2 variant was compiled in and the CPU supports it.
bool avx2_available();
const char* to_string(Isa isa);

/// Projects each u_des onto {u : a^T u >= b}. margin_out receives
/// a^T u_des - b. Instances with a = 0 are passed through unchanged.
void project_halfspace(int m, std::span<const double> u_des, std::span<const double> a,
                       std::span<const double> b, std::span<double> u_out,
                       std::span<double> margin_out, Isa isa = active_isa());

/// Eigenvalues of the symmetric 2x2 matrices [[a, b], [b, c]].
void sym2_eigen_extremes(std::span<const double> a, std::span<const double> b,
                         std::span<const double> c, std::span<double> lo, std::span<double> hi,
                         Isa isa = active_isa());

namespace scalar {
void project_halfspace(int m, std::size_t n, const double* u_des, const double* a,
                       const double* b, double* u_out, double* margin_out);
void sym2_eigen_extremes(std::size_t n, const double* a, const double* b, const double* c,
                         double* lo, double* hi);
}  // namespace scalar

namespace avx2 {
void project_halfspace(int m, std::size_t n, const double* u_des, const double* a,
                       const double* b, double* u_out, double* margin_out);
void sym2_eigen_extremes(std::size_t n, const double* a, const double* b, const double* c,
                         double* lo, double* hi);
}  // namespace avx2

}  // namespace cbf::kernels
