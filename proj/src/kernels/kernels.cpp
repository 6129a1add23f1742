#include "cbf/kernels.hpp"

#include <stdexcept>

namespace cbf::kernels {

bool avx2_available() {
#if defined(CBF_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool ok = __builtin_cpu_supports("avx2");
  return ok;
#else
  return false;
#endif
}

Isa active_isa() { return avx2_available() ? Isa::avx2 : Isa::scalar; }

const char* to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

namespace {
void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}
}  // namespace

void project_halfspace(int m, std::span<const double> u_des, std::span<const double> a,
                       std::span<const double> b, std::span<double> u_out,
                       std::span<double> margin_out, Isa isa) {
  const std::size_t n = b.size();
  const auto total = static_cast<std::size_t>(m) * n;
  require(m >= 1, "project_halfspace: m must be positive");
  require(u_des.size() == total && a.size() == total && u_out.size() == total &&
              margin_out.size() == n,
          "project_halfspace: span sizes disagree");
#ifdef CBF_HAVE_AVX2
  if (isa == Isa::avx2 && avx2_available()) {
    avx2::project_halfspace(m, n, u_des.data(), a.data(), b.data(), u_out.data(), margin_out.data());
    return;
  }
#endif
  scalar::project_halfspace(m, n, u_des.data(), a.data(), b.data(), u_out.data(), margin_out.data());
}

void sym2_eigen_extremes(std::span<const double> a, std::span<const double> b,
                         std::span<const double> c, std::span<double> lo, std::span<double> hi,
                         Isa isa) {
  const std::size_t n = a.size();
  require(b.size() == n && c.size() == n && lo.size() == n && hi.size() == n,
          "sym2_eigen_extremes: span sizes disagree");
#ifdef CBF_HAVE_AVX2
  if (isa == Isa::avx2 && avx2_available()) {
    avx2::sym2_eigen_extremes(n, a.data(), b.data(), c.data(), lo.data(), hi.data());
    return;
  }
#endif
  scalar::sym2_eigen_extremes(n, a.data(), b.data(), c.data(), lo.data(), hi.data());
}

}  // namespace cbf::kernels
