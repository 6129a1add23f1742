#include "cbf/qp_oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "cbf/errors.hpp"
#include "cbf/kernels.hpp"
#include "cbf/schur.hpp"

namespace cbf {

Vec solve_single_constraint_qp(const HalfspaceQP& p) {
  if (p.a.size() != p.u_des.size() || p.u_des.size() < 1)
    throw DomainError("halfspace QP: size mismatch");
  const double norm2 = p.a.squaredNorm();
  if (norm2 == 0.0) {
    if (p.b > 0.0) throw InfeasibleError("halfspace QP: a = 0 and b > 0");
    return p.u_des;
  }
  const double slack = p.a.dot(p.u_des) - p.b;
  if (slack >= 0.0) return p.u_des;
  // Stationarity u = u_des + mu a with the constraint active.
  const double mu = (p.b - p.a.dot(p.u_des)) / norm2;
  return p.u_des + mu * p.a;
}

GridSolution grid_search_qp(const HalfspaceQP& p, double radius, double resolution) {
  const int m = static_cast<int>(p.u_des.size());
  if (m < 1 || m > 3) throw DomainError("grid_search_qp supports 1 <= m <= 3");
  if (p.a.size() != m) throw DomainError("grid_search_qp: size mismatch");
  if (!(radius > 0.0) || !(resolution > 0.0)) throw ParameterError("grid_search_qp: bad grid");
  const int half = static_cast<int>(std::floor(radius / resolution));
  const int side = 2 * half + 1;

  GridSolution best;
  best.objective = std::numeric_limits<double>::infinity();
  std::array<int, 3> idx{0, 0, 0};
  long total = 1;
  for (int i = 0; i < m; ++i) total *= side;
  Vec u(m);
  for (long flat = 0; flat < total; ++flat) {
    long rest = flat;
    for (int i = 0; i < m; ++i) {
      idx[i] = static_cast<int>(rest % side) - half;
      rest /= side;
    }
    double obj = 0.0;
    for (int i = 0; i < m; ++i) {
      const double step = resolution * idx[i];
      u[i] = p.u_des[i] + step;
      obj += step * step;
    }
    if (obj >= best.objective) continue;
    if (p.a.dot(u) >= p.b) {
      best.objective = obj;
      best.u = u;
    }
  }
  if (!std::isfinite(best.objective))
    throw InfeasibleError("grid_search_qp: infeasible at this resolution");
  return best;
}

const char* to_string(BoundQuantity q) {
  switch (q) {
    case BoundQuantity::half_lambda_max_D: return "half_lambda_max_D";
    case BoundQuantity::norm_G: return "norm_G";
    case BoundQuantity::D_h_bounds: return "D_h_bounds";
  }
  return "?";
}

BoundQuantity bound_quantity_from_string(const std::string& s) {
  if (s == "half_lambda_max_D") return BoundQuantity::half_lambda_max_D;
  if (s == "norm_G") return BoundQuantity::norm_G;
  if (s == "D_h_bounds") return BoundQuantity::D_h_bounds;
  throw ParameterError("unknown bound quantity '" + s + "'");
}

std::vector<double> halton_point(std::uint64_t index, int dim) {
  static constexpr std::array<std::uint64_t, 8> primes{2, 3, 5, 7, 11, 13, 17, 19};
  if (dim < 1 || dim > static_cast<int>(primes.size()))
    throw DomainError("halton_point: dimension out of range");
  std::vector<double> x(static_cast<std::size_t>(dim));
  for (int d = 0; d < dim; ++d) {
    const std::uint64_t base = primes[static_cast<std::size_t>(d)];
    double f = 1.0, r = 0.0;
    for (std::uint64_t i = index; i > 0; i /= base) {
      f /= static_cast<double>(base);
      r += f * static_cast<double>(i % base);
    }
    x[static_cast<std::size_t>(d)] = r;
  }
  return x;
}

namespace {

Vec lerp(const Vec& lo, const Vec& hi, const std::vector<double>& t, int offset) {
  Vec v(lo.size());
  for (int i = 0; i < lo.size(); ++i)
    v[i] = lo[i] + (hi[i] - lo[i]) * t[static_cast<std::size_t>(offset + i)];
  return v;
}

double max_half_lambda(const RobotModel& model, const StateBox& box, const BoundOptions& opt) {
  const int k = model.dof();
  const std::size_t n = opt.samples;
  if (k == 2) {
    std::vector<double> a(n), b(n), c(n), lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Mat d = model.mass_matrix(lerp(box.q_lo, box.q_hi, halton_point(opt.sequence_offset + i, k), 0));
      a[i] = d(0, 0);
      b[i] = d(0, 1);
      c[i] = d(1, 1);
    }
    kernels::sym2_eigen_extremes(a, b, c, lo, hi);
    return 0.5 * *std::max_element(hi.begin(), hi.end());
  }
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Mat d = model.mass_matrix(lerp(box.q_lo, box.q_hi, halton_point(opt.sequence_offset + i, k), 0));
    Eigen::SelfAdjointEigenSolver<Mat> es(d, Eigen::EigenvaluesOnly);
    best = std::max(best, 0.5 * es.eigenvalues().maxCoeff());
  }
  return best;
}

}  // namespace

BoundEstimate bound_estimator(const RobotModel& model, const StateBox& box, BoundQuantity quantity,
                              const BoundOptions& options, const UnderactuatedBarrier* reduced) {
  const int k = model.dof();
  if (box.dof() != k) throw ParameterError("bound_estimator: box dimension differs from model");
  for (int i = 0; i < k; ++i) {
    if (!(box.q_hi[i] > box.q_lo[i]) || !(box.qdot_hi[i] > box.qdot_lo[i]))
      throw ParameterError("bound_estimator: degenerate box");
  }
  if (!(options.safety_factor >= 1.0)) throw ParameterError("bound_estimator: safety factor must be >= 1");
  if (options.samples == 0) throw ParameterError("bound_estimator: need samples");

  BoundEstimate est;
  est.samples = options.samples;
  const double f = options.safety_factor;

  switch (quantity) {
    case BoundQuantity::half_lambda_max_D:
      est.upper = f * max_half_lambda(model, box, options);
      break;
    case BoundQuantity::norm_G: {
      double best = 0.0;
      for (std::size_t i = 0; i < options.samples; ++i) {
        const Vec q = lerp(box.q_lo, box.q_hi, halton_point(options.sequence_offset + i, k), 0);
        best = std::max(best, model.gravity_vector(q).norm());
      }
      est.upper = f * best;
      break;
    }
    case BoundQuantity::D_h_bounds: {
      if (reduced == nullptr) throw BoundError("D_h_bounds needs an underactuated barrier");
      double dh_min = std::numeric_limits<double>::infinity();
      double worst = 0.0;
      std::size_t valid = 0;
      for (std::size_t i = 0; i < options.samples; ++i) {
        const auto t = halton_point(options.sequence_offset + i, 2 * k);
        const Vec q = lerp(box.q_lo, box.q_hi, t, 0);
        const Vec qd = lerp(box.qdot_lo, box.qdot_hi, t, k);
        SchurReduction red;
        try {
          red = schur_reduce(model, reduced->kin, reduced->complement, q, qd);
        } catch (const DiffeomorphismError&) {
          continue;
        } catch (const CouplingError&) {
          continue;
        }
        ++valid;
        dh_min = std::min(dh_min, red.D_h);
        worst = std::max({worst, red.D_h, std::abs(red.G_h)});
        const double v = qd.norm();
        if (v > 1e-9) worst = std::max({worst, red.C_h.norm() / v, std::abs(red.D_h_rate) / v});
      }
      if (valid == 0) throw BoundError("D_h_bounds: no sample inside the coupled region");
      est.lower = dh_min / f;
      est.upper = f * worst;
      est.coverage = static_cast<double>(valid) / static_cast<double>(options.samples);
      if (valid < options.samples) {
        std::ostringstream os;
        os << "partial coverage: " << 100.0 * est.coverage
           << "% of box samples lie in the coupled region";
        est.warning = os.str();
      }
      break;
    }
  }
  return est;
}

BoundCache::BoundCache(std::filesystem::path path) : path_(std::move(path)) {}

namespace {
std::map<std::string, BoundEstimate> read_cache(const std::filesystem::path& path) {
  std::map<std::string, BoundEstimate> entries;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string key;
    BoundEstimate e;
    if (is >> key >> e.lower >> e.upper >> e.coverage >> e.samples) entries[key] = e;
  }
  return entries;
}
}  // namespace

std::optional<BoundEstimate> BoundCache::lookup(const std::string& key) const {
  const auto entries = read_cache(path_);
  auto it = entries.find(key);
  if (it == entries.end()) return std::nullopt;
  return it->second;
}

void BoundCache::store(const std::string& key, const BoundEstimate& estimate) {
  auto entries = read_cache(path_);
  entries[key] = estimate;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  const auto tmp = std::filesystem::path(path_.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    out.precision(17);
    out << "# key lower upper coverage samples\n";
    for (const auto& [k, e] : entries)
      out << k << ' ' << e.lower << ' ' << e.upper << ' ' << e.coverage << ' ' << e.samples << '\n';
  }
  std::filesystem::rename(tmp, path_);
}

std::string BoundCache::make_key(const RobotModel& model, const StateBox& box,
                                 BoundQuantity quantity, const BoundOptions& options,
                                 const std::string& barrier_descriptor) {
  std::ostringstream os;
  os.precision(17);
  os << model.name() << '{';
  for (const auto& [k, v] : model.params()) os << k << '=' << v << ';';
  os << "gravity=" << model.gravity_enabled() << "}|box{";
  for (int i = 0; i < box.dof(); ++i)
    os << box.q_lo[i] << ':' << box.q_hi[i] << ':' << box.qdot_lo[i] << ':' << box.qdot_hi[i] << ';';
  os << "}|" << to_string(quantity) << "|f=" << options.safety_factor << "|n=" << options.samples
     << "|o=" << options.sequence_offset;
  if (!barrier_descriptor.empty()) os << '|' << barrier_descriptor;
  std::string key = os.str();
  std::replace(key.begin(), key.end(), ' ', '_');
  return key;
}

}  // namespace cbf
