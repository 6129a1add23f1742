#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cbf/barrier.hpp"
#include "cbf/models.hpp"
#include "cbf/types.hpp"

namespace cbf {

/// min |u - u_des|^2  s.t.  a^T u >= b.
struct HalfspaceQP {
  Vec u_des;
  Vec a;
  double b = 0.0;
};

/// KKT solution: projection of u_des onto the halfspace. Throws
/// InfeasibleError when a = 0 and b > 0.
Vec solve_single_constraint_qp(const HalfspaceQP& p);

struct GridSolution {
  Vec u;
  double objective = 0.0;
};

/// Exhaustive search over the cube u_des +- radius with the given spacing
/// (u_des is always a grid point). m <= 3. Throws InfeasibleError when no
/// grid point is feasible.
GridSolution grid_search_qp(const HalfspaceQP& p, double radius, double resolution);

enum class BoundQuantity { half_lambda_max_D, norm_G, D_h_bounds };

const char* to_string(BoundQuantity q);
BoundQuantity bound_quantity_from_string(const std::string& s);

struct BoundEstimate {
  /// half_lambda_max_D / norm_G: upper is the bound, lower unused.
  /// D_h_bounds: lower = c_l, upper = c_u.
  double lower = 0.0;
  double upper = 0.0;
  /// Fraction of samples where the quantity was defined (coupled region).
  double coverage = 1.0;
  std::size_t samples = 0;
  std::string warning;
};

struct BoundOptions {
  double safety_factor = 1.25;
  std::size_t samples = 10000;
  /// Offset into the low-discrepancy sequence; different offsets give
  /// disjoint sample sets.
  std::uint64_t sequence_offset = 1;
};

/// Sampled bound over a state box, scaled by safety_factor (>= 1).
/// D_h_bounds needs the reduced barrier; it returns c_l = min D_h / factor
/// and c_u = factor * max(D_h, |C_h|/|qd|, |G_h|, |D_h_rate|/|qd|).
BoundEstimate bound_estimator(const RobotModel& model, const StateBox& box, BoundQuantity quantity,
                              const BoundOptions& options = {},
                              const UnderactuatedBarrier* reduced = nullptr);

/// Radical-inverse (Halton) point in [0,1)^dim; supports dim <= 8.
std::vector<double> halton_point(std::uint64_t index, int dim);

/// Text sidecar caching bound results; one "key lower upper coverage samples"
/// line per entry. Writes go through a temporary file and a rename.
class BoundCache {
 public:
  explicit BoundCache(std::filesystem::path path);

  std::optional<BoundEstimate> lookup(const std::string& key) const;
  void store(const std::string& key, const BoundEstimate& estimate);

  static std::string make_key(const RobotModel& model, const StateBox& box,
                              BoundQuantity quantity, const BoundOptions& options,
                              const std::string& barrier_descriptor = {});

 private:
  std::filesystem::path path_;
};

}  // namespace cbf
