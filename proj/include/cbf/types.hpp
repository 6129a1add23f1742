#pragma once

#include <Eigen/Dense>

namespace cbf {

// Every system handled here is small (k <= 2 for the shipped models, m <= 4
// in the randomized oracle suites), so vectors and matrices are dynamically
// sized but bounded. No heap traffic in the control loop.
inline constexpr int kMaxDim = 6;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor, 1, kMaxDim>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// Configuration and velocity of a mechanical system.
struct State {
  Vec q;
  Vec qdot;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace cbf
