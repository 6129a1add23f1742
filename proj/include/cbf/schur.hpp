#pragma once

#include "cbf/barrier.hpp"
#include "cbf/models.hpp"
#include "cbf/types.hpp"

namespace cbf {

/// One-dimensional barrier dynamics  D_h hdd + C_h qd + G_h = B_h u,
/// obtained by taking Phi = (w, h) as coordinates and eliminating wdd.
///
/// C_h is stored as a 1 x k row acting on qd (the transformed-coordinate row
/// multiplied by J_e), so that C_h * qd is the full velocity-product term.
struct SchurReduction {
  double D_h = 0.0;
  /// Time derivative of D_h along qd.
  double D_h_rate = 0.0;
  RowVec C_h;
  double G_h = 0.0;
  RowVec B_h;
  Mat J_e;
  Mat w_jacobian;
};

/// Throws DiffeomorphismError when |det J_e| < kDiffeomorphismDet and
/// CouplingError when |B_h| < kCouplingThreshold (q outside Q_u).
SchurReduction schur_reduce(const RobotModel& model, const KinematicBarrier& kin,
                            const CoordinateMap& w_map, const Vec& q, const Vec& qdot);

}  // namespace cbf
