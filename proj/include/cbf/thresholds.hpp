#pragma once

namespace cbf {

/// Below this, |Lg| is treated as zero in the closed-form filters.
inline constexpr double kDegenerateGradient = 1e-8;
/// Minimum Gram determinant for the right pseudoinverses of J_y and J_h.
inline constexpr double kPseudoinverseDet = 1e-10;
/// Minimum |det J_e| for Phi = (w, h) to count as a local diffeomorphism.
inline constexpr double kDiffeomorphismDet = 1e-12;
/// Minimum |B_h|: the operational definition of the coupled region Q_u.
inline constexpr double kCouplingThreshold = 1e-6;
/// Slack allowed on the post-hoc constraint check of every filter.
inline constexpr double kConstraintSlack = 1e-9;

}  // namespace cbf
