#include "cbf/schur.hpp"

#include <cmath>

#include "cbf/errors.hpp"
#include "cbf/thresholds.hpp"

namespace cbf {

SchurReduction schur_reduce(const RobotModel& model, const KinematicBarrier& kin,
                            const CoordinateMap& w_map, const Vec& q, const Vec& qdot) {
  const int k = model.dof();
  const int r = k - 1;  // rows belonging to w

  SchurReduction red;
  red.w_jacobian = r > 0 ? w_map.jacobian(q) : Mat(0, k);
  if (red.w_jacobian.rows() != r || red.w_jacobian.cols() != k)
    throw DiffeomorphismError("complement map must have k-1 rows");

  const RowVec jh = kin.gradient(q);
  red.J_e.resize(k, k);
  if (r > 0) red.J_e.topRows(r) = red.w_jacobian;
  red.J_e.row(r) = jh;

  Eigen::PartialPivLU<Mat> lu(red.J_e);
  if (std::abs(lu.determinant()) < kDiffeomorphismDet)
    throw DiffeomorphismError("stacked Jacobian of (w, h) is singular");

  Mat je_rate(k, k);
  if (r > 0) je_rate.topRows(r) = w_map.rate(q, qdot);
  je_rate.row(r) = (kin.hessian(q) * qdot).transpose();

  const Mat x = lu.inverse();
  const Mat x_rate = -x * je_rate * x;
  const Mat d = model.mass_matrix(q);
  const Mat d_rate = model.mass_matrix_rate(q, qdot);

  const Mat de = x.transpose() * d * x;
  const Mat de_rate = x_rate.transpose() * d * x + x.transpose() * d_rate * x +
                      x.transpose() * d * x_rate;
  const Mat ce = x.transpose() * model.coriolis_matrix(q, qdot) * x + x.transpose() * d * x_rate;
  const Vec ge = x.transpose() * model.gravity_vector(q);
  const Mat be = x.transpose() * model.actuation_matrix(q);

  if (r == 0) {
    red.D_h = de(0, 0);
    red.D_h_rate = de_rate(0, 0);
    red.C_h = ce.row(0) * red.J_e;
    red.G_h = ge[0];
    red.B_h = be.row(0);
  } else {
    const Mat d11 = de.topLeftCorner(r, r);
    const Vec d12 = de.topRightCorner(r, 1);
    Eigen::LDLT<Mat> d11_ldlt(d11);
    // S = D21 D11^-1, as a column (D11 symmetric).
    const Vec s = d11_ldlt.solve(d12);

    red.D_h = de(r, r) - s.dot(d12);
    red.C_h = (ce.row(r) - s.transpose() * ce.topRows(r)) * red.J_e;
    red.G_h = ge[r] - s.dot(ge.head(r));
    red.B_h = be.row(r) - s.transpose() * be.topRows(r);

    // d/dt of D22 - D21 D11^-1 D12.
    const Mat d11_rate = de_rate.topLeftCorner(r, r);
    const Vec d12_rate = de_rate.topRightCorner(r, 1);
    red.D_h_rate = de_rate(r, r) - 2.0 * s.dot(d12_rate) + s.dot(d11_rate * s);
  }

  if (!(red.D_h > 0.0)) throw ContractError("reduced inertia D_h is not positive");
  if (red.B_h.norm() < kCouplingThreshold)
    throw CouplingError("barrier coordinate is not inertially coupled with the input");
  return red;
}

}  // namespace cbf
