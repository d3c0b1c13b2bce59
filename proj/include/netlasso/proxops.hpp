#pragma once

#include "netlasso/common.hpp"

namespace netlasso {

/// Parameters of the per-agent constrained prox: shrinkage threshold
/// (stepsize times lambda) and l1-ball radius.
struct ProxParams {
  double threshold = 0.0;
  double radius = 1.0;
};

/// Componentwise sign(v) * max(|v| - t, 0).
Vector soft_threshold(const Eigen::Ref<const Vector>& v, double t);

/// Shrinkage level tau >= 0 with sum_j max(|v_j| - tau, 0) = R, computed from
/// sorted prefix sums; 0 when v is already inside the ball.
double l1_ball_threshold(const Eigen::Ref<const Vector>& v, double R);

/// Euclidean projection onto {x : ||x||_1 <= R}.
Vector project_l1_ball(const Eigen::Ref<const Vector>& v, double R);

/// argmin_x 1/2 ||x - psi||^2 + beta_lambda ||x||_1  s.t. ||x||_1 <= R.
/// The soft-thresholded point is returned when feasible; otherwise the
/// constraint is active and the minimizer is the projection of psi.
Vector constrained_prox(const Eigen::Ref<const Vector>& psi, double beta_lambda, double R);
inline Vector constrained_prox(const Eigen::Ref<const Vector>& psi, const ProxParams& p) {
  return constrained_prox(psi, p.threshold, p.radius);
}

/// Largest violation of the optimality conditions for x = proj_{||.||_1<=R}(v):
/// v - x must equal tau * sign(x) on the support of x, lie in [-tau, tau]
/// off it, with tau >= 0, ||x||_1 <= R and tau (R - ||x||_1) = 0.
double kkt_residual_l1ball(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& x, double R);

} // namespace netlasso
