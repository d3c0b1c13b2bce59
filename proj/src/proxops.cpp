#include "netlasso/proxops.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace netlasso {

Vector soft_threshold(const Eigen::Ref<const Vector>& v, double t) {
  if (!(t >= 0.0)) throw ConfigError("soft-threshold level must be nonnegative");
  Vector out(v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    const double mag = std::abs(v(j)) - t;
    out(j) = mag > 0.0 ? std::copysign(mag, v(j)) : 0.0;
  }
  return out;
}

double l1_ball_threshold(const Eigen::Ref<const Vector>& v, double R) {
  if (!(R > 0.0)) throw ConfigError("l1-ball radius must be positive");
  if (v.lpNorm<1>() <= R) return 0.0;
  std::vector<double> mags(static_cast<std::size_t>(v.size()));
  for (Eigen::Index j = 0; j < v.size(); ++j) mags[static_cast<std::size_t>(j)] = std::abs(v(j));
  std::stable_sort(mags.begin(), mags.end(), std::greater<>());

  // Largest k with mags[k-1] > (prefix_k - R) / k fixes the active set.
  double prefix = 0.0;
  double tau = 0.0;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    prefix += mags[k];
    const double candidate = (prefix - R) / static_cast<double>(k + 1);
    if (mags[k] > candidate) tau = candidate;
    else break;
  }
  return std::max(tau, 0.0);
}

Vector project_l1_ball(const Eigen::Ref<const Vector>& v, double R) {
  double tau = l1_ball_threshold(v, R);
  if (tau == 0.0) return v;
  Vector x = soft_threshold(v, tau);
  // Rounding can leave the result a few ulps outside the ball; nudge the
  // threshold up until it is feasible so that projecting again is a no-op.
  for (int guard = 0; guard < 64; ++guard) {
    const double excess = x.lpNorm<1>() - R;
    if (excess <= 0.0) break;
    const double active = static_cast<double>((x.array() != 0.0).count());
    tau = std::max(tau + excess / active, std::nextafter(tau, HUGE_VAL));
    x = soft_threshold(v, tau);
  }
  return x;
}

Vector constrained_prox(const Eigen::Ref<const Vector>& psi, double beta_lambda, double R) {
  if (!(R > 0.0)) throw ConfigError("l1-ball radius must be positive");
  Vector u = soft_threshold(psi, beta_lambda);
  if (u.lpNorm<1>() <= R) return u;
  return project_l1_ball(psi, R);
}

double kkt_residual_l1ball(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& x, double R) {
  const Vector z = v - x;
  const double x_l1 = x.lpNorm<1>();

  double tau = 0.0;
  std::size_t active = 0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x(j) != 0.0) {
      tau += z(j) * (x(j) > 0.0 ? 1.0 : -1.0);
      ++active;
    }
  }
  if (active > 0) tau /= static_cast<double>(active);

  double worst = std::max(0.0, x_l1 - R);
  worst = std::max(worst, std::max(0.0, -tau));
  worst = std::max(worst, std::abs(tau) * std::abs(R - x_l1));
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x(j) != 0.0) {
      worst = std::max(worst, std::abs(z(j) - tau * (x(j) > 0.0 ? 1.0 : -1.0)));
    } else {
      worst = std::max(worst, std::max(0.0, std::abs(z(j)) - std::max(tau, 0.0)));
    }
  }
  return worst;
}

} // namespace netlasso
