#pragma once

#include "netlasso/common.hpp"
#include "netlasso/datagen.hpp"
#include "netlasso/solver.hpp"

#include <map>
#include <string>

namespace netlasso::theory {

/// Named universal constants (c1, c4, c5, ...). Unset names evaluate to 1.
/// A few constants carry lower bounds; set() rejects violations.
class Constants {
public:
  double get(const std::string& name) const;
  void set(const std::string& name, double value);
  const std::map<std::string, double>& overrides() const { return values_; }

private:
  std::map<std::string, double> values_;
};

/// Restricted strong convexity: ||X D||^2/N >= (mu/2)||D||^2 - (tau/2)||D||_1^2.
struct RscParams {
  double mu = 1.0;
  double tau = 0.0;
};

struct TheoryInputs {
  double rho = 0.0;
  std::size_t m = 1;
  std::size_t n = 1;
  std::size_t N = 1;
  std::size_t d = 2;
  std::size_t s = 1;
  double sigma = 0.5;
  double zeta_sigma = 1.0;     // max_i Sigma_ii
  double lambda_min_cov = 1.0; // lambda_min(Sigma)
  double lambda_max_cov = 1.0; // lambda_max(Sigma)
  double L_max = 1.0;
  double lambda_min_W = 0.0;
  double t0 = 2.0;
  Constants constants;

  void validate() const;
};

struct RateQuantities {
  double mu_av = 0.0;
  /// 1 - beta mu_av / 4.
  double kappa = 0.0;
  /// 1 - beta (mu/8 - 8 s tau), the contraction factor of the per-epoch
  /// descent bound; equals 1 - 4 (1 - kappa).
  double kappa_epoch = 0.0;
  double eps_stat_sq = 0.0;
  double h_max = 0.0;
};

struct RadiusInterval {
  double lower = 0.0;
  double upper = 0.0;
  /// A few ulps of slack so that touching endpoints count as nonempty.
  bool empty() const { return lower > upper * (1.0 + 1e-12); }
};

struct IterationBound {
  /// Value of the iteration-count expression before rounding up.
  double value = 0.0;
  std::size_t iterations = 0;
  /// kappa_Sigma d m (ln m + 1) / (1 - rho) log(1/alpha^2), the order of the
  /// communication count.
  double order_estimate = 0.0;
};

/// Population RSC parameters for Gaussian rows: mu = lambda_min(Sigma),
/// tau = 2 c1 zeta ln d / N.
RscParams rsc_from_population(const TheoryInputs& inp);

/// c4 sigma sqrt(zeta t0 ln d / N).
double choose_lambda(const TheoryInputs& inp);

/// c5 (1 - rho) / (lambda_max(Sigma)(d + ln m) + lambda_min(Sigma) d m (ln m + 1)).
double choose_gamma(const TheoryInputs& inp);

/// gamma / (gamma L_max + 1 - lambda_min(W)).
double choose_beta(double gamma, double L_max, double lambda_min_W);

/// [max{56 lambda s / (mu - 32 s tau), 2 ||theta*||_1}, lambda / (32 tau)].
RadiusInterval radius_bounds(double lambda, std::size_t s, const RscParams& rsc, double l1_truth);

RateQuantities rate_quantities(const TheoryInputs& inp, const RscParams& rsc, double beta, double lambda,
                               double gamma, double max_noise_corr, double avg_err_hat);

IterationBound iteration_bound(double eta0, double alpha_sq, double R, double lambda, const RateQuantities& rate,
                               double gamma, double L_max, double rho, const TheoryInputs& inp);

/// Minimum over sampled unit directions (dense Gaussian, sparse, sign
/// vectors in rotation) of ||X D||^2/N - (mu/2)||D||^2 + (tau/2)||D||_1^2.
/// Nonnegative means no direction falsified the condition.
double rsc_check(const Matrix& X, const RscParams& rsc, std::size_t num_dirs, Seed seed);

/// max_i ||X_i^T w_i||_inf from the recorded shard noise.
double max_noise_correlation(const AgentShards& shards);

/// 2 ||X^T w||_inf / N, the smallest lambda for which the augmented error is
/// guaranteed to lie in the almost-sparse cone.
double lambda_noise_floor(const AgentShards& shards);

/// h(gamma, r) = -(1-rho)/(m gamma lambda) r^2 + (2 max_corr/(lambda n) + 2) sqrt(d/m) r.
double cone_slack_h(double gamma, double lambda, double rho, std::size_t m, std::size_t n, std::size_t d,
                    double max_noise_corr, double disagreement_norm);

/// 3 ||(D_av)_S||_1 + h(gamma, ||D_perp||) - ||(D_av)_{S^c}||_1 for the
/// stacked error D = theta - 1 (x) theta*. Nonnegative confirms membership.
double cone_membership(const StackedState& error, const GroundTruth& truth, double gamma, double lambda,
                       const AgentShards& shards, double rho);

/// Largest gamma for which the average-error bound applies: 2(1-rho)/(4 L_max + delta).
double error_bound_gamma_limit(const TheoryInputs& inp, const RscParams& rsc);

/// Bound on (1/m) sum ||theta_hat_i - theta*||^2: the centralized term
/// 9 lambda^2 s / delta^2 plus two decentralization terms, with
/// delta = mu/2 - 16 s tau and xi = tau.
double error_bound_eval(const TheoryInputs& inp, const RscParams& rsc, double lambda, double gamma,
                        double max_noise_corr);

} // namespace netlasso::theory
