#include "netlasso/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace netlasso::theory {

namespace {

struct LowerBound {
  double value;
  bool strict;
};

// Constants with documented lower bounds.
const std::map<std::string, LowerBound>& lower_bounds() {
  static const std::map<std::string, LowerBound> table{
      {"ct5", {32.0, true}},
      {"ct8", {std::sqrt(6.0), false}},
  };
  return table;
}

} // namespace

double Constants::get(const std::string& name) const {
  if (auto it = values_.find(name); it != values_.end()) return it->second;
  if (auto it = lower_bounds().find(name); it != lower_bounds().end())
    return it->second.strict ? 2.0 * it->second.value : it->second.value;
  return 1.0;
}

void Constants::set(const std::string& name, double value) {
  if (!(value > 0.0) || !std::isfinite(value)) throw ConfigError("constant " + name + " must be positive");
  if (auto it = lower_bounds().find(name); it != lower_bounds().end()) {
    const auto& b = it->second;
    if (b.strict ? !(value > b.value) : !(value >= b.value))
      throw ConfigError("constant " + name + " is below its lower bound");
  }
  values_[name] = value;
}

void TheoryInputs::validate() const {
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho must lie in [0, 1)");
  if (m < 1 || n < 1 || N < 1 || d < 1 || s < 1) throw ConfigError("dimensions must be positive");
  if (!(t0 >= 2.0)) throw ConfigError("t0 must be at least 2");
}

RscParams rsc_from_population(const TheoryInputs& inp) {
  const double c1 = inp.constants.get("c1");
  return {inp.lambda_min_cov, 2.0 * c1 * inp.zeta_sigma * std::log(static_cast<double>(inp.d)) /
                                  static_cast<double>(inp.N)};
}

double choose_lambda(const TheoryInputs& inp) {
  if (inp.d < 2) throw ConfigError("lambda rule needs d >= 2");
  if (inp.N < 1) throw ConfigError("lambda rule needs N >= 1");
  if (!(inp.t0 >= 2.0)) throw ConfigError("t0 must be at least 2");
  const double c4 = inp.constants.get("c4");
  return c4 * inp.sigma *
         std::sqrt(inp.zeta_sigma * inp.t0 * std::log(static_cast<double>(inp.d)) / static_cast<double>(inp.N));
}

double choose_gamma(const TheoryInputs& inp) {
  if (!(inp.rho < 1.0)) throw ConfigError("gamma rule needs rho < 1");
  const double c5 = inp.constants.get("c5");
  const double d = static_cast<double>(inp.d);
  const double m = static_cast<double>(inp.m);
  const double log_m = std::log(m);
  const double denom = inp.lambda_max_cov * (d + log_m) + inp.lambda_min_cov * d * m * (log_m + 1.0);
  return c5 * (1.0 - inp.rho) / denom;
}

double choose_beta(double gamma, double L_max, double lambda_min_W) {
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  return stepsize_limit(gamma, L_max, lambda_min_W);
}

RadiusInterval radius_bounds(double lambda, std::size_t s, const RscParams& rsc, double l1_truth) {
  const double ss = static_cast<double>(s);
  const double margin = rsc.mu - 32.0 * ss * rsc.tau;
  if (!(margin > 0.0)) throw ConfigError("radius bounds need mu - 32 s tau > 0");
  RadiusInterval out;
  out.lower = std::max(56.0 * lambda * ss / margin, 2.0 * l1_truth);
  out.upper = rsc.tau > 0.0 ? lambda / (32.0 * rsc.tau) : std::numeric_limits<double>::infinity();
  return out;
}

RateQuantities rate_quantities(const TheoryInputs& inp, const RscParams& rsc, double beta, double lambda,
                               double gamma, double max_noise_corr, double avg_err_hat) {
  const double s = static_cast<double>(inp.s);
  RateQuantities out;
  out.mu_av = rsc.mu / 8.0 - 8.0 * s * rsc.tau;
  if (!(out.mu_av > 0.0)) throw ConfigError("rate quantities need mu/8 - 8 s tau > 0");
  out.kappa = 1.0 - beta * out.mu_av / 4.0;
  out.kappa_epoch = 1.0 - beta * (rsc.mu / 8.0 - 8.0 * rsc.tau * s);
  out.eps_stat_sq = 36.0 * avg_err_hat + lambda * lambda * s / (1976.0 * rsc.mu * rsc.mu);

  const double corr = max_noise_corr / static_cast<double>(inp.n) + lambda;
  const double numer = static_cast<double>(inp.d) * gamma * corr * corr;
  if (numer == 0.0) out.h_max = 0.0;
  else out.h_max = lambda > 0.0 ? numer / (lambda * (1.0 - inp.rho)) : std::numeric_limits<double>::infinity();
  return out;
}

IterationBound iteration_bound(double eta0, double alpha_sq, double R, double lambda, const RateQuantities& rate,
                               double gamma, double L_max, double rho, const TheoryInputs& inp) {
  if (!(alpha_sq > 0.0) || alpha_sq > std::min(R * lambda / 4.0, eta0))
    throw ConfigError("alpha^2 must lie in (0, min{R lambda / 4, eta0}]");
  if (!(rate.mu_av > 0.0)) throw ConfigError("iteration bound needs mu_av > 0");
  const double ln2 = std::log(2.0);
  const double epochs = std::ceil(std::log2(std::log2(R * lambda / alpha_sq)));
  const double per_epoch = 1.0 + L_max * ln2 / rate.mu_av + (1.0 + rho) * ln2 / (gamma * rate.mu_av);
  const double linear = (L_max / rate.mu_av + (1.0 + rho) / (gamma * rate.mu_av)) * std::log(eta0 / alpha_sq);

  IterationBound out;
  out.value = epochs * per_epoch + linear;
  out.iterations = static_cast<std::size_t>(std::ceil(out.value));
  const double m = static_cast<double>(inp.m);
  const double kappa_sigma = inp.lambda_max_cov / inp.lambda_min_cov;
  out.order_estimate = kappa_sigma * static_cast<double>(inp.d) * m * (std::log(m) + 1.0) / (1.0 - rho) *
                       std::log(1.0 / alpha_sq);
  return out;
}

double rsc_check(const Matrix& X, const RscParams& rsc, std::size_t num_dirs, Seed seed) {
  if (num_dirs < 1) throw ConfigError("rsc_check needs at least one direction");
  const auto d = X.cols();
  const double N = static_cast<double>(X.rows());
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  const auto max_support = std::min<Eigen::Index>(d, 10);
  std::uniform_int_distribution<Eigen::Index> support_size(1, max_support);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(d));
  std::iota(idx.begin(), idx.end(), 0);

  double worst = std::numeric_limits<double>::infinity();
  Vector dir(d);
  for (std::size_t k = 0; k < num_dirs; ++k) {
    dir.setZero();
    switch (k % 3) {
    case 0:
      for (Eigen::Index j = 0; j < d; ++j) dir(j) = gauss(rng);
      break;
    case 1: {
      const auto sz = support_size(rng);
      std::shuffle(idx.begin(), idx.end(), rng);
      for (Eigen::Index j = 0; j < sz; ++j) dir(idx[static_cast<std::size_t>(j)]) = gauss(rng);
      break;
    }
    default:
      for (Eigen::Index j = 0; j < d; ++j) dir(j) = coin(rng) ? 1.0 : -1.0;
      break;
    }
    const double norm = dir.norm();
    if (norm == 0.0) continue;
    dir /= norm;
    const double l1 = dir.lpNorm<1>();
    const double slack = (X * dir).squaredNorm() / N - 0.5 * rsc.mu + 0.5 * rsc.tau * l1 * l1;
    worst = std::min(worst, slack);
  }
  return worst;
}

double max_noise_correlation(const AgentShards& shards) {
  if (!shards.has_noise()) throw DataError("shards carry no noise record");
  double best = 0.0;
  for (const auto& sh : shards.shards)
    best = std::max(best, (sh.X.transpose() * sh.noise).lpNorm<Eigen::Infinity>());
  return best;
}

double lambda_noise_floor(const AgentShards& shards) {
  if (!shards.has_noise()) throw DataError("shards carry no noise record");
  Vector total = Vector::Zero(static_cast<Eigen::Index>(shards.d));
  for (const auto& sh : shards.shards) total.noalias() += sh.X.transpose() * sh.noise;
  return 2.0 * total.lpNorm<Eigen::Infinity>() / static_cast<double>(shards.N());
}

double cone_slack_h(double gamma, double lambda, double rho, std::size_t m, std::size_t n, std::size_t d,
                    double max_noise_corr, double disagreement_norm) {
  if (!(gamma > 0.0) || !(lambda > 0.0)) throw ConfigError("cone slack needs gamma > 0 and lambda > 0");
  const double mm = static_cast<double>(m);
  const double r = disagreement_norm;
  const double quad = (1.0 - rho) / (mm * gamma * lambda) * r * r;
  const double lin = (2.0 * max_noise_corr / (lambda * static_cast<double>(n)) + 2.0) *
                     std::sqrt(static_cast<double>(d) / mm) * r;
  return lin - quad;
}

double cone_membership(const StackedState& error, const GroundTruth& truth, double gamma, double lambda,
                       const AgentShards& shards, double rho) {
  if (error.d() != static_cast<std::size_t>(truth.theta.size())) throw ConfigError("error/truth dimension mismatch");
  const double corr = max_noise_correlation(shards);
  const Vector avg = error.average();
  const double perp = error.disagreement().norm();

  std::vector<bool> on_support(static_cast<std::size_t>(avg.size()), false);
  for (auto j : truth.support) on_support[j] = true;
  double in_s = 0.0;
  double off_s = 0.0;
  for (Eigen::Index j = 0; j < avg.size(); ++j)
    (on_support[static_cast<std::size_t>(j)] ? in_s : off_s) += std::abs(avg(j));

  const double h = cone_slack_h(gamma, lambda, rho, error.m(), shards.n, error.d(), corr, perp);
  return 3.0 * in_s + h - off_s;
}

double error_bound_gamma_limit(const TheoryInputs& inp, const RscParams& rsc) {
  const double delta = rsc.mu / 2.0 - 16.0 * static_cast<double>(inp.s) * rsc.tau;
  return 2.0 * (1.0 - inp.rho) / (4.0 * inp.L_max + delta);
}

double error_bound_eval(const TheoryInputs& inp, const RscParams& rsc, double lambda, double gamma,
                        double max_noise_corr) {
  const double s = static_cast<double>(inp.s);
  const double d = static_cast<double>(inp.d);
  const double n = static_cast<double>(inp.n);
  const double delta = rsc.mu / 2.0 - 16.0 * s * rsc.tau;
  const double xi = rsc.tau;
  if (!(delta > 0.0)) throw ConfigError("error bound needs delta = mu/2 - 16 s tau > 0");
  if (!(lambda > 0.0)) throw ConfigError("error bound needs lambda > 0");
  if (!(gamma > 0.0) || gamma > error_bound_gamma_limit(inp, rsc))
    throw ConfigError("gamma outside the range of the error bound");

  const double gap = 1.0 - inp.rho;
  const double corr = max_noise_corr + lambda * n;
  const double centralized = 9.0 * lambda * lambda * s / (delta * delta);
  const double quartic = 2.0 * xi * d * d * gamma * gamma * std::pow(corr, 4) /
                         (delta * lambda * lambda * std::pow(n, 4) * gap * gap);
  const double quadratic = 4.0 * d * gamma * corr * corr /
                           (delta * n * n * (2.0 * gap - 4.0 * inp.L_max * gamma - delta * gamma));
  return centralized + quartic + quadratic;
}

} // namespace netlasso::theory
