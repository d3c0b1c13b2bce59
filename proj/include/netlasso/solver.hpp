#pragma once

#include "netlasso/common.hpp"
#include "netlasso/datagen.hpp"
#include "netlasso/graph.hpp"

#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace netlasso {

/// Agents' local copies theta_1..theta_m, stored as the columns of a d x m
/// matrix.
struct StackedState {
  Matrix blocks;
  std::size_t iteration = 0;

  static StackedState zeros(std::size_t m, std::size_t d);
  static StackedState consensual(std::size_t m, const Vector& x);

  std::size_t m() const { return static_cast<std::size_t>(blocks.cols()); }
  std::size_t d() const { return static_cast<std::size_t>(blocks.rows()); }
  Eigen::Ref<const Vector> block(std::size_t i) const { return blocks.col(static_cast<Eigen::Index>(i)); }

  Vector average() const;
  /// theta_i - theta_av for every agent; columns sum to zero.
  Matrix disagreement() const;
};

struct SolverConfig {
  double lambda = 0.1;
  double gamma = 1e-3;
  double beta = 1e-3;
  double radius = std::numeric_limits<double>::infinity();
  std::size_t max_iters = 1000;
  /// Stop once ||theta^{t+1} - theta^t|| < rel_tol ||theta^t||; 0 disables.
  double rel_tol = 0.0;
  Seed seed = 0;
  std::size_t metric_stride = 1;
  /// Reject stepsizes above the majorization limit.
  bool strict = true;
  /// Fill elapsed_ms. Off by default so traces are byte-reproducible.
  bool record_timing = false;
  /// Which rule produced each parameter, e.g. {"beta", "majorization"}.
  std::map<std::string, std::string> provenance;
};

struct IterationMetrics {
  std::size_t iter = 0;
  std::optional<double> avg_est_err;
  double consensus_err = 0.0;
  double objective_G = 0.0;
  std::optional<double> objective_gap;
  std::optional<double> mse_test;
  std::optional<double> elapsed_ms;
};

struct RunTrace {
  SolverConfig config;
  std::vector<IterationMetrics> metrics;
  StackedState final_state;
  std::size_t iterations = 0;
  bool converged = false;
};

struct Objective {
  double L_gamma = 0.0;
  double G = 0.0;
};

/// X_i^T (X_i theta_i - y_i) / n, the gradient of (1/2n)||y_i - X_i theta_i||^2.
Vector local_gradient(const Shard& shard, const Eigen::Ref<const Vector>& theta);

/// max_i lambda_max(X_i^T X_i / n).
double l_max(const AgentShards& shards);

/// Largest stepsize for which the linearized surrogate majorizes the
/// objective: gamma / (gamma L_max + 1 - lambda_min(W)).
double stepsize_limit(double gamma, double L_max, double lambda_min_W);

/// Shards and gossip matrix with the quantities every round needs
/// precomputed (neighbor lists, L_max, lambda_min(W)). Holds references;
/// both arguments must outlive the problem.
class NetworkProblem {
public:
  NetworkProblem(const AgentShards& shards, const GossipMatrix& w);

  const AgentShards& shards() const { return *shards_; }
  const GossipMatrix& gossip() const { return *w_; }
  std::size_t m() const { return shards_->m; }
  std::size_t d() const { return shards_->d; }
  double l_max() const { return l_max_; }
  double lambda_min_w() const { return lambda_min_w_; }
  double beta_limit(double gamma) const { return stepsize_limit(gamma, l_max_, lambda_min_w_); }

  /// Throws ConfigError when cfg is invalid or (strict mode) beta exceeds
  /// the majorization limit.
  void validate(const SolverConfig& cfg) const;

  /// One synchronous round: every agent mixes its neighbors' round-t
  /// blocks, takes a local gradient step and applies the constrained prox.
  StackedState step(const StackedState& state, const SolverConfig& cfg) const;

  Objective objective(const StackedState& state, double lambda, double gamma) const;

  /// ||theta||_V^2 = sum_i theta_i^T (theta_i - sum_j w_ij theta_j), evaluated
  /// as (1/2) sum_{i,j} w_ij ||theta_i - theta_j||^2 for accuracy near consensus.
  double consensus_penalty(const StackedState& state) const;

private:
  struct Neighbor {
    Eigen::Index j;
    double w;
  };
  const AgentShards* shards_;
  const GossipMatrix* w_;
  std::vector<std::vector<Neighbor>> neighbors_;
  double l_max_ = 0.0;
  double lambda_min_w_ = 0.0;
};

StackedState dgd_step(const StackedState& state, const GossipMatrix& w, const AgentShards& shards,
                      const SolverConfig& cfg);

Objective evaluate_objective(const StackedState& state, const AgentShards& shards, const GossipMatrix& w,
                             const SolverConfig& cfg);

/// Estimation, consensus and test-MSE metrics of a state. objective_G is
/// left at 0; run() fills it.
IterationMetrics metrics(const StackedState& state, const GroundTruth* truth, const Dataset* test);

struct RunOptions {
  const GroundTruth* truth = nullptr;
  const Dataset* test = nullptr;
  /// Defaults to the all-zero state.
  std::optional<StackedState> initial;
  /// Called with every iterate, including the initial one.
  std::function<void(const StackedState&)> observer;
};

RunTrace run(const NetworkProblem& problem, const SolverConfig& cfg, const RunOptions& opts = {});
RunTrace run(const AgentShards& shards, const GossipMatrix& w, const SolverConfig& cfg,
             const RunOptions& opts = {});

/// N / lambda_max(X^T X), the largest stable ISTA stepsize on F.
double centralized_step_limit(const Dataset& ds);

/// ||X^T y||_inf / N; for lambda at or above it the LASSO solution is 0.
double lasso_zero_threshold(const Dataset& ds);

struct CentralizedOptions {
  double radius = std::numeric_limits<double>::infinity();
  bool strict = true;
  std::size_t metric_stride = 1;
  const GroundTruth* truth = nullptr;
  const Dataset* test = nullptr;
  std::optional<Vector> initial;
  std::function<void(const Vector&)> observer;
};

/// Proximal gradient on (1/2N)||y - X theta||^2 + lambda ||theta||_1 using the
/// full stacked design. The trace's final_state holds one block (theta_hat).
RunTrace centralized_ista(const Dataset& ds, double lambda, double beta_c, std::size_t max_iters, double tol,
                          const CentralizedOptions& opts = {});

/// Fixed trace CSV layout: iter, avg_est_err, consensus_err, objective_G,
/// objective_gap, mse_test, elapsed_ms. Missing values are empty cells.
inline constexpr const char* kTraceHeader =
    "iter,avg_est_err,consensus_err,objective_G,objective_gap,mse_test,elapsed_ms";
void write_trace_csv(std::ostream& os, const std::vector<IterationMetrics>& metrics);
std::vector<IterationMetrics> read_trace_csv(std::istream& is);

} // namespace netlasso
