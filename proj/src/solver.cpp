#include "netlasso/solver.hpp"

#include "netlasso/proxops.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace netlasso {

StackedState StackedState::zeros(std::size_t m, std::size_t d) {
  return StackedState{Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m)), 0};
}

StackedState StackedState::consensual(std::size_t m, const Vector& x) {
  StackedState s;
  s.blocks = x.replicate(1, static_cast<Eigen::Index>(m));
  return s;
}

Vector StackedState::average() const { return blocks.rowwise().mean(); }

Matrix StackedState::disagreement() const { return blocks.colwise() - average(); }

Vector local_gradient(const Shard& shard, const Eigen::Ref<const Vector>& theta) {
  if (shard.X.cols() != theta.size() || shard.X.rows() != shard.y.size())
    throw ConfigError("local_gradient: dimension mismatch");
  const auto n = static_cast<double>(shard.X.rows());
  const Vector residual = shard.X * theta - shard.y;
  return shard.X.transpose() * residual / n;
}

double l_max(const AgentShards& shards) {
  double best = 0.0;
  for (const auto& sh : shards.shards) {
    const Matrix gram = sh.X.transpose() * sh.X / static_cast<double>(sh.X.rows());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(gram, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericError("eigensolver failed on local Gram matrix");
    best = std::max(best, solver.eigenvalues().maxCoeff());
  }
  return best;
}

double stepsize_limit(double gamma, double L_max, double lambda_min_W) {
  return gamma / (gamma * L_max + 1.0 - lambda_min_W);
}

NetworkProblem::NetworkProblem(const AgentShards& shards, const GossipMatrix& w) : shards_(&shards), w_(&w) {
  if (w.size() != shards.m) throw ConfigError("gossip matrix size does not match agent count");
  if (shards.shards.size() != shards.m) throw ConfigError("shard count does not match m");
  neighbors_.resize(shards.m);
  for (Eigen::Index i = 0; i < w.W.rows(); ++i)
    for (Eigen::Index j = 0; j < w.W.cols(); ++j)
      if (w.W(i, j) != 0.0) neighbors_[static_cast<std::size_t>(i)].push_back({j, w.W(i, j)});
  l_max_ = netlasso::l_max(shards);
  lambda_min_w_ = lambda_min(w.W);
}

void NetworkProblem::validate(const SolverConfig& cfg) const {
  if (!(cfg.lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  if (!(cfg.gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(cfg.beta > 0.0)) throw ConfigError("beta must be positive");
  if (!(cfg.radius > 0.0)) throw ConfigError("radius must be positive");
  if (cfg.metric_stride < 1) throw ConfigError("metric stride must be at least 1");
  if (cfg.strict) {
    const double limit = beta_limit(cfg.gamma);
    if (cfg.beta > limit * (1.0 + 1e-12)) {
      std::ostringstream os;
      os.precision(6);
      os << "stepsize beta=" << cfg.beta << " exceeds the majorization limit " << limit;
      throw ConfigError(os.str());
    }
  }
}

StackedState NetworkProblem::step(const StackedState& state, const SolverConfig& cfg) const {
  const auto m = static_cast<Eigen::Index>(this->m());
  const auto d = static_cast<Eigen::Index>(this->d());
  if (state.blocks.rows() != d || state.blocks.cols() != m) throw ConfigError("state shape mismatch");

  const double ratio = cfg.beta / cfg.gamma;
  const double shrink = cfg.beta * cfg.lambda;
  StackedState next;
  next.blocks.resize(d, m);
  next.iteration = state.iteration + 1;

  Vector mixed(d);
  Vector psi(d);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& shard = shards_->shards[static_cast<std::size_t>(i)];
    const auto theta_i = state.blocks.col(i);
    mixed.setZero();
    for (const auto& nb : neighbors_[static_cast<std::size_t>(i)]) mixed.noalias() += nb.w * state.blocks.col(nb.j);
    const Vector grad = local_gradient(shard, theta_i);
    psi = (1.0 - ratio) * theta_i + ratio * (mixed - cfg.gamma * grad);
    next.blocks.col(i) = constrained_prox(psi, shrink, cfg.radius);
  }
  return next;
}

double NetworkProblem::consensus_penalty(const StackedState& state) const {
  double total = 0.0;
  for (std::size_t i = 0; i < neighbors_.size(); ++i) {
    const auto theta_i = state.blocks.col(static_cast<Eigen::Index>(i));
    for (const auto& nb : neighbors_[i]) {
      if (nb.j == static_cast<Eigen::Index>(i)) continue;
      total += nb.w * (theta_i - state.blocks.col(nb.j)).squaredNorm();
    }
  }
  return 0.5 * total;
}

Objective NetworkProblem::objective(const StackedState& state, double lambda, double gamma) const {
  const auto m = static_cast<double>(this->m());
  const auto N = static_cast<double>(shards_->N());
  double fit = 0.0;
  double l1 = 0.0;
  for (std::size_t i = 0; i < this->m(); ++i) {
    const auto& shard = shards_->shards[i];
    const auto theta_i = state.blocks.col(static_cast<Eigen::Index>(i));
    fit += (shard.y - shard.X * theta_i).squaredNorm();
    l1 += theta_i.lpNorm<1>();
  }
  Objective out;
  out.L_gamma = fit / (2.0 * N) + consensus_penalty(state) / (2.0 * m * gamma);
  out.G = out.L_gamma + lambda / m * l1;
  return out;
}

StackedState dgd_step(const StackedState& state, const GossipMatrix& w, const AgentShards& shards,
                      const SolverConfig& cfg) {
  const NetworkProblem problem(shards, w);
  problem.validate(cfg);
  auto next = problem.step(state, cfg);
  if (!next.blocks.allFinite()) throw DivergenceError(next.iteration, "non-finite iterate");
  return next;
}

Objective evaluate_objective(const StackedState& state, const AgentShards& shards, const GossipMatrix& w,
                             const SolverConfig& cfg) {
  return NetworkProblem(shards, w).objective(state, cfg.lambda, cfg.gamma);
}

IterationMetrics metrics(const StackedState& state, const GroundTruth* truth, const Dataset* test) {
  IterationMetrics out;
  out.iter = state.iteration;
  const auto m = static_cast<double>(state.m());
  out.consensus_err = state.disagreement().squaredNorm() / m;
  if (truth) {
    if (truth->theta.size() != state.blocks.rows()) throw ConfigError("truth dimension mismatch");
    out.avg_est_err = (state.blocks.colwise() - truth->theta).squaredNorm() / m;
  }
  if (test) {
    if (test->X.cols() != state.blocks.rows()) throw ConfigError("test set dimension mismatch");
    const Matrix predictions = test->X * state.blocks;
    out.mse_test = (predictions.colwise() - test->y).squaredNorm() / (m * static_cast<double>(test->N()));
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double relative_change(const Matrix& next, const Matrix& prev) {
  const double diff = (next - prev).norm();
  const double base = prev.norm();
  if (diff == 0.0) return 0.0;
  return base > 0.0 ? diff / base : std::numeric_limits<double>::infinity();
}

void fill_gaps(std::vector<IterationMetrics>& ms) {
  if (ms.empty()) return;
  double best = ms.front().objective_G;
  for (const auto& r : ms) best = std::min(best, r.objective_G);
  for (auto& r : ms) r.objective_gap = r.objective_G - best;
}

} // namespace

RunTrace run(const NetworkProblem& problem, const SolverConfig& cfg, const RunOptions& opts) {
  problem.validate(cfg);
  const auto start = Clock::now();
  StackedState state = opts.initial ? *opts.initial : StackedState::zeros(problem.m(), problem.d());
  if (state.m() != problem.m() || state.d() != problem.d()) throw ConfigError("initial state shape mismatch");
  state.iteration = 0;

  RunTrace trace;
  trace.config = cfg;
  auto record = [&](const StackedState& s) {
    auto row = metrics(s, opts.truth, opts.test);
    row.objective_G = problem.objective(s, cfg.lambda, cfg.gamma).G;
    // Iterates can stay finite inside a huge ball while the objective overflows.
    if (!std::isfinite(row.objective_G)) throw DivergenceError(s.iteration, "non-finite objective");
    if (cfg.record_timing)
      row.elapsed_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    trace.metrics.push_back(row);
  };
  if (opts.observer) opts.observer(state);
  record(state);

  for (std::size_t t = 0; t < cfg.max_iters; ++t) {
    StackedState next = problem.step(state, cfg);
    if (!next.blocks.allFinite()) throw DivergenceError(next.iteration, "non-finite iterate");
    const double change = relative_change(next.blocks, state.blocks);
    state = std::move(next);
    if (opts.observer) opts.observer(state);
    const bool stop = cfg.rel_tol > 0.0 && change < cfg.rel_tol;
    const bool last = stop || t + 1 == cfg.max_iters;
    if (state.iteration % cfg.metric_stride == 0 || last) record(state);
    if (stop) {
      trace.converged = true;
      break;
    }
  }
  trace.iterations = state.iteration;
  trace.final_state = std::move(state);
  fill_gaps(trace.metrics);
  return trace;
}

RunTrace run(const AgentShards& shards, const GossipMatrix& w, const SolverConfig& cfg, const RunOptions& opts) {
  const NetworkProblem problem(shards, w);
  return run(problem, cfg, opts);
}

double centralized_step_limit(const Dataset& ds) {
  const Matrix gram = ds.X.transpose() * ds.X;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("eigensolver failed on X^T X");
  return static_cast<double>(ds.N()) / solver.eigenvalues().maxCoeff();
}

double lasso_zero_threshold(const Dataset& ds) {
  return (ds.X.transpose() * ds.y).lpNorm<Eigen::Infinity>() / static_cast<double>(ds.N());
}

RunTrace centralized_ista(const Dataset& ds, double lambda, double beta_c, std::size_t max_iters, double tol,
                          const CentralizedOptions& opts) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  if (!(beta_c > 0.0)) throw ConfigError("stepsize must be positive");
  if (opts.metric_stride < 1) throw ConfigError("metric stride must be at least 1");
  const double N = static_cast<double>(ds.N());
  if (opts.strict) {
    const double limit = centralized_step_limit(ds);
    if (beta_c > limit * (1.0 + 1e-12)) throw ConfigError("ISTA stepsize exceeds N / lambda_max(X^T X)");
  }

  Vector theta = opts.initial ? *opts.initial : Vector::Zero(ds.X.cols());
  RunTrace trace;
  trace.config.lambda = lambda;
  trace.config.beta = beta_c;
  trace.config.radius = opts.radius;
  trace.config.max_iters = max_iters;
  trace.config.rel_tol = tol;
  trace.config.metric_stride = opts.metric_stride;
  trace.config.provenance["solver"] = "centralized_ista";

  auto record = [&](const Vector& th, std::size_t iter) {
    StackedState s{th, iter};
    auto row = metrics(s, opts.truth, opts.test);
    row.objective_G = (ds.y - ds.X * th).squaredNorm() / (2.0 * N) + lambda * th.lpNorm<1>();
    if (!std::isfinite(row.objective_G)) throw DivergenceError(iter, "non-finite objective");
    trace.metrics.push_back(row);
  };
  if (opts.observer) opts.observer(theta);
  record(theta, 0);

  std::size_t iter = 0;
  for (std::size_t t = 0; t < max_iters; ++t) {
    const Vector grad = ds.X.transpose() * (ds.X * theta - ds.y) / N;
    Vector next = constrained_prox(theta - beta_c * grad, beta_c * lambda, opts.radius);
    ++iter;
    if (!next.allFinite()) throw DivergenceError(iter, "non-finite ISTA iterate");
    const double change = relative_change(next, theta);
    theta = std::move(next);
    if (opts.observer) opts.observer(theta);
    const bool stop = tol > 0.0 && change < tol;
    if (iter % opts.metric_stride == 0 || stop || t + 1 == max_iters) record(theta, iter);
    if (stop) {
      trace.converged = true;
      break;
    }
  }
  trace.iterations = iter;
  trace.final_state = StackedState{theta, iter};
  fill_gaps(trace.metrics);
  return trace;
}

namespace {

void put(std::ostream& os, const std::optional<double>& v) {
  if (!v) return;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  os << buf;
}

std::optional<double> parse_cell(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) throw DataError("bad trace cell '" + cell + "'");
  return v;
}

} // namespace

void write_trace_csv(std::ostream& os, const std::vector<IterationMetrics>& metrics) {
  os << kTraceHeader << '\n';
  for (const auto& r : metrics) {
    os << r.iter << ',';
    put(os, r.avg_est_err);
    os << ',';
    put(os, r.consensus_err);
    os << ',';
    put(os, r.objective_G);
    os << ',';
    put(os, r.objective_gap);
    os << ',';
    put(os, r.mse_test);
    os << ',';
    put(os, r.elapsed_ms);
    os << '\n';
  }
}

std::vector<IterationMetrics> read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTraceHeader) throw DataError("trace CSV header mismatch");
  std::vector<IterationMetrics> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 7) throw DataError("trace CSV row has " + std::to_string(cells.size()) + " cells");
    IterationMetrics r;
    const auto iter = parse_cell(cells[0]);
    if (!iter) throw DataError("trace CSV row without iteration index");
    r.iter = static_cast<std::size_t>(*iter);
    r.avg_est_err = parse_cell(cells[1]);
    r.consensus_err = parse_cell(cells[2]).value_or(0.0);
    r.objective_G = parse_cell(cells[3]).value_or(0.0);
    r.objective_gap = parse_cell(cells[4]);
    r.mse_test = parse_cell(cells[5]);
    r.elapsed_ms = parse_cell(cells[6]);
    out.push_back(r);
  }
  return out;
}

} // namespace netlasso
