#include "netlasso/solver.hpp"

#include "netlasso/proxops.hpp"
#include "../support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace netlasso;

namespace {

struct Instance {
  GroundTruth truth;
  Dataset data;
  AgentShards shards;
  GossipMatrix w;
};

Instance make_instance(std::size_t m, std::size_t n, std::size_t d, std::size_t s, double sigma, Seed seed,
                       TopologyKind kind = TopologyKind::path) {
  Instance inst;
  inst.truth = gen_sparse_truth(d, s, derive_seed(seed, 1));
  inst.data = gen_observations(gen_ar_design(m * n, d, 0.25, derive_seed(seed, 2)), inst.truth, sigma,
                               derive_seed(seed, 3));
  inst.shards = partition(inst.data, m);
  if (m == 1) inst.w = GossipMatrix{Matrix::Ones(1, 1), 0.0};
  else inst.w = lazy_metropolis_weights(build_topology(kind, m, std::nullopt, 0));
  return inst;
}

SolverConfig config_for(const NetworkProblem& p, double lambda, double gamma, std::size_t iters) {
  SolverConfig cfg;
  cfg.lambda = lambda;
  cfg.gamma = gamma;
  cfg.beta = p.beta_limit(gamma);
  cfg.max_iters = iters;
  return cfg;
}

} // namespace

TEST(LocalGradient, IdentityDesign) {
  // f_i = (1/2n)||y - X theta||^2 with n = 2 rows, so the gradient of the
  // identity design at [1, 0] is [1, 0] / n.
  Shard sh{Matrix::Identity(2, 2), Vector::Zero(2), {}};
  const Vector g = local_gradient(sh, Vector{{1.0, 0.0}});
  EXPECT_EQ(g, (Vector{{0.5, 0.0}}));
  Shard single{Matrix::Identity(1, 1), Vector::Zero(1), {}};
  EXPECT_EQ(local_gradient(single, Vector{{1.0}}), (Vector{{1.0}}));
}

TEST(LocalGradient, ZeroAtExactFit) {
  Shard sh{Matrix{{1.0, 2.0}, {3.0, -1.0}, {0.5, 0.5}}, Vector::Zero(3), {}};
  const Vector theta{{0.3, -0.7}};
  sh.y = sh.X * theta;
  EXPECT_LE(local_gradient(sh, theta).norm(), 1e-15);
}

TEST(LocalGradient, MatchesFiniteDifference) {
  Rng rng(3);
  std::normal_distribution<double> g;
  Shard sh{Matrix(3, 2), Vector(3), {}};
  for (auto& v : sh.X.reshaped()) v = g(rng);
  for (auto& v : sh.y) v = g(rng);
  const Vector theta{{0.4, -1.1}};
  const auto f = [&](const Vector& t) { return (sh.y - sh.X * t).squaredNorm() / 6.0; };
  const Vector fd = oracle::finite_difference(f, theta, 1e-6);
  const Vector an = local_gradient(sh, theta);
  EXPECT_LE((fd - an).norm(), 1e-5 * an.norm());
}

TEST(LocalGradient, RejectsDimensionMismatch) {
  Shard sh{Matrix::Identity(2, 2), Vector::Zero(2), {}};
  EXPECT_THROW(local_gradient(sh, Vector::Zero(3)), ConfigError);
}

TEST(StepsizeLimit, Formula) {
  EXPECT_DOUBLE_EQ(stepsize_limit(0.1, 2.0, 0.0), 1.0 / 12.0);
  EXPECT_DOUBLE_EQ(stepsize_limit(0.3, 4.0, 1.0), 0.25);
}

TEST(DgdStep, SingleAgentIsOneIstaStep) {
  auto inst = make_instance(1, 30, 8, 2, 0.5, 7);
  NetworkProblem p(inst.shards, inst.w);
  for (double gamma : {1e-3, 0.5, 10.0}) {
    auto cfg = config_for(p, 0.05, gamma, 1);
    Vector theta = Vector::LinSpaced(8, -1.0, 1.0);
    const auto next = p.step(StackedState::consensual(1, theta), cfg);
    const Vector expected =
        soft_threshold(theta - cfg.beta * local_gradient(inst.shards.shards[0], theta), cfg.beta * cfg.lambda);
    EXPECT_LE((next.blocks.col(0) - expected).norm(), 1e-12 * expected.norm());
  }
}

TEST(DgdStep, HalfGammaStepIsAveragingForm) {
  auto inst = make_instance(4, 10, 5, 2, 0.5, 9, TopologyKind::star);
  NetworkProblem p(inst.shards, inst.w);
  SolverConfig cfg;
  cfg.gamma = 0.02;
  cfg.beta = cfg.gamma / 2.0;
  cfg.lambda = 0.0;
  cfg.strict = false;
  StackedState st;
  st.blocks = Matrix::Random(5, 4);
  const auto next = p.step(st, cfg);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Vector mixed = st.blocks * inst.w.W.row(ii).transpose();
    const Vector psi = 0.5 * (st.blocks.col(ii) + mixed) -
                       (cfg.gamma / 2.0) * local_gradient(inst.shards.shards[i], st.blocks.col(ii));
    EXPECT_LE((next.blocks.col(ii) - psi).norm(), 1e-14);
  }
}

TEST(DgdStep, NoiselessConsensualTruthIsFixedPoint) {
  auto inst = make_instance(5, 8, 6, 2, 0.0, 11);
  NetworkProblem p(inst.shards, inst.w);
  auto cfg = config_for(p, 0.0, 0.01, 1);
  const auto st = StackedState::consensual(5, inst.truth.theta);
  const auto next = p.step(st, cfg);
  EXPECT_LE((next.blocks - st.blocks).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DgdStep, StrictModeRejectsLargeStep) {
  auto inst = make_instance(4, 10, 5, 2, 0.5, 9);
  NetworkProblem p(inst.shards, inst.w);
  auto cfg = config_for(p, 0.1, 0.01, 5);
  cfg.beta *= 1.01;
  EXPECT_THROW(p.validate(cfg), ConfigError);
  EXPECT_THROW(run(p, cfg), ConfigError);
  cfg.strict = false;
  EXPECT_NO_THROW(p.validate(cfg));
}

TEST(Run, DivergenceReportsIteration) {
  auto inst = make_instance(4, 10, 5, 2, 0.5, 9);
  NetworkProblem p(inst.shards, inst.w);
  auto cfg = config_for(p, 0.0, 1.0, 5000);
  cfg.beta *= 50.0;
  cfg.strict = false;
  try {
    run(p, cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.iteration(), 0u);
    EXPECT_NE(std::string(e.what()).find(std::to_string(e.iteration())), std::string::npos);
  }
}

TEST(Run, LargeLambdaGivesZero) {
  auto inst = make_instance(1, 40, 10, 3, 0.5, 13);
  NetworkProblem p(inst.shards, inst.w);
  auto cfg = config_for(p, lasso_zero_threshold(inst.data) * 1.0001, 1.0, 2000);
  const auto tr = run(p, cfg);
  EXPECT_EQ(tr.final_state.blocks.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Run, MajorizationDescentOnRandomInstances) {
  for (Seed seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const std::size_t m = 2 + seed % 5;
    const std::size_t d = 3 + seed % 7;
    const TopologyKind kinds[] = {TopologyKind::path, TopologyKind::complete, TopologyKind::star};
    auto inst = make_instance(m, 4 + seed % 3, d, 1 + seed % 3, 0.5, seed, kinds[seed % 3]);
    NetworkProblem p(inst.shards, inst.w);
    const double gamma = std::pow(10.0, -3.0 + static_cast<double>(seed % 4));
    auto cfg = config_for(p, 0.02 + 0.01 * static_cast<double>(seed % 5), gamma, 60);
    if (seed % 2 == 0) cfg.radius = 0.5 * inst.truth.l1() + 0.1;
    const auto tr = run(p, cfg);
    for (std::size_t k = 1; k < tr.metrics.size(); ++k)
      ASSERT_LE(tr.metrics[k].objective_G, tr.metrics[k - 1].objective_G + 1e-12) << "seed " << seed << " k " << k;
  }
}

TEST(Run, IteratesStayInsideBall) {
  auto inst = make_instance(6, 12, 20, 3, 0.5, 17, TopologyKind::complete);
  NetworkProblem p(inst.shards, inst.w);
  auto cfg = config_for(p, 0.01, 0.05, 300);
  cfg.radius = 0.3 * inst.truth.l1();
  RunOptions opts;
  double worst = 0.0;
  opts.observer = [&](const StackedState& st) {
    for (std::size_t i = 0; i < st.m(); ++i) worst = std::max(worst, l1_norm(st.block(i)) - cfg.radius);
  };
  run(p, cfg, opts);
  EXPECT_LE(worst, 1e-9);
}

TEST(Run, SingleAgentMatchesCentralizedIsta) {
  auto inst = make_instance(1, 50, 12, 3, 0.5, 19);
  NetworkProblem p(inst.shards, inst.w);
  for (double radius : {std::numeric_limits<double>::infinity(), 0.5 * inst.truth.l1()}) {
    auto cfg = config_for(p, 0.03, 0.7, 200);
    cfg.radius = radius;
    std::vector<Vector> dist, cent;
    RunOptions ro;
    ro.observer = [&](const StackedState& st) { dist.push_back(st.blocks.col(0)); };
    run(p, cfg, ro);
    CentralizedOptions co;
    co.radius = radius;
    co.observer = [&](const Vector& v) { cent.push_back(v); };
    centralized_ista(inst.data, cfg.lambda, cfg.beta, 200, 0.0, co);
    ASSERT_EQ(dist.size(), cent.size());
    for (std::size_t k = 0; k < dist.size(); ++k)
      EXPECT_LE((dist[k] - cent[k]).norm(), 1e-10 * std::max(1.0, cent[k].norm())) << k;
  }
}

TEST(Run, StalledStateIsProxFixedPoint) {
  auto inst = make_instance(4, 15, 6, 2, 0.5, 23, TopologyKind::complete);
  NetworkProblem p(inst.shards, inst.w);
  auto cfg = config_for(p, 0.05, 0.05, 200000);
  cfg.rel_tol = 1e-14;
  const auto tr = run(p, cfg);
  ASSERT_TRUE(tr.converged);
  const auto again = p.step(tr.final_state, cfg);
  EXPECT_LE((again.blocks - tr.final_state.blocks).norm(), 1e-12 * std::max(1.0, tr.final_state.blocks.norm()));
}

TEST(Run, ConsensusErrorShrinksWithGamma) {
  auto inst = make_instance(10, 20, 30, 3, 0.5, 29, TopologyKind::path);
  NetworkProblem p(inst.shards, inst.w);
  std::vector<double> cons;
  for (double gamma : {1e-3, 1e-4, 1e-5}) {
    auto cfg = config_for(p, 0.05, gamma, 20000);
    cfg.metric_stride = 20000;
    cons.push_back(run(p, cfg).metrics.back().consensus_err);
  }
  EXPECT_GT(cons[0], cons[1]);
  EXPECT_GT(cons[1], cons[2]);
}

TEST(Run, StrideAndMetricOrdering) {
  auto inst = make_instance(3, 10, 5, 2, 0.5, 31);
  NetworkProblem p(inst.shards, inst.w);
  auto cfg = config_for(p, 0.05, 0.1, 25);
  cfg.metric_stride = 10;
  RunOptions opts;
  opts.truth = &inst.truth;
  const auto tr = run(p, cfg, opts);
  std::vector<std::size_t> iters;
  for (const auto& mtr : tr.metrics) iters.push_back(mtr.iter);
  EXPECT_EQ(iters, (std::vector<std::size_t>{0, 10, 20, 25}));
  EXPECT_TRUE(tr.metrics.front().avg_est_err.has_value());
  EXPECT_FALSE(tr.metrics.front().mse_test.has_value());
  EXPECT_FALSE(tr.metrics.front().elapsed_ms.has_value());
  for (const auto& mtr : tr.metrics) EXPECT_GE(*mtr.objective_gap, 0.0);
}

TEST(Run, DeterministicAcrossRepeats) {
  auto inst = make_instance(5, 10, 8, 2, 0.5, 37, TopologyKind::complete);
  NetworkProblem p(inst.shards, inst.w);
  auto cfg = config_for(p, 0.05, 0.1, 100);
  EXPECT_EQ(run(p, cfg).final_state.blocks, run(p, cfg).final_state.blocks);
}

TEST(Objective, ConsensualTruthNoiseless) {
  auto inst = make_instance(4, 6, 5, 2, 0.0, 41);
  SolverConfig cfg;
  cfg.lambda = 0.3;
  cfg.gamma = 0.01;
  const auto obj = evaluate_objective(StackedState::consensual(4, inst.truth.theta), inst.shards, inst.w, cfg);
  EXPECT_LE(std::abs(obj.L_gamma), 1e-28);
  EXPECT_NEAR(obj.G, 0.3 * inst.truth.l1(), 1e-14);
}

TEST(Objective, PenaltyVanishesOnlyOnConsensus) {
  auto inst = make_instance(4, 6, 5, 2, 0.5, 43, TopologyKind::star);
  NetworkProblem p(inst.shards, inst.w);
  EXPECT_EQ(p.consensus_penalty(StackedState::consensual(4, Vector::Ones(5))), 0.0);
  StackedState st;
  st.blocks = Matrix::Random(5, 4);
  EXPECT_GT(p.consensus_penalty(st), 1e-6);
}

TEST(Objective, MatchesNaiveOracle) {
  for (Seed seed = 0; seed < 20; ++seed) {
    auto inst = make_instance(3 + seed % 3, 4, 4, 2, 0.5, 100 + seed, TopologyKind::complete);
    StackedState st;
    Rng rng(seed);
    std::normal_distribution<double> g;
    st.blocks = Matrix(4, static_cast<Eigen::Index>(inst.shards.m));
    for (auto& v : st.blocks.reshaped()) v = g(rng);
    SolverConfig cfg;
    cfg.lambda = 0.2;
    cfg.gamma = 0.05;
    const double naive = oracle::naive_objective(st.blocks, inst.shards, inst.w.W, cfg.lambda, cfg.gamma);
    EXPECT_NEAR(evaluate_objective(st, inst.shards, inst.w, cfg).G, naive, 1e-12 * std::max(1.0, naive));
  }
}

TEST(Metrics, Examples) {
  const auto truth = truth_from_vector(Vector{{1.0, 0.0, -2.0}});
  const auto exact = metrics(StackedState::consensual(3, truth.theta), &truth, nullptr);
  EXPECT_EQ(*exact.avg_est_err, 0.0);
  EXPECT_EQ(exact.consensus_err, 0.0);

  StackedState pair;
  const Vector x{{1.0, 2.0, -0.5}};
  pair.blocks = Matrix(3, 2);
  pair.blocks.col(0) = x;
  pair.blocks.col(1) = -x;
  EXPECT_DOUBLE_EQ(metrics(pair, nullptr, nullptr).consensus_err, x.squaredNorm());
  EXPECT_FALSE(metrics(pair, nullptr, nullptr).avg_est_err.has_value());
}

TEST(Metrics, TestMse) {
  Dataset test;
  test.X = Matrix::Identity(2, 2);
  test.y = Vector{{1.0, 1.0}};
  StackedState st = StackedState::consensual(2, Vector::Zero(2));
  EXPECT_DOUBLE_EQ(*metrics(st, nullptr, &test).mse_test, 1.0);
}

TEST(StackedState, DecompositionSumsToZero) {
  StackedState st;
  st.blocks = Matrix::Random(7, 5);
  const Matrix perp = st.disagreement();
  EXPECT_LE(perp.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(((perp.colwise() + st.average()) - st.blocks).norm(), 1e-12);
}

TEST(CentralizedIsta, OrthogonalDesign) {
  Dataset ds;
  ds.X = Matrix::Identity(2, 2);
  ds.y = Vector{{1.0, 0.2}};
  const auto tr = centralized_ista(ds, 0.1, centralized_step_limit(ds), 1000, 0.0);
  EXPECT_NEAR(tr.final_state.blocks(0, 0), 0.8, 1e-12);
  EXPECT_EQ(tr.final_state.blocks(1, 0), 0.0);
}

TEST(CentralizedIsta, LeastSquares) {
  Dataset ds;
  ds.X = Matrix{{2.0, 1.0, 0.0}, {1.0, 3.0, 1.0}, {0.0, 1.0, 4.0}};
  ds.y = Vector{{1.0, -2.0, 0.5}};
  const auto tr = centralized_ista(ds, 0.0, centralized_step_limit(ds), 20000, 0.0);
  const Vector exact = ds.X.partialPivLu().solve(ds.y);
  EXPECT_LE((tr.final_state.blocks.col(0) - exact).norm(), 1e-8);
}

TEST(CentralizedIsta, ObjectiveNonincreasingAndStrictStep) {
  auto inst = make_instance(1, 60, 30, 4, 0.5, 47);
  const double step = centralized_step_limit(inst.data);
  const auto tr = centralized_ista(inst.data, 0.05, step, 500, 0.0);
  for (std::size_t k = 1; k < tr.metrics.size(); ++k)
    EXPECT_LE(tr.metrics[k].objective_G, tr.metrics[k - 1].objective_G + 1e-12);
  EXPECT_THROW(centralized_ista(inst.data, 0.05, step * 1.01, 5, 0.0), ConfigError);
}

TEST(TraceCsv, RoundTrip) {
  auto inst = make_instance(3, 10, 5, 2, 0.5, 53);
  NetworkProblem p(inst.shards, inst.w);
  auto cfg = config_for(p, 0.05, 0.1, 30);
  RunOptions opts;
  opts.truth = &inst.truth;
  const auto tr = run(p, cfg, opts);
  std::stringstream ss;
  write_trace_csv(ss, tr.metrics);
  std::string header;
  std::getline(std::istringstream(ss.str()) >> std::ws, header);
  EXPECT_EQ(header, kTraceHeader);
  const auto back = read_trace_csv(ss);
  ASSERT_EQ(back.size(), tr.metrics.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    EXPECT_EQ(back[k].iter, tr.metrics[k].iter);
    EXPECT_EQ(*back[k].avg_est_err, *tr.metrics[k].avg_est_err);
    EXPECT_EQ(back[k].objective_G, tr.metrics[k].objective_G);
    EXPECT_FALSE(back[k].mse_test.has_value());
  }
}
