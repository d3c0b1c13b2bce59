#include "netlasso/harness.hpp"

#include "netlasso/proxops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace netlasso::harness {

namespace {

double covariance_extreme(const Matrix& S, bool largest) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("covariance eigensolver did not converge");
  return largest ? es.eigenvalues().maxCoeff() : es.eigenvalues().minCoeff();
}

GossipMatrix network_matrix(const Graph& g, std::size_t m, WeightRule rule) {
  if (m == 1) return uniform_average_matrix(1);
  return gossip_matrix(g, rule);
}

std::size_t nearest_multiple(double target, std::size_t m) {
  const auto k = static_cast<std::size_t>(std::llround(target / static_cast<double>(m)));
  return std::max<std::size_t>(k, 1) * m;
}

} // namespace

Instance build_instance(const ExperimentSpec& spec, Seed seed) {
  spec.validate();
  Instance inst;
  inst.seed = seed;
  if (spec.data_csv) {
    Dataset all = load_csv(*spec.data_csv);
    if (spec.n_test > 0) {
      auto [train, test] = train_test_split(all, spec.n_test, derive_seed(seed, 5));
      inst.data = std::move(train);
      inst.test = std::move(test);
    } else {
      inst.data = std::move(all);
    }
    const Matrix S = inst.data.X.transpose() * inst.data.X / static_cast<double>(inst.data.N());
    inst.zeta_sigma = S.diagonal().maxCoeff();
    inst.lambda_min_cov = std::max(covariance_extreme(S, false), 0.0);
    inst.lambda_max_cov = covariance_extreme(S, true);
  } else {
    inst.truth = gen_sparse_truth(spec.d, spec.sparsity(), derive_seed(seed, 1));
    inst.data = gen_observations(gen_ar_design(spec.N, spec.d, spec.phi, derive_seed(seed, 2)), *inst.truth,
                                 spec.sigma, derive_seed(seed, 3));
    inst.data.provenance.seed = seed;
    if (spec.n_test > 0)
      inst.test = gen_observations(gen_ar_design(spec.n_test, spec.d, spec.phi, derive_seed(seed, 6)), *inst.truth,
                                   spec.sigma, derive_seed(seed, 7));
    const Matrix S = ar_covariance(spec.d, spec.phi);
    inst.zeta_sigma = 1.0 / (1.0 - spec.phi * spec.phi);
    inst.lambda_min_cov = covariance_extreme(S, false);
    inst.lambda_max_cov = covariance_extreme(S, true);
  }
  if (inst.data.N() % spec.m != 0)
    throw ConfigError("m = " + std::to_string(spec.m) + " must divide the number of training rows (" +
                      std::to_string(inst.data.N()) + ")");
  inst.shards = partition(inst.data, spec.m);
  inst.graph = build_topology(spec.topology, spec.m, spec.p, derive_seed(seed, 4));
  inst.w = network_matrix(inst.graph, spec.m, spec.weights);
  return inst;
}

theory::TheoryInputs theory_inputs(const ExperimentSpec& spec, const Instance& inst, const NetworkProblem& problem) {
  theory::TheoryInputs inp;
  inp.rho = inst.w.rho;
  inp.m = inst.shards.m;
  inp.n = inst.shards.n;
  inp.N = inst.shards.N();
  inp.d = inst.shards.d;
  inp.s = inst.truth ? std::max<std::size_t>(inst.truth->s(), 1) : spec.sparsity();
  inp.sigma = spec.sigma;
  inp.zeta_sigma = inst.zeta_sigma;
  inp.lambda_min_cov = inst.lambda_min_cov;
  inp.lambda_max_cov = inst.lambda_max_cov;
  inp.L_max = problem.l_max();
  inp.lambda_min_W = problem.lambda_min_w();
  inp.t0 = spec.t0;
  inp.constants = spec.constants;
  return inp;
}

ResolvedParams resolve_parameters(const ExperimentSpec& spec, const Instance& inst, const NetworkProblem& problem) {
  ResolvedParams out;
  const auto inp = theory_inputs(spec, inst, problem);
  if (spec.lambda) {
    out.lambda = *spec.lambda;
    out.provenance["lambda"] = "user";
  } else {
    out.lambda = theory::choose_lambda(inp);
    out.provenance["lambda"] = "rule: c4 sigma sqrt(zeta t0 ln d / N)";
  }
  if (spec.gamma) {
    out.gamma = *spec.gamma;
    out.provenance["gamma"] = "user";
  } else {
    out.gamma = theory::choose_gamma(inp);
    out.provenance["gamma"] = "rule: c5 (1 - rho) / (lambda_max(d + ln m) + lambda_min d m (ln m + 1))";
  }
  if (spec.beta) {
    out.beta = *spec.beta;
    out.provenance["beta"] = "user";
  } else {
    out.beta = problem.beta_limit(out.gamma);
    out.provenance["beta"] = "rule: gamma / (gamma L_max + 1 - lambda_min(W))";
  }
  if (spec.radius) {
    out.radius = *spec.radius;
    out.provenance["radius"] = "user";
  } else if (inst.truth) {
    const auto rsc = theory::rsc_from_population(inp);
    const double margin = rsc.mu - 32.0 * static_cast<double>(inp.s) * rsc.tau;
    if (margin > 0.0) {
      out.radius = theory::radius_bounds(out.lambda, inp.s, rsc, inst.truth->l1()).lower;
      out.provenance["radius"] = "rule: max{56 lambda s / (mu - 32 s tau), 2 ||theta*||_1}";
    } else {
      out.radius = 2.0 * inst.truth->l1();
      out.provenance["radius"] = "fallback: 2 ||theta*||_1 (mu - 32 s tau <= 0)";
    }
    if (!(out.radius > 0.0)) {
      out.radius = std::numeric_limits<double>::infinity();
      out.provenance["radius"] = "unconstrained (theta* = 0)";
    }
  } else {
    SolverConfig warm;
    warm.lambda = out.lambda;
    warm.gamma = out.gamma;
    warm.beta = out.beta;
    warm.strict = spec.strict;
    warm.max_iters = spec.iters;
    warm.metric_stride = std::max<std::size_t>(spec.iters, 1);
    const auto tr = run(problem, warm);
    double r = 0.0;
    for (std::size_t i = 0; i < tr.final_state.m(); ++i) r = std::max(r, l1_norm(tr.final_state.block(i)));
    out.radius = r > 0.0 ? r : std::numeric_limits<double>::infinity();
    out.provenance["radius"] = "warm run: max_i ||theta_i||_1";
  }
  return out;
}

SolverConfig solver_config(const ExperimentSpec& spec, const ResolvedParams& params) {
  SolverConfig cfg;
  cfg.lambda = params.lambda;
  cfg.gamma = params.gamma;
  cfg.beta = params.beta;
  cfg.radius = params.radius;
  cfg.max_iters = spec.iters;
  cfg.rel_tol = spec.rel_tol;
  cfg.seed = spec.seed;
  cfg.metric_stride = spec.metric_stride;
  cfg.strict = spec.strict;
  cfg.record_timing = spec.record_timing;
  cfg.provenance = params.provenance;
  return cfg;
}

double estimate_error(const Instance& inst, const StackedState& state) {
  const auto mtr = metrics(state, inst.truth ? &*inst.truth : nullptr, inst.test ? &*inst.test : nullptr);
  if (mtr.avg_est_err) return *mtr.avg_est_err;
  if (mtr.mse_test) return *mtr.mse_test;
  throw DataError("error metrics need a ground truth or a test set");
}

CentralizedFit centralized_fit(const Instance& inst, double lambda, double radius) {
  CentralizedOptions opts;
  opts.radius = radius;
  opts.metric_stride = std::numeric_limits<std::size_t>::max();
  const auto tr = centralized_ista(inst.data, lambda, centralized_step_limit(inst.data), 1000000, 1e-13, opts);
  CentralizedFit fit;
  fit.theta = tr.final_state.blocks.col(0);
  fit.iterations = tr.iterations;
  fit.error = estimate_error(inst, StackedState::consensual(inst.shards.m, fit.theta));
  return fit;
}

StackedState distributed_fit(const NetworkProblem& problem, const SolverConfig& cfg,
                             const Vector& warm, std::size_t max_iters, double rel_tol) {
  SolverConfig c = cfg;
  c.max_iters = max_iters;
  c.rel_tol = rel_tol;
  c.metric_stride = std::max<std::size_t>(max_iters, 1);
  RunOptions opts;
  opts.initial = StackedState::consensual(problem.m(), warm);
  return run(problem, c, opts).final_state;
}

double local_error(const ExperimentSpec& spec, const Instance& inst) {
  const double n = static_cast<double>(inst.shards.n);
  const double N = static_cast<double>(inst.shards.N());
  double lambda_local = 0.0;
  if (spec.lambda) {
    lambda_local = *spec.lambda * std::sqrt(N / n);
  } else {
    NetworkProblem problem(inst.shards, inst.w);
    auto inp = theory_inputs(spec, inst, problem);
    inp.N = inst.shards.n;
    lambda_local = theory::choose_lambda(inp);
  }
  double total = 0.0;
  for (const auto& sh : inst.shards.shards) {
    Dataset local;
    local.X = sh.X;
    local.y = sh.y;
    CentralizedOptions opts;
    opts.metric_stride = std::numeric_limits<std::size_t>::max();
    const auto tr = centralized_ista(local, lambda_local, centralized_step_limit(local), 1000000, 1e-12, opts);
    total += estimate_error(inst, StackedState::consensual(1, tr.final_state.blocks.col(0)));
  }
  return total / static_cast<double>(inst.shards.m);
}

// ---------------------------------------------------------------------------
// Sweeps

std::optional<double> critical_gamma(const Instance& inst, const NetworkProblem& problem, const ExperimentSpec& spec,
                                     double lambda, double radius, const Vector& warm, double target,
                                     const std::vector<double>& grid) {
  if (grid.empty()) return std::nullopt;
  auto passes = [&](double gamma) {
    SolverConfig cfg;
    cfg.lambda = lambda;
    cfg.gamma = gamma;
    cfg.beta = problem.beta_limit(gamma);
    cfg.radius = radius;
    const auto st = distributed_fit(problem, cfg, warm, spec.sweep_iters, spec.sweep_rel_tol);
    return estimate_error(inst, st) <= (1.0 + spec.band) * target;
  };
  // Largest passing index, assuming the error grows with gamma.
  if (!passes(grid.front())) return std::nullopt;
  std::size_t lo = 0;
  std::size_t hi = grid.size();
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (passes(grid[mid])) lo = mid;
    else hi = mid;
  }
  return grid[lo];
}

std::optional<std::size_t> rounds_to_band(const Instance& inst, const NetworkProblem& problem,
                                          const SolverConfig& cfg, double target, double band) {
  problem.validate(cfg);
  auto state = StackedState::zeros(problem.m(), problem.d());
  const double goal = (1.0 + band) * target;
  for (std::size_t t = 0; t <= cfg.max_iters; ++t) {
    if (estimate_error(inst, state) <= goal) return t;
    if (t == cfg.max_iters) break;
    state = problem.step(state, cfg);
    if (!state.blocks.allFinite())
      throw DivergenceError(t + 1, "non-finite iterate at iteration " + std::to_string(t + 1));
  }
  return std::nullopt;
}

namespace {

struct JobResult {
  double dist = 0.0;
  double cent = 0.0;
  double consensus = 0.0;
  double lambda = 0.0;
  double gamma = 0.0;
  bool met = false;
  std::optional<double> value;
};

std::vector<Instance> build_reps(const ExperimentSpec& spec) {
  std::vector<Instance> insts(spec.reps);
  parallel_for(spec.reps, [&](std::size_t r) { insts[r] = build_instance(spec, rep_seed(spec, r)); });
  return insts;
}

} // namespace

SweepResult sweep_lambda_or_gamma(const ExperimentSpec& spec) {
  spec.validate();
  const bool lambda_axis = spec.axis == SweepAxis::lambda;
  const auto insts = build_reps(spec);
  const std::size_t G = spec.grid.size();
  std::vector<JobResult> results(spec.reps * G);
  parallel_for(results.size(), [&](std::size_t job) {
    const std::size_t r = job / G;
    const std::size_t k = job % G;
    const auto& inst = insts[r];
    NetworkProblem problem(inst.shards, inst.w);
    ExperimentSpec local = spec;
    if (lambda_axis) local.lambda = spec.grid[k];
    else local.gamma = spec.grid[k];
    local.beta.reset();
    const auto params = resolve_parameters(local, inst, problem);
    auto cfg = solver_config(local, params);
    const auto cent = centralized_fit(inst, params.lambda, params.radius);
    const auto st = distributed_fit(problem, cfg, cent.theta, spec.sweep_iters, spec.sweep_rel_tol);
    auto& res = results[job];
    res.dist = estimate_error(inst, st);
    res.cent = cent.error;
    res.consensus = metrics(st, nullptr, nullptr).consensus_err;
    res.lambda = params.lambda;
    res.gamma = params.gamma;
    res.met = res.dist <= (1.0 + spec.band) * res.cent;
  });

  SweepResult out;
  for (std::size_t k = 0; k < G; ++k) {
    std::vector<double> dist, cent, cons;
    SweepRow row;
    row.axis = spec.axis;
    row.value = spec.grid[k];
    row.reps = spec.reps;
    for (std::size_t r = 0; r < spec.reps; ++r) {
      const auto& res = results[r * G + k];
      dist.push_back(res.dist);
      cent.push_back(res.cent);
      cons.push_back(res.consensus);
      row.met_reps += res.met ? 1 : 0;
    }
    row.lambda = results[k].lambda;
    row.gamma = results[k].gamma;
    row.dist_err = summarize(dist);
    row.cent_err = summarize(cent);
    row.consensus_err = summarize(cons);
    out.rows.push_back(row);
  }
  const bool any = std::any_of(out.rows.begin(), out.rows.end(), [](const SweepRow& r) { return r.met_reps > 0; });
  if (!any) out.band_failures = spec.grid;
  return out;
}

SweepResult sweep_dimension(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.data_csv) throw ConfigError("the d axis needs synthetic data");
  const double ratio = spec.ratio ? *spec.ratio
                                  : static_cast<double>(spec.sparsity()) * std::log(static_cast<double>(spec.d)) /
                                        static_cast<double>(spec.N);
  const auto grid = spec.gamma_grid.empty() ? default_gamma_grid() : [&] {
    auto g = spec.gamma_grid;
    std::sort(g.begin(), g.end());
    return g;
  }();
  const std::size_t G = spec.grid.size();

  std::vector<ExperimentSpec> per_d(G, spec);
  for (std::size_t k = 0; k < G; ++k) {
    auto& sd = per_d[k];
    sd.d = static_cast<std::size_t>(std::llround(spec.grid[k]));
    sd.s = default_sparsity(sd.d);
    sd.N = nearest_multiple(static_cast<double>(*sd.s) * std::log(static_cast<double>(sd.d)) / ratio, spec.m);
    sd.axis = SweepAxis::none;
    sd.grid.clear();
  }

  std::vector<JobResult> results(spec.reps * G);
  parallel_for(results.size(), [&](std::size_t job) {
    const std::size_t k = job / spec.reps;
    const std::size_t r = job % spec.reps;
    const auto& sd = per_d[k];
    const auto inst = build_instance(sd, rep_seed(sd, r));
    NetworkProblem problem(inst.shards, inst.w);
    const auto params = resolve_parameters(sd, inst, problem);
    const auto cent = centralized_fit(inst, params.lambda, params.radius);
    auto& res = results[job];
    res.cent = cent.error;
    res.lambda = params.lambda;
    res.value = critical_gamma(inst, problem, sd, params.lambda, params.radius, cent.theta, cent.error, grid);
    res.met = res.value.has_value();
  });

  SweepResult out;
  for (std::size_t k = 0; k < G; ++k) {
    SweepRow row;
    row.axis = SweepAxis::d;
    row.value = spec.grid[k];
    row.reps = spec.reps;
    row.N = per_d[k].N;
    row.s = per_d[k].s;
    std::vector<double> inv, cent;
    for (std::size_t r = 0; r < spec.reps; ++r) {
      const auto& res = results[k * spec.reps + r];
      cent.push_back(res.cent);
      if (res.value) inv.push_back(1.0 / *res.value);
    }
    row.lambda = results[k * spec.reps].lambda;
    row.cent_err = summarize(cent);
    row.met_reps = inv.size();
    if (!inv.empty()) {
      row.inv_gamma = summarize(inv);
      row.gamma = 1.0 / row.inv_gamma->mean;
    } else {
      out.band_failures.push_back(row.value);
    }
    out.rows.push_back(row);
  }
  return out;
}

SweepResult sweep_agents(const ExperimentSpec& spec) {
  spec.validate();
  const std::size_t G = spec.grid.size();
  std::vector<ExperimentSpec> per_m(G, spec);
  for (std::size_t k = 0; k < G; ++k) {
    auto& sm = per_m[k];
    sm.m = static_cast<std::size_t>(std::llround(spec.grid[k]));
    if (sm.m < 1) throw ConfigError("m grid values must be at least 1");
    if (!spec.data_csv) sm.N = nearest_multiple(static_cast<double>(spec.N), sm.m);
    sm.axis = SweepAxis::none;
    sm.grid.clear();
  }

  std::vector<JobResult> results(spec.reps * G);
  parallel_for(results.size(), [&](std::size_t job) {
    const std::size_t k = job / spec.reps;
    const std::size_t r = job % spec.reps;
    const auto& sm = per_m[k];
    const auto inst = build_instance(sm, rep_seed(sm, r));
    NetworkProblem problem(inst.shards, inst.w);
    const auto params = resolve_parameters(sm, inst, problem);
    auto cfg = solver_config(sm, params);
    cfg.max_iters = spec.sweep_iters;
    const auto cent = centralized_fit(inst, params.lambda, params.radius);
    auto& res = results[job];
    res.cent = cent.error;
    res.lambda = params.lambda;
    res.gamma = params.gamma;
    if (auto rounds = rounds_to_band(inst, problem, cfg, cent.error, spec.band)) {
      res.value = static_cast<double>(*rounds);
      res.met = true;
    }
  });

  SweepResult out;
  for (std::size_t k = 0; k < G; ++k) {
    SweepRow row;
    row.axis = SweepAxis::m;
    row.value = spec.grid[k];
    row.reps = spec.reps;
    row.N = per_m[k].N;
    std::vector<double> rounds, cent;
    for (std::size_t r = 0; r < spec.reps; ++r) {
      const auto& res = results[k * spec.reps + r];
      cent.push_back(res.cent);
      if (res.value) rounds.push_back(*res.value);
    }
    row.lambda = results[k * spec.reps].lambda;
    row.gamma = results[k * spec.reps].gamma;
    row.cent_err = summarize(cent);
    row.met_reps = rounds.size();
    if (!rounds.empty()) row.rounds = summarize(rounds);
    else out.band_failures.push_back(row.value);
    out.rows.push_back(row);
  }
  return out;
}

SweepResult run_sweep(const ExperimentSpec& spec) {
  switch (spec.axis) {
  case SweepAxis::lambda:
  case SweepAxis::gamma: return sweep_lambda_or_gamma(spec);
  case SweepAxis::d: return sweep_dimension(spec);
  case SweepAxis::m: return sweep_agents(spec);
  case SweepAxis::none: break;
  }
  throw ConfigError("sweep needs an axis (lambda, gamma, d or m)");
}

// ---------------------------------------------------------------------------
// Convergence bundle

std::string trace_file_name(double gamma) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "trace_%g.csv", gamma);
  return buf;
}

ConvergenceBundle convergence_bundle(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.gammas.empty()) throw ConfigError("convergence needs at least one gamma");
  const auto inst = build_instance(spec, spec.seed);
  NetworkProblem problem(inst.shards, inst.w);
  ConvergenceBundle out;
  out.gammas = spec.gammas;
  out.traces.resize(spec.gammas.size());

  ExperimentSpec base = spec;
  base.gamma = spec.gammas.front();
  base.beta.reset();
  const auto params = resolve_parameters(base, inst, problem);
  out.lambda = params.lambda;
  out.centralized_error = centralized_fit(inst, params.lambda, params.radius).error;
  if (inst.truth) out.local_error = local_error(spec, inst);

  parallel_for(spec.gammas.size(), [&](std::size_t k) {
    auto p = params;
    p.gamma = spec.gammas[k];
    p.beta = problem.beta_limit(p.gamma);
    p.provenance["gamma"] = "bundle";
    RunOptions opts;
    opts.truth = inst.truth ? &*inst.truth : nullptr;
    opts.test = inst.test ? &*inst.test : nullptr;
    out.traces[k] = run(problem, solver_config(spec, p), opts);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics

nlohmann::json diagnostics_report(const ExperimentSpec& spec) {
  const auto inst = build_instance(spec, spec.seed);
  NetworkProblem problem(inst.shards, inst.w);
  const auto inp = theory_inputs(spec, inst, problem);
  const auto params = resolve_parameters(spec, inst, problem);
  nlohmann::json report = nlohmann::json::object();

  auto entry = [&](const std::string& key, nlohmann::json inputs, const std::string& reference, auto&& compute) {
    nlohmann::json e{{"inputs", std::move(inputs)}, {"reference", reference}};
    try {
      e["output"] = compute();
    } catch (const std::exception& ex) {
      e["output"] = nullptr;
      e["error"] = ex.what();
    }
    report[key] = std::move(e);
  };

  const double d = static_cast<double>(inp.d);
  entry("choose_lambda",
        {{"c4", inp.constants.get("c4")}, {"sigma", inp.sigma}, {"zeta_sigma", inp.zeta_sigma}, {"t0", inp.t0},
         {"d", inp.d}, {"N", inp.N}},
        "lambda = c4 sigma sqrt(zeta_sigma t0 ln d / N)", [&] { return theory::choose_lambda(inp); });
  entry("choose_gamma",
        {{"c5", inp.constants.get("c5")}, {"rho", inp.rho}, {"lambda_max_cov", inp.lambda_max_cov},
         {"lambda_min_cov", inp.lambda_min_cov}, {"d", inp.d}, {"m", inp.m}},
        "gamma = c5 (1 - rho) / (lambda_max(Sigma)(d + ln m) + lambda_min(Sigma) d m (ln m + 1))",
        [&] { return theory::choose_gamma(inp); });
  entry("choose_beta", {{"gamma", params.gamma}, {"L_max", inp.L_max}, {"lambda_min_W", inp.lambda_min_W}},
        "beta = gamma / (gamma L_max + 1 - lambda_min(W))",
        [&] { return theory::choose_beta(params.gamma, inp.L_max, inp.lambda_min_W); });

  const auto rsc = theory::rsc_from_population(inp);
  entry("rsc_from_population",
        {{"c1", inp.constants.get("c1")}, {"lambda_min_cov", inp.lambda_min_cov}, {"zeta_sigma", inp.zeta_sigma},
         {"d", inp.d}, {"N", inp.N}},
        "mu = lambda_min(Sigma), tau = 2 c1 zeta_sigma ln d / N",
        [&] { return nlohmann::json{{"mu", rsc.mu}, {"tau", rsc.tau}}; });
  entry("rsc_check", {{"mu", rsc.mu}, {"tau", rsc.tau}, {"num_dirs", 3000}, {"N", inp.N}, {"d", inp.d}},
        "min over sampled unit directions of ||X D||^2/N - (mu/2)||D||^2 + (tau/2)||D||_1^2",
        [&] { return theory::rsc_check(inst.data.X, rsc, 3000, derive_seed(spec.seed, 11)); });
  entry("radius_bounds",
        {{"lambda", params.lambda}, {"s", inp.s}, {"mu", rsc.mu}, {"tau", rsc.tau},
         {"l1_truth", inst.truth ? inst.truth->l1() : 0.0}},
        "max{56 lambda s / (mu - 32 s tau), 2 ||theta*||_1} <= R <= lambda / (32 tau)", [&] {
          const auto iv = theory::radius_bounds(params.lambda, inp.s, rsc, inst.truth ? inst.truth->l1() : 0.0);
          return nlohmann::json{{"lower", iv.lower},
                                {"upper", std::isinf(iv.upper) ? nlohmann::json("inf") : nlohmann::json(iv.upper)},
                                {"empty", iv.empty()}};
        });

  std::optional<double> noise_corr;
  if (inst.shards.has_noise()) {
    noise_corr = theory::max_noise_correlation(inst.shards);
    entry("lambda_noise_floor", {{"N", inp.N}}, "2 ||X^T w||_inf / N",
          [&] { return theory::lambda_noise_floor(inst.shards); });
  }

  // Solve once with the resolved parameters for the solution-dependent entries.
  auto cfg = solver_config(spec, params);
  cfg.metric_stride = std::max<std::size_t>(spec.iters, 1);
  RunOptions opts;
  opts.truth = inst.truth ? &*inst.truth : nullptr;
  opts.test = inst.test ? &*inst.test : nullptr;
  const auto tr = run(problem, cfg, opts);
  const double measured = estimate_error(inst, tr.final_state);
  const double eta0 = tr.metrics.front().objective_G - tr.metrics.back().objective_G;
  report["measured"] = {{"inputs", {{"iterations", tr.iterations}, {"lambda", params.lambda}, {"gamma", params.gamma},
                                    {"beta", params.beta}, {"radius", params.radius}}},
                        {"reference", inst.truth ? "(1/m) sum ||theta_i - theta*||^2" : "test MSE"},
                        {"output", measured}};

  std::optional<theory::RateQuantities> rates;
  entry("rate_quantities",
        {{"beta", params.beta}, {"lambda", params.lambda}, {"gamma", params.gamma}, {"mu", rsc.mu}, {"tau", rsc.tau},
         {"s", inp.s}, {"avg_err_hat", measured}, {"max_noise_corr", noise_corr.value_or(0.0)}},
        "mu_av = mu/8 - 8 s tau; kappa = 1 - beta mu_av / 4; eps_stat^2 = 36 avg_err + lambda^2 s / (1976 mu^2); "
        "h_max = d gamma / (lambda (1 - rho)) (max_corr / n + lambda)^2",
        [&] {
          rates = theory::rate_quantities(inp, rsc, params.beta, params.lambda, params.gamma,
                                          noise_corr.value_or(0.0), measured);
          return nlohmann::json{{"mu_av", rates->mu_av},
                                {"kappa", rates->kappa},
                                {"kappa_epoch", rates->kappa_epoch},
                                {"eps_stat_sq", rates->eps_stat_sq},
                                {"h_max", rates->h_max}};
        });
  if (rates) {
    const double alpha_sq = std::min({params.radius * params.lambda / 4.0, eta0, rates->eps_stat_sq});
    entry("iteration_bound",
          {{"eta0", eta0}, {"alpha_sq", alpha_sq}, {"R", params.radius}, {"lambda", params.lambda},
           {"gamma", params.gamma}, {"L_max", inp.L_max}, {"rho", inp.rho}},
          "ceil(log2 log2(R lambda / alpha^2)) (1 + L_max ln2 / mu_av + (1 + rho) ln2 / (gamma mu_av)) + "
          "(L_max / mu_av + (1 + rho) / (gamma mu_av)) ln(eta0 / alpha^2)",
          [&] {
            const auto b = theory::iteration_bound(eta0, alpha_sq, params.radius, params.lambda, *rates,
                                                   params.gamma, inp.L_max, inp.rho, inp);
            return nlohmann::json{{"value", b.value}, {"iterations", b.iterations},
                                  {"order_estimate", b.order_estimate}};
          });
  }

  if (inst.truth && noise_corr) {
    StackedState err = tr.final_state;
    err.blocks.colwise() -= inst.truth->theta;
    entry("cone_membership",
          {{"gamma", params.gamma}, {"lambda", params.lambda}, {"rho", inp.rho}, {"max_noise_corr", *noise_corr},
           {"lambda_condition_met", params.lambda >= theory::lambda_noise_floor(inst.shards)}},
          "3 ||(D_av)_S||_1 + h(gamma, ||D_perp||) - ||(D_av)_{S^c}||_1",
          [&] { return theory::cone_membership(err, *inst.truth, params.gamma, params.lambda, inst.shards, inp.rho); });
    entry("error_bound_gamma_limit", {{"rho", inp.rho}, {"L_max", inp.L_max}, {"mu", rsc.mu}, {"tau", rsc.tau}},
          "2 (1 - rho) / (4 L_max + delta), delta = mu/2 - 16 s tau",
          [&] { return theory::error_bound_gamma_limit(inp, rsc); });
    entry("error_bound_eval",
          {{"lambda", params.lambda}, {"gamma", params.gamma}, {"max_noise_corr", *noise_corr}, {"d", d},
           {"measured", measured}},
          "9 lambda^2 s / delta^2 + 2 xi d^2 gamma^2 (C + lambda n)^4 / (delta lambda^2 n^4 (1 - rho)^2) + "
          "4 d gamma (C + lambda n)^2 / (delta n^2 (2 (1 - rho) - 4 L_max gamma - delta gamma))",
          [&] { return theory::error_bound_eval(inp, rsc, params.lambda, params.gamma, *noise_corr); });
  }
  return report;
}

} // namespace netlasso::harness
