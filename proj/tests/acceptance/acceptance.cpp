// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any selected criterion fails.
//
//   acceptance                 run every criterion
//   acceptance --criterion 5   run only criterion 5 (repeatable)

#include "netlasso/harness.hpp"
#include "netlasso/proxops.hpp"

#include "../support/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace netlasso;
namespace hx = netlasso::harness;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string g(double v) { return fmt("%.4g", v); }

// ---------------------------------------------------------------------------
// 1. Prox / projection property suite.

Outcome criterion_prox_properties() {
  Rng rng(1);
  std::uniform_int_distribution<Eigen::Index> dim(1, 50);
  std::uniform_real_distribution<double> radius(0.05, 5.0);
  std::uniform_real_distribution<double> level(0.0, 2.0);
  std::size_t violations = 0;
  double worst_kkt = 0.0;
  double worst_expansion = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = dim(rng);
    const Vector u = oracle::random_vector(rng, d);
    const Vector v = oracle::random_vector(rng, d);
    const double R = radius(rng);
    const double t = level(rng);
    const Vector pu = project_l1_ball(u, R);
    const Vector pv = project_l1_ball(v, R);
    const double expansion = (pu - pv).norm() - (u - v).norm();
    const double kkt = kkt_residual_l1ball(u, pu, R);
    worst_expansion = std::max(worst_expansion, expansion);
    worst_kkt = std::max(worst_kkt, kkt);
    bool ok = pu.lpNorm<1>() <= R + 1e-9 && expansion <= 1e-12 && project_l1_ball(pu, R) == pu && kkt <= 1e-9;
    // Soft thresholding against the closed form, bit for bit.
    const Vector st = soft_threshold(u, t);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double x = u(j);
      const double expect = x > t ? x - t : (x < -t ? x + t : 0.0);
      if (st(j) != expect) ok = false;
    }
    if (!ok) ++violations;
  }
  return {violations == 0, std::to_string(violations) + "/1000 violations, max KKT residual " + g(worst_kkt) +
                               ", max expansion " + g(worst_expansion)};
}

// ---------------------------------------------------------------------------
// 2. Per-agent subproblem against a brute-force grid minimum.

Outcome criterion_subproblem_oracle() {
  Rng rng(2);
  std::uniform_int_distribution<Eigen::Index> dim(1, 3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> radius(0.2, 2.0);
  std::uniform_real_distribution<double> level(0.0, 1.0);
  double worst = 0.0;
  std::size_t violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = dim(rng);
    Vector psi(d);
    for (Eigen::Index j = 0; j < d; ++j) psi(j) = gauss(rng);
    const double c = level(rng);
    const double R = radius(rng);
    const Vector x = constrained_prox(psi, c, R);
    const double gap = std::abs(oracle::prox_objective(x, psi, c) - oracle::grid_min_prox(psi, c, R, 1e-3));
    worst = std::max(worst, gap);
    if (gap > 1e-3 || x.lpNorm<1>() > R + 1e-9) ++violations;
  }
  return {violations == 0, std::to_string(violations) + "/100 violations, max |objective - grid min| " + g(worst)};
}

// ---------------------------------------------------------------------------
// 3. A single agent is centralized ISTA.

Outcome criterion_single_agent() {
  double worst = 0.0;
  for (Seed seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t d = 5 + seed % 20;
    const std::size_t N = 20 + 3 * seed;
    const auto truth = gen_sparse_truth(d, 1 + seed % 4, derive_seed(seed, 1));
    const auto data = gen_observations(gen_ar_design(N, d, 0.25, derive_seed(seed, 2)), truth, 0.5,
                                       derive_seed(seed, 3));
    const auto shards = partition(data, 1);
    const GossipMatrix w{Matrix::Ones(1, 1), 0.0};
    NetworkProblem problem(shards, w);
    SolverConfig cfg;
    cfg.lambda = 0.01 + 0.01 * static_cast<double>(seed % 5);
    cfg.gamma = 0.5;
    cfg.beta = problem.beta_limit(cfg.gamma);
    cfg.max_iters = 200;
    if (seed % 2 == 1) cfg.radius = 0.5 * truth.l1();
    std::vector<Vector> dist, cent;
    RunOptions ro;
    ro.observer = [&](const StackedState& st) { dist.push_back(st.blocks.col(0)); };
    run(problem, cfg, ro);
    CentralizedOptions co;
    co.radius = cfg.radius;
    co.observer = [&](const Vector& v) { cent.push_back(v); };
    centralized_ista(data, cfg.lambda, cfg.beta, cfg.max_iters, 0.0, co);
    if (dist.size() != cent.size()) return {false, "iterate counts differ for seed " + std::to_string(seed)};
    for (std::size_t k = 0; k < dist.size(); ++k) {
      const double scale = std::max(cent[k].norm(), std::numeric_limits<double>::min());
      const double rel = cent[k].norm() == 0.0 ? dist[k].norm() : (dist[k] - cent[k]).norm() / scale;
      worst = std::max(worst, rel);
    }
  }
  return {worst <= 1e-10, "20 instances x 201 iterates, max relative deviation " + g(worst)};
}

// ---------------------------------------------------------------------------
// 4. Monotone descent of G at the majorization stepsize.

Outcome criterion_monotone_descent() {
  double worst = -std::numeric_limits<double>::infinity();
  const TopologyKind kinds[] = {TopologyKind::path, TopologyKind::complete, TopologyKind::star,
                                TopologyKind::erdos_renyi};
  for (Seed seed = 0; seed < 200; ++seed) {
    const std::size_t m = 2 + seed % 6;
    const std::size_t d = 3 + seed % 17;
    const std::size_t n = 3 + seed % 5;
    const auto truth = gen_sparse_truth(d, 1 + seed % 3, derive_seed(seed, 1));
    const auto data = gen_observations(gen_ar_design(m * n, d, 0.25, derive_seed(seed, 2)), truth, 0.5,
                                       derive_seed(seed, 3));
    const auto shards = partition(data, m);
    const auto kind = kinds[seed % 4];
    const auto graph =
        build_topology(kind, m, kind == TopologyKind::erdos_renyi ? std::optional<double>(0.7) : std::nullopt,
                       derive_seed(seed, 4));
    const auto w = lazy_metropolis_weights(graph);
    NetworkProblem problem(shards, w);
    SolverConfig cfg;
    cfg.lambda = 0.01 + 0.02 * static_cast<double>(seed % 5);
    cfg.gamma = std::pow(10.0, -4.0 + static_cast<double>(seed % 5));
    cfg.beta = problem.beta_limit(cfg.gamma);
    cfg.max_iters = 200;
    if (seed % 3 == 0) cfg.radius = 0.5 * truth.l1() + 0.05;
    const auto tr = run(problem, cfg);
    for (std::size_t k = 1; k < tr.metrics.size(); ++k)
      worst = std::max(worst, tr.metrics[k].objective_G - tr.metrics[k - 1].objective_G);
  }
  return {worst <= 1e-12, "200 instances x 200 iterations, max increase of G " + g(worst)};
}

// ---------------------------------------------------------------------------
// 5. Statistical recovery on the N=220, d=400, m=20 instance.

hx::ExperimentSpec recovery_spec(TopologyKind kind, double gamma) {
  hx::ExperimentSpec spec;
  spec.N = 220;
  spec.m = 20;
  spec.d = 400;
  spec.sigma = 0.5;
  spec.topology = kind;
  if (kind == TopologyKind::erdos_renyi) spec.p = 0.1;
  spec.gamma = gamma;
  spec.axis = hx::SweepAxis::lambda;
  for (int k = 0; k <= 4; ++k) spec.grid.push_back(0.02 * std::pow(5.0, k / 4.0));
  spec.reps = 10;
  spec.seed = 5;
  return spec;
}

struct RecoveryMins {
  double dist = 0.0;
  double cent = 0.0;
  double ratio() const { return dist / cent; }
};

RecoveryMins recovery_mins(const hx::ExperimentSpec& spec) {
  const auto res = hx::sweep_lambda_or_gamma(spec);
  RecoveryMins out{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (const auto& row : res.rows) {
    out.dist = std::min(out.dist, row.dist_err->mean);
    out.cent = std::min(out.cent, row.cent_err->mean);
  }
  return out;
}

Outcome criterion_recovery() {
  const double factor = 1.5;
  const auto complete = recovery_mins(recovery_spec(TopologyKind::complete, 5e-4));
  const auto er_large = recovery_mins(recovery_spec(TopologyKind::erdos_renyi, 5e-4));
  const auto er_small = recovery_mins(recovery_spec(TopologyKind::erdos_renyi, 1e-4));
  const bool complete_met = complete.ratio() <= factor;
  const bool er_large_missed = er_large.ratio() > factor;
  const bool er_small_met = er_small.ratio() <= factor;
  std::ostringstream os;
  os << "min-over-lambda dist/cent error ratio (limit " << factor << "): complete gamma=5e-4 " << g(complete.ratio())
     << " [" << (complete_met ? "met" : "NOT met") << "]; ER p=0.1 gamma=5e-4 " << g(er_large.ratio()) << " ["
     << (er_large_missed ? "NOT met, as required" : "met, expected NOT met") << "]; ER p=0.1 gamma=1e-4 "
     << g(er_small.ratio()) << " [" << (er_small_met ? "met" : "NOT met") << "]; centralized min error "
     << g(complete.cent);
  return {complete_met && er_large_missed && er_small_met, os.str()};
}

// ---------------------------------------------------------------------------
// 6. Critical gamma versus dimension.

Outcome criterion_gamma_dimension() {
  hx::ExperimentSpec spec;
  spec.m = 5;
  spec.d = 360;
  spec.axis = hx::SweepAxis::d;
  spec.grid = {360, 800};
  spec.ratio = 0.1;
  spec.reps = 30;
  spec.seed = 6;
  const auto res = hx::sweep_dimension(spec);
  if (res.rows.size() != 2 || !res.rows[0].inv_gamma || !res.rows[1].inv_gamma)
    return {false, "critical gamma not found on the search grid"};
  const double ratio = res.rows[1].inv_gamma->mean / res.rows[0].inv_gamma->mean;
  std::ostringstream os;
  os << "critical gamma ratio d=360/d=800 " << g(ratio) << " (band [1.4, 2.8]); 1/gamma " << g(res.rows[0].inv_gamma->mean)
     << " (N=" << *res.rows[0].N << ", s=" << *res.rows[0].s << ") vs " << g(res.rows[1].inv_gamma->mean)
     << " (N=" << *res.rows[1].N << ", s=" << *res.rows[1].s << ")";
  return {ratio >= 1.4 && ratio <= 2.8, os.str()};
}

// ---------------------------------------------------------------------------
// 7. Speed-accuracy dilemma.

struct PlateauFit {
  double plateau = 0.0;
  std::size_t iterations = 0;
  double r2 = 0.0;
};

// Plateau = final error; iterations-to-plateau = first recorded iteration
// within 1% of it; R^2 of a least-squares line through log(err - plateau)
// over the iterations up to that point.
PlateauFit fit_plateau(const std::vector<IterationMetrics>& trace) {
  PlateauFit f;
  f.plateau = *trace.back().avg_est_err;
  for (const auto& row : trace) {
    if (*row.avg_est_err <= 1.01 * f.plateau) {
      f.iterations = row.iter;
      break;
    }
  }
  std::vector<double> t, y;
  for (const auto& row : trace) {
    if (row.iter > f.iterations) break;
    const double excess = *row.avg_est_err - f.plateau;
    if (excess <= 0.0) continue;
    t.push_back(static_cast<double>(row.iter));
    y.push_back(std::log(excess));
  }
  const auto k = static_cast<double>(t.size());
  if (t.size() < 3) return f;
  double mt = 0.0, my = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) mt += t[i] / k, my += y[i] / k;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    stt += (t[i] - mt) * (t[i] - mt);
    sty += (t[i] - mt) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  f.r2 = syy > 0.0 ? sty * sty / (stt * syy) : 1.0;
  return f;
}

Outcome criterion_speed_accuracy() {
  hx::ExperimentSpec spec;
  spec.m = 10;
  spec.N = 200;
  spec.d = 100;
  spec.topology = TopologyKind::path;
  spec.gammas = {1e-3, 1e-4, 1e-5};
  spec.iters = 1600000;
  spec.metric_stride = 500;
  spec.seed = 1;
  const auto bundle = hx::convergence_bundle(spec);
  std::vector<PlateauFit> fits;
  for (const auto& tr : bundle.traces) fits.push_back(fit_plateau(tr.metrics));
  bool ok = true;
  std::ostringstream os;
  for (std::size_t k = 0; k < fits.size(); ++k) {
    os << "gamma=" << g(bundle.gammas[k]) << ": plateau " << g(fits[k].plateau) << ", iters " << fits[k].iterations
       << ", R2 " << fmt("%.4f", fits[k].r2) << "; ";
    ok = ok && fits[k].r2 >= 0.95;
    if (k > 0) ok = ok && fits[k].plateau < fits[k - 1].plateau && fits[k].iterations > fits[k - 1].iterations;
  }
  os << "centralized " << g(bundle.centralized_error);
  return {ok, os.str()};
}

// ---------------------------------------------------------------------------
// 8. Gossip spectra.

Outcome criterion_gossip_spectra() {
  std::vector<std::string> problems;
  const auto uniform = uniform_average_matrix(8);
  if (uniform.rho != 0.0) problems.push_back("uniform rho = " + g(uniform.rho));
  const auto lazy_path = lazy_metropolis_weights(build_topology(TopologyKind::path, 3, std::nullopt, 0));
  if (std::abs(lazy_path.rho - 0.75) > 1e-9) problems.push_back("lazy path rho = " + fmt("%.12f", lazy_path.rho));

  std::size_t checked = 0;
  struct Case {
    TopologyKind kind;
    std::size_t m;
    std::optional<double> p;
  };
  const Case cases[] = {{TopologyKind::complete, 2, std::nullopt}, {TopologyKind::complete, 20, std::nullopt},
                        {TopologyKind::star, 9, std::nullopt},     {TopologyKind::path, 3, std::nullopt},
                        {TopologyKind::path, 30, std::nullopt},    {TopologyKind::grid2d, 16, std::nullopt},
                        {TopologyKind::erdos_renyi, 20, 0.1},      {TopologyKind::erdos_renyi, 50, 0.3}};
  for (const auto& c : cases) {
    for (Seed seed = 0; seed < 5; ++seed) {
      const auto graph = build_topology(c.kind, c.m, c.p, seed);
      for (auto rule : {WeightRule::metropolis, WeightRule::lazy_metropolis, WeightRule::uniform}) {
        if (rule == WeightRule::uniform && c.kind != TopologyKind::complete) continue;
        const auto w = gossip_matrix(graph, rule);
        ++checked;
        for (const auto& issue : check_gossip_invariants(w.W, graph))
          problems.push_back(to_string(c.kind) + "/" + to_string(rule) + ": " + issue);
        if (!(w.rho < 1.0)) problems.push_back(to_string(c.kind) + "/" + to_string(rule) + ": rho >= 1");
      }
    }
  }
  std::ostringstream os;
  os << "uniform rho " << g(uniform.rho) << ", lazy path m=3 rho " << fmt("%.12f", lazy_path.rho) << ", " << checked
     << " generated matrices checked";
  if (!problems.empty()) os << "; first problem: " << problems.front();
  return {problems.empty(), os.str()};
}

// ---------------------------------------------------------------------------
// 9. Theory diagnostics on solved instances.

Outcome criterion_theory_diagnostics() {
  const TopologyKind kinds[] = {TopologyKind::complete, TopologyKind::path, TopologyKind::erdos_renyi};
  const std::size_t agents[] = {4, 5, 8};
  std::size_t cone_runs = 0, cone_ok = 0, bound_runs = 0, bound_ok = 0;
  double worst_cone = std::numeric_limits<double>::infinity();
  double worst_bound_ratio = 0.0;
  for (std::size_t k = 0; k < 20; ++k) {
    hx::ExperimentSpec spec;
    spec.N = 2000;
    spec.d = 30;
    spec.s = 2;
    spec.m = agents[k % 3];
    spec.topology = kinds[(k / 3) % 3];
    if (spec.topology == TopologyKind::erdos_renyi) spec.p = 0.6;
    spec.seed = 900 + k;
    const auto inst = hx::build_instance(spec, spec.seed);
    NetworkProblem problem(inst.shards, inst.w);
    const auto inp = hx::theory_inputs(spec, inst, problem);
    const auto rsc = theory::rsc_from_population(inp);
    const double floor = theory::lambda_noise_floor(inst.shards);
    const double noise_corr = theory::max_noise_correlation(inst.shards);

    // lambda just above the noise floor, gamma inside both step conditions.
    spec.lambda = std::max(theory::choose_lambda(inp), 1.05 * floor);
    const double delta = rsc.mu / 2.0 - 16.0 * static_cast<double>(inp.s) * rsc.tau;
    spec.gamma = std::min(0.5 * theory::error_bound_gamma_limit(inp, rsc), (1.0 - inp.rho) / inp.L_max);
    const auto params = hx::resolve_parameters(spec, inst, problem);
    const auto warm = hx::centralized_fit(inst, params.lambda, params.radius);
    const auto state = hx::distributed_fit(problem, hx::solver_config(spec, params), warm.theta, 500000, 1e-13);

    StackedState err = state;
    for (std::size_t i = 0; i < err.m(); ++i) err.blocks.col(static_cast<Eigen::Index>(i)) -= inst.truth->theta;
    const double cone = theory::cone_membership(err, *inst.truth, params.gamma, params.lambda, inst.shards, inp.rho);
    ++cone_runs;
    worst_cone = std::min(worst_cone, cone);
    if (cone >= -1e-9) ++cone_ok;

    if (delta > 0.0) {
      const double bound = theory::error_bound_eval(inp, rsc, params.lambda, params.gamma, noise_corr);
      const double measured = hx::estimate_error(inst, state);
      ++bound_runs;
      worst_bound_ratio = std::max(worst_bound_ratio, measured / bound);
      if (measured <= bound) ++bound_ok;
    }
  }
  const bool pass = cone_runs == 20 && bound_runs == 20 && 10 * cone_ok >= 9 * cone_runs &&
                    10 * bound_ok >= 9 * bound_runs;
  std::ostringstream os;
  os << "cone residual >= -1e-9 on " << cone_ok << "/" << cone_runs << " (min " << g(worst_cone)
     << "); error bound holds on " << bound_ok << "/" << bound_runs << " (max measured/bound " << g(worst_bound_ratio)
     << ")";
  return {pass, os.str()};
}

struct Criterion {
  int id;
  const char* name;
  double time_limit_s; // 0 = no stated limit
  std::function<Outcome()> check;
};

} // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int a = 1; a < argc; ++a) {
    const std::string arg = argv[a];
    if (arg == "--criterion" && a + 1 < argc) {
      selected.insert(std::atoi(argv[++a]));
    } else {
      std::cerr << "usage: acceptance [--criterion k]...\n";
      return 2;
    }
  }

  const std::vector<Criterion> criteria = {
      {1, "prox/projection properties", 5.0, criterion_prox_properties},
      {2, "subproblem optimality oracle", 30.0, criterion_subproblem_oracle},
      {3, "m=1 reduction", 10.0, criterion_single_agent},
      {4, "monotone descent", 60.0, criterion_monotone_descent},
      {5, "statistical recovery", 0.0, criterion_recovery},
      {6, "gamma-d scaling", 0.0, criterion_gamma_dimension},
      {7, "speed-accuracy dilemma", 300.0, criterion_speed_accuracy},
      {8, "gossip spectra", 0.0, criterion_gossip_spectra},
      {9, "theory diagnostics", 0.0, criterion_theory_diagnostics},
  };

  bool all = true;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.check();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt("%.1f s", secs);
    if (c.time_limit_s > 0.0) {
      timing += fmt(", limit %.0f s", c.time_limit_s);
      if (secs > c.time_limit_s) {
        out.pass = false;
        out.detail += "; runtime limit exceeded";
      }
    }
    std::cout << (out.pass ? "[PASS]" : "[FAIL]") << " criterion " << c.id << " (" << c.name << ", " << timing
              << "): " << out.detail << std::endl;
    all = all && out.pass;
  }
  return all ? 0 : 1;
}
