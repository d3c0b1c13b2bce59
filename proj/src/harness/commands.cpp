#include "netlasso/harness.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace netlasso::harness {

namespace {

namespace fs = std::filesystem;

fs::path prepare_out(const ExperimentSpec& spec) {
  const fs::path dir(spec.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  auto os = open_out(path);
  os << j.dump(2) << '\n';
}

nlohmann::json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

nlohmann::json instance_facts(const Instance& inst, const NetworkProblem& problem) {
  return {{"N", inst.shards.N()},
          {"n", inst.shards.n},
          {"m", inst.shards.m},
          {"d", inst.shards.d},
          {"s", inst.truth ? nlohmann::json(inst.truth->s()) : nlohmann::json(nullptr)},
          {"rho", inst.w.rho},
          {"edges", inst.graph.edges.size()},
          {"L_max", problem.l_max()},
          {"lambda_min_W", problem.lambda_min_w()},
          {"seed", inst.seed}};
}

nlohmann::json resolved_json(const ResolvedParams& p) {
  return {{"lambda", p.lambda},
          {"gamma", p.gamma},
          {"beta", p.beta},
          {"radius", number_or_string(p.radius)},
          {"provenance", p.provenance}};
}

nlohmann::json manifest_base(const std::string& command, const ExperimentSpec& spec) {
  return {{"tool", "netlasso"}, {"command", command}, {"spec", to_json(spec)}, {"input_hash", input_hash(spec)}};
}

void write_trace(const fs::path& path, const RunTrace& tr) {
  auto os = open_out(path);
  write_trace_csv(os, tr.metrics);
}

} // namespace

int cmd_generate(const ExperimentSpec& spec) {
  if (spec.data_csv) throw ConfigError("generate produces synthetic data; drop data_csv");
  const auto dir = prepare_out(spec);
  const auto inst = build_instance(spec, spec.seed);
  {
    auto os = open_out(dir / "data.csv");
    write_dataset_csv(os, inst.data);
  }
  write_json(dir / "truth.json", truth_to_json(*inst.truth, spec.seed));
  auto manifest = manifest_base("generate", spec);
  manifest["outputs"] = {"data.csv", "truth.json"};
  manifest["instance"] = {{"N", inst.data.N()}, {"d", inst.data.d()}, {"s", inst.truth->s()}, {"seed", spec.seed}};
  write_json(dir / "manifest.json", manifest);
  return kExitOk;
}

int cmd_solve(const ExperimentSpec& spec) {
  const auto dir = prepare_out(spec);
  const auto inst = build_instance(spec, spec.seed);
  NetworkProblem problem(inst.shards, inst.w);
  auto manifest = manifest_base("solve", spec);
  manifest["instance"] = instance_facts(inst, problem);

  RunTrace tr;
  if (spec.centralized) {
    ExperimentSpec local = spec;
    const double step = spec.beta ? *spec.beta : centralized_step_limit(inst.data);
    if (!local.gamma) local.gamma = 1.0; // unused by the centralized path
    auto params = resolve_parameters(local, inst, problem);
    params.beta = step;
    params.gamma = std::numeric_limits<double>::quiet_NaN();
    params.provenance["beta"] = spec.beta ? "user" : "rule: N / lambda_max(X^T X)";
    params.provenance.erase("gamma");
    CentralizedOptions opts;
    opts.radius = params.radius;
    opts.strict = spec.strict;
    opts.metric_stride = spec.metric_stride;
    opts.truth = inst.truth ? &*inst.truth : nullptr;
    opts.test = inst.test ? &*inst.test : nullptr;
    tr = centralized_ista(inst.data, params.lambda, step, spec.iters, spec.rel_tol, opts);
    manifest["resolved"] = {{"lambda", params.lambda},
                            {"beta", step},
                            {"radius", number_or_string(params.radius)},
                            {"provenance", params.provenance}};
  } else {
    const auto params = resolve_parameters(spec, inst, problem);
    RunOptions opts;
    opts.truth = inst.truth ? &*inst.truth : nullptr;
    opts.test = inst.test ? &*inst.test : nullptr;
    tr = run(problem, solver_config(spec, params), opts);
    manifest["resolved"] = resolved_json(params);
  }
  write_trace(dir / "trace.csv", tr);
  manifest["outputs"] = {"trace.csv"};
  manifest["results"] = {{"iterations", tr.iterations},
                         {"converged", tr.converged},
                         {"final", {{"consensus_err", tr.metrics.back().consensus_err},
                                    {"objective_G", tr.metrics.back().objective_G}}}};
  if (tr.metrics.back().avg_est_err) manifest["results"]["final"]["avg_est_err"] = *tr.metrics.back().avg_est_err;
  if (tr.metrics.back().mse_test) manifest["results"]["final"]["mse_test"] = *tr.metrics.back().mse_test;
  write_json(dir / "manifest.json", manifest);
  return kExitOk;
}

int cmd_sweep(const ExperimentSpec& spec) {
  const auto dir = prepare_out(spec);
  const auto result = run_sweep(spec);
  {
    auto os = open_out(dir / "sweep.csv");
    write_sweep_csv(os, result.rows);
  }
  auto manifest = manifest_base("sweep", spec);
  manifest["outputs"] = {"sweep.csv"};
  manifest["results"] = {{"band_failures", result.band_failures}, {"rows", result.rows.size()}};
  if (spec.axis == SweepAxis::d || spec.axis == SweepAxis::m)
    manifest["results"]["gamma_grid"] = spec.gamma_grid.empty() ? default_gamma_grid() : spec.gamma_grid;
  write_json(dir / "manifest.json", manifest);
  return result.band_failures.empty() ? kExitOk : kExitBandNotMet;
}

int cmd_convergence(const ExperimentSpec& spec) {
  const auto dir = prepare_out(spec);
  const auto bundle = convergence_bundle(spec);
  nlohmann::json files = nlohmann::json::array();
  for (std::size_t k = 0; k < bundle.gammas.size(); ++k) {
    const auto name = trace_file_name(bundle.gammas[k]);
    write_trace(dir / name, bundle.traces[k]);
    files.push_back({{"gamma", bundle.gammas[k]}, {"file", name}, {"iterations", bundle.traces[k].iterations}});
  }
  auto manifest = manifest_base("convergence", spec);
  manifest["outputs"] = files;
  manifest["references"] = {{"lambda", bundle.lambda},
                            {"centralized_error", bundle.centralized_error},
                            {"local_error", bundle.local_error ? nlohmann::json(*bundle.local_error)
                                                               : nlohmann::json(nullptr)}};
  write_json(dir / "manifest.json", manifest);
  return kExitOk;
}

int cmd_diagnose(const ExperimentSpec& spec) {
  const auto dir = prepare_out(spec);
  write_json(dir / "diagnostics.json", diagnostics_report(spec));
  auto manifest = manifest_base("diagnose", spec);
  manifest["outputs"] = {"diagnostics.json"};
  write_json(dir / "manifest.json", manifest);
  return kExitOk;
}

} // namespace netlasso::harness
