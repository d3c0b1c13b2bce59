#pragma once

#include "netlasso/common.hpp"
#include "netlasso/datagen.hpp"
#include "netlasso/graph.hpp"
#include "netlasso/solver.hpp"
#include "netlasso/theory.hpp"

#include <nlohmann/json.hpp>

#include <exception>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace netlasso::harness {

/// Exit codes shared by the CLI and the command functions.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitBandNotMet = 4;

enum class SweepAxis { none, lambda, gamma, d, m };
std::string to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view name);

/// Everything needed to reproduce one experiment. Optional solver
/// parameters fall back to the selection rules when absent.
struct ExperimentSpec {
  std::string name = "experiment";

  // Data: synthetic AR(phi) design, or a CSV file with y in column 0.
  std::size_t N = 220;
  std::size_t d = 400;
  std::optional<std::size_t> s; // default ceil(ln d)
  double sigma = 0.5;
  double phi = 0.25;
  std::optional<std::string> data_csv;
  std::size_t n_test = 0;

  // Network.
  std::size_t m = 20;
  TopologyKind topology = TopologyKind::complete;
  std::optional<double> p;
  WeightRule weights = WeightRule::lazy_metropolis;

  // Solver.
  std::optional<double> lambda;
  std::optional<double> gamma;
  std::optional<double> beta;
  std::optional<double> radius;
  std::size_t iters = 5000;
  double rel_tol = 0.0;
  std::size_t metric_stride = 1;
  bool strict = true;
  bool centralized = false;
  bool record_timing = false;
  double t0 = 2.0;
  theory::Constants constants;

  // Sweeps and bundles.
  SweepAxis axis = SweepAxis::none;
  std::vector<double> grid;
  std::size_t reps = 30;
  std::vector<double> gammas{1e-3, 1e-4, 1e-5};
  /// Relative tolerance of the centralized-error band (0.03 = within 3%).
  double band = 0.03;
  /// s ln d / N held fixed across the d axis.
  std::optional<double> ratio;
  /// Candidate gammas for critical-gamma searches; empty means the default
  /// logarithmic grid.
  std::vector<double> gamma_grid;
  std::size_t sweep_iters = 400000;
  double sweep_rel_tol = 1e-9;

  Seed seed = 1;
  std::string out = "out";

  std::size_t sparsity() const { return s ? *s : default_sparsity(d); }
  void validate() const;
};

nlohmann::json to_json(const ExperimentSpec& spec);
/// Unknown keys are rejected so typos cannot silently fall back to defaults.
ExperimentSpec spec_from_json(const nlohmann::json& j);
ExperimentSpec load_spec(const std::filesystem::path& path);

/// 8 points per decade spanning [1e-7, 1e-1].
std::vector<double> default_gamma_grid();

/// Seed of Monte-Carlo repetition `rep`; repetition 0 uses the spec seed.
Seed rep_seed(const ExperimentSpec& spec, std::size_t rep);

/// One realized problem: data, truth (synthetic only), optional test split,
/// partition and network.
struct Instance {
  std::optional<GroundTruth> truth;
  Dataset data;
  std::optional<Dataset> test;
  AgentShards shards;
  Graph graph;
  GossipMatrix w;
  Seed seed = 0;
  /// Population covariance facts of the design (synthetic only).
  double zeta_sigma = 1.0;
  double lambda_min_cov = 1.0;
  double lambda_max_cov = 1.0;
};

Instance build_instance(const ExperimentSpec& spec, Seed seed);

/// Solver parameters after applying the selection rules, with the rule that
/// produced each one.
struct ResolvedParams {
  double lambda = 0.0;
  double gamma = 0.0;
  double beta = 0.0;
  double radius = 0.0;
  std::map<std::string, std::string> provenance;
};

theory::TheoryInputs theory_inputs(const ExperimentSpec& spec, const Instance& inst, const NetworkProblem& problem);
ResolvedParams resolve_parameters(const ExperimentSpec& spec, const Instance& inst, const NetworkProblem& problem);
SolverConfig solver_config(const ExperimentSpec& spec, const ResolvedParams& params);

/// Statistical error of the instance's estimates: average squared distance
/// to the truth when known, otherwise test MSE.
double estimate_error(const Instance& inst, const StackedState& state);

struct CentralizedFit {
  Vector theta;
  double error = 0.0;
  std::size_t iterations = 0;
};

/// Centralized LASSO at lambda run to tight convergence.
CentralizedFit centralized_fit(const Instance& inst, double lambda, double radius);

/// Distributed fixed point at (lambda, gamma), warm-started from the
/// centralized solution. Returns the final state.
StackedState distributed_fit(const NetworkProblem& problem, const SolverConfig& cfg,
                             const Vector& warm, std::size_t max_iters, double rel_tol);

/// Per-agent LASSO on its own shard with lambda chosen by the rule at
/// sample size n, averaged over agents.
double local_error(const ExperimentSpec& spec, const Instance& inst);

struct Summary {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};
Summary summarize(const std::vector<double>& values);

/// One line of sweep.csv. Cells that do not apply to an axis are empty.
struct SweepRow {
  SweepAxis axis = SweepAxis::none;
  double value = 0.0;
  std::size_t reps = 0;
  std::optional<std::size_t> N;
  std::optional<std::size_t> s;
  std::optional<double> lambda;
  std::optional<double> gamma;
  std::optional<Summary> dist_err;
  std::optional<Summary> cent_err;
  std::optional<Summary> consensus_err;
  std::optional<Summary> inv_gamma;
  std::optional<Summary> rounds;
  std::size_t met_reps = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  /// Grid values for which no repetition met the band.
  std::vector<double> band_failures;
};

inline constexpr const char* kSweepHeader =
    "axis,value,reps,N,s,lambda,gamma,dist_err_mean,dist_err_std,cent_err_mean,cent_err_std,"
    "consensus_err_mean,consensus_err_std,inv_gamma_mean,inv_gamma_std,rounds_mean,rounds_std,met_reps";
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(std::istream& is);

/// Final error per grid value (lambda or gamma axis) for the distributed
/// and centralized estimators.
SweepResult sweep_lambda_or_gamma(const ExperimentSpec& spec);
/// Largest gamma on the search grid whose error stays within the band of
/// the centralized error, per dimension d.
SweepResult sweep_dimension(const ExperimentSpec& spec);
/// Communication rounds from zero until the error enters the band, per m.
SweepResult sweep_agents(const ExperimentSpec& spec);
SweepResult run_sweep(const ExperimentSpec& spec);

/// Largest gamma in `grid` (ascending) whose distributed error is within
/// (1 + band) of `target`. Assumes error is nondecreasing in gamma and
/// bisects the grid; nullopt when even the smallest fails.
std::optional<double> critical_gamma(const Instance& inst, const NetworkProblem& problem, const ExperimentSpec& spec,
                                     double lambda, double radius, const Vector& warm, double target,
                                     const std::vector<double>& grid);

/// Number of rounds from the zero state until the error first falls within
/// (1 + band) of `target`; nullopt if the budget runs out.
std::optional<std::size_t> rounds_to_band(const Instance& inst, const NetworkProblem& problem,
                                          const SolverConfig& cfg, double target, double band);

struct ConvergenceBundle {
  std::vector<double> gammas;
  std::vector<RunTrace> traces;
  double lambda = 0.0;
  double centralized_error = 0.0;
  std::optional<double> local_error;
};
ConvergenceBundle convergence_bundle(const ExperimentSpec& spec);

/// Trace file name for a gamma in a convergence bundle, e.g. trace_0.001.csv.
std::string trace_file_name(double gamma);

/// Flat report keyed by formula name: {inputs, output, reference}.
nlohmann::json diagnostics_report(const ExperimentSpec& spec);

/// Git-style blob id: SHA-1 of "blob <size>\0" followed by the content.
std::string git_blob_sha1(std::string_view content);

/// Hash of everything that determines a run: the canonical spec JSON and,
/// for CSV input, the data file bytes.
std::string input_hash(const ExperimentSpec& spec);

nlohmann::json truth_to_json(const GroundTruth& truth, Seed seed);
GroundTruth truth_from_json(const nlohmann::json& j);

// Commands. Each writes its fixed-name outputs under spec.out and returns
// an exit code; configuration and divergence errors propagate as
// exceptions (see exit_code_for).
int cmd_generate(const ExperimentSpec& spec);
int cmd_solve(const ExperimentSpec& spec);
int cmd_sweep(const ExperimentSpec& spec);
int cmd_convergence(const ExperimentSpec& spec);
int cmd_diagnose(const ExperimentSpec& spec);

/// Maps an in-flight exception to the CLI exit code.
int exit_code_for(const std::exception& e);

/// Worker count from NETLASSO_THREADS (default: hardware concurrency).
std::size_t worker_count();

/// Runs job(i) for i in [0, count) over a bounded pool. Jobs write results
/// into caller-owned slots by index, so aggregation order never depends on
/// completion order. The first exception is rethrown after all workers stop.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& job);

} // namespace netlasso::harness
