#include "netlasso/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace netlasso::harness {

std::string to_string(SweepAxis axis) {
  switch (axis) {
  case SweepAxis::none: return "none";
  case SweepAxis::lambda: return "lambda";
  case SweepAxis::gamma: return "gamma";
  case SweepAxis::d: return "d";
  case SweepAxis::m: return "m";
  }
  return "none";
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "none") return SweepAxis::none;
  if (name == "lambda") return SweepAxis::lambda;
  if (name == "gamma") return SweepAxis::gamma;
  if (name == "d") return SweepAxis::d;
  if (name == "m") return SweepAxis::m;
  throw ConfigError("unknown sweep axis '" + std::string(name) + "' (expected lambda, gamma, d, m or none)");
}

void ExperimentSpec::validate() const {
  auto positive = [](std::optional<double> v, const char* what) {
    if (v && !(*v > 0.0 && std::isfinite(*v))) throw ConfigError(std::string(what) + " must be positive");
  };
  if (m < 1) throw ConfigError("m must be at least 1");
  if (!data_csv) {
    if (N < 1 || d < 1) throw ConfigError("N and d must be positive");
    if (sparsity() > d) throw ConfigError("s cannot exceed d");
    if (N % m != 0 && axis != SweepAxis::d && axis != SweepAxis::m)
      throw ConfigError("m = " + std::to_string(m) + " must divide N = " + std::to_string(N));
  }
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be nonnegative");
  if (!(std::abs(phi) < 1.0)) throw ConfigError("phi must lie in (-1, 1)");
  positive(lambda, "lambda");
  positive(gamma, "gamma");
  positive(beta, "beta");
  positive(radius, "radius");
  if (metric_stride < 1) throw ConfigError("metric_stride must be at least 1");
  if (!(rel_tol >= 0.0)) throw ConfigError("rel_tol must be nonnegative");
  if (reps < 1) throw ConfigError("reps must be at least 1");
  if (!(band > 0.0)) throw ConfigError("band must be positive");
  if (axis != SweepAxis::none && grid.empty()) throw ConfigError("sweep axis " + to_string(axis) + " needs a grid");
  for (double v : grid)
    if (!(v > 0.0)) throw ConfigError("sweep grid values must be positive");
  for (double g : gammas)
    if (!(g > 0.0)) throw ConfigError("gammas must be positive");
  for (double g : gamma_grid)
    if (!(g > 0.0)) throw ConfigError("gamma_grid values must be positive");
  if (axis == SweepAxis::d && ratio && !(*ratio > 0.0)) throw ConfigError("ratio must be positive");
  if (p && topology != TopologyKind::erdos_renyi) throw ConfigError("p applies only to the erdos_renyi topology");
  if (topology == TopologyKind::erdos_renyi && !p) throw ConfigError("erdos_renyi topology needs p");
  if (!(t0 >= 2.0)) throw ConfigError("t0 must be at least 2");
}

namespace {

template <class T>
nlohmann::json opt(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <class T>
std::optional<T> get_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

} // namespace

nlohmann::json to_json(const ExperimentSpec& spec) {
  nlohmann::json constants = nlohmann::json::object();
  for (const auto& [k, v] : spec.constants.overrides()) constants[k] = v;
  return {
      {"name", spec.name},
      {"N", spec.N},
      {"d", spec.d},
      {"s", spec.sparsity()},
      {"sigma", spec.sigma},
      {"phi", spec.phi},
      {"data_csv", opt(spec.data_csv)},
      {"n_test", spec.n_test},
      {"m", spec.m},
      {"topology", to_string(spec.topology)},
      {"p", opt(spec.p)},
      {"weights", to_string(spec.weights)},
      {"lambda", opt(spec.lambda)},
      {"gamma", opt(spec.gamma)},
      {"beta", opt(spec.beta)},
      {"radius", opt(spec.radius)},
      {"iters", spec.iters},
      {"rel_tol", spec.rel_tol},
      {"metric_stride", spec.metric_stride},
      {"strict", spec.strict},
      {"centralized", spec.centralized},
      {"record_timing", spec.record_timing},
      {"t0", spec.t0},
      {"constants", constants},
      {"axis", to_string(spec.axis)},
      {"grid", spec.grid},
      {"reps", spec.reps},
      {"gammas", spec.gammas},
      {"band", spec.band},
      {"ratio", opt(spec.ratio)},
      {"gamma_grid", spec.gamma_grid},
      {"sweep_iters", spec.sweep_iters},
      {"sweep_rel_tol", spec.sweep_rel_tol},
      {"seed", spec.seed},
      {"out", spec.out},
  };
}

ExperimentSpec spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("experiment spec must be a JSON object");
  static const std::set<std::string> known{
      "name",   "N",     "d",      "s",       "sigma",  "phi",           "data_csv",    "n_test",     "m",
      "topology", "p",   "weights", "lambda", "gamma",  "beta",          "radius",      "iters",      "rel_tol",
      "metric_stride", "strict", "centralized", "record_timing", "t0", "constants", "axis", "grid", "reps",
      "gammas", "band", "ratio", "gamma_grid", "sweep_iters", "sweep_rel_tol", "seed", "out"};
  for (const auto& item : j.items())
    if (!known.count(item.key())) throw ConfigError("unknown spec key '" + item.key() + "'");

  ExperimentSpec spec;
  try {
    spec.name = j.value("name", spec.name);
    spec.N = j.value("N", spec.N);
    spec.d = j.value("d", spec.d);
    spec.s = get_opt<std::size_t>(j, "s");
    spec.sigma = j.value("sigma", spec.sigma);
    spec.phi = j.value("phi", spec.phi);
    spec.data_csv = get_opt<std::string>(j, "data_csv");
    spec.n_test = j.value("n_test", spec.n_test);
    spec.m = j.value("m", spec.m);
    if (j.contains("topology")) spec.topology = parse_topology(j.at("topology").get<std::string>());
    spec.p = get_opt<double>(j, "p");
    if (j.contains("weights")) spec.weights = parse_weight_rule(j.at("weights").get<std::string>());
    spec.lambda = get_opt<double>(j, "lambda");
    spec.gamma = get_opt<double>(j, "gamma");
    spec.beta = get_opt<double>(j, "beta");
    spec.radius = get_opt<double>(j, "radius");
    spec.iters = j.value("iters", spec.iters);
    spec.rel_tol = j.value("rel_tol", spec.rel_tol);
    spec.metric_stride = j.value("metric_stride", spec.metric_stride);
    spec.strict = j.value("strict", spec.strict);
    spec.centralized = j.value("centralized", spec.centralized);
    spec.record_timing = j.value("record_timing", spec.record_timing);
    spec.t0 = j.value("t0", spec.t0);
    if (j.contains("constants"))
      for (const auto& [k, v] : j.at("constants").items()) spec.constants.set(k, v.get<double>());
    if (j.contains("axis")) spec.axis = parse_sweep_axis(j.at("axis").get<std::string>());
    spec.grid = j.value("grid", spec.grid);
    spec.reps = j.value("reps", spec.reps);
    spec.gammas = j.value("gammas", spec.gammas);
    spec.band = j.value("band", spec.band);
    spec.ratio = get_opt<double>(j, "ratio");
    spec.gamma_grid = j.value("gamma_grid", spec.gamma_grid);
    spec.sweep_iters = j.value("sweep_iters", spec.sweep_iters);
    spec.sweep_rel_tol = j.value("sweep_rel_tol", spec.sweep_rel_tol);
    spec.seed = j.value("seed", spec.seed);
    spec.out = j.value("out", spec.out);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed experiment spec: ") + e.what());
  }
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spec file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("spec file " + path.string() + " is not valid JSON: " + e.what());
  }
  return spec_from_json(j);
}

std::vector<double> default_gamma_grid() {
  std::vector<double> grid;
  for (int k = -56; k <= -8; ++k) grid.push_back(std::pow(10.0, k / 8.0));
  return grid;
}

Seed rep_seed(const ExperimentSpec& spec, std::size_t rep) {
  return rep == 0 ? spec.seed : derive_seed(spec.seed, 0x5eed0000ULL + rep);
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

// ---------------------------------------------------------------------------
// sweep.csv

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("invalid number '" + s + "' in sweep CSV");
  return v;
}

} // namespace

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << kSweepHeader << '\n';
  auto summary = [&](const std::optional<Summary>& s) {
    if (s) os << ',' << fmt(s->mean) << ',' << fmt(s->std);
    else os << ",,";
  };
  for (const auto& r : rows) {
    os << to_string(r.axis) << ',' << fmt(r.value) << ',' << r.reps << ',';
    if (r.N) os << *r.N;
    os << ',';
    if (r.s) os << *r.s;
    os << ',';
    if (r.lambda) os << fmt(*r.lambda);
    os << ',';
    if (r.gamma) os << fmt(*r.gamma);
    summary(r.dist_err);
    summary(r.cent_err);
    summary(r.consensus_err);
    summary(r.inv_gamma);
    summary(r.rounds);
    os << ',' << r.met_reps << '\n';
  }
}

std::vector<SweepRow> read_sweep_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kSweepHeader) throw DataError("sweep CSV has an unexpected header");
  std::vector<SweepRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 18) throw DataError("sweep CSV row has " + std::to_string(c.size()) + " cells, expected 18");
    SweepRow r;
    r.axis = parse_sweep_axis(c[0]);
    r.value = parse_double(c[1]);
    r.reps = static_cast<std::size_t>(parse_double(c[2]));
    if (!c[3].empty()) r.N = static_cast<std::size_t>(parse_double(c[3]));
    if (!c[4].empty()) r.s = static_cast<std::size_t>(parse_double(c[4]));
    if (!c[5].empty()) r.lambda = parse_double(c[5]);
    if (!c[6].empty()) r.gamma = parse_double(c[6]);
    auto summary = [&](std::size_t k) -> std::optional<Summary> {
      if (c[k].empty()) return std::nullopt;
      return Summary{parse_double(c[k]), parse_double(c[k + 1]), r.reps};
    };
    r.dist_err = summary(7);
    r.cent_err = summary(9);
    r.consensus_err = summary(11);
    r.inv_gamma = summary(13);
    r.rounds = summary(15);
    r.met_reps = static_cast<std::size_t>(parse_double(c[17]));
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Hashing and truth files

std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  std::string blob = header;
  blob.append(content);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1)
    throw NumericError("SHA-1 digest failed");
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[k]);
  return os.str();
}

std::string input_hash(const ExperimentSpec& spec) {
  auto canonical = to_json(spec);
  canonical.erase("out"); // where results go does not change them
  std::string content = canonical.dump();
  if (spec.data_csv) {
    std::ifstream in(*spec.data_csv, std::ios::binary);
    if (!in) throw DataError("cannot open data file " + *spec.data_csv);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    content += '\n';
    content += git_blob_sha1(bytes.str());
  }
  return git_blob_sha1(content);
}

nlohmann::json truth_to_json(const GroundTruth& truth, Seed seed) {
  return {{"d", truth.theta.size()},
          {"s", truth.s()},
          {"seed", seed},
          {"support", truth.support},
          {"theta", std::vector<double>(truth.theta.data(), truth.theta.data() + truth.theta.size())}};
}

GroundTruth truth_from_json(const nlohmann::json& j) {
  try {
    const auto theta = j.at("theta").get<std::vector<double>>();
    auto truth = truth_from_vector(Eigen::Map<const Vector>(theta.data(), static_cast<Eigen::Index>(theta.size())));
    if (j.contains("support") && j.at("support").get<std::vector<std::size_t>>() != truth.support)
      throw DataError("truth file support does not match the nonzeros of theta");
    return truth;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed truth file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Worker pool

std::size_t worker_count() {
  if (const char* env = std::getenv("NETLASSO_THREADS")) {
    std::size_t n = 0;
    const std::string_view sv(env);
    const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), n);
    if (ec != std::errc() || ptr != sv.data() + sv.size() || n == 0)
      throw ConfigError("NETLASSO_THREADS must be a positive integer");
    return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& job) {
  const std::size_t workers = std::min(worker_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first) first = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DivergenceError*>(&e)) return kExitDivergence;
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const DataError*>(&e)) return kExitConfig;
  return kExitIo;
}

} // namespace netlasso::harness
