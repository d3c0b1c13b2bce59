#include "netlasso/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace netlasso {

GroundTruth truth_from_vector(Vector theta) {
  GroundTruth t;
  t.theta = std::move(theta);
  for (Eigen::Index j = 0; j < t.theta.size(); ++j)
    if (t.theta(j) != 0.0) t.support.push_back(static_cast<std::size_t>(j));
  return t;
}

bool AgentShards::has_noise() const {
  return !shards.empty() && std::all_of(shards.begin(), shards.end(), [](const Shard& s) {
    return s.noise.size() == s.y.size() && s.y.size() > 0;
  });
}

std::size_t default_sparsity(std::size_t d) {
  if (d < 1) throw ConfigError("dimension must be positive");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::log(static_cast<double>(d)))));
}

GroundTruth gen_sparse_truth(std::size_t d, std::size_t s, Seed seed) {
  if (s < 1 || s > d) throw ConfigError("sparsity must satisfy 1 <= s <= d");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector theta(static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < theta.size(); ++j) theta(j) = gauss(rng);

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(theta(static_cast<Eigen::Index>(a))) > std::abs(theta(static_cast<Eigen::Index>(b)));
  });
  for (std::size_t k = s; k < d; ++k) theta(static_cast<Eigen::Index>(order[k])) = 0.0;

  GroundTruth t;
  t.support.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(s));
  std::sort(t.support.begin(), t.support.end());
  t.theta = std::move(theta);
  return t;
}

Matrix gen_ar_design(std::size_t N, std::size_t d, double phi, Seed seed) {
  if (N < 1 || d < 1) throw ConfigError("design needs N >= 1 and d >= 1");
  if (!(std::abs(phi) < 1.0)) throw ConfigError("AR coefficient must satisfy |phi| < 1");
  const double scale = 1.0 / std::sqrt(1.0 - phi * phi);
  Matrix X(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < N; ++r) {
    Rng rng(derive_seed(seed, r));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto row = static_cast<Eigen::Index>(r);
    double x = gauss(rng) * scale;
    X(row, 0) = x;
    for (Eigen::Index t = 1; t < X.cols(); ++t) {
      x = phi * x + gauss(rng);
      X(row, t) = x;
    }
  }
  return X;
}

Matrix ar_covariance(std::size_t d, double phi) {
  if (!(std::abs(phi) < 1.0)) throw ConfigError("AR coefficient must satisfy |phi| < 1");
  const auto n = static_cast<Eigen::Index>(d);
  Matrix S(n, n);
  const double var = 1.0 / (1.0 - phi * phi);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k)
      S(j, k) = var * std::pow(phi, static_cast<double>(std::abs(j - k)));
  return S;
}

Dataset gen_observations(const Matrix& X, const GroundTruth& truth, double sigma, Seed seed) {
  if (!(sigma >= 0.0)) throw ConfigError("noise level must be nonnegative");
  if (X.cols() != truth.theta.size()) throw ConfigError("design/truth dimension mismatch");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset ds;
  ds.X = X;
  ds.noise.resize(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) ds.noise(i) = sigma * gauss(rng);
  ds.y = X * truth.theta + ds.noise;
  ds.noise_sigma = sigma;
  ds.provenance = {Provenance::Kind::synthetic, seed, {}};
  return ds;
}

AgentShards partition(const Dataset& ds, std::size_t m) {
  const auto N = ds.N();
  if (m < 1 || N % m != 0)
    throw ConfigError("agent count " + std::to_string(m) + " does not divide N=" + std::to_string(N));
  AgentShards out;
  out.m = m;
  out.n = N / m;
  out.d = ds.d();
  const auto n = static_cast<Eigen::Index>(out.n);
  out.shards.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto start = static_cast<Eigen::Index>(i) * n;
    Shard sh;
    sh.X = ds.X.middleRows(start, n);
    sh.y = ds.y.segment(start, n);
    if (ds.has_noise()) sh.noise = ds.noise.segment(start, n);
    out.shards.push_back(std::move(sh));
  }
  return out;
}

Dataset reassemble(const AgentShards& shards) {
  const auto n = static_cast<Eigen::Index>(shards.n);
  Dataset ds;
  ds.X.resize(static_cast<Eigen::Index>(shards.N()), static_cast<Eigen::Index>(shards.d));
  ds.y.resize(ds.X.rows());
  const bool noise = shards.has_noise();
  if (noise) ds.noise.resize(ds.X.rows());
  for (std::size_t i = 0; i < shards.m; ++i) {
    const auto start = static_cast<Eigen::Index>(i) * n;
    ds.X.middleRows(start, n) = shards.shards[i].X;
    ds.y.segment(start, n) = shards.shards[i].y;
    if (noise) ds.noise.segment(start, n) = shards.shards[i].noise;
  }
  return ds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& raw, double& out) {
  const auto s = trim(raw);
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

} // namespace

Dataset read_dataset_csv(std::istream& is, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto cells = split_csv_line(line);
    std::vector<double> values(cells.size());
    bool numeric = true;
    for (std::size_t k = 0; k < cells.size(); ++k) numeric = numeric && parse_double(cells[k], values[k]);
    if (!numeric) {
      if (rows.empty() && width == 0) {
        width = cells.size(); // header row
        continue;
      }
      throw DataError(source + ":" + std::to_string(line_no) + ": non-numeric cell");
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw DataError(source + ":" + std::to_string(line_no) + ": ragged row (" +
                      std::to_string(cells.size()) + " cells, expected " + std::to_string(width) + ")");
    rows.push_back(std::move(values));
  }
  if (width < 2) throw DataError(source + ": need a response column and at least one feature");

  Dataset ds;
  const auto N = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(width - 1);
  ds.X.resize(N, d);
  ds.y.resize(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    ds.y(i) = r[0];
    for (Eigen::Index j = 0; j < d; ++j) ds.X(i, j) = r[static_cast<std::size_t>(j + 1)];
  }
  ds.provenance = {Provenance::Kind::csv, 0, source};
  return ds;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_dataset_csv(in, path.string());
}

void write_dataset_csv(std::ostream& os, const Dataset& ds) {
  const auto old = os.precision(17);
  os << "y";
  for (Eigen::Index j = 0; j < ds.X.cols(); ++j) os << ",x" << (j + 1);
  os << '\n';
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    os << ds.y(i);
    for (Eigen::Index j = 0; j < ds.X.cols(); ++j) os << ',' << ds.X(i, j);
    os << '\n';
  }
  os.precision(old);
}

void save_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_dataset_csv(out, ds);
  if (!out) throw DataError("write failed for " + path.string());
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, std::size_t n_test, Seed seed) {
  const auto N = ds.N();
  if (n_test >= N) throw ConfigError("test size must be smaller than the sample count");
  std::vector<Eigen::Index> perm(N);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  auto take = [&](std::size_t from, std::size_t count) {
    Dataset part;
    part.X.resize(static_cast<Eigen::Index>(count), ds.X.cols());
    part.y.resize(static_cast<Eigen::Index>(count));
    if (ds.has_noise()) part.noise.resize(static_cast<Eigen::Index>(count));
    for (std::size_t k = 0; k < count; ++k) {
      const auto src = perm[from + k];
      const auto dst = static_cast<Eigen::Index>(k);
      part.X.row(dst) = ds.X.row(src);
      part.y(dst) = ds.y(src);
      if (ds.has_noise()) part.noise(dst) = ds.noise(src);
    }
    part.noise_sigma = ds.noise_sigma;
    part.provenance = ds.provenance;
    return part;
  };
  Dataset test = take(0, n_test);
  Dataset train = take(n_test, N - n_test);
  return {std::move(train), std::move(test)};
}

} // namespace netlasso
