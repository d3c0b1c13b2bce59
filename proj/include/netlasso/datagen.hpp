#pragma once

#include "netlasso/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace netlasso {

/// Sparse parameter vector together with its support (sorted, 0-based).
struct GroundTruth {
  Vector theta;
  std::vector<std::size_t> support;

  std::size_t s() const { return support.size(); }
  double l1() const { return theta.lpNorm<1>(); }
};

/// Builds a GroundTruth from an arbitrary vector; the support is the set of
/// nonzero entries.
GroundTruth truth_from_vector(Vector theta);

struct Provenance {
  enum class Kind { synthetic, csv } kind = Kind::synthetic;
  Seed seed = 0;
  std::string path;
};

/// Stacked design and observations. `noise` is recorded for synthetic data
/// (y = X theta* + noise) and empty when unknown.
struct Dataset {
  Matrix X;
  Vector y;
  Vector noise;
  double noise_sigma = 0.0;
  Provenance provenance;

  std::size_t N() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(X.cols()); }
  bool has_noise() const { return noise.size() == y.size() && y.size() > 0; }
};

struct Shard {
  Matrix X;
  Vector y;
  Vector noise;
};

struct AgentShards {
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<Shard> shards;

  std::size_t N() const { return m * n; }
  bool has_noise() const;
};

/// ceil(ln d), the default sparsity level.
std::size_t default_sparsity(std::size_t d);

GroundTruth gen_sparse_truth(std::size_t d, std::size_t s, Seed seed);

/// Rows are independent stationary AR(1) sequences: x_1 = z_1/sqrt(1-phi^2),
/// x_{t+1} = phi x_t + z_{t+1}. Row r draws from its own sub-seed, so the
/// output does not depend on generation order.
Matrix gen_ar_design(std::size_t N, std::size_t d, double phi, Seed seed);

/// Population covariance of the AR(1) rows: phi^{|j-k|} / (1 - phi^2).
Matrix ar_covariance(std::size_t d, double phi);

Dataset gen_observations(const Matrix& X, const GroundTruth& truth, double sigma, Seed seed);

/// Contiguous row blocks of size N/m, in order.
AgentShards partition(const Dataset& ds, std::size_t m);

/// Vertical concatenation of the shards.
Dataset reassemble(const AgentShards& shards);

/// Column 0 is y, columns 1..d are the features. A header row is detected
/// by a non-numeric first row and skipped.
Dataset read_dataset_csv(std::istream& is, const std::string& source = "<stream>");
Dataset load_csv(const std::filesystem::path& path);
void write_dataset_csv(std::ostream& os, const Dataset& ds);
void save_csv(const std::filesystem::path& path, const Dataset& ds);

/// Seeded random permutation; the first n_test permuted rows form the test set.
std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, std::size_t n_test, Seed seed);

} // namespace netlasso
