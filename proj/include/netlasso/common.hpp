#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace netlasso {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Seed = std::uint64_t;
using Rng = std::mt19937_64;

/// Invalid parameters or malformed configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input data (ragged CSV rows, non-numeric cells, missing records).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Internal numeric failure, e.g. an eigensolver that did not converge.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A non-finite iterate was produced (CLI exit code 3).
class DivergenceError : public std::runtime_error {
public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : std::runtime_error(what + " at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

private:
  std::size_t iteration_;
};

/// Mixes a base seed with a stream index into an independent sub-seed
/// (splitmix64 finalizer). Used wherever one seed fans out into many
/// streams: graph resampling, per-row design generation, Monte-Carlo reps.
inline Seed derive_seed(Seed base, std::uint64_t stream) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(mix(base) ^ (stream * 0xD1B54A32D192ED03ULL + 1));
}

inline double l1_norm(const Eigen::Ref<const Vector>& v) { return v.lpNorm<1>(); }

} // namespace netlasso
