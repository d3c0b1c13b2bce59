#pragma once

#include "netlasso/common.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace netlasso {

enum class TopologyKind { complete, star, path, grid2d, erdos_renyi };

std::string to_string(TopologyKind kind);
TopologyKind parse_topology(const std::string& name);

/// Undirected simple graph on agents 0..m-1. Edges are stored as (i, j)
/// with i < j, sorted lexicographically.
struct Graph {
  std::size_t m = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  TopologyKind kind = TopologyKind::complete;
  std::optional<double> p;
  bool connected = false;

  std::vector<std::size_t> degrees() const;
  std::vector<std::vector<std::size_t>> adjacency() const;
  bool has_edge(std::size_t i, std::size_t j) const;
};

/// Builds from an explicit edge list; normalizes ordering and rejects
/// self-loops, duplicates and out-of-range endpoints.
Graph make_graph(std::size_t m, std::vector<std::pair<std::size_t, std::size_t>> edges,
                 TopologyKind kind = TopologyKind::complete);

bool is_connected(const Graph& g);

/// Erdos-Renyi samples are redrawn (fresh sub-seed each attempt) until
/// connected; after this many failures build_topology throws.
inline constexpr int kMaxErdosRenyiAttempts = 100;

Graph build_topology(TopologyKind kind, std::size_t m, std::optional<double> p, Seed seed);

/// Symmetric stochastic mixing matrix compliant with a graph.
struct GossipMatrix {
  Matrix W;
  double rho = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(W.rows()); }
  /// False when rho == 1, i.e. information does not mix (disconnected support).
  bool mixing() const { return rho < 1.0; }
};

enum class WeightRule { metropolis, lazy_metropolis, uniform };

std::string to_string(WeightRule rule);
WeightRule parse_weight_rule(const std::string& name);

GossipMatrix metropolis_weights(const Graph& g);
GossipMatrix lazy_metropolis_weights(const Graph& g);
GossipMatrix uniform_average_matrix(std::size_t m);
GossipMatrix gossip_matrix(const Graph& g, WeightRule rule);

/// max{|lambda_2(W)|, |lambda_min(W)|} of a symmetric matrix.
double spectral_gap(const Matrix& W);
/// Computes rho and stores it back into `w`.
double spectral_gap(GossipMatrix& w);

double lambda_min(const Matrix& W);

/// Returns a human-readable description of every violated invariant
/// (symmetry, stochasticity, positive diagonal, sparsity pattern); empty
/// when W is a valid gossip matrix for `g`.
std::vector<std::string> check_gossip_invariants(const Matrix& W, const Graph& g,
                                                 double tol = 1e-12);

/// One "i j" pair per line, 1-based.
void write_edge_list(std::ostream& os, const Graph& g);
Graph read_edge_list(std::istream& is, std::size_t m);
/// Dense CSV, 17 significant digits.
void write_matrix_csv(std::ostream& os, const Matrix& W);

} // namespace netlasso
