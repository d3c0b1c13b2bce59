#include "netlasso/graph.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>

namespace netlasso {

std::string to_string(TopologyKind kind) {
  switch (kind) {
  case TopologyKind::complete: return "complete";
  case TopologyKind::star: return "star";
  case TopologyKind::path: return "path";
  case TopologyKind::grid2d: return "grid2d";
  case TopologyKind::erdos_renyi: return "erdos_renyi";
  }
  return "unknown";
}

TopologyKind parse_topology(const std::string& name) {
  if (name == "complete") return TopologyKind::complete;
  if (name == "star") return TopologyKind::star;
  if (name == "path") return TopologyKind::path;
  if (name == "grid2d" || name == "grid") return TopologyKind::grid2d;
  if (name == "erdos_renyi" || name == "er") return TopologyKind::erdos_renyi;
  throw ConfigError("unknown topology '" + name + "'");
}

std::string to_string(WeightRule rule) {
  switch (rule) {
  case WeightRule::metropolis: return "metropolis";
  case WeightRule::lazy_metropolis: return "lazy_metropolis";
  case WeightRule::uniform: return "uniform";
  }
  return "unknown";
}

WeightRule parse_weight_rule(const std::string& name) {
  if (name == "metropolis") return WeightRule::metropolis;
  if (name == "lazy_metropolis" || name == "lazy") return WeightRule::lazy_metropolis;
  if (name == "uniform") return WeightRule::uniform;
  throw ConfigError("unknown weight rule '" + name + "'");
}

std::vector<std::size_t> Graph::degrees() const {
  std::vector<std::size_t> deg(m, 0);
  for (const auto& [i, j] : edges) {
    ++deg[i];
    ++deg[j];
  }
  return deg;
}

std::vector<std::vector<std::size_t>> Graph::adjacency() const {
  std::vector<std::vector<std::size_t>> adj(m);
  for (const auto& [i, j] : edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());
  return adj;
}

bool Graph::has_edge(std::size_t i, std::size_t j) const {
  if (i > j) std::swap(i, j);
  return std::binary_search(edges.begin(), edges.end(), std::make_pair(i, j));
}

bool is_connected(const Graph& g) {
  if (g.m <= 1) return true;
  const auto adj = g.adjacency();
  std::vector<bool> seen(g.m, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        frontier.push(v);
      }
    }
  }
  return reached == g.m;
}

Graph make_graph(std::size_t m, std::vector<std::pair<std::size_t, std::size_t>> edges,
                 TopologyKind kind) {
  for (auto& e : edges) {
    if (e.first == e.second) throw ConfigError("self-loop on node " + std::to_string(e.first));
    if (e.first >= m || e.second >= m) throw ConfigError("edge endpoint out of range");
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
    throw ConfigError("duplicate edge");
  Graph g;
  g.m = m;
  g.edges = std::move(edges);
  g.kind = kind;
  g.connected = is_connected(g);
  return g;
}

namespace {

Graph erdos_renyi_once(std::size_t m, double p, Seed seed) {
  Rng rng(seed);
  std::bernoulli_distribution coin(p);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      if (coin(rng)) edges.emplace_back(i, j);
  auto g = make_graph(m, std::move(edges), TopologyKind::erdos_renyi);
  g.p = p;
  return g;
}

} // namespace

Graph build_topology(TopologyKind kind, std::size_t m, std::optional<double> p, Seed seed) {
  if (m < 1) throw ConfigError("graph needs at least one agent");
  if (kind == TopologyKind::erdos_renyi) {
    if (!p || !(*p > 0.0 && *p <= 1.0))
      throw ConfigError("erdos_renyi requires p in (0, 1]");
  } else if (p) {
    throw ConfigError("p is only meaningful for erdos_renyi");
  }

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  switch (kind) {
  case TopologyKind::complete:
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) edges.emplace_back(i, j);
    break;
  case TopologyKind::star:
    for (std::size_t j = 1; j < m; ++j) edges.emplace_back(0, j);
    break;
  case TopologyKind::path:
    for (std::size_t i = 0; i + 1 < m; ++i) edges.emplace_back(i, i + 1);
    break;
  case TopologyKind::grid2d: {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(m))));
    if (side * side != m) throw ConfigError("grid2d requires m to be a perfect square");
    for (std::size_t r = 0; r < side; ++r) {
      for (std::size_t c = 0; c < side; ++c) {
        const auto u = r * side + c;
        if (c + 1 < side) edges.emplace_back(u, u + 1);
        if (r + 1 < side) edges.emplace_back(u, u + side);
      }
    }
    break;
  }
  case TopologyKind::erdos_renyi:
    for (int attempt = 0; attempt < kMaxErdosRenyiAttempts; ++attempt) {
      auto g = erdos_renyi_once(m, *p, derive_seed(seed, static_cast<std::uint64_t>(attempt)));
      if (g.connected) return g;
    }
    throw ConfigError("no connected Erdos-Renyi sample after " +
                      std::to_string(kMaxErdosRenyiAttempts) + " attempts");
  }
  return make_graph(m, std::move(edges), kind);
}

namespace {

template <class EdgeWeight>
GossipMatrix weights_from_degrees(const Graph& g, EdgeWeight edge_weight) {
  if (!g.connected) throw ConfigError("gossip weights require a connected graph");
  const auto deg = g.degrees();
  Matrix W = Matrix::Zero(static_cast<Eigen::Index>(g.m), static_cast<Eigen::Index>(g.m));
  for (const auto& [i, j] : g.edges) {
    const double w = edge_weight(std::max(deg[i], deg[j]));
    W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
    W(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = w;
  }
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < W.cols(); ++j)
      if (j != i) off += W(i, j);
    W(i, i) = 1.0 - off;
  }
  GossipMatrix out{std::move(W), 0.0};
  spectral_gap(out);
  return out;
}

} // namespace

GossipMatrix metropolis_weights(const Graph& g) {
  return weights_from_degrees(g, [](std::size_t dmax) { return 1.0 / (1.0 + static_cast<double>(dmax)); });
}

GossipMatrix lazy_metropolis_weights(const Graph& g) {
  return weights_from_degrees(g, [](std::size_t dmax) { return 1.0 / (2.0 * static_cast<double>(dmax)); });
}

GossipMatrix uniform_average_matrix(std::size_t m) {
  if (m < 1) throw ConfigError("uniform averaging needs m >= 1");
  const auto n = static_cast<Eigen::Index>(m);
  // Spectrum of 11^T/m is {1, 0, ..., 0}, so rho is exactly zero.
  return GossipMatrix{Matrix::Constant(n, n, 1.0 / static_cast<double>(m)), 0.0};
}

GossipMatrix gossip_matrix(const Graph& g, WeightRule rule) {
  switch (rule) {
  case WeightRule::metropolis: return metropolis_weights(g);
  case WeightRule::lazy_metropolis: return lazy_metropolis_weights(g);
  case WeightRule::uniform:
    if (g.edges.size() != g.m * (g.m - 1) / 2)
      throw ConfigError("uniform averaging is only compliant with the complete graph");
    return uniform_average_matrix(g.m);
  }
  throw ConfigError("unknown weight rule");
}

namespace {

Vector symmetric_eigenvalues(const Matrix& W) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(W, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("symmetric eigensolver did not converge");
  return solver.eigenvalues(); // ascending
}

// Eigenvalues at the solver's resolution are reported as exact zeros.
double snap(double x) { return std::abs(x) <= 1e-14 ? 0.0 : x; }

} // namespace

double spectral_gap(const Matrix& W) {
  if (W.rows() != W.cols()) throw ConfigError("gossip matrix must be square");
  if (W.rows() <= 1) return 0.0;
  const Vector ev = symmetric_eigenvalues(W);
  const auto m = ev.size();
  const double rho = std::max(std::abs(snap(ev(m - 2))), std::abs(snap(ev(0))));
  return std::min(rho, 1.0);
}

double spectral_gap(GossipMatrix& w) {
  w.rho = spectral_gap(w.W);
  return w.rho;
}

double lambda_min(const Matrix& W) { return snap(symmetric_eigenvalues(W)(0)); }

std::vector<std::string> check_gossip_invariants(const Matrix& W, const Graph& g, double tol) {
  std::vector<std::string> issues;
  const auto m = static_cast<Eigen::Index>(g.m);
  if (W.rows() != m || W.cols() != m) {
    issues.push_back("dimension mismatch with graph");
    return issues;
  }
  auto at = [](Eigen::Index i, Eigen::Index j) {
    std::ostringstream os;
    os << "(" << i << "," << j << ")";
    return os.str();
  };
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::abs(W.row(i).sum() - 1.0) > tol) issues.push_back("row " + std::to_string(i) + " does not sum to 1");
    if (!(W(i, i) > 0.0)) issues.push_back("non-positive diagonal at " + at(i, i));
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j) continue;
      if (std::abs(W(i, j) - W(j, i)) > tol) issues.push_back("asymmetric entry " + at(i, j));
      const bool edge = g.has_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      if (edge && !(W(i, j) > 0.0)) issues.push_back("missing weight on edge " + at(i, j));
      if (!edge && W(i, j) != 0.0) issues.push_back("weight on non-edge " + at(i, j));
    }
  }
  return issues;
}

void write_edge_list(std::ostream& os, const Graph& g) {
  for (const auto& [i, j] : g.edges) os << (i + 1) << ' ' << (j + 1) << '\n';
}

Graph read_edge_list(std::istream& is, std::size_t m) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t i = 0;
  std::size_t j = 0;
  while (is >> i >> j) {
    if (i == 0 || j == 0) throw DataError("edge list is 1-based");
    edges.emplace_back(i - 1, j - 1);
  }
  return make_graph(m, std::move(edges));
}

void write_matrix_csv(std::ostream& os, const Matrix& W) {
  const auto old = os.precision(17);
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      if (j) os << ',';
      os << W(i, j);
    }
    os << '\n';
  }
  os.precision(old);
}

} // namespace netlasso
