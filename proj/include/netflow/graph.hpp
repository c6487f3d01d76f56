#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "netflow/error.hpp"

namespace netflow {

using NodeId = std::size_t;
using EdgeId = std::size_t;

struct Edge {
  NodeId tail;
  NodeId head;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// An edge seen from one of its endpoints. sign is +1 when the node is the
/// tail (edge leaves it) and -1 when it is the head.
struct IncidentEdge {
  EdgeId edge;
  int sign;
};

/**
 * Directed graph with a connected undirected support and no self-loops.
 *
 * Nodes are 0-based internally. Edge order is stable: edge e is column e of
 * the incidence matrix. Construct through build_graph().
 */
class DirectedGraph {
 public:
  std::size_t num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }

  std::span<const Edge> edges() const { return edges_; }
  const Edge& edge(EdgeId e) const { return edges_[e]; }

  std::span<const IncidentEdge> incident(NodeId i) const {
    return incident_[i];
  }

  /// Distinct undirected neighbors of node i, ascending.
  std::span<const NodeId> neighbors(NodeId i) const { return neighbors_[i]; }

  friend bool operator==(const DirectedGraph& a, const DirectedGraph& b) {
    return a.n_ == b.n_ && a.edges_ == b.edges_;
  }

 private:
  friend DirectedGraph build_graph(std::size_t n, std::vector<Edge> edges);

  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<IncidentEdge>> incident_;
  std::vector<std::vector<NodeId>> neighbors_;
};

struct GraphMetrics {
  std::size_t max_degree = 0;
  std::size_t diameter = 0;
  bool bipartite = false;
};

namespace detail {

/// Breadth-first hop distances from source on the undirected support.
/// Unreachable nodes get SIZE_MAX.
inline std::vector<std::size_t> bfs_distances(
    std::size_t n, const std::vector<std::vector<NodeId>>& neighbors,
    NodeId source) {
  constexpr auto kUnreached = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(n, kUnreached);
  std::queue<NodeId> frontier;
  dist[source] = 0;
  frontier.push(source);
  while (!frontier.empty()) {
    NodeId u = frontier.front();
    frontier.pop();
    for (NodeId v : neighbors[u]) {
      if (dist[v] == kUnreached) {
        dist[v] = dist[u] + 1;
        frontier.push(v);
      }
    }
  }
  return dist;
}

inline std::vector<std::vector<NodeId>> undirected_neighbors(
    std::size_t n, std::span<const Edge> edges) {
  std::vector<std::vector<NodeId>> nbrs(n);
  for (const auto& [t, h] : edges) {
    nbrs[t].push_back(h);
    nbrs[h].push_back(t);
  }
  for (auto& list : nbrs) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return nbrs;
}

inline bool is_connected(std::size_t n,
                         const std::vector<std::vector<NodeId>>& neighbors) {
  auto dist = bfs_distances(n, neighbors, 0);
  return std::none_of(dist.begin(), dist.end(), [](std::size_t d) {
    return d == std::numeric_limits<std::size_t>::max();
  });
}

/// Proper 2-coloring test on a connected support.
inline bool is_bipartite(std::size_t n,
                         const std::vector<std::vector<NodeId>>& neighbors) {
  std::vector<int> color(n, -1);
  for (NodeId start = 0; start < n; ++start) {
    if (color[start] != -1) continue;
    color[start] = 0;
    std::queue<NodeId> frontier;
    frontier.push(start);
    while (!frontier.empty()) {
      NodeId u = frontier.front();
      frontier.pop();
      for (NodeId v : neighbors[u]) {
        if (color[v] == -1) {
          color[v] = 1 - color[u];
          frontier.push(v);
        } else if (color[v] == color[u]) {
          return false;
        }
      }
    }
  }
  return true;
}

}  // namespace detail

/**
 * Validates and builds a directed graph.
 *
 * @param n Node count, at least 2.
 * @param edges (tail, head) pairs with 0-based endpoints. Parallel edges are
 *   accepted.
 * @throws Error with kEndpointOutOfRange, kSelfLoop or kDisconnectedGraph.
 */
inline DirectedGraph build_graph(std::size_t n, std::vector<Edge> edges) {
  if (n < 2) {
    throw Error(ErrorCode::kInvalidArgument, "graph needs at least 2 nodes");
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& [t, h] = edges[e];
    if (t >= n || h >= n) {
      throw Error(ErrorCode::kEndpointOutOfRange,
                  "edge " + std::to_string(e) + " has an endpoint outside [0, " +
                      std::to_string(n) + ")");
    }
    if (t == h) {
      throw Error(ErrorCode::kSelfLoop,
                  "edge " + std::to_string(e) + " is a self-loop");
    }
  }
  auto nbrs = detail::undirected_neighbors(n, edges);
  if (!detail::is_connected(n, nbrs)) {
    throw Error(ErrorCode::kDisconnectedGraph,
                "undirected support is not connected");
  }

  DirectedGraph g;
  g.n_ = n;
  g.incident_.resize(n);
  for (EdgeId e = 0; e < edges.size(); ++e) {
    g.incident_[edges[e].tail].push_back({e, +1});
    g.incident_[edges[e].head].push_back({e, -1});
  }
  g.edges_ = std::move(edges);
  g.neighbors_ = std::move(nbrs);
  return g;
}

/// n × E node-edge incidence matrix: +1 at the tail, -1 at the head.
inline Eigen::SparseMatrix<double> incidence_matrix(const DirectedGraph& g) {
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(2 * g.num_edges());
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    entries.emplace_back(static_cast<int>(g.edge(e).tail), static_cast<int>(e),
                         1.0);
    entries.emplace_back(static_cast<int>(g.edge(e).head), static_cast<int>(e),
                         -1.0);
  }
  Eigen::SparseMatrix<double> a(static_cast<int>(g.num_nodes()),
                                static_cast<int>(g.num_edges()));
  a.setFromTriplets(entries.begin(), entries.end());
  return a;
}

/// Hop distances on the undirected support from one node.
inline std::vector<std::size_t> hop_distances(const DirectedGraph& g,
                                              NodeId source) {
  std::vector<std::vector<NodeId>> nbrs(g.num_nodes());
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    auto span = g.neighbors(i);
    nbrs[i].assign(span.begin(), span.end());
  }
  return detail::bfs_distances(g.num_nodes(), nbrs, source);
}

/// All-pairs hop distances, row i from node i.
inline std::vector<std::vector<std::size_t>> all_pairs_hop_distances(
    const DirectedGraph& g) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(g.num_nodes());
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    out.push_back(hop_distances(g, i));
  }
  return out;
}

/**
 * Exact structural metrics of the undirected support: maximum degree
 * (distinct neighbors), diameter by all-pairs BFS, and bipartiteness by
 * 2-coloring.
 */
inline GraphMetrics metrics(const DirectedGraph& g) {
  GraphMetrics m;
  std::vector<std::vector<NodeId>> nbrs(g.num_nodes());
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    auto span = g.neighbors(i);
    nbrs[i].assign(span.begin(), span.end());
    m.max_degree = std::max(m.max_degree, span.size());
  }
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    auto dist = detail::bfs_distances(g.num_nodes(), nbrs, i);
    m.diameter = std::max(m.diameter, *std::max_element(dist.begin(), dist.end()));
  }
  m.bipartite = detail::is_bipartite(g.num_nodes(), nbrs);
  return m;
}

struct RandomGraphOptions {
  std::size_t max_attempts = 1000;
};

/**
 * Draws a graph with E distinct unordered node pairs chosen uniformly at
 * random, each oriented by a fair coin. Draws are repeated until the result
 * is connected and not bipartite.
 *
 * Deterministic for a fixed seed.
 */
inline DirectedGraph random_connected_graph(std::size_t n, std::size_t num_edges,
                                            std::uint64_t seed,
                                            RandomGraphOptions options = {}) {
  if (n < 2) {
    throw Error(ErrorCode::kInvalidArgument, "graph needs at least 2 nodes");
  }
  const std::size_t max_pairs = n * (n - 1) / 2;
  if (num_edges + 1 < n || num_edges > max_pairs) {
    throw Error(ErrorCode::kInfeasibleEdgeCount,
                std::to_string(num_edges) + " edges on " + std::to_string(n) +
                    " nodes; need between " + std::to_string(n - 1) + " and " +
                    std::to_string(max_pairs));
  }

  std::vector<Edge> pairs;
  pairs.reserve(max_pairs);
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = i + 1; j < n; ++j) pairs.push_back({i, j});
  }

  std::mt19937_64 rng(seed);
  for (std::size_t attempt = 0; attempt < options.max_attempts; ++attempt) {
    // Partial Fisher-Yates: the first num_edges slots become a uniform sample.
    for (std::size_t k = 0; k < num_edges; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, max_pairs - 1);
      std::swap(pairs[k], pairs[pick(rng)]);
    }
    std::vector<Edge> edges(pairs.begin(), pairs.begin() + num_edges);
    for (auto& edge : edges) {
      if (rng() & 1U) std::swap(edge.tail, edge.head);
    }
    auto nbrs = detail::undirected_neighbors(n, edges);
    if (detail::is_connected(n, nbrs) && !detail::is_bipartite(n, nbrs)) {
      return build_graph(n, std::move(edges));
    }
  }
  throw Error(ErrorCode::kRejectionLimitExceeded,
              "no connected non-bipartite graph with " +
                  std::to_string(num_edges) + " edges on " + std::to_string(n) +
                  " nodes after " + std::to_string(options.max_attempts) +
                  " draws");
}

// Graph text format: "n E" then E lines "tail head", 1-indexed.

inline void write_graph(std::ostream& out, const DirectedGraph& g) {
  out << g.num_nodes() << ' ' << g.num_edges() << '\n';
  for (const auto& [t, h] : g.edges()) {
    out << (t + 1) << ' ' << (h + 1) << '\n';
  }
}

inline DirectedGraph read_graph(std::istream& in) {
  long long n = 0;
  long long m = 0;
  if (!(in >> n >> m) || n < 0 || m < 0) {
    throw Error(ErrorCode::kParseError, "expected header \"n E\"");
  }
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(m));
  for (long long e = 0; e < m; ++e) {
    long long t = 0;
    long long h = 0;
    if (!(in >> t >> h)) {
      throw Error(ErrorCode::kParseError,
                  "expected edge line " + std::to_string(e + 1));
    }
    if (t < 1 || h < 1 || t > n || h > n) {
      throw Error(ErrorCode::kEndpointOutOfRange,
                  "edge line " + std::to_string(e + 1) +
                      " has an endpoint outside [1, n]");
    }
    edges.push_back({static_cast<NodeId>(t - 1), static_cast<NodeId>(h - 1)});
  }
  return build_graph(static_cast<std::size_t>(n), std::move(edges));
}

}  // namespace netflow
