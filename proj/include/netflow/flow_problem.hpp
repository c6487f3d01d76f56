#pragma once

#include <cmath>
#include <cstddef>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "netflow/error.hpp"
#include "netflow/graph.hpp"

namespace netflow {

enum class CostFamily { kQuadratic, kCoshLike };

inline std::string_view to_string(CostFamily family) {
  return family == CostFamily::kQuadratic ? "quadratic" : "cosh";
}

inline CostFamily parse_cost_family(std::string_view text) {
  if (text == "quadratic") return CostFamily::kQuadratic;
  if (text == "cosh") return CostFamily::kCoshLike;
  throw Error(ErrorCode::kParseError,
              "unknown cost family \"" + std::string(text) + "\"");
}

/**
 * Strictly convex per-edge cost φ with coefficient c > 0.
 *
 *   quadratic:  φ(x) = x²/(2c)        φ′(x) = x/c        φ″(x) = 1/c
 *   cosh:       φ(x) = c(cosh x − 1)  φ′(x) = c sinh x   φ″(x) = c cosh x
 */
struct EdgeCost {
  CostFamily family = CostFamily::kCoshLike;
  double coefficient = 1.0;

  double value(double x) const {
    if (family == CostFamily::kQuadratic) return x * x / (2.0 * coefficient);
    // cosh x − 1 = 2 sinh²(x/2), without cancellation near 0.
    const double s = std::sinh(0.5 * x);
    return 2.0 * coefficient * s * s;
  }

  double derivative(double x) const {
    if (family == CostFamily::kQuadratic) return x / coefficient;
    return coefficient * std::sinh(x);
  }

  double second_derivative(double x) const {
    if (family == CostFamily::kQuadratic) return 1.0 / coefficient;
    return coefficient * std::cosh(x);
  }

  /// (φ′)⁻¹(y), defined on all of ℝ for both families.
  double inverse_derivative(double y) const {
    if (family == CostFamily::kQuadratic) return coefficient * y;
    return std::asinh(y / coefficient);
  }

  friend bool operator==(const EdgeCost&, const EdgeCost&) = default;
};

/**
 * Separable network-flow problem: minimize Σₑ φₑ(xᵉ) subject to Ax = b.
 * Build through make_problem().
 */
class FlowProblem {
 public:
  const DirectedGraph& graph() const { return graph_; }
  const std::vector<EdgeCost>& costs() const { return costs_; }
  const Eigen::VectorXd& supply() const { return supply_; }
  const Eigen::SparseMatrix<double>& incidence() const { return incidence_; }

  std::size_t num_nodes() const { return graph_.num_nodes(); }
  std::size_t num_edges() const { return graph_.num_edges(); }

  friend bool operator==(const FlowProblem& a, const FlowProblem& b) {
    return a.graph_ == b.graph_ && a.costs_ == b.costs_ &&
           a.supply_ == b.supply_;
  }

 private:
  friend FlowProblem make_problem(DirectedGraph graph,
                                  std::vector<EdgeCost> costs,
                                  Eigen::VectorXd supply);

  DirectedGraph graph_;
  std::vector<EdgeCost> costs_;
  Eigen::VectorXd supply_;
  Eigen::SparseMatrix<double> incidence_;
};

/// Absolute tolerance on Σb, scaled by max(1, ‖b‖₁).
inline constexpr double kSupplyBalanceTolerance = 1e-12;

inline FlowProblem make_problem(DirectedGraph graph, std::vector<EdgeCost> costs,
                                Eigen::VectorXd supply) {
  if (costs.size() != graph.num_edges()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected " + std::to_string(graph.num_edges()) +
                    " edge costs, got " + std::to_string(costs.size()));
  }
  if (static_cast<std::size_t>(supply.size()) != graph.num_nodes()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected " + std::to_string(graph.num_nodes()) +
                    " supply entries, got " + std::to_string(supply.size()));
  }
  for (std::size_t e = 0; e < costs.size(); ++e) {
    if (!(costs[e].coefficient > 0.0) || !std::isfinite(costs[e].coefficient)) {
      throw Error(ErrorCode::kNonPositiveCoefficient,
                  "edge " + std::to_string(e) + " has coefficient " +
                      std::to_string(costs[e].coefficient));
    }
  }
  const double imbalance = supply.sum();
  if (!(std::abs(imbalance) <=
        kSupplyBalanceTolerance * std::max(1.0, supply.lpNorm<1>()))) {
    throw Error(ErrorCode::kUnbalancedSupply,
                "supply sums to " + std::to_string(imbalance));
  }

  FlowProblem p;
  p.incidence_ = incidence_matrix(graph);
  p.graph_ = std::move(graph);
  p.costs_ = std::move(costs);
  p.supply_ = std::move(supply);
  return p;
}

inline std::vector<EdgeCost> uniform_costs(std::size_t num_edges,
                                           CostFamily family,
                                           double coefficient = 1.0) {
  return std::vector<EdgeCost>(num_edges, EdgeCost{family, coefficient});
}

/**
 * Supply vector with +amount and −amount on the lowest-index node pair at
 * undirected distance diam(G).
 */
inline Eigen::VectorXd place_source_sink(const DirectedGraph& g, double amount) {
  const auto dist = all_pairs_hop_distances(g);
  const std::size_t n = g.num_nodes();
  std::size_t diameter = 0;
  NodeId source = 0;
  NodeId sink = 1;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = i + 1; j < n; ++j) {
      if (dist[i][j] > diameter) {
        diameter = dist[i][j];
        source = i;
        sink = j;
      }
    }
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  b[static_cast<Eigen::Index>(source)] = amount;
  b[static_cast<Eigen::Index>(sink)] = -amount;
  return b;
}

/// xᵉ(λ) = (φ′ₑ)⁻¹(λ_tail − λ_head).
inline Eigen::VectorXd primal_from_dual(const FlowProblem& p,
                                        const Eigen::VectorXd& lambda) {
  const auto& g = p.graph();
  Eigen::VectorXd x(static_cast<Eigen::Index>(g.num_edges()));
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    const auto& [t, h] = g.edge(e);
    x[static_cast<Eigen::Index>(e)] = p.costs()[e].inverse_derivative(
        lambda[static_cast<Eigen::Index>(t)] -
        lambda[static_cast<Eigen::Index>(h)]);
  }
  return x;
}

/// gᵢ = Σ_out xᵉ − Σ_in xᵉ − bᵢ, i.e. g = Ax − b, from a given primal flow.
inline Eigen::VectorXd dual_gradient_from_flow(const FlowProblem& p,
                                               const Eigen::VectorXd& x) {
  const auto& g = p.graph();
  Eigen::VectorXd grad = -p.supply();
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    double acc = 0.0;
    for (const auto& [e, sign] : g.incident(i)) {
      acc += sign * x[static_cast<Eigen::Index>(e)];
    }
    grad[static_cast<Eigen::Index>(i)] += acc;
  }
  return grad;
}

inline Eigen::VectorXd dual_gradient(const FlowProblem& p,
                                     const Eigen::VectorXd& lambda) {
  return dual_gradient_from_flow(p, primal_from_dual(p, lambda));
}

/// q(λ) = Σₑ [−φₑ(xᵉ) + (λᵀA)ₑ xᵉ] − λᵀb at xᵉ = xᵉ(λ).
inline double dual_value(const FlowProblem& p, const Eigen::VectorXd& lambda) {
  const auto& g = p.graph();
  double q = 0.0;
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    const auto& [t, h] = g.edge(e);
    const double potential = lambda[static_cast<Eigen::Index>(t)] -
                             lambda[static_cast<Eigen::Index>(h)];
    const auto& cost = p.costs()[e];
    const double x = cost.inverse_derivative(potential);
    q += -cost.value(x) + potential * x;
  }
  return q - lambda.dot(p.supply());
}

/**
 * Splitting H = D − B of the dual Hessian H = A W Aᵀ, Wₑₑ = 1/φ″ₑ(xᵉ).
 *
 * diag holds the diagonal of D. off is symmetric with zero diagonal and
 * nonnegative entries on the graph's adjacency pattern (parallel edges
 * summed).
 */
struct HessianSplit {
  Eigen::VectorXd diag;
  Eigen::SparseMatrix<double, Eigen::RowMajor> off;

  Eigen::Index size() const { return diag.size(); }

  /// Dense D − B. Diagnostics and tests only.
  Eigen::MatrixXd dense_hessian() const {
    Eigen::MatrixXd h = -Eigen::MatrixXd(off);
    h.diagonal() += diag;
    return h;
  }
};

inline HessianSplit hessian_split_from_flow(const FlowProblem& p,
                                            const Eigen::VectorXd& x) {
  const auto& g = p.graph();
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  HessianSplit split;
  split.diag = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(2 * g.num_edges());
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    const auto& [t, h] = g.edge(e);
    const double w =
        1.0 / p.costs()[e].second_derivative(x[static_cast<Eigen::Index>(e)]);
    const auto ti = static_cast<Eigen::Index>(t);
    const auto hi = static_cast<Eigen::Index>(h);
    split.diag[ti] += w;
    split.diag[hi] += w;
    entries.emplace_back(ti, hi, w);
    entries.emplace_back(hi, ti, w);
  }
  split.off.resize(n, n);
  split.off.setFromTriplets(entries.begin(), entries.end());
  return split;
}

inline HessianSplit dual_hessian_split(const FlowProblem& p,
                                       const Eigen::VectorXd& lambda) {
  return hessian_split_from_flow(p, primal_from_dual(p, lambda));
}

struct PrimalMetrics {
  double objective = 0.0;    ///< f(x(λ)) = Σ φₑ(xᵉ)
  double feasibility = 0.0;  ///< ‖A x(λ) − b‖₂
};

inline PrimalMetrics primal_metrics_from_flow(const FlowProblem& p,
                                              const Eigen::VectorXd& x) {
  PrimalMetrics m;
  for (EdgeId e = 0; e < p.num_edges(); ++e) {
    m.objective += p.costs()[e].value(x[static_cast<Eigen::Index>(e)]);
  }
  m.feasibility = (p.incidence() * x - p.supply()).norm();
  return m;
}

inline PrimalMetrics primal_metrics(const FlowProblem& p,
                                    const Eigen::VectorXd& lambda) {
  return primal_metrics_from_flow(p, primal_from_dual(p, lambda));
}

/// Dual iterate with everything derived from it.
struct DualState {
  Eigen::VectorXd lambda;
  Eigen::VectorXd x;
  Eigen::VectorXd g;
  HessianSplit split;
};

inline DualState make_dual_state(const FlowProblem& p, Eigen::VectorXd lambda) {
  DualState s;
  s.x = primal_from_dual(p, lambda);
  s.g = dual_gradient_from_flow(p, s.x);
  s.split = hessian_split_from_flow(p, s.x);
  s.lambda = std::move(lambda);
  return s;
}

// Problem text format: the graph format, then one "family c" line per edge,
// then one supply value per node. Numbers are written with 17 significant
// digits so reading back is exact.

inline void write_problem(std::ostream& out, const FlowProblem& p) {
  write_graph(out, p.graph());
  const auto old_precision = out.precision(17);
  for (const auto& cost : p.costs()) {
    out << to_string(cost.family) << ' ' << cost.coefficient << '\n';
  }
  for (Eigen::Index i = 0; i < p.supply().size(); ++i) {
    out << p.supply()[i] << '\n';
  }
  out.precision(old_precision);
}

inline FlowProblem read_problem(std::istream& in) {
  DirectedGraph g = read_graph(in);
  std::vector<EdgeCost> costs;
  costs.reserve(g.num_edges());
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    std::string family;
    double c = 0.0;
    if (!(in >> family >> c)) {
      throw Error(ErrorCode::kParseError,
                  "expected cost line " + std::to_string(e + 1));
    }
    costs.push_back({parse_cost_family(family), c});
  }
  Eigen::VectorXd b(static_cast<Eigen::Index>(g.num_nodes()));
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    if (!(in >> b[i])) {
      throw Error(ErrorCode::kParseError,
                  "expected supply line " + std::to_string(i + 1));
    }
  }
  return make_problem(std::move(g), std::move(costs), std::move(b));
}

}  // namespace netflow
