#pragma once

#include <cmath>
#include <cstddef>
#include <variant>

#include <Eigen/Core>

#include "netflow/error.hpp"
#include "netflow/flow_problem.hpp"
#include "netflow/graph.hpp"

namespace netflow {

struct LineSearchConfig {
  double sigma = 0.1;
  double beta = 0.5;
  double slack_b = 1e-6;  ///< additive constant B of the acceptance rule
  double gamma = 1e-8;    ///< norm-estimation error budget γ
  std::size_t consensus_rounds = 30;
  std::size_t max_backtracks = 30;

  void validate() const {
    if (!(sigma > 0.0 && sigma < 0.5)) {
      throw Error(ErrorCode::kInvalidArgument, "sigma must lie in (0, 1/2)");
    }
    if (!(beta > 0.0 && beta < 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "beta must lie in (0, 1)");
    }
    if (!(slack_b >= 0.0) || !(gamma >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "slack_b and gamma must be nonnegative");
    }
  }

  friend bool operator==(const LineSearchConfig&,
                         const LineSearchConfig&) = default;
};

struct FixedStep {
  double alpha = 1.0;
  friend bool operator==(const FixedStep&, const FixedStep&) = default;
};

struct InexactBacktracking {
  LineSearchConfig config;
  friend bool operator==(const InexactBacktracking&,
                         const InexactBacktracking&) = default;
};

using StepRule = std::variant<FixedStep, InexactBacktracking>;

/**
 * Largest fixed gradient step certified for every iterate: 1/(Δ · w_max),
 * where w_max bounds 1/φ″ₑ over all of ℝ. Gershgorin gives
 * λ_max(H) ≤ 2Δ w_max, so this step is below 2/λ_max(H).
 */
inline double safe_gradient_step(const FlowProblem& p) {
  double w_max = 0.0;
  for (const auto& cost : p.costs()) {
    // 1/φ″ peaks at x = 0 for cosh and is constant for quadratic.
    w_max = std::max(w_max, 1.0 / cost.second_derivative(0.0));
  }
  std::size_t max_degree = 0;
  for (NodeId i = 0; i < p.num_nodes(); ++i) {
    max_degree = std::max(max_degree, p.graph().incident(i).size());
  }
  return 1.0 / (static_cast<double>(max_degree) * w_max);
}

struct NormEstimate {
  double eta = 0.0;         ///< estimate of ‖g‖ read at the root node
  double true_error = 0.0;  ///< |η − ‖g‖|, metering only
};

/// Node whose consensus value is read out as η.
inline constexpr NodeId kNormRootNode = 0;

/**
 * Consensus estimate of ‖g‖.
 *
 * Node i starts from gᵢ² and runs `rounds` synchronous averaging steps with
 * Metropolis weights wᵢⱼ = 1/(1 + max(degᵢ, degⱼ)) over distinct neighbors.
 * η = √(n · yᵣₒₒₜ).
 */
inline NormEstimate approx_norm(const DirectedGraph& graph,
                                const Eigen::VectorXd& g, std::size_t rounds) {
  const std::size_t n = graph.num_nodes();
  if (static_cast<std::size_t>(g.size()) != n) {
    throw Error(ErrorCode::kDimensionMismatch, "gradient size");
  }
  Eigen::VectorXd y = g.array().square().matrix();
  Eigen::VectorXd next(y.size());
  for (std::size_t r = 0; r < rounds; ++r) {
    for (NodeId i = 0; i < n; ++i) {
      const auto deg_i = graph.neighbors(i).size();
      const auto yi = y[static_cast<Eigen::Index>(i)];
      double acc = yi;
      for (NodeId j : graph.neighbors(i)) {
        const auto deg_j = graph.neighbors(j).size();
        const double w = 1.0 / (1.0 + static_cast<double>(std::max(deg_i, deg_j)));
        acc += w * (y[static_cast<Eigen::Index>(j)] - yi);
      }
      next[static_cast<Eigen::Index>(i)] = acc;
    }
    y.swap(next);
  }
  NormEstimate est;
  est.eta = std::sqrt(static_cast<double>(n) *
                      std::max(0.0, y[static_cast<Eigen::Index>(kNormRootNode)]));
  est.true_error = std::abs(est.eta - g.norm());
  return est;
}

/// Rounds consumed by one line-search trial: a primal and a gradient
/// exchange at the trial point, then the norm consensus.
inline std::size_t rounds_per_trial(const LineSearchConfig& config) {
  return 2 + config.consensus_rounds;
}

struct BacktrackResult {
  double alpha = 0.0;
  std::size_t backtracks = 0;  ///< the accepted m
  std::size_t exchanges_used = 0;
  double eta_trial = 0.0;  ///< η at the accepted trial point
  /// No m ≤ max_backtracks passed; alpha is β^max_backtracks.
  bool exhausted = false;
};

/**
 * Inexact backtracking: α = βᵐ for the smallest m ≤ max_backtracks with
 *
 *   η(λ + βᵐ d) ≤ (1 − σβᵐ) η_k + B + γ,
 *
 * where η(·) is approx_norm() of the trial gradient. Every trial is metered.
 * When no m qualifies the result is flagged exhausted and carries
 * α = β^max_backtracks; the caller decides whether to take it.
 */
inline BacktrackResult backtracking_stepsize(const FlowProblem& p,
                                             const Eigen::VectorXd& lambda,
                                             const Eigen::VectorXd& d,
                                             double eta_k,
                                             const LineSearchConfig& config) {
  config.validate();
  if (d.size() != lambda.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "direction size");
  }
  BacktrackResult result;
  double alpha = 1.0;
  for (std::size_t m = 0; m <= config.max_backtracks; ++m) {
    const Eigen::VectorXd trial = lambda + alpha * d;
    const double eta =
        approx_norm(p.graph(), dual_gradient(p, trial), config.consensus_rounds)
            .eta;
    result.exchanges_used += rounds_per_trial(config);
    result.alpha = alpha;
    result.backtracks = m;
    result.eta_trial = eta;
    if (eta <= (1.0 - config.sigma * alpha) * eta_k + config.slack_b +
                   config.gamma) {
      return result;
    }
    alpha *= config.beta;
  }
  result.exhausted = true;
  return result;
}

}  // namespace netflow
