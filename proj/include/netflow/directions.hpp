#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <variant>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SparseCore>

#include "netflow/error.hpp"
#include "netflow/flow_problem.hpp"
#include "netflow/graph.hpp"

namespace netflow {

// Direction methods.

struct GradientMethod {
  friend bool operator==(const GradientMethod&, const GradientMethod&) = default;
};

/// Truncated series of order N: information from at most N hops.
struct AddMethod {
  std::size_t order = 0;
  friend bool operator==(const AddMethod&, const AddMethod&) = default;
};

enum class Splitting {
  kBare,               ///< H = D − B
  kShiftedByIdentity,  ///< H = (D + I) − (B + I)
};

struct ConsensusNewtonMethod {
  std::size_t rounds = 20;
  Splitting splitting = Splitting::kShiftedByIdentity;
  friend bool operator==(const ConsensusNewtonMethod&,
                         const ConsensusNewtonMethod&) = default;
};

/// Centralized pseudo-inverse step; not distributable.
struct ExactNewtonMethod {
  friend bool operator==(const ExactNewtonMethod&,
                         const ExactNewtonMethod&) = default;
};

using DirectionMethod = std::variant<GradientMethod, AddMethod,
                                     ConsensusNewtonMethod, ExactNewtonMethod>;

/// Short label used in file names and summaries: gradient, add2,
/// consensus20 (consensus20bare for the bare splitting), newton.
inline std::string method_label(const DirectionMethod& method) {
  struct Visitor {
    std::string operator()(const GradientMethod&) const { return "gradient"; }
    std::string operator()(const AddMethod& m) const {
      return "add" + std::to_string(m.order);
    }
    std::string operator()(const ConsensusNewtonMethod& m) const {
      return "consensus" + std::to_string(m.rounds) +
             (m.splitting == Splitting::kBare ? "bare" : "");
    }
    std::string operator()(const ExactNewtonMethod&) const { return "newton"; }
  };
  return std::visit(Visitor{}, method);
}

namespace detail {

inline void check_split_dims(const HessianSplit& split,
                             const Eigen::VectorXd& g) {
  const auto n = split.diag.size();
  if (split.off.rows() != n || split.off.cols() != n || g.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "D is " + std::to_string(n) + ", B is " +
                    std::to_string(split.off.rows()) + "x" +
                    std::to_string(split.off.cols()) + ", g is " +
                    std::to_string(g.size()));
  }
}

/**
 * Runs `sweeps` steps of d ← (D + sI)⁻¹((B + sI)d − g) from d = 0.
 *
 * Each step after the first costs one sparse product with B, which is one
 * neighbor exchange.
 */
inline Eigen::VectorXd splitting_sweeps(const HessianSplit& split,
                                        const Eigen::VectorXd& g,
                                        std::size_t sweeps, double shift) {
  const Eigen::ArrayXd inv_diag = 1.0 / (split.diag.array() + shift);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(g.size());
  for (std::size_t s = 0; s < sweeps; ++s) {
    Eigen::VectorXd bd = split.off * d;
    if (shift != 0.0) bd += shift * d;
    d = ((bd - g).array() * inv_diag).matrix();
  }
  return d;
}

}  // namespace detail

inline Eigen::VectorXd gradient_direction(const Eigen::VectorXd& g) {
  return -g;
}

/**
 * Truncated-series approximate Newton direction of order N,
 *
 *   d = −Σᵢ₌₀ᴺ D^(−½) (D^(−½) B D^(−½))ⁱ D^(−½) g,
 *
 * evaluated as N + 1 steps of d ← D⁻¹B d − D⁻¹g from d = 0. Component i of the
 * result depends only on data within N hops of node i.
 */
inline Eigen::VectorXd add_direction(std::size_t order, const HessianSplit& split,
                                     const Eigen::VectorXd& g) {
  detail::check_split_dims(split, g);
  return detail::splitting_sweeps(split, g, order + 1, 0.0);
}

/**
 * d = −H†g for H = D − B, computed by solving (H + 𝟏𝟏ᵀ/n) d = −g and
 * projecting onto 𝟏⊥.
 *
 * @throws Error kSingularBeyondNullspace when H has rank below n − 1.
 */
inline Eigen::VectorXd exact_newton_direction(const HessianSplit& split,
                                              const Eigen::VectorXd& g) {
  detail::check_split_dims(split, g);
  const auto n = split.size();
  Eigen::MatrixXd regularized = split.dense_hessian();
  regularized.array() += 1.0 / static_cast<double>(n);
  Eigen::LLT<Eigen::MatrixXd> llt(regularized);
  constexpr double kMinReciprocalCondition = 1e-13;
  if (llt.info() != Eigen::Success || !(llt.rcond() > kMinReciprocalCondition)) {
    throw Error(ErrorCode::kSingularBeyondNullspace,
                "Hessian has a null space beyond span{1}");
  }
  Eigen::VectorXd d = llt.solve(-g);
  d.array() -= d.mean();
  return d;
}

/**
 * m iterations of the consensus dynamic for the Newton system, from d = 0.
 *
 * kBare:               d ← D⁻¹B d − D⁻¹g
 * kShiftedByIdentity:  d ← (D + I)⁻¹(B + I) d − (D + I)⁻¹g
 */
inline Eigen::VectorXd consensus_newton_direction(std::size_t rounds,
                                                  const HessianSplit& split,
                                                  const Eigen::VectorXd& g,
                                                  Splitting splitting) {
  detail::check_split_dims(split, g);
  if (rounds == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "consensus Newton needs at least one round");
  }
  const double shift = splitting == Splitting::kBare ? 0.0 : 1.0;
  return detail::splitting_sweeps(split, g, rounds, shift);
}

inline Eigen::VectorXd compute_direction(const DirectionMethod& method,
                                         const HessianSplit& split,
                                         const Eigen::VectorXd& g) {
  struct Visitor {
    const HessianSplit& split;
    const Eigen::VectorXd& g;
    Eigen::VectorXd operator()(const GradientMethod&) const {
      return gradient_direction(g);
    }
    Eigen::VectorXd operator()(const AddMethod& m) const {
      return add_direction(m.order, split, g);
    }
    Eigen::VectorXd operator()(const ConsensusNewtonMethod& m) const {
      return consensus_newton_direction(m.rounds, split, g, m.splitting);
    }
    Eigen::VectorXd operator()(const ExactNewtonMethod&) const {
      return exact_newton_direction(split, g);
    }
  };
  return std::visit(Visitor{split, g}, method);
}

// Diagnostics. Dense computations, not part of the distributed loop.

struct NewtonDiagnostics {
  double eps_norm = 0.0;           ///< ‖(D − B)d + g‖₂
  double contraction_bound = 0.0;  ///< 1 − 1/(n Δ (diam + 1) b_max)
  double realized_rho = 0.0;       ///< second-largest |eigenvalue| of B D⁻¹
  double b_max = 0.0;              ///< largest entry of B
};

/// Eigenvalues of D^(−½) B D^(−½), which is similar to B D⁻¹. Ascending.
inline Eigen::VectorXd normalized_off_diagonal_spectrum(
    const HessianSplit& split) {
  const Eigen::VectorXd inv_sqrt = split.diag.array().rsqrt().matrix();
  const Eigen::MatrixXd s =
      inv_sqrt.asDiagonal() * Eigen::MatrixXd(split.off) * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      s, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

/// Second-largest eigenvalue modulus of B D⁻¹: the largest eigenvalue (1 on
/// a connected support) is dropped.
inline double second_largest_modulus(const HessianSplit& split) {
  const Eigen::VectorXd mu = normalized_off_diagonal_spectrum(split);
  const auto n = mu.size();
  if (n < 2) return 0.0;
  return std::max(std::abs(mu[0]), std::abs(mu[n - 2]));
}

inline double landau_contraction_bound(const GraphMetrics& metrics,
                                       std::size_t num_nodes, double b_max) {
  return 1.0 - 1.0 / (static_cast<double>(num_nodes) *
                      static_cast<double>(metrics.max_degree) *
                      static_cast<double>(metrics.diameter + 1) * b_max);
}

inline NewtonDiagnostics newton_error(const GraphMetrics& metrics,
                                      const HessianSplit& split,
                                      const Eigen::VectorXd& d,
                                      const Eigen::VectorXd& g) {
  detail::check_split_dims(split, g);
  if (d.size() != g.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "direction and gradient sizes");
  }
  NewtonDiagnostics diag;
  const Eigen::VectorXd residual =
      split.diag.cwiseProduct(d) - split.off * d + g;
  diag.eps_norm = residual.norm();
  diag.b_max = split.off.nonZeros() > 0
                   ? Eigen::Map<const Eigen::VectorXd>(split.off.valuePtr(),
                                                       split.off.nonZeros())
                         .maxCoeff()
                   : 0.0;
  diag.contraction_bound = landau_contraction_bound(
      metrics, static_cast<std::size_t>(split.size()), diag.b_max);
  diag.realized_rho = second_largest_modulus(split);
  return diag;
}

/// n × (n − 1) matrix with orthonormal columns spanning 𝟏⊥.
inline Eigen::MatrixXd orthonormal_complement_of_ones(Eigen::Index n) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd::Ones(n, 1));
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  return q.rightCols(n - 1);
}

/// Dense H̄⁽ᴺ⁾ = Σᵢ₌₀ᴺ D^(−½)(D^(−½) B D^(−½))ⁱ D^(−½).
inline Eigen::MatrixXd truncated_inverse_dense(const HessianSplit& split,
                                               std::size_t order) {
  const auto n = split.size();
  const Eigen::VectorXd inv_sqrt = split.diag.array().rsqrt().matrix();
  const Eigen::MatrixXd s =
      inv_sqrt.asDiagonal() * Eigen::MatrixXd(split.off) * inv_sqrt.asDiagonal();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
  for (std::size_t i = 1; i <= order; ++i) {
    power = power * s;
    sum += power;
  }
  return inv_sqrt.asDiagonal() * sum * inv_sqrt.asDiagonal();
}

/// λ_min(Vᵀ H̄⁽ᴺ⁾ V) with V an orthonormal basis of 𝟏⊥.
inline double projected_spd_check(const HessianSplit& split, std::size_t order) {
  const Eigen::MatrixXd v = orthonormal_complement_of_ones(split.size());
  const Eigen::MatrixXd h = truncated_inverse_dense(split, order);
  Eigen::MatrixXd projected = v.transpose() * h * v;
  projected = 0.5 * (projected + projected.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      projected, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()[0];
}

}  // namespace netflow
