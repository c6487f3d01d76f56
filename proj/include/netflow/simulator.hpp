#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "netflow/directions.hpp"
#include "netflow/error.hpp"
#include "netflow/flow_problem.hpp"
#include "netflow/line_search.hpp"

namespace netflow {

enum class Phase : std::size_t { kPrimal, kGradient, kDirection, kLineSearch };

inline constexpr std::array<std::string_view, 4> kPhaseLabels = {
    "primal", "gradient", "direction", "linesearch"};

/**
 * Communication meter. One round is a synchronous exchange in which every
 * node sends one scalar over each incident edge, so a round moves 2E scalars.
 */
struct ExchangeLedger {
  std::size_t rounds = 0;
  std::uint64_t scalars_sent = 0;
  std::array<std::size_t, 4> per_phase{};
  /// Set once a centralized (exact Newton) direction has been used; those
  /// directions are not metered.
  bool centralized = false;

  void record(Phase phase, std::size_t count, std::size_t num_edges) {
    per_phase[static_cast<std::size_t>(phase)] += count;
    rounds += count;
    scalars_sent += static_cast<std::uint64_t>(count) * 2U * num_edges;
  }

  std::size_t phase_rounds(Phase phase) const {
    return per_phase[static_cast<std::size_t>(phase)];
  }

  friend bool operator==(const ExchangeLedger&, const ExchangeLedger&) = default;
};

/// Neighbor-exchange rounds spent building a direction, or nullopt for the
/// centralized exact Newton step.
inline std::optional<std::size_t> direction_rounds(
    const DirectionMethod& method) {
  struct Visitor {
    std::optional<std::size_t> operator()(const GradientMethod&) const {
      return 0;
    }
    std::optional<std::size_t> operator()(const AddMethod& m) const {
      return m.order;
    }
    std::optional<std::size_t> operator()(const ConsensusNewtonMethod& m) const {
      return m.rounds;
    }
    std::optional<std::size_t> operator()(const ExactNewtonMethod&) const {
      return std::nullopt;
    }
  };
  return std::visit(Visitor{}, method);
}

/**
 * Rounds per iteration: one λ exchange for the primal update and one x
 * exchange for the gradient, plus the direction rounds (N for the truncated
 * series, m for consensus Newton), plus any line-search rounds.
 * nullopt for exact Newton.
 */
inline std::optional<std::size_t> communication_cost(
    const DirectionMethod& method, std::size_t linesearch_rounds = 0) {
  const auto dir = direction_rounds(method);
  if (!dir) return std::nullopt;
  return 2 + *dir + linesearch_rounds;
}

inline std::string step_label(const StepRule& rule) {
  if (const auto* fixed = std::get_if<FixedStep>(&rule)) {
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(),
                                   fixed->alpha);
    return "fixed:" + std::string(buf.data(), end);
  }
  return "backtrack";
}

struct IterationResult {
  DualState state;
  double alpha = 0.0;
  std::size_t backtracks = 0;
  bool backtrack_exhausted = false;
  /// Norm estimate at the new iterate; set under backtracking.
  std::optional<double> eta;
};

/**
 * One outer iteration: direction, step, λ ← λ + αd, and the primal/dual
 * quantities at the new λ. Communication goes to `ledger`.
 *
 * Under backtracking, `eta` is the norm estimate at `state`; when absent it is
 * computed and metered here.
 */
inline IterationResult iterate_once(const FlowProblem& p, const DualState& state,
                                    const DirectionMethod& method,
                                    const StepRule& rule, ExchangeLedger& ledger,
                                    std::optional<double> eta = std::nullopt) {
  const std::size_t num_edges = p.num_edges();
  const Eigen::VectorXd d = compute_direction(method, state.split, state.g);
  if (const auto rounds = direction_rounds(method)) {
    ledger.record(Phase::kDirection, *rounds, num_edges);
  } else {
    ledger.centralized = true;
  }

  IterationResult out;
  if (const auto* fixed = std::get_if<FixedStep>(&rule)) {
    out.alpha = fixed->alpha;
  } else {
    const auto& config = std::get<InexactBacktracking>(rule).config;
    if (!eta) {
      eta = approx_norm(p.graph(), state.g, config.consensus_rounds).eta;
      ledger.record(Phase::kLineSearch, config.consensus_rounds, num_edges);
    }
    const auto bt = backtracking_stepsize(p, state.lambda, d, *eta, config);
    ledger.record(Phase::kLineSearch, bt.exchanges_used, num_edges);
    out.alpha = bt.alpha;
    out.backtracks = bt.backtracks;
    out.backtrack_exhausted = bt.exhausted;
    out.eta = bt.eta_trial;
  }

  out.state = make_dual_state(p, state.lambda + out.alpha * d);
  ledger.record(Phase::kPrimal, 1, num_edges);
  ledger.record(Phase::kGradient, 1, num_edges);
  return out;
}

struct TraceRecord {
  std::size_t iter = 0;
  std::size_t rounds = 0;
  double dual_value = 0.0;
  double primal_objective = 0.0;
  double feasibility = 0.0;
  double grad_norm = 0.0;
  double alpha = 0.0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct TrialOptions {
  double tol = 1e-10;
  std::size_t max_iters = 100000;
  std::size_t max_rounds = 10000000;
};

struct TrialReport {
  std::vector<TraceRecord> trace;
  bool converged = false;
  /// Stopped on a non-finite iterate.
  bool diverged = false;
  std::size_t iterations = 0;
  std::size_t backtrack_exhaustions = 0;
  Eigen::VectorXd final_lambda;
  ExchangeLedger ledger;

  // Configuration echo.
  std::string method;
  std::string step;
  TrialOptions options;
  std::optional<std::uint64_t> seed;

  std::size_t total_rounds() const { return ledger.rounds; }
};

inline TraceRecord make_record(const FlowProblem& p, const DualState& s,
                               std::size_t iter, std::size_t rounds,
                               double alpha) {
  const auto pm = primal_metrics_from_flow(p, s.x);
  TraceRecord r;
  r.iter = iter;
  r.rounds = rounds;
  r.dual_value = dual_value(p, s.lambda);
  r.primal_objective = pm.objective;
  r.feasibility = pm.feasibility;
  r.grad_norm = s.g.norm();
  r.alpha = alpha;
  return r;
}

/**
 * Runs a full trial from λ₀ = 0 until ‖g‖ ≤ tol or a cap trips.
 *
 * The starting point costs one primal and one gradient round (plus one norm
 * consensus under backtracking); the initial trace record reflects that.
 */
inline TrialReport run_trial(const FlowProblem& p, const DirectionMethod& method,
                             const StepRule& rule, const TrialOptions& options,
                             std::optional<std::uint64_t> seed = std::nullopt) {
  if (!(options.tol > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tolerance must be positive");
  }
  TrialReport report;
  report.method = method_label(method);
  report.step = step_label(rule);
  report.options = options;
  report.seed = seed;

  const std::size_t num_edges = p.num_edges();
  DualState state = make_dual_state(
      p, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.num_nodes())));
  report.ledger.record(Phase::kPrimal, 1, num_edges);
  report.ledger.record(Phase::kGradient, 1, num_edges);
  std::optional<double> eta;
  if (const auto* bt = std::get_if<InexactBacktracking>(&rule)) {
    bt->config.validate();
    eta = approx_norm(p.graph(), state.g, bt->config.consensus_rounds).eta;
    report.ledger.record(Phase::kLineSearch, bt->config.consensus_rounds,
                         num_edges);
  }
  report.trace.push_back(make_record(p, state, 0, report.ledger.rounds, 0.0));

  auto finite = [](const TraceRecord& r) {
    return std::isfinite(r.grad_norm) && std::isfinite(r.dual_value);
  };

  while (report.trace.back().grad_norm > options.tol &&
         report.iterations < options.max_iters &&
         report.ledger.rounds < options.max_rounds) {
    auto step = iterate_once(p, state, method, rule, report.ledger, eta);
    ++report.iterations;
    if (step.backtrack_exhausted) ++report.backtrack_exhaustions;
    state = std::move(step.state);
    eta = step.eta;
    report.trace.push_back(make_record(p, state, report.iterations,
                                       report.ledger.rounds, step.alpha));
    if (!finite(report.trace.back())) {
      report.diverged = true;
      break;
    }
  }
  report.converged = !report.diverged && report.trace.back().grad_norm <= options.tol;
  report.final_lambda = std::move(state.lambda);
  return report;
}

// Trace CSV.

inline constexpr std::string_view kTraceHeader =
    "iter,rounds,dual_value,primal_objective,feasibility,grad_norm,alpha";

/// Shortest representation that reads back to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), end);
}

inline void write_trace_csv(std::ostream& out, const TrialReport& report) {
  out << kTraceHeader << '\n';
  for (const auto& r : report.trace) {
    out << r.iter << ',' << r.rounds << ',' << format_double(r.dual_value) << ','
        << format_double(r.primal_objective) << ','
        << format_double(r.feasibility) << ',' << format_double(r.grad_norm)
        << ',' << format_double(r.alpha) << '\n';
  }
}

}  // namespace netflow
