#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "netflow/directions.hpp"
#include "netflow/error.hpp"
#include "netflow/flow_problem.hpp"
#include "netflow/graph.hpp"
#include "netflow/line_search.hpp"
#include "netflow/simulator.hpp"

namespace netflow {

/// Supply placed at each end of the diametral pair unless configured.
inline constexpr double kDefaultSupplyAmount = 10.0;

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
  T value{};
  const auto t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw Error(ErrorCode::kParseError,
                "bad " + std::string(what) + " \"" + std::string(text) + "\"");
  }
  return value;
}

}  // namespace detail

/// Step rule as configured; "fixed:auto" resolves per problem to
/// safe_gradient_step().
struct StepSpec {
  enum class Kind { kFixed, kFixedAuto, kBacktrack } kind = Kind::kFixed;
  double alpha = 1.0;

  StepRule resolve(const FlowProblem& p, const LineSearchConfig& config) const {
    switch (kind) {
      case Kind::kFixed:
        return FixedStep{alpha};
      case Kind::kFixedAuto:
        return FixedStep{safe_gradient_step(p)};
      case Kind::kBacktrack:
        return InexactBacktracking{config};
    }
    return FixedStep{alpha};
  }

  std::string label() const {
    switch (kind) {
      case Kind::kFixed:
        return "fixed:" + format_double(alpha);
      case Kind::kFixedAuto:
        return "fixed:auto";
      case Kind::kBacktrack:
        return "backtrack";
    }
    return {};
  }

  friend bool operator==(const StepSpec&, const StepSpec&) = default;
};

/// Accepts "fixed:<alpha>", "fixed:auto" and "backtrack".
inline StepSpec parse_step_spec(std::string_view text) {
  const auto t = detail::trim(text);
  if (t == "backtrack") return {StepSpec::Kind::kBacktrack, 0.0};
  if (t == "fixed:auto") return {StepSpec::Kind::kFixedAuto, 0.0};
  if (t.starts_with("fixed:")) {
    const double alpha = detail::parse_number<double>(t.substr(6), "step size");
    if (!(alpha > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "fixed step must be positive");
    }
    return {StepSpec::Kind::kFixed, alpha};
  }
  throw Error(ErrorCode::kParseError, "unknown step rule \"" + std::string(t) +
                                          "\"; expected fixed:A, fixed:auto or "
                                          "backtrack");
}

/// Accepts "gradient", "add:N", "consensus:m", "consensus:m:bare",
/// "consensus:m:shifted" and "newton".
inline DirectionMethod parse_direction_method(std::string_view text) {
  const auto parts = detail::split(text, ':');
  const auto& name = parts[0];
  if (name == "gradient" && parts.size() == 1) return GradientMethod{};
  if (name == "newton" && parts.size() == 1) return ExactNewtonMethod{};
  if (name == "add" && parts.size() == 2) {
    return AddMethod{detail::parse_number<std::size_t>(parts[1], "order")};
  }
  if (name == "consensus" && (parts.size() == 2 || parts.size() == 3)) {
    ConsensusNewtonMethod m;
    m.rounds = detail::parse_number<std::size_t>(parts[1], "inner rounds");
    if (m.rounds == 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "consensus Newton needs at least one round");
    }
    if (parts.size() == 3) {
      if (parts[2] == "bare") {
        m.splitting = Splitting::kBare;
      } else if (parts[2] != "shifted") {
        throw Error(ErrorCode::kParseError,
                    "unknown splitting \"" + parts[2] + "\"");
      }
    }
    return m;
  }
  throw Error(ErrorCode::kParseError,
              "unknown method \"" + std::string(text) + "\"");
}

struct MethodSpec {
  DirectionMethod direction;
  StepSpec step;

  std::string label() const { return method_label(direction); }
  friend bool operator==(const MethodSpec&, const MethodSpec&) = default;
};

/// "<method>@<step>"; the step defaults to fixed:1.
inline MethodSpec parse_method_spec(std::string_view text) {
  const auto t = detail::trim(text);
  const auto at = t.find('@');
  MethodSpec spec{parse_direction_method(t.substr(0, at)), {}};
  if (at != std::string_view::npos) spec.step = parse_step_spec(t.substr(at + 1));
  return spec;
}

struct GraphSize {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  friend bool operator==(const GraphSize&, const GraphSize&) = default;
};

struct SuiteConfig {
  std::vector<GraphSize> sizes;
  std::size_t trials = 1;
  std::uint64_t base_seed = 1;
  CostFamily cost = CostFamily::kCoshLike;
  double cost_coefficient = 1.0;
  double amount = kDefaultSupplyAmount;
  std::vector<MethodSpec> methods;
  TrialOptions options;
  LineSearchConfig line_search;
  std::size_t max_graph_attempts = 1000;
  /// 0 means one worker per hardware thread.
  std::size_t threads = 0;

  void validate() const {
    if (sizes.empty()) throw Error(ErrorCode::kInvalidArgument, "no sizes");
    if (methods.empty()) throw Error(ErrorCode::kInvalidArgument, "no methods");
    if (trials < 1) throw Error(ErrorCode::kInvalidArgument, "trials must be >= 1");
    for (const auto& s : sizes) {
      if (s.nodes < 2 || s.edges + 1 < s.nodes ||
          s.edges > s.nodes * (s.nodes - 1) / 2) {
        throw Error(ErrorCode::kInfeasibleEdgeCount,
                    std::to_string(s.edges) + " edges on " +
                        std::to_string(s.nodes) + " nodes");
      }
    }
    std::vector<std::string> labels;
    for (const auto& m : methods) labels.push_back(m.label());
    std::sort(labels.begin(), labels.end());
    if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "two methods share a label; each direction method may appear "
                  "once");
    }
    if (!(options.tol > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "tol must be positive");
    }
    line_search.validate();
  }
};

/**
 * Reads a "key = value" suite file. '#' starts a comment. Keys:
 *
 *   sizes = 25x75, 50x350        trials = 50          base_seed = 1
 *   cost = cosh                  coefficient = 1      amount = 10
 *   methods = add:2@fixed:1, gradient@fixed:auto, consensus:20@backtrack
 *   tol = 1e-10   max_iters = ...   max_rounds = ...   threads = 0
 *   sigma, beta, slack_b, gamma, consensus_rounds, max_backtracks
 *   max_graph_attempts
 */
inline SuiteConfig parse_suite_config(std::istream& in) {
  SuiteConfig c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    view = view.substr(0, view.find('#'));
    view = detail::trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(detail::trim(view.substr(0, eq)));
    const std::string value(detail::trim(view.substr(eq + 1)));
    using detail::parse_number;
    if (key == "sizes") {
      c.sizes.clear();
      for (const auto& item : detail::split(value, ',')) {
        const auto x = item.find('x');
        if (x == std::string::npos) {
          throw Error(ErrorCode::kParseError, "size \"" + item + "\" is not NxE");
        }
        c.sizes.push_back(
            {parse_number<std::size_t>(std::string_view(item).substr(0, x), "nodes"),
             parse_number<std::size_t>(std::string_view(item).substr(x + 1),
                                       "edges")});
      }
    } else if (key == "trials") {
      c.trials = parse_number<std::size_t>(value, key);
    } else if (key == "base_seed") {
      c.base_seed = parse_number<std::uint64_t>(value, key);
    } else if (key == "cost") {
      c.cost = parse_cost_family(value);
    } else if (key == "coefficient") {
      c.cost_coefficient = parse_number<double>(value, key);
    } else if (key == "amount") {
      c.amount = parse_number<double>(value, key);
    } else if (key == "methods") {
      c.methods.clear();
      for (const auto& item : detail::split(value, ',')) {
        c.methods.push_back(parse_method_spec(item));
      }
    } else if (key == "tol") {
      c.options.tol = parse_number<double>(value, key);
    } else if (key == "max_iters") {
      c.options.max_iters = parse_number<std::size_t>(value, key);
    } else if (key == "max_rounds") {
      c.options.max_rounds = parse_number<std::size_t>(value, key);
    } else if (key == "threads") {
      c.threads = parse_number<std::size_t>(value, key);
    } else if (key == "sigma") {
      c.line_search.sigma = parse_number<double>(value, key);
    } else if (key == "beta") {
      c.line_search.beta = parse_number<double>(value, key);
    } else if (key == "slack_b") {
      c.line_search.slack_b = parse_number<double>(value, key);
    } else if (key == "gamma") {
      c.line_search.gamma = parse_number<double>(value, key);
    } else if (key == "consensus_rounds") {
      c.line_search.consensus_rounds = parse_number<std::size_t>(value, key);
    } else if (key == "max_backtracks") {
      c.line_search.max_backtracks = parse_number<std::size_t>(value, key);
    } else if (key == "max_graph_attempts") {
      c.max_graph_attempts = parse_number<std::size_t>(value, key);
    } else {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) +
                                              ": unknown key \"" + key + "\"");
    }
  }
  c.validate();
  return c;
}

inline SuiteConfig load_suite_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIOFailure, "cannot open " + path.string());
  }
  return parse_suite_config(in);
}

/// One row of the suite's trial index (trials.csv).
struct TrialRow {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::uint64_t seed = 0;
  std::string method;
  std::string step;
  bool converged = false;
  std::size_t iterations = 0;
  std::size_t rounds = 0;
  double final_grad_norm = 0.0;
  std::string trace_file;  ///< empty when the instance could not be generated

  friend bool operator==(const TrialRow&, const TrialRow&) = default;
};

inline constexpr std::string_view kTrialIndexFile = "trials.csv";
inline constexpr std::string_view kSummaryFile = "summary.csv";
inline constexpr std::string_view kTrialIndexHeader =
    "n,E,seed,method,step,converged,iterations,rounds,final_grad_norm,"
    "trace_file";
inline constexpr std::string_view kSummaryHeader =
    "n,E,method,min_rounds,mean_rounds,max_rounds,median_rounds,converged_frac";

inline std::string trace_file_name(const GraphSize& size, std::uint64_t seed,
                                   const std::string& label) {
  return "n" + std::to_string(size.nodes) + "_E" + std::to_string(size.edges) +
         "_seed" + std::to_string(seed) + "_" + label + ".csv";
}

inline void write_trial_index(std::ostream& out,
                              const std::vector<TrialRow>& rows) {
  out << kTrialIndexHeader << '\n';
  for (const auto& r : rows) {
    out << r.nodes << ',' << r.edges << ',' << r.seed << ',' << r.method << ','
        << r.step << ',' << (r.converged ? 1 : 0) << ',' << r.iterations << ','
        << r.rounds << ',' << format_double(r.final_grad_norm) << ','
        << r.trace_file << '\n';
  }
}

inline std::vector<TrialRow> read_trial_index(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kTrialIndexHeader) {
    throw Error(ErrorCode::kParseError, "trial index header mismatch");
  }
  std::vector<TrialRow> rows;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 10) {
      throw Error(ErrorCode::kParseError, "trial index row \"" + line + "\"");
    }
    using detail::parse_number;
    TrialRow r;
    r.nodes = parse_number<std::size_t>(f[0], "n");
    r.edges = parse_number<std::size_t>(f[1], "E");
    r.seed = parse_number<std::uint64_t>(f[2], "seed");
    r.method = f[3];
    r.step = f[4];
    r.converged = parse_number<int>(f[5], "converged") != 0;
    r.iterations = parse_number<std::size_t>(f[6], "iterations");
    r.rounds = parse_number<std::size_t>(f[7], "rounds");
    r.final_grad_norm = f[8] == "nan" ? std::numeric_limits<double>::quiet_NaN()
                                      : parse_number<double>(f[8], "grad norm");
    r.trace_file = f[9];
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace detail {

template <typename Job>
void parallel_for(std::size_t count, std::size_t threads, Job&& job) {
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

struct SummaryRow {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::string method;
  double min_rounds = 0.0;
  double mean_rounds = 0.0;
  double max_rounds = 0.0;
  double median_rounds = 0.0;
  double converged_frac = 0.0;
};

/**
 * Rounds-to-convergence statistics per (size, method) over converged trials.
 * Groups keep first-appearance order. Statistics are NaN for a group with no
 * converged trial.
 */
inline std::vector<SummaryRow> summarize(const std::vector<TrialRow>& rows) {
  if (rows.empty()) throw Error(ErrorCode::kEmptyInput, "no trials");
  using Key = std::tuple<std::size_t, std::size_t, std::string>;
  std::vector<Key> order;
  std::map<Key, std::pair<std::vector<double>, std::size_t>> groups;
  for (const auto& r : rows) {
    Key key{r.nodes, r.edges, r.method};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    ++it->second.second;
    if (r.converged) it->second.first.push_back(static_cast<double>(r.rounds));
  }
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    auto& [values, total] = groups[key];
    SummaryRow s;
    std::tie(s.nodes, s.edges, s.method) = key;
    s.converged_frac =
        static_cast<double>(values.size()) / static_cast<double>(total);
    if (values.empty()) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      s.min_rounds = s.mean_rounds = s.max_rounds = s.median_rounds = nan;
    } else {
      std::sort(values.begin(), values.end());
      s.min_rounds = values.front();
      s.max_rounds = values.back();
      double sum = 0.0;
      for (double v : values) sum += v;
      s.mean_rounds = sum / static_cast<double>(values.size());
      const auto mid = values.size() / 2;
      s.median_rounds = values.size() % 2 == 1
                            ? values[mid]
                            : 0.5 * (values[mid - 1] + values[mid]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Reads the trial index of a suite output directory and summarizes it.
inline std::vector<SummaryRow> summarize(const std::filesystem::path& dir) {
  std::ifstream in(dir / kTrialIndexFile);
  if (!in) {
    throw Error(ErrorCode::kEmptyInput,
                "no " + std::string(kTrialIndexFile) + " in " + dir.string());
  }
  return summarize(read_trial_index(in));
}

inline void write_summary_csv(std::ostream& out,
                              const std::vector<SummaryRow>& rows) {
  out << kSummaryHeader << '\n';
  for (const auto& s : rows) {
    out << s.nodes << ',' << s.edges << ',' << s.method << ','
        << format_double(s.min_rounds) << ',' << format_double(s.mean_rounds)
        << ',' << format_double(s.max_rounds) << ','
        << format_double(s.median_rounds) << ','
        << format_double(s.converged_frac) << '\n';
  }
}

/**
 * Runs every (size, seed, method) trial, writing one trace CSV per trial,
 * the trial index (trials.csv) and the summary (summary.csv) into `out_dir`.
 * Seeds run sequentially from base_seed. Output is identical for identical
 * configs regardless of thread count.
 *
 * An instance that cannot be generated is recorded as non-converged rows with
 * no trace file.
 */
inline std::vector<TrialRow> run_suite(const SuiteConfig& config,
                                       const std::filesystem::path& out_dir) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw Error(ErrorCode::kIOFailure, "cannot create " + out_dir.string());
  }

  struct Job {
    GraphSize size;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& size : config.sizes) {
    for (std::size_t t = 0; t < config.trials; ++t) {
      jobs.push_back({size, config.base_seed + t});
    }
  }

  const std::size_t per_job = config.methods.size();
  std::vector<TrialRow> rows(jobs.size() * per_job);
  detail::parallel_for(jobs.size(), config.threads, [&](std::size_t j) {
    const auto& job = jobs[j];
    std::optional<FlowProblem> problem;
    try {
      auto graph = random_connected_graph(job.size.nodes, job.size.edges,
                                          job.seed,
                                          {config.max_graph_attempts});
      auto b = place_source_sink(graph, config.amount);
      problem = make_problem(
          graph,
          uniform_costs(graph.num_edges(), config.cost, config.cost_coefficient),
          std::move(b));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kRejectionLimitExceeded) throw;
    }
    for (std::size_t k = 0; k < per_job; ++k) {
      const auto& spec = config.methods[k];
      TrialRow& row = rows[j * per_job + k];
      row.nodes = job.size.nodes;
      row.edges = job.size.edges;
      row.seed = job.seed;
      row.method = spec.label();
      row.step = spec.step.label();
      if (!problem) {
        row.final_grad_norm = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const auto rule = spec.step.resolve(*problem, config.line_search);
      const auto report =
          run_trial(*problem, spec.direction, rule, config.options, job.seed);
      row.converged = report.converged;
      row.iterations = report.iterations;
      row.rounds = report.total_rounds();
      row.final_grad_norm = report.trace.back().grad_norm;
      row.trace_file = trace_file_name(job.size, job.seed, row.method);
      std::ofstream out(out_dir / row.trace_file);
      write_trace_csv(out, report);
      if (!out) {
        throw Error(ErrorCode::kIOFailure, "cannot write " + row.trace_file);
      }
    }
  });

  {
    std::ofstream out(out_dir / kTrialIndexFile);
    write_trial_index(out, rows);
    if (!out) throw Error(ErrorCode::kIOFailure, "cannot write trial index");
  }
  {
    std::ofstream out(out_dir / kSummaryFile);
    write_summary_csv(out, summarize(rows));
    if (!out) throw Error(ErrorCode::kIOFailure, "cannot write summary");
  }
  return rows;
}

}  // namespace netflow
