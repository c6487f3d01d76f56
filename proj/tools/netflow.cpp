// netflow: generate instances, run single trials, run experiment suites and
// summarize them.
//
// Exit codes: 0 success, 1 error, 2 when a single run did not converge.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "netflow/netflow.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

struct GenArgs {
  std::size_t nodes = 25;
  std::size_t edges = 75;
  std::uint64_t seed = 1;
  std::size_t max_attempts = 1000;
  std::string out;
};

struct RunArgs {
  std::string graph;
  std::string problem;
  std::string cost = "cosh";
  double coefficient = 1.0;
  double amount = netflow::kDefaultSupplyAmount;
  std::string method = "add";
  std::size_t order = 2;
  std::size_t inner = 20;
  std::string splitting = "shifted";
  std::string step;
  netflow::TrialOptions options;
  netflow::LineSearchConfig line_search;
  std::string out;
};

struct SuiteArgs {
  std::string config;
  std::string out;
  std::optional<std::size_t> threads;
};

struct SummarizeArgs {
  std::string dir;
  std::string out;
};

template <typename Fn>
void write_file(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) {
    throw netflow::Error(netflow::ErrorCode::kIOFailure, "cannot open " + path);
  }
  fn(out);
  if (!out) {
    throw netflow::Error(netflow::ErrorCode::kIOFailure, "cannot write " + path);
  }
}

int cmd_gen(const GenArgs& args) {
  const auto g = netflow::random_connected_graph(args.nodes, args.edges,
                                                 args.seed, {args.max_attempts});
  write_file(args.out, [&](std::ostream& os) { netflow::write_graph(os, g); });
  if (!args.out.empty() && args.out != "-") {
    const auto m = netflow::metrics(g);
    std::cout << "nodes=" << g.num_nodes() << " edges=" << g.num_edges()
              << " max_degree=" << m.max_degree << " diameter=" << m.diameter
              << " bipartite=" << (m.bipartite ? "true" : "false") << '\n';
  }
  return 0;
}

netflow::FlowProblem load_problem(const RunArgs& args) {
  if (!args.problem.empty()) {
    std::ifstream in(args.problem);
    if (!in) {
      throw netflow::Error(netflow::ErrorCode::kIOFailure,
                           "cannot open " + args.problem);
    }
    return netflow::read_problem(in);
  }
  std::ifstream in(args.graph);
  if (!in) {
    throw netflow::Error(netflow::ErrorCode::kIOFailure,
                         "cannot open " + args.graph);
  }
  auto g = netflow::read_graph(in);
  auto b = netflow::place_source_sink(g, args.amount);
  auto costs = netflow::uniform_costs(
      g.num_edges(), netflow::parse_cost_family(args.cost), args.coefficient);
  return netflow::make_problem(std::move(g), std::move(costs), std::move(b));
}

int cmd_run(const RunArgs& args) {
  const auto problem = load_problem(args);

  std::string method_text = args.method;
  if (args.method == "add") {
    method_text += ":" + std::to_string(args.order);
  } else if (args.method == "consensus") {
    method_text += ":" + std::to_string(args.inner) + ":" + args.splitting;
  }
  const auto method = netflow::parse_direction_method(method_text);

  std::string step_text = args.step;
  if (step_text.empty()) {
    step_text = args.method == "gradient" ? "fixed:auto" : "fixed:1";
  }
  const auto rule = netflow::parse_step_spec(step_text).resolve(problem,
                                                                args.line_search);

  const auto report = netflow::run_trial(problem, method, rule, args.options);
  write_file(args.out,
             [&](std::ostream& os) { netflow::write_trace_csv(os, report); });

  auto& log = (args.out.empty() || args.out == "-") ? std::cerr : std::cout;
  log << "method=" << report.method << " step=" << report.step
      << " converged=" << (report.converged ? "true" : "false")
      << " iterations=" << report.iterations
      << " rounds=" << report.total_rounds()
      << " grad_norm=" << netflow::format_double(report.trace.back().grad_norm);
  if (report.ledger.centralized) log << " centralized=true";
  if (report.backtrack_exhaustions > 0) {
    log << " backtrack_exhausted=" << report.backtrack_exhaustions;
  }
  log << '\n';
  return report.converged ? 0 : kExitNotConverged;
}

int cmd_suite(const SuiteArgs& args) {
  auto config = netflow::load_suite_config(args.config);
  if (args.threads) config.threads = *args.threads;
  const auto rows = netflow::run_suite(config, args.out);
  std::size_t converged = 0;
  for (const auto& r : rows) converged += r.converged ? 1 : 0;
  std::cout << "trials=" << rows.size() << " converged=" << converged
            << " out=" << args.out << '\n';
  return 0;
}

int cmd_summarize(const SummarizeArgs& args) {
  const auto summary = netflow::summarize(std::filesystem::path(args.dir));
  write_file(args.out,
             [&](std::ostream& os) { netflow::write_summary_csv(os, summary); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed dual descent for network flow: instances, trials "
               "and experiment suites"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a random connected, "
                                            "non-bipartite graph");
  gen_cmd->add_option("--nodes", gen.nodes, "Node count")->required();
  gen_cmd->add_option("--edges", gen.edges, "Edge count")->required();
  gen_cmd->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
  gen_cmd->add_option("--max-attempts", gen.max_attempts,
                      "Rejection-sampling cap")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Graph file (stdout when omitted)");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one optimization trial");
  auto* graph_opt =
      run_cmd->add_option("--graph", run.graph, "Graph file; supply is placed "
                                                "on a diametral pair");
  auto* problem_opt =
      run_cmd->add_option("--problem", run.problem, "Full problem file");
  graph_opt->excludes(problem_opt);
  run_cmd->add_option("--cost", run.cost, "Edge cost family")
      ->check(CLI::IsMember({"quadratic", "cosh"}))
      ->capture_default_str();
  run_cmd->add_option("--coefficient", run.coefficient, "Edge cost coefficient")
      ->capture_default_str();
  run_cmd->add_option("--amount", run.amount,
                      "Flow injected at the source and drawn at the sink")
      ->capture_default_str();
  run_cmd->add_option("--method", run.method, "Direction method")
      ->check(CLI::IsMember({"gradient", "add", "consensus", "newton"}))
      ->capture_default_str();
  run_cmd->add_option("--order", run.order, "Truncation order N for add")
      ->capture_default_str();
  run_cmd->add_option("--inner", run.inner, "Consensus rounds m")
      ->capture_default_str();
  run_cmd->add_option("--splitting", run.splitting,
                      "Consensus Newton splitting")
      ->check(CLI::IsMember({"shifted", "bare"}))
      ->capture_default_str();
  run_cmd->add_option("--step", run.step,
                      "fixed:A, fixed:auto or backtrack (default fixed:auto "
                      "for gradient, fixed:1 otherwise)");
  run_cmd->add_option("--tol", run.options.tol, "Stop when ||g|| <= tol")
      ->capture_default_str();
  run_cmd->add_option("--max-iters", run.options.max_iters, "Iteration cap")
      ->capture_default_str();
  run_cmd->add_option("--max-rounds", run.options.max_rounds,
                      "Communication-round cap")
      ->capture_default_str();
  run_cmd->add_option("--sigma", run.line_search.sigma)->capture_default_str();
  run_cmd->add_option("--beta", run.line_search.beta)->capture_default_str();
  run_cmd->add_option("--slack-b", run.line_search.slack_b)
      ->capture_default_str();
  run_cmd->add_option("--gamma", run.line_search.gamma)->capture_default_str();
  run_cmd->add_option("--consensus-rounds", run.line_search.consensus_rounds,
                      "Norm-consensus rounds per line-search trial")
      ->capture_default_str();
  run_cmd->add_option("--max-backtracks", run.line_search.max_backtracks)
      ->capture_default_str();
  run_cmd->add_option("--out", run.out, "Trace CSV (stdout when omitted)");

  SuiteArgs suite;
  auto* suite_cmd = app.add_subcommand("suite", "Run a multi-seed experiment");
  suite_cmd->add_option("--config", suite.config, "key = value suite file")
      ->required()
      ->check(CLI::ExistingFile);
  suite_cmd->add_option("--out", suite.out, "Output directory")->required();
  suite_cmd->add_option("--threads", suite.threads,
                        "Worker threads (0 = hardware)");

  SummarizeArgs summarize;
  auto* summarize_cmd = app.add_subcommand(
      "summarize", "Summarize a suite output directory");
  summarize_cmd->add_option("--dir", summarize.dir, "Suite output directory")
      ->required();
  summarize_cmd->add_option("--out", summarize.out,
                            "Summary CSV (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen);
    if (*run_cmd) {
      if (run.graph.empty() && run.problem.empty()) {
        std::cerr << "run: one of --graph or --problem is required\n";
        return kExitError;
      }
      return cmd_run(run);
    }
    if (*suite_cmd) return cmd_suite(suite);
    if (*summarize_cmd) return cmd_summarize(summarize);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
