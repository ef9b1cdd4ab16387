#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "abpp/harness.hpp"

namespace {

int cmd_run(const std::string& config_path) {
  const auto cfg = abpp::load_config_file(config_path);
  const auto result = abpp::run_experiment(cfg);
  std::cout << "alpha = " << abpp::format_double(result.alpha) << "\n";
  if (result.rho_bound)
    std::cout << "rho_bound = " << abpp::format_double(*result.rho_bound) << "\n";
  std::cout << "rounds_completed = " << result.rounds_completed << "\n";
  std::cout << "final_relative_residual = "
            << abpp::format_double(result.final_relative_residual) << "\n";
  std::cout << "trace = " << result.trace_path << "\n";
  std::cout << "effective config = " << result.echo_path << "\n";
  std::cout << "report = " << result.report_path << "\n";
  if (!result.error.empty()) std::cerr << "divergence: " << result.error << "\n";
  if (result.verification && !result.verification->all_pass)
    std::cerr << "verification failed; see " << result.report_path << "\n";
  return result.exit_code;
}

int cmd_compare(const std::vector<std::string>& config_paths, const std::string& output) {
  std::vector<abpp::ExperimentConfig> cfgs;
  cfgs.reserve(config_paths.size());
  for (const auto& p : config_paths) cfgs.push_back(abpp::load_config_file(p));
  const auto result = abpp::compare_methods(cfgs, output);
  std::cout << "combined trace = " << result.output_path << "\n";
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const auto& r = result.runs[i];
    std::cout << "run " << i << ": method=" << cfgs[i].algorithm.method
              << " alpha=" << abpp::format_double(r.alpha)
              << " final_residual=" << abpp::format_double(r.final_relative_residual)
              << "\n";
  }
  return result.exit_code;
}

int cmd_bound(const std::string& config_path) {
  const auto cfg = abpp::load_config_file(config_path);
  const auto setup = abpp::build_setup(cfg);
  const auto res = abpp::resolve_stepsize(cfg, setup.family, setup.graphs);
  if (!res.bound) {
    std::cerr << "no uniform bound: some rounds are not strongly connected\n";
    return 1;
  }
  const auto& b = *res.bound;
  std::cout << "consensus_x_term = " << abpp::format_double(b.consensus_x_term) << "\n";
  std::cout << "consensus_y_term = " << abpp::format_double(b.consensus_y_term) << "\n";
  std::cout << "determinant_term = " << abpp::format_double(b.determinant_term) << "\n";
  std::cout << "strong_convexity_term = " << abpp::format_double(b.strong_convexity_term)
            << "\n";
  std::cout << "eta = " << abpp::format_double(b.eta) << "\n";
  std::cout << "bound = " << abpp::format_double(b.value) << "\n";
  std::cout << "alpha = " << abpp::format_double(res.alpha) << "\n";
  if (res.certificate)
    std::cout << "rho = " << abpp::format_double(res.certificate->rho)
              << (res.certificate->certified ? " (certified)" : " (NOT certified)") << "\n";
  return 0;
}

int cmd_metrics(const std::string& graph_path) {
  const auto seq = abpp::read_sequence_file(graph_path);
  for (int k = 0; k < seq.horizon(); ++k) {
    const auto& g = seq.graphs[static_cast<std::size_t>(k)];
    std::cout << "round " << k << ": ";
    if (abpp::is_strongly_connected(g)) {
      const auto m = abpp::graph_metrics(g);
      std::cout << "strongly connected, D = " << m.diameter << ", K = " << m.max_edge_utility
                << "\n";
    } else {
      std::cout << "not strongly connected\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator and analysis toolkit for AB/Push-Pull "
               "distributed optimization over time-varying digraphs"};
  app.require_subcommand(1);

  std::string run_config;
  auto* run = app.add_subcommand("run", "Run one experiment from a config file");
  run->add_option("config", run_config, "config file path")->required();

  std::vector<std::string> compare_configs;
  std::string compare_output = "compare.csv";
  auto* compare = app.add_subcommand("compare", "Run several configs on the same instance");
  compare->add_option("configs", compare_configs, "config file paths")->required();
  compare->add_option("-o,--output", compare_output, "combined trace path");

  std::string bound_config;
  auto* bound = app.add_subcommand("bound", "Print the stepsize bound components");
  bound->add_option("config", bound_config, "config file path")->required();

  std::string metrics_graphs;
  auto* metrics = app.add_subcommand("metrics", "Per-round diameter/edge-utility of a graph file");
  metrics->add_option("graph-file", metrics_graphs, "graph sequence file")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return cmd_run(run_config);
    if (compare->parsed()) return cmd_compare(compare_configs, compare_output);
    if (bound->parsed()) return cmd_bound(bound_config);
    if (metrics->parsed()) return cmd_metrics(metrics_graphs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
