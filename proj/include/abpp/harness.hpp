#ifndef ABPP_HARNESS_HPP
#define ABPP_HARNESS_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "abpp/diagnostics.hpp"
#include "abpp/digraph.hpp"
#include "abpp/objectives.hpp"

namespace abpp {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProblemConfig {
  std::string kind = "sensor-fusion";  // "sensor-fusion" | "custom-file"
  int n = 20;
  int p = 20;
  int s = 1;
  double lambda = 0.01;
  std::uint64_t seed = 1;
  std::string path;  // custom-file only

  bool operator==(const ProblemConfig&) const = default;
};

struct GraphConfig {
  SequenceKind kind = SequenceKind::kRandomSC;
  int c = 1;        // connectivity window C
  int horizon = 0;  // distinct generated rounds, cycled; 0 = kind default
  std::uint64_t seed = 1;
  double extra_edge_prob = 0.15;

  bool operator==(const GraphConfig&) const = default;
};

struct AlgorithmConfig {
  std::string method = "ab-push-pull";  // "ab-push-pull" | "push-diging"
  std::optional<double> alpha;          // empty = "auto"
  double safety = 1.0;

  bool operator==(const AlgorithmConfig&) const = default;
};

struct RunSection {
  long horizon = 1000;
  long trace_every = 1;
  std::string output = "trace.csv";

  bool operator==(const RunSection&) const = default;
};

struct ExperimentConfig {
  ProblemConfig problem;
  GraphConfig graphs;
  AlgorithmConfig algorithm;
  RunSection run;
  bool verify = true;
  long verify_rounds = 300;  // inequality replay covers min(this, run.horizon)

  bool operator==(const ExperimentConfig&) const = default;
};

// Flat `key = value` lines, `#` comments.  A `preset = <name>` line is
// applied before every other key regardless of position.  Errors carry
// origin and line number.
ExperimentConfig load_config(std::istream& in, const std::string& origin = "<stream>");
ExperimentConfig load_config_file(const std::string& path);

// Fully resolved key set; load_config on this text reproduces the config
// (with alpha pinned to the resolved value when it was "auto").
std::string effective_config_text(const ExperimentConfig& cfg, double resolved_alpha);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

// Write-temp-then-rename.
void write_file_atomic(const std::string& path, const std::string& contents);

// The stepsize actually used plus, when every generated round is strongly
// connected, the bound it came from and the certificate at that stepsize.
struct StepsizeResolution {
  double alpha = 0.0;
  std::optional<UniformConstants> uniform;
  std::optional<StepsizeBound> bound;
  std::optional<SpectralCertificate> certificate;
  bool grid_searched = false;  // push-diging fallback search ran
};

StepsizeResolution resolve_stepsize(const ExperimentConfig& cfg, const ObjectiveFamily& f,
                                    const DigraphSequence& graphs);

struct ExperimentResult {
  int exit_code = 0;
  double alpha = 0.0;
  std::optional<StepsizeBound> bound;
  std::optional<double> rho_bound;
  double final_relative_residual = 0.0;
  long rounds_completed = 0;
  std::string trace_path;
  std::string echo_path;
  std::string report_path;
  std::optional<VerificationReport> verification;
  std::string error;  // divergence message, empty on clean runs
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Runs each config and writes one aligned residual column per config to
// `output`.  Configs must share problem and graph sections and the run
// horizon/stride.
struct CompareResult {
  int exit_code = 0;
  std::string output_path;
  std::vector<ExperimentResult> runs;
};

CompareResult compare_methods(const std::vector<ExperimentConfig>& cfgs,
                              const std::string& output);

// Materialized problem + graph sequence for a config (shared by the CLI
// subcommands so `run` and `bound` see identical instances).
struct ExperimentSetup {
  QuadraticSensorFusion problem;
  ObjectiveFamily family;
  Eigen::VectorXd x_star;
  DigraphSequence graphs;
};

ExperimentSetup build_setup(const ExperimentConfig& cfg);

}  // namespace abpp

#endif  // ABPP_HARNESS_HPP
