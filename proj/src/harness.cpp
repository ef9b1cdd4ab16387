#include "abpp/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "abpp/engine.hpp"
#include "abpp/rng.hpp"

namespace abpp {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << contents;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct KeyValue {
  int line;
  std::string key;
  std::string value;
};

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + what);
}

template <typename T>
T parse_number(const std::string& origin, int line, const std::string& key,
               const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  std::from_chars_result res;
  if constexpr (std::is_floating_point_v<T>)
    res = std::from_chars(first, last, out);
  else
    res = std::from_chars(first, last, out, 10);
  if (res.ec != std::errc{} || res.ptr != last)
    fail(origin, line, "key `" + key + "`: cannot parse number `" + value + "`");
  return out;
}

bool parse_bool(const std::string& origin, int line, const std::string& key,
                const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  fail(origin, line, "key `" + key + "`: expected true or false, got `" + value + "`");
}

void apply_preset(ExperimentConfig& cfg, const std::string& origin, int line,
                  const std::string& name) {
  if (name == "sensor-fusion-paper") {
    cfg.problem.kind = "sensor-fusion";
    cfg.problem.n = 20;
    cfg.problem.p = 20;
    cfg.problem.s = 1;
    cfg.problem.lambda = 0.01;
    return;
  }
  fail(origin, line, "unknown preset `" + name + "`");
}

int default_graph_horizon(const GraphConfig& g) {
  switch (g.kind) {
    case SequenceKind::kRandomSC: return 64;
    case SequenceKind::kStatic: return 1;
    case SequenceKind::kCPartitioned: return g.c;
  }
  return 1;
}

void apply_key(ExperimentConfig& cfg, const std::string& origin, const KeyValue& kv) {
  const auto& k = kv.key;
  const auto& v = kv.value;
  const int ln = kv.line;
  if (k == "problem.kind") {
    if (v != "sensor-fusion" && v != "custom-file")
      fail(origin, ln, "problem.kind must be sensor-fusion or custom-file");
    cfg.problem.kind = v;
  } else if (k == "problem.n") {
    cfg.problem.n = parse_number<int>(origin, ln, k, v);
  } else if (k == "problem.p") {
    cfg.problem.p = parse_number<int>(origin, ln, k, v);
  } else if (k == "problem.s") {
    cfg.problem.s = parse_number<int>(origin, ln, k, v);
  } else if (k == "problem.lambda") {
    cfg.problem.lambda = parse_number<double>(origin, ln, k, v);
  } else if (k == "problem.seed") {
    cfg.problem.seed = parse_number<std::uint64_t>(origin, ln, k, v);
  } else if (k == "problem.path") {
    cfg.problem.path = v;
  } else if (k == "graphs.kind") {
    try {
      cfg.graphs.kind = parse_sequence_kind(v);
    } catch (const std::invalid_argument& e) {
      fail(origin, ln, e.what());
    }
  } else if (k == "graphs.c") {
    cfg.graphs.c = parse_number<int>(origin, ln, k, v);
  } else if (k == "graphs.horizon") {
    cfg.graphs.horizon = parse_number<int>(origin, ln, k, v);
  } else if (k == "graphs.seed") {
    cfg.graphs.seed = parse_number<std::uint64_t>(origin, ln, k, v);
  } else if (k == "graphs.extra_edge_prob") {
    cfg.graphs.extra_edge_prob = parse_number<double>(origin, ln, k, v);
  } else if (k == "algorithm.method") {
    if (v != "ab-push-pull" && v != "push-diging")
      fail(origin, ln, "algorithm.method must be ab-push-pull or push-diging");
    cfg.algorithm.method = v;
  } else if (k == "algorithm.alpha") {
    if (v == "auto")
      cfg.algorithm.alpha.reset();
    else
      cfg.algorithm.alpha = parse_number<double>(origin, ln, k, v);
  } else if (k == "algorithm.safety") {
    cfg.algorithm.safety = parse_number<double>(origin, ln, k, v);
  } else if (k == "run.horizon") {
    cfg.run.horizon = parse_number<long>(origin, ln, k, v);
  } else if (k == "run.trace_every") {
    cfg.run.trace_every = parse_number<long>(origin, ln, k, v);
  } else if (k == "run.output") {
    cfg.run.output = v;
  } else if (k == "verify") {
    cfg.verify = parse_bool(origin, ln, k, v);
  } else if (k == "verify.rounds") {
    cfg.verify_rounds = parse_number<long>(origin, ln, k, v);
  } else {
    fail(origin, ln, "unknown key `" + k + "`");
  }
}

void validate(ExperimentConfig& cfg, const std::string& origin) {
  auto bad = [&origin](const std::string& what) { throw ConfigError(origin + ": " + what); };
  if (cfg.problem.kind == "sensor-fusion") {
    if (cfg.problem.n < 2) bad("problem.n must be >= 2");
    if (cfg.problem.p < 1 || cfg.problem.s < 1) bad("problem.p and problem.s must be >= 1");
    if (cfg.problem.lambda <= 0.0) bad("problem.lambda must be positive");
  } else if (cfg.problem.path.empty()) {
    bad("problem.kind = custom-file requires problem.path");
  }
  if (cfg.graphs.c < 1) bad("graphs.c must be >= 1");
  if (cfg.graphs.horizon < 0) bad("graphs.horizon must be >= 0 (0 = default)");
  if (cfg.graphs.horizon == 0) cfg.graphs.horizon = default_graph_horizon(cfg.graphs);
  if (cfg.graphs.kind != SequenceKind::kCPartitioned && cfg.graphs.c != 1)
    bad("graphs.c > 1 requires graphs.kind = c-partitioned");
  if (cfg.graphs.extra_edge_prob < 0.0 || cfg.graphs.extra_edge_prob > 1.0)
    bad("graphs.extra_edge_prob must lie in [0, 1]");
  if (cfg.algorithm.alpha && *cfg.algorithm.alpha <= 0.0)
    bad("algorithm.alpha must be positive (or auto)");
  if (cfg.algorithm.safety <= 0.0) bad("algorithm.safety must be positive");
  if (cfg.run.horizon < 1) bad("run.horizon must be >= 1");
  if (static_cast<long>(cfg.graphs.c) > cfg.run.horizon)
    bad("graphs.c exceeds run.horizon");
  if (cfg.run.trace_every < 1) bad("run.trace_every must be >= 1");
  if (cfg.run.output.empty()) bad("run.output must not be empty");
  if (cfg.verify_rounds < 1) bad("verify.rounds must be >= 1");
}

}  // namespace

ExperimentConfig load_config(std::istream& in, const std::string& origin) {
  std::vector<KeyValue> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) fail(origin, line_no, "expected `key = value`");
    KeyValue kv{line_no, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1))};
    if (kv.key.empty()) fail(origin, line_no, "empty key");
    pairs.push_back(std::move(kv));
  }
  ExperimentConfig cfg;
  for (const auto& kv : pairs)
    if (kv.key == "preset") apply_preset(cfg, origin, kv.line, kv.value);
  for (const auto& kv : pairs)
    if (kv.key != "preset") apply_key(cfg, origin, kv);
  validate(cfg, origin);
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return load_config(in, path);
}

std::string effective_config_text(const ExperimentConfig& cfg, double resolved_alpha) {
  std::ostringstream out;
  out << "problem.kind = " << cfg.problem.kind << "\n";
  if (cfg.problem.kind == "custom-file") out << "problem.path = " << cfg.problem.path << "\n";
  out << "problem.n = " << cfg.problem.n << "\n";
  out << "problem.p = " << cfg.problem.p << "\n";
  out << "problem.s = " << cfg.problem.s << "\n";
  out << "problem.lambda = " << format_double(cfg.problem.lambda) << "\n";
  out << "problem.seed = " << cfg.problem.seed << "\n";
  out << "graphs.kind = " << to_string(cfg.graphs.kind) << "\n";
  out << "graphs.c = " << cfg.graphs.c << "\n";
  out << "graphs.horizon = " << cfg.graphs.horizon << "\n";
  out << "graphs.seed = " << cfg.graphs.seed << "\n";
  out << "graphs.extra_edge_prob = " << format_double(cfg.graphs.extra_edge_prob) << "\n";
  out << "algorithm.method = " << cfg.algorithm.method << "\n";
  out << "algorithm.alpha = " << format_double(resolved_alpha) << "\n";
  out << "algorithm.safety = " << format_double(cfg.algorithm.safety) << "\n";
  out << "run.horizon = " << cfg.run.horizon << "\n";
  out << "run.trace_every = " << cfg.run.trace_every << "\n";
  out << "run.output = " << cfg.run.output << "\n";
  out << "verify = " << (cfg.verify ? "true" : "false") << "\n";
  out << "verify.rounds = " << cfg.verify_rounds << "\n";
  return out.str();
}

ExperimentSetup build_setup(const ExperimentConfig& cfg) {
  QuadraticSensorFusion problem =
      cfg.problem.kind == "custom-file"
          ? load_instance_file(cfg.problem.path)
          : make_sensor_fusion(cfg.problem.n, cfg.problem.p, cfg.problem.s,
                               cfg.problem.lambda, cfg.problem.seed);
  ObjectiveFamily family = problem.family();
  Eigen::VectorXd x_star = optimum(problem);
  SequenceParams params;
  params.n = family.agents;
  params.kind = cfg.graphs.kind;
  params.horizon = cfg.graphs.horizon > 0 ? cfg.graphs.horizon
                                          : default_graph_horizon(cfg.graphs);
  params.window = cfg.graphs.c;
  params.seed = cfg.graphs.seed;
  params.extra_edge_prob = cfg.graphs.extra_edge_prob;
  DigraphSequence graphs = generate_sequence(params);
  return ExperimentSetup{std::move(problem), std::move(family), std::move(x_star),
                         std::move(graphs)};
}

namespace {

// Horizon over which the uniform constants and the empirical sigma are
// measured; past this point the cycled sequence repeats itself (up to the
// backward phi products, which forget the terminal geometrically).
constexpr long kBoundWindow = 2000;

// 50-round probe; true when it completes with finite iterates.
bool probe_runs_finitely(const ObjectiveFamily& f, const MixingSequence& mixing,
                         double alpha, const Eigen::MatrixXd& x0) {
  RunConfig cfg;
  cfg.alpha = alpha;
  cfg.horizon = 50;
  cfg.x0 = x0;
  cfg.trace_every = 50;
  try {
    run_push_diging(f, mixing, cfg);
    return true;
  } catch (const DivergenceError&) {
    return false;
  }
}

Eigen::MatrixXd initial_point(const ExperimentConfig& cfg, const ObjectiveFamily& f) {
  Rng rng(cfg.problem.seed ^ 0x9e3779b97f4a7c15ULL);
  Eigen::MatrixXd x0(f.agents, f.dimension);
  for (int i = 0; i < f.agents; ++i)
    for (int d = 0; d < f.dimension; ++d) x0(i, d) = rng.normal();
  return x0;
}

}  // namespace

StepsizeResolution resolve_stepsize(const ExperimentConfig& cfg, const ObjectiveFamily& f,
                                    const DigraphSequence& graphs) {
  StepsizeResolution res;
  const long window = std::min(cfg.run.horizon, kBoundWindow);
  try {
    const MixingSequence mixing = build_mixing_sequence(graphs, static_cast<int>(window));
    const UniformConstants u = uniform_constants(mixing);
    res.uniform = u;
    res.bound = stepsize_upper_bound(u, f.lipschitz, f.strong_convexity, f.agents);
  } catch (const ConnectivityError&) {
    // Disconnected rounds: no uniform bound exists; alpha must be explicit.
  }
  if (cfg.algorithm.method == "ab-push-pull") {
    if (cfg.algorithm.alpha) {
      res.alpha = *cfg.algorithm.alpha;
    } else {
      if (!res.bound)
        throw ConfigError(
            "algorithm.alpha = auto requires every generated round to be strongly connected");
      res.alpha = res.bound->value * cfg.algorithm.safety;
    }
  } else {  // push-diging
    if (cfg.algorithm.alpha) {
      res.alpha = *cfg.algorithm.alpha;
    } else {
      double candidate = res.bound ? res.bound->value * cfg.algorithm.safety
                                   : 2.0 / (f.agents * (f.lipschitz + f.strong_convexity));
      const MixingSequence probe_mixing =
          build_mixing_sequence(graphs, std::min(graphs.horizon(), 50));
      const Eigen::MatrixXd x0 = initial_point(cfg, f);
      res.grid_searched = true;
      int tries = 0;
      while (tries < 60 && !probe_runs_finitely(f, probe_mixing, candidate, x0)) {
        candidate *= 0.5;
        ++tries;
      }
      if (tries == 60)
        throw ConfigError("push-diging stepsize search failed to find a stable value");
      res.alpha = candidate;
    }
  }
  if (res.uniform && res.alpha <= 2.0 / (f.agents * (f.lipschitz + f.strong_convexity))) {
    const Eigen::Matrix3d m =
        bound_matrix(*res.uniform, f.lipschitz, f.strong_convexity, f.agents, res.alpha);
    res.certificate = spectral_certificate(m);
  }
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult result;
  const ExperimentSetup setup = build_setup(cfg);
  const ObjectiveFamily& f = setup.family;
  const StepsizeResolution res = resolve_stepsize(cfg, f, setup.graphs);
  result.alpha = res.alpha;
  result.bound = res.bound;
  if (res.certificate) result.rho_bound = res.certificate->rho;

  const long K = cfg.run.horizon;
  const long stride = cfg.run.trace_every;
  const int period = setup.graphs.horizon();
  const MixingSequence mixing = build_mixing_sequence(setup.graphs, period);

  auto traced = [K, stride](long k) { return k == 0 || k == K || k % stride == 0; };

  // phi/pi at traced rounds only, so long horizons stay cheap: one backward
  // and one forward sweep of n-vector products over the cycled matrices.
  std::unordered_map<long, Eigen::VectorXd> phi_at;
  std::unordered_map<long, Eigen::VectorXd> pi_at;
  {
    const int n = f.agents;
    Eigen::VectorXd phi = Eigen::VectorXd::Constant(n, 1.0 / n);
    if (traced(K)) phi_at.emplace(K, phi);
    for (long k = K - 1; k >= 0; --k) {
      phi = mixing.A[static_cast<std::size_t>(k % period)].entries.transpose() * phi;
      if (traced(k)) phi_at.emplace(k, phi);
    }
    Eigen::VectorXd pi = Eigen::VectorXd::Constant(n, 1.0 / n);
    if (traced(0)) pi_at.emplace(0, pi);
    for (long k = 0; k < K; ++k) {
      pi = mixing.B[static_cast<std::size_t>(k % period)].entries * pi;
      if (traced(k + 1)) pi_at.emplace(k + 1, pi);
    }
  }

  RunConfig run_cfg;
  run_cfg.alpha = res.alpha;
  run_cfg.horizon = K;
  run_cfg.x0 = initial_point(cfg, f);
  run_cfg.trace_every = stride;

  const Eigen::MatrixXd target = Eigen::VectorXd::Ones(f.agents) * setup.x_star.transpose();
  const double denom = (run_cfg.x0 - target).squaredNorm();
  const std::string rho_text = result.rho_bound ? format_double(*result.rho_bound) : "nan";

  std::ostringstream trace;
  trace << "k,relative_residual,opt_gap,D,S,max_agent_error,rho_bound\n";
  auto on_round = [&](long k, const NetworkState& s) {
    const double residual = (s.x - target).squaredNorm() / denom;
    const auto& phi = phi_at.at(k);
    const auto& pi = pi_at.at(k);
    const double opt_gap = (weighted_average(s.x, phi) - setup.x_star).norm();
    const double max_err = (s.x - target).rowwise().norm().maxCoeff();
    trace << k << ',' << format_double(residual) << ',' << format_double(opt_gap) << ','
          << format_double(dispersion_x(s.x, phi)) << ','
          << format_double(dispersion_y(s.y, pi)) << ',' << format_double(max_err) << ','
          << rho_text << '\n';
    result.final_relative_residual = residual;
    result.rounds_completed = k;
  };

  const bool push_diging = cfg.algorithm.method == "push-diging";
  try {
    if (push_diging)
      run_push_diging(f, mixing, run_cfg, on_round);
    else
      run(f, mixing, run_cfg, on_round);
  } catch (const DivergenceError& e) {
    result.error = e.what();
    result.exit_code = 1;
  }

  std::ostringstream report;
  report << "method = " << cfg.algorithm.method << "\n";
  report << "alpha = " << format_double(res.alpha)
         << (cfg.algorithm.alpha ? " (explicit)" : res.grid_searched ? " (grid search)"
                                                                     : " (auto)")
         << "\n";
  if (res.bound) {
    report << "stepsize_bound = " << format_double(res.bound->value) << "\n";
    report << "  consensus_x_term = " << format_double(res.bound->consensus_x_term) << "\n";
    report << "  consensus_y_term = " << format_double(res.bound->consensus_y_term) << "\n";
    report << "  determinant_term = " << format_double(res.bound->determinant_term) << "\n";
    report << "  strong_convexity_term = "
           << format_double(res.bound->strong_convexity_term) << "\n";
  } else {
    report << "stepsize_bound = unavailable (some rounds not strongly connected)\n";
  }
  if (res.certificate)
    report << "rho_bound = " << format_double(res.certificate->rho)
           << (res.certificate->certified ? " (certified)" : " (NOT certified)") << "\n";
  report << "rounds_completed = " << result.rounds_completed << "\n";
  report << "final_relative_residual = " << format_double(result.final_relative_residual)
         << "\n";
  if (!result.error.empty()) report << "divergence = " << result.error << "\n";

  if (cfg.verify && result.error.empty()) {
    if (push_diging) {
      report << "verification = skipped (inequality suite applies to ab-push-pull only)\n";
    } else if (res.alpha >= 2.0 / (f.agents * f.lipschitz)) {
      report << "verification = skipped (alpha outside (0, 2/(nL)))\n";
    } else {
      const long V = std::min(K, cfg.verify_rounds);
      const MixingSequence vmix = build_mixing_sequence(setup.graphs, static_cast<int>(V));
      Trajectory traj;
      traj.states.reserve(static_cast<std::size_t>(V) + 1);
      NetworkState state = init(f, run_cfg.x0);
      traj.states.push_back(state);
      for (long k = 0; k < V; ++k) {
        state = step(state, vmix.A[static_cast<std::size_t>(k)],
                     vmix.B[static_cast<std::size_t>(k)], f, res.alpha);
        traj.states.push_back(state);
      }
      result.verification =
          verify_composite_relation(traj, vmix, f, setup.x_star, res.alpha);
      report << "verification over " << V << " rounds:\n"
             << result.verification->to_text();
      if (!result.verification->all_pass) result.exit_code = 1;
    }
  }

  result.trace_path = cfg.run.output;
  result.echo_path = cfg.run.output + ".effective";
  result.report_path = cfg.run.output + ".report";
  write_file_atomic(result.trace_path, trace.str());
  write_file_atomic(result.echo_path, effective_config_text(cfg, res.alpha));
  write_file_atomic(result.report_path, report.str());
  return result;
}

CompareResult compare_methods(const std::vector<ExperimentConfig>& cfgs,
                              const std::string& output) {
  if (cfgs.empty()) throw ConfigError("compare: need at least one config");
  for (std::size_t i = 1; i < cfgs.size(); ++i) {
    if (!(cfgs[i].problem == cfgs.front().problem))
      throw ConfigError("compare: configs must share the problem section (seeds included)");
    if (!(cfgs[i].graphs == cfgs.front().graphs))
      throw ConfigError("compare: configs must share the graphs section (seeds included)");
    if (cfgs[i].run.horizon != cfgs.front().run.horizon ||
        cfgs[i].run.trace_every != cfgs.front().run.trace_every)
      throw ConfigError("compare: configs must share run.horizon and run.trace_every");
  }
  CompareResult out;
  out.output_path = output;
  std::vector<std::vector<std::pair<long, double>>> columns;
  for (const auto& cfg : cfgs) {
    ExperimentResult r = run_experiment(cfg);
    out.exit_code = std::max(out.exit_code, r.exit_code);
    // Re-read the trace this run just wrote; keeps compare a pure consumer
    // of the same artifact users get.
    std::ifstream in(r.trace_path);
    if (!in) throw std::runtime_error("compare: cannot reopen trace " + r.trace_path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<std::pair<long, double>> col;
    while (std::getline(in, line)) {
      std::istringstream row(line);
      std::string cell;
      std::getline(row, cell, ',');
      const long k = std::stol(cell);
      std::getline(row, cell, ',');
      col.emplace_back(k, std::stod(cell));
    }
    columns.push_back(std::move(col));
    out.runs.push_back(std::move(r));
  }
  for (const auto& col : columns)
    if (col.size() != columns.front().size())
      throw std::runtime_error("compare: traces have mismatched lengths");
  std::ostringstream combined;
  combined << "k";
  for (std::size_t j = 0; j < cfgs.size(); ++j)
    combined << ",relative_residual_" << cfgs[j].algorithm.method << "_" << j;
  combined << "\n";
  for (std::size_t row = 0; row < columns.front().size(); ++row) {
    combined << columns.front()[row].first;
    for (const auto& col : columns) {
      if (col[row].first != columns.front()[row].first)
        throw std::runtime_error("compare: traces have mismatched rounds");
      combined << ',' << format_double(col[row].second);
    }
    combined << "\n";
  }
  write_file_atomic(output, combined.str());
  return out;
}

}  // namespace abpp
