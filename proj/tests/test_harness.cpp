#include <doctest.h>

#include <unistd.h>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "abpp/harness.hpp"
#include "abpp/rng.hpp"

using namespace abpp;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempDir {
  std::filesystem::path dir;
  TempDir() {
    dir = std::filesystem::temp_directory_path() /
          ("abpp-test-" + std::to_string(::getpid()) + "-" +
           std::to_string(counter()++));
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

ExperimentConfig small_config(const TempDir& tmp, const std::string& trace_name) {
  std::stringstream cfg_text;
  cfg_text << "problem.kind = sensor-fusion\n"
           << "problem.n = 4\n"
           << "problem.p = 3\n"
           << "problem.s = 2\n"
           << "problem.lambda = 1\n"
           << "problem.seed = 5\n"
           << "graphs.kind = random-sc\n"
           << "graphs.horizon = 8\n"
           << "graphs.seed = 6\n"
           << "run.horizon = 400\n"
           << "run.trace_every = 10\n"
           << "verify.rounds = 60\n"
           << "run.output = " << tmp.path(trace_name) << "\n";
  return load_config(cfg_text, "<test>");
}

}  // namespace

TEST_CASE("doubles format to shortest round-trip representations") {
  Rng rng(1);
  for (int trial = 0; trial < 2000; ++trial) {
    const double v = std::ldexp(rng.normal(), rng.uniform_int(-40, 40));
    const std::string text = format_double(v);
    double back = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), back);
    REQUIRE(res.ec == std::errc{});
    CHECK(back == v);
  }
  CHECK(format_double(1.0) == "1");
}

TEST_CASE("minimal config picks up the documented defaults") {
  std::stringstream text("problem.n = 4\nproblem.p = 2\ngraphs.seed = 3\n");
  const auto cfg = load_config(text, "<test>");
  CHECK_FALSE(cfg.algorithm.alpha.has_value());  // auto
  CHECK(cfg.run.trace_every == 1);
  CHECK(cfg.verify);
  CHECK(cfg.algorithm.method == "ab-push-pull");
  CHECK(cfg.graphs.kind == SequenceKind::kRandomSC);
  CHECK(cfg.graphs.horizon == 64);
}

TEST_CASE("paper preset expands to its documented dimensions") {
  std::stringstream text("preset = sensor-fusion-paper\nrun.horizon = 10\n");
  const auto cfg = load_config(text, "<test>");
  CHECK(cfg.problem.n == 20);
  CHECK(cfg.problem.p == 20);
  CHECK(cfg.problem.s == 1);
  CHECK(cfg.problem.lambda == 0.01);
}

TEST_CASE("preset applies before other keys regardless of position") {
  std::stringstream text("problem.n = 7\npreset = sensor-fusion-paper\n");
  const auto cfg = load_config(text, "<test>");
  CHECK(cfg.problem.n == 7);  // explicit key wins over the preset
}

TEST_CASE("invalid configs are rejected with line context") {
  auto expect_error = [](const std::string& body, const std::string& fragment) {
    std::stringstream text(body);
    try {
      load_config(text, "cfg");
      FAIL("expected ConfigError for: " << body);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };
  expect_error("algorithm.alpha = -0.1\n", "alpha");
  expect_error("wibble = 3\n", "unknown key");
  expect_error("problem.n\n", "key = value");
  expect_error("problem.n = owl\n", "cannot parse");
  expect_error("graphs.kind = c-partitioned\ngraphs.c = 40\nrun.horizon = 10\n",
               "exceeds run.horizon");
  expect_error("run.trace_every = 0\n", "trace_every");
  std::stringstream with_line("problem.n = 4\nbogus.key = 1\n");
  try {
    load_config(with_line, "cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cfg:2") != std::string::npos);
  }
}

TEST_CASE("effective config echo round-trips") {
  TempDir tmp;
  const auto cfg = small_config(tmp, "trace.csv");
  const std::string echoed = effective_config_text(cfg, 0.125);
  std::stringstream text(echoed);
  const auto back = load_config(text, "<echo>");
  ExperimentConfig expected = cfg;
  expected.algorithm.alpha = 0.125;  // the echo pins the resolved stepsize
  CHECK(back == expected);
}

TEST_CASE("run_experiment writes trace, echo, and report") {
  TempDir tmp;
  const auto cfg = small_config(tmp, "trace.csv");
  const auto result = run_experiment(cfg);
  CHECK(result.exit_code == 0);
  CHECK(result.alpha > 0.0);
  REQUIRE(result.verification.has_value());
  CHECK(result.verification->all_pass);
  const std::string trace = slurp(result.trace_path);
  CHECK(trace.rfind("k,relative_residual,opt_gap,D,S,max_agent_error,rho_bound\n", 0) == 0);
  // Round zero's relative residual is exactly one.
  CHECK(trace.find("\n0,1,") != std::string::npos);
  CHECK(std::filesystem::exists(result.echo_path));
  CHECK(std::filesystem::exists(result.report_path));
  // The echo reloads to the same effective configuration.
  std::stringstream echo(slurp(result.echo_path));
  const auto back = load_config(echo, "<echo>");
  CHECK(back.problem == cfg.problem);
  CHECK(back.graphs == cfg.graphs);
  REQUIRE(back.algorithm.alpha.has_value());
  CHECK(*back.algorithm.alpha == result.alpha);
  // Rounds ascend strictly in k.
  std::stringstream rows(trace);
  std::string line;
  std::getline(rows, line);
  long prev = -1;
  while (std::getline(rows, line)) {
    const long k = std::stol(line.substr(0, line.find(',')));
    CHECK(k > prev);
    prev = k;
  }
  CHECK(prev == cfg.run.horizon);
}

TEST_CASE("reruns are byte-identical") {
  TempDir tmp;
  const auto cfg = small_config(tmp, "trace.csv");
  run_experiment(cfg);
  const std::string first = slurp(cfg.run.output);
  run_experiment(cfg);
  CHECK(slurp(cfg.run.output) == first);
}

TEST_CASE("divergence yields a nonzero exit and a recorded reason") {
  TempDir tmp;
  auto cfg = small_config(tmp, "boom.csv");
  cfg.algorithm.alpha = 1e8;
  cfg.verify = false;
  const auto result = run_experiment(cfg);
  CHECK(result.exit_code != 0);
  CHECK_FALSE(result.error.empty());
  CHECK(slurp(result.report_path).find("divergence") != std::string::npos);
}

TEST_CASE("compare requires matching problem and graph sections") {
  TempDir tmp;
  auto a = small_config(tmp, "a.csv");
  auto b = small_config(tmp, "b.csv");
  b.problem.seed += 1;
  CHECK_THROWS_AS(compare_methods({a, b}, tmp.path("cmp.csv")), ConfigError);
  b = small_config(tmp, "b.csv");
  b.graphs.seed += 1;
  CHECK_THROWS_AS(compare_methods({a, b}, tmp.path("cmp.csv")), ConfigError);
}

TEST_CASE("compare aligns identical methods into identical columns") {
  TempDir tmp;
  auto a = small_config(tmp, "a.csv");
  auto b = small_config(tmp, "b.csv");
  a.verify = b.verify = false;
  a.run.horizon = b.run.horizon = 100;
  const auto result = compare_methods({a, b}, tmp.path("cmp.csv"));
  CHECK(result.exit_code == 0);
  std::stringstream rows(slurp(result.output_path));
  std::string line;
  std::getline(rows, line);
  CHECK(line == "k,relative_residual_ab-push-pull_0,relative_residual_ab-push-pull_1");
  while (std::getline(rows, line)) {
    const auto first_comma = line.find(',');
    const auto second_comma = line.find(',', first_comma + 1);
    const std::string col1 = line.substr(first_comma + 1, second_comma - first_comma - 1);
    const std::string col2 = line.substr(second_comma + 1);
    CHECK(col1 == col2);
  }
}

TEST_CASE("compare pairs the method against the push-sum baseline") {
  TempDir tmp;
  auto a = small_config(tmp, "a.csv");
  auto b = small_config(tmp, "b.csv");
  a.verify = b.verify = false;
  a.run.horizon = b.run.horizon = 150;
  b.algorithm.method = "push-diging";
  const auto result = compare_methods({a, b}, tmp.path("cmp.csv"));
  CHECK(result.exit_code == 0);
  REQUIRE(result.runs.size() == 2);
  CHECK(result.runs[0].final_relative_residual < 1.0);
  CHECK(result.runs[1].final_relative_residual < 1.0);
}

TEST_CASE("auto stepsize is refused when rounds are disconnected") {
  TempDir tmp;
  auto cfg = small_config(tmp, "c.csv");
  cfg.problem.n = 5;
  cfg.graphs.kind = SequenceKind::kCPartitioned;
  cfg.graphs.c = 3;
  cfg.graphs.horizon = 3;
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
}
