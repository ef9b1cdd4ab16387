#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "abpp/objectives.hpp"
#include "abpp/rng.hpp"
#include "oracles.hpp"

using namespace abpp;
using namespace abpp::testing;

TEST_CASE("measurement matrices are scaled to unit data-term smoothness") {
  const auto q = make_sensor_fusion(6, 4, 3, 0.1, 99);
  for (int i = 0; i < q.agents(); ++i) {
    const auto& H = q.measurement_matrix(i);
    const double spectral =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(2.0 * H.transpose() * H)
            .eigenvalues()
            .maxCoeff();
    CHECK(spectral == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("gradients match finite differences") {
  const auto q = make_sensor_fusion(4, 5, 2, 0.3, 7);
  Rng rng(8);
  for (int i = 0; i < q.agents(); ++i) {
    Eigen::VectorXd x(q.dimension());
    for (int d = 0; d < x.size(); ++d) x(d) = rng.normal();
    const auto numeric = finite_difference_gradient(
        [&](const Eigen::VectorXd& v) { return q.value(i, v); }, x);
    CHECK((q.grad(i, x) - numeric).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("hessian is the gradient's linear map") {
  const auto q = make_sensor_fusion(3, 4, 2, 0.2, 13);
  Rng rng(14);
  Eigen::VectorXd x(q.dimension()), u(q.dimension());
  for (int d = 0; d < x.size(); ++d) {
    x(d) = rng.normal();
    u(d) = rng.normal();
  }
  for (int i = 0; i < q.agents(); ++i) {
    const Eigen::VectorXd lhs = q.grad(i, x + u) - q.grad(i, x);
    CHECK((lhs - q.hessian(i) * u).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("optimum zeroes the aggregate gradient") {
  const auto q = make_sensor_fusion(5, 6, 2, 0.05, 21);
  const auto x_star = optimum(q);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(q.dimension());
  for (int i = 0; i < q.agents(); ++i) total += q.grad(i, x_star);
  CHECK(total.lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("smoothness and convexity constants bracket the spectra") {
  const auto q = make_sensor_fusion(6, 3, 2, 0.4, 5);
  const auto [L, mu] = constants(q);
  CHECK(L > 0.0);
  CHECK(mu > 0.0);
  CHECK(mu <= L);
  // Each agent's data term has smoothness 1 by scaling, so L = 1 + 2*lambda.
  CHECK(L == doctest::Approx(1.0 + 2.0 * 0.4).epsilon(1e-12));
  const auto report = check_lipschitz_and_convexity(q, 100, 17);
  CHECK(report.ok);
  INFO(report.first_violation);
}

TEST_CASE("gradient-step contraction toward the optimum") {
  const auto q = make_sensor_fusion(4, 4, 2, 0.5, 31);
  const auto [L, mu] = constants(q);
  const auto x_star = optimum(q);
  Rng rng(32);
  for (int grid = 1; grid <= 10; ++grid) {
    const double alpha = (2.0 / L) * grid / 11.0;
    const double factor = gradient_contraction_factor(alpha, L, mu);
    CHECK(factor < 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd x(q.dimension());
      for (int d = 0; d < x.size(); ++d) x(d) = rng.normal();
      Eigen::VectorXd g = Eigen::VectorXd::Zero(q.dimension());
      for (int i = 0; i < q.agents(); ++i) g += q.grad(i, x);
      g /= q.agents();
      const double lhs = (x - x_star - alpha * g).norm();
      const double rhs = factor * (x - x_star).norm();
      CHECK(lhs <= rhs + 1e-10 * (1.0 + rhs));
    }
  }
}

TEST_CASE("instances serialize and reload exactly") {
  const auto q = make_sensor_fusion(3, 4, 2, 0.25, 77);
  std::stringstream buf;
  save_instance(buf, q);
  const auto back = load_instance(buf);
  REQUIRE(back.agents() == q.agents());
  REQUIRE(back.dimension() == q.dimension());
  for (int i = 0; i < q.agents(); ++i) {
    CHECK((back.measurement_matrix(i) - q.measurement_matrix(i)).lpNorm<Eigen::Infinity>() ==
          0.0);
    CHECK((back.observation(i) - q.observation(i)).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(back.regularization(i) == q.regularization(i));
  }
}

TEST_CASE("loader rejects malformed input") {
  std::stringstream bad("sensor_fusion_instance 2\n");
  CHECK_THROWS(load_instance(bad));
  std::stringstream truncated("sensor_fusion_instance 1\nagents 2\ndimension 2\nmeasurements 1\n");
  CHECK_THROWS(load_instance(truncated));
}

TEST_CASE("generation is deterministic in the seed") {
  const auto q1 = make_sensor_fusion(4, 3, 2, 0.1, 123);
  const auto q2 = make_sensor_fusion(4, 3, 2, 0.1, 123);
  const auto q3 = make_sensor_fusion(4, 3, 2, 0.1, 124);
  bool same = true, diff = false;
  for (int i = 0; i < 4; ++i) {
    same = same && (q1.measurement_matrix(i) - q2.measurement_matrix(i)).lpNorm<Eigen::Infinity>() == 0.0;
    diff = diff || (q1.measurement_matrix(i) - q3.measurement_matrix(i)).lpNorm<Eigen::Infinity>() > 0.0;
  }
  CHECK(same);
  CHECK(diff);
}
