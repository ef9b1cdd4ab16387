#include "abpp/objectives.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "abpp/rng.hpp"

namespace abpp {

QuadraticSensorFusion::QuadraticSensorFusion(std::vector<Eigen::MatrixXd> H,
                                             std::vector<Eigen::VectorXd> z,
                                             std::vector<double> lambda)
    : H_(std::move(H)), z_(std::move(z)), lambda_(std::move(lambda)) {
  if (H_.empty() || H_.size() != z_.size() || H_.size() != lambda_.size())
    throw std::invalid_argument("QuadraticSensorFusion: inconsistent agent counts");
  for (std::size_t i = 0; i < H_.size(); ++i) {
    if (H_[i].cols() != H_.front().cols() || H_[i].rows() != z_[i].size())
      throw std::invalid_argument("QuadraticSensorFusion: dimension mismatch");
  }
}

Eigen::MatrixXd QuadraticSensorFusion::hessian(int i) const {
  const auto& H = H_[static_cast<std::size_t>(i)];
  const auto p = H.cols();
  return 2.0 * (H.transpose() * H +
                lambda_[static_cast<std::size_t>(i)] * Eigen::MatrixXd::Identity(p, p));
}

Eigen::VectorXd QuadraticSensorFusion::grad(int i, const Eigen::VectorXd& x) const {
  const auto& H = H_[static_cast<std::size_t>(i)];
  return 2.0 * (H.transpose() * (H * x - z_[static_cast<std::size_t>(i)]) +
                lambda_[static_cast<std::size_t>(i)] * x);
}

double QuadraticSensorFusion::value(int i, const Eigen::VectorXd& x) const {
  const auto& H = H_[static_cast<std::size_t>(i)];
  return (z_[static_cast<std::size_t>(i)] - H * x).squaredNorm() +
         lambda_[static_cast<std::size_t>(i)] * x.squaredNorm();
}

ObjectiveFamily QuadraticSensorFusion::family() const {
  ObjectiveFamily f;
  f.agents = agents();
  f.dimension = dimension();
  const auto [L, mu] = constants(*this);
  f.lipschitz = L;
  f.strong_convexity = mu;
  f.grad = [self = *this](int i, const Eigen::VectorXd& x) { return self.grad(i, x); };
  f.value = [self = *this](int i, const Eigen::VectorXd& x) { return self.value(i, x); };
  return f;
}

QuadraticSensorFusion make_sensor_fusion(int n, int p, int s, double lambda,
                                         std::uint64_t seed) {
  if (n < 1 || p < 1 || s < 1) throw std::invalid_argument("make_sensor_fusion: dimensions must be >= 1");
  if (lambda <= 0.0) throw std::invalid_argument("make_sensor_fusion: lambda must be positive");
  Rng rng(seed);
  Eigen::VectorXd x_true(p);
  for (int d = 0; d < p; ++d) x_true(d) = rng.normal();
  std::vector<Eigen::MatrixXd> H(static_cast<std::size_t>(n));
  std::vector<Eigen::VectorXd> z(static_cast<std::size_t>(n));
  std::vector<double> lambdas(static_cast<std::size_t>(n), lambda);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd Hi(s, p);
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < p; ++c) Hi(r, c) = rng.uniform();
    // Scale so the data term's gradient Lipschitz constant
    // lambda_max(2 H^T H) = 2 ||H||_2^2 equals 1.
    const double spectral =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Hi.transpose() * Hi)
            .eigenvalues()
            .maxCoeff();
    Hi /= std::sqrt(2.0 * spectral);
    Eigen::VectorXd noise(s);
    for (int r = 0; r < s; ++r) noise(r) = rng.normal();
    H[static_cast<std::size_t>(i)] = Hi;
    z[static_cast<std::size_t>(i)] = Hi * x_true + noise;
  }
  return QuadraticSensorFusion(std::move(H), std::move(z), std::move(lambdas));
}

Eigen::VectorXd optimum(const QuadraticSensorFusion& q) {
  const int p = q.dimension();
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
  for (int i = 0; i < q.agents(); ++i) {
    const auto& H = q.measurement_matrix(i);
    lhs += H.transpose() * H + q.regularization(i) * Eigen::MatrixXd::Identity(p, p);
    rhs += H.transpose() * q.observation(i);
  }
  Eigen::LDLT<Eigen::MatrixXd> solver(lhs);
  if (solver.info() != Eigen::Success || !solver.isPositive())
    throw std::runtime_error("optimum: normal equations are singular");
  return solver.solve(rhs);
}

std::pair<double, double> constants(const QuadraticSensorFusion& q) {
  const int p = q.dimension();
  double L = 0.0;
  Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < q.agents(); ++i) {
    const Eigen::MatrixXd Q = q.hessian(i);
    L = std::max(L, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Q).eigenvalues().maxCoeff());
    avg += Q;
  }
  avg /= static_cast<double>(q.agents());
  const double mu =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(avg).eigenvalues().minCoeff();
  return {L, mu};
}

double gradient_contraction_factor(double alpha, double lipschitz, double strong_convexity) {
  return std::max(std::abs(1.0 - alpha * strong_convexity),
                  std::abs(1.0 - alpha * lipschitz));
}

OracleCheckReport check_lipschitz_and_convexity(const QuadraticSensorFusion& q,
                                                int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("check_lipschitz_and_convexity: trials must be >= 1");
  OracleCheckReport report;
  const auto [L, mu] = constants(q);
  const int n = q.agents();
  const int p = q.dimension();
  const Eigen::VectorXd x_star = optimum(q);
  Rng rng(seed);
  const double tol = 1e-9;
  auto fail = [&report](const std::string& what) {
    if (report.ok) {
      report.ok = false;
      report.first_violation = what;
    }
  };
  for (int t = 0; t < trials && report.ok; ++t) {
    Eigen::VectorXd x(p), u(p);
    for (int d = 0; d < p; ++d) {
      x(d) = rng.normal();
      u(d) = rng.normal();
    }
    Eigen::VectorXd gx = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd gu = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd gi_x = q.grad(i, x);
      const Eigen::VectorXd gi_u = q.grad(i, u);
      if ((gi_x - gi_u).norm() > L * (x - u).norm() * (1.0 + tol))
        fail("Lipschitz bound violated at agent " + std::to_string(i) + ", trial " +
             std::to_string(t));
      gx += gi_x;
      gu += gi_u;
    }
    gx /= static_cast<double>(n);
    gu /= static_cast<double>(n);
    const double inner = (gx - gu).dot(x - u);
    if (inner < mu * (x - u).squaredNorm() * (1.0 - tol) - tol)
      fail("strong convexity violated at trial " + std::to_string(t));
    // Gradient-step contraction toward the minimizer on an alpha grid
    // strictly inside (0, 2/L).
    for (int gi = 1; gi <= 10 && report.ok; ++gi) {
      const double alpha = (2.0 / L) * static_cast<double>(gi) / 11.0;
      const double qa = gradient_contraction_factor(alpha, L, mu);
      Eigen::VectorXd gfx = Eigen::VectorXd::Zero(p);
      for (int i = 0; i < n; ++i) gfx += q.grad(i, x);
      gfx /= static_cast<double>(n);
      const double lhs = (x - x_star - alpha * gfx).norm();
      const double rhs = qa * (x - x_star).norm();
      if (lhs > rhs * (1.0 + tol) + tol)
        fail("gradient contraction violated at trial " + std::to_string(t) +
             ", alpha=" + std::to_string(alpha));
    }
  }
  return report;
}

void save_instance(std::ostream& out, const QuadraticSensorFusion& q) {
  out.precision(17);
  out << "sensor_fusion_instance 1\n";
  out << "agents " << q.agents() << "\n";
  out << "dimension " << q.dimension() << "\n";
  out << "measurements " << q.measurements() << "\n";
  for (int i = 0; i < q.agents(); ++i) {
    out << "agent " << i << "\n";
    out << "lambda " << q.regularization(i) << "\n";
    const auto& H = q.measurement_matrix(i);
    out << "H";
    for (int r = 0; r < H.rows(); ++r)
      for (int c = 0; c < H.cols(); ++c) out << " " << H(r, c);
    out << "\n";
    out << "z";
    const auto& z = q.observation(i);
    for (int r = 0; r < z.size(); ++r) out << " " << z(r);
    out << "\n";
  }
}

void save_instance_file(const std::string& path, const QuadraticSensorFusion& q) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write instance file: " + path);
  save_instance(out, q);
}

QuadraticSensorFusion load_instance(std::istream& in) {
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "sensor_fusion_instance" || version != 1)
    throw std::runtime_error("load_instance: unrecognized header");
  auto expect = [&in](const std::string& key) {
    std::string got;
    in >> got;
    if (got != key) throw std::runtime_error("load_instance: expected `" + key + "`, got `" + got + "`");
  };
  int n = 0, p = 0, s = 0;
  expect("agents");
  in >> n;
  expect("dimension");
  in >> p;
  expect("measurements");
  in >> s;
  if (!in || n < 1 || p < 1 || s < 1) throw std::runtime_error("load_instance: bad dimensions");
  std::vector<Eigen::MatrixXd> H(static_cast<std::size_t>(n));
  std::vector<Eigen::VectorXd> z(static_cast<std::size_t>(n));
  std::vector<double> lambda(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    expect("agent");
    int idx = 0;
    in >> idx;
    expect("lambda");
    in >> lambda[static_cast<std::size_t>(i)];
    expect("H");
    Eigen::MatrixXd Hi(s, p);
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < p; ++c) in >> Hi(r, c);
    expect("z");
    Eigen::VectorXd zi(s);
    for (int r = 0; r < s; ++r) in >> zi(r);
    if (!in) throw std::runtime_error("load_instance: truncated agent block");
    H[static_cast<std::size_t>(i)] = std::move(Hi);
    z[static_cast<std::size_t>(i)] = std::move(zi);
  }
  return QuadraticSensorFusion(std::move(H), std::move(z), std::move(lambda));
}

QuadraticSensorFusion load_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open instance file: " + path);
  return load_instance(in);
}

}  // namespace abpp
