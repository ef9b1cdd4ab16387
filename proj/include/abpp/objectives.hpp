#ifndef ABPP_OBJECTIVES_HPP
#define ABPP_OBJECTIVES_HPP

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace abpp {

// Per-agent differentiable cost oracles.  `lipschitz` bounds every agent's
// gradient Lipschitz constant; `strong_convexity` is the modulus of the
// averaged objective (1/n) sum f_i.  Oracles are pure and reentrant.
struct ObjectiveFamily {
  int agents = 0;
  int dimension = 0;
  double lipschitz = 0.0;
  double strong_convexity = 0.0;
  std::function<Eigen::VectorXd(int, const Eigen::VectorXd&)> grad;
  std::function<double(int, const Eigen::VectorXd&)> value;  // optional, may be empty
};

// Least-squares sensor fusion: f_i(x) = ||z_i - H_i x||^2 + lambda_i ||x||^2.
class QuadraticSensorFusion {
 public:
  QuadraticSensorFusion(std::vector<Eigen::MatrixXd> H, std::vector<Eigen::VectorXd> z,
                        std::vector<double> lambda);

  int agents() const { return static_cast<int>(H_.size()); }
  int dimension() const { return static_cast<int>(H_.front().cols()); }
  int measurements() const { return static_cast<int>(H_.front().rows()); }
  const Eigen::MatrixXd& measurement_matrix(int i) const { return H_[static_cast<std::size_t>(i)]; }
  const Eigen::VectorXd& observation(int i) const { return z_[static_cast<std::size_t>(i)]; }
  double regularization(int i) const { return lambda_[static_cast<std::size_t>(i)]; }

  // Q_i = 2 (H_i^T H_i + lambda_i I)
  Eigen::MatrixXd hessian(int i) const;
  Eigen::VectorXd grad(int i, const Eigen::VectorXd& x) const;
  double value(int i, const Eigen::VectorXd& x) const;

  ObjectiveFamily family() const;

 private:
  std::vector<Eigen::MatrixXd> H_;
  std::vector<Eigen::VectorXd> z_;
  std::vector<double> lambda_;
};

// Random instance per the benchmark recipe: H_i uniform, scaled so the
// gradient Lipschitz constant of ||z_i - H_i x||^2 is 1, observations
// z_i = H_i x_true + unit-variance Gaussian noise.
QuadraticSensorFusion make_sensor_fusion(int n, int p, int s, double lambda,
                                         std::uint64_t seed);

// Unique minimizer of sum f_i: solves sum(H_i^T H_i + lambda_i I) x = sum H_i^T z_i.
Eigen::VectorXd optimum(const QuadraticSensorFusion& q);

// (L, mu) from symmetric eigensolves: L = max_i lambda_max(Q_i),
// mu = lambda_min((1/n) sum Q_i).
std::pair<double, double> constants(const QuadraticSensorFusion& q);

struct OracleCheckReport {
  bool ok = true;
  std::string first_violation;
};

// Samples random pairs and validates the Lipschitz and strong-convexity
// inequalities plus the gradient-step contraction
// ||x - x* - alpha grad f(x)|| <= q(alpha) ||x - x*|| on an alpha grid in
// (0, 2/L).
OracleCheckReport check_lipschitz_and_convexity(const QuadraticSensorFusion& q,
                                                int trials, std::uint64_t seed);

// q(alpha) = max{|1 - alpha mu|, |1 - alpha L|}
double gradient_contraction_factor(double alpha, double lipschitz, double strong_convexity);

// Self-describing text serialization for replay.
void save_instance(std::ostream& out, const QuadraticSensorFusion& q);
void save_instance_file(const std::string& path, const QuadraticSensorFusion& q);
QuadraticSensorFusion load_instance(std::istream& in);
QuadraticSensorFusion load_instance_file(const std::string& path);

}  // namespace abpp

#endif  // ABPP_OBJECTIVES_HPP
