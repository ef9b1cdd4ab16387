#ifndef ABPP_DIAGNOSTICS_HPP
#define ABPP_DIAGNOSTICS_HPP

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "abpp/engine.hpp"
#include "abpp/mixing.hpp"
#include "abpp/objectives.hpp"

namespace abpp {

// ||x||_a = sqrt(sum_i a_i ||x_i||^2) over a stack of row vectors.
double weighted_norm(const Eigen::MatrixXd& stack, const Eigen::VectorXd& weights);
// Norm induced by the entrywise inverse weights.
double inverse_weighted_norm(const Eigen::MatrixXd& stack, const Eigen::VectorXd& weights);

// phi-weighted average of the rows.
Eigen::VectorXd weighted_average(const Eigen::MatrixXd& x, const Eigen::VectorXd& phi);

// D(x, phi): phi-weighted dispersion of the rows around their phi-average.
double dispersion_x(const Eigen::MatrixXd& x, const Eigen::VectorXd& phi);

// S(y, pi): pi-weighted dispersion of the pi-scaled rows around the row sum.
double dispersion_y(const Eigen::MatrixXd& y, const Eigen::VectorXd& pi);

// Per-round contraction constants.  c and tau exist only when the round's
// graph is strongly connected; disconnected rounds report them empty.
struct RoundConstants {
  double q = 0.0;                // gradient-step factor q_k(alpha)
  std::optional<double> c;       // row-stochastic consensus contraction
  std::optional<double> tau;     // column-stochastic consensus contraction
  double r = 0.0;                // sqrt(n) + 1/sqrt(min pi_{k+1})
  double gamma = 0.0;            // sqrt(max_j phi_{k+1,j} pi_{k,j})
  double varphi = 0.0;           // sqrt(1/min phi_k)
  double varphi_next = 0.0;      // sqrt(1/min phi_{k+1})

  bool connected() const { return c.has_value() && tau.has_value(); }
};

// metrics may be null for a round whose graph is not strongly connected.
RoundConstants round_constants(const Eigen::VectorXd& phi_k, const Eigen::VectorXd& phi_next,
                               const Eigen::VectorXd& pi_k, const Eigen::VectorXd& pi_next,
                               const GraphMetrics* metrics, double a, double b, double lipschitz,
                               double strong_convexity, double alpha);

// (optimality gap, x-dispersion, y-dispersion)
Eigen::Vector3d composite_vector(const NetworkState& state, const Eigen::VectorXd& phi,
                                 const Eigen::VectorXd& pi, const Eigen::VectorXd& x_star);

// Per-round 3x3 recursion matrix; requires a connected round.
Eigen::Matrix3d composite_matrix(const RoundConstants& consts, double lipschitz, int n,
                                 double alpha);

// Sequence-wide maxima of the per-round constants plus the pi lower bound.
struct UniformConstants {
  double c = 0.0;
  double tau = 0.0;
  double r = 0.0;
  double varphi = 0.0;
  double sigma = 0.0;  // lower bound for min(pi_k) over the horizon
};

// Exact maxima/minimum over a fully connected mixing sequence; throws if any
// round is disconnected.  When `worst_case_sigma` is set, sigma falls back to
// b^n/n instead of the empirical minimum.
UniformConstants uniform_constants(const MixingSequence& mixing, bool worst_case_sigma = false);

// Horizon-independent bound matrix.
Eigen::Matrix3d bound_matrix(const UniformConstants& u, double lipschitz,
                             double strong_convexity, int n, double alpha);

struct StepsizeBound {
  double consensus_x_term = 0.0;   // (1-c) / (L sqrt(n) varphi)
  double consensus_y_term = 0.0;   // (1-tau) / (L r)
  double determinant_term = 0.0;   // n sigma mu (1-tau)(1-c) / eta
  double strong_convexity_term = 0.0;  // 2 / (n (L + mu))
  double eta = 0.0;
  double value = 0.0;  // min of the four, pulled strictly inside (see .cpp)
};

StepsizeBound stepsize_upper_bound(const UniformConstants& u, double lipschitz,
                                   double strong_convexity, int n);

struct SpectralCertificate {
  double rho = 0.0;
  bool certified = false;  // diagonals < 1 and det(I - M) > 0
};

// rho by closed-form characteristic cubic with Newton polish.
SpectralCertificate spectral_certificate(const Eigen::Matrix3d& m);

// Left Perron vector of a positive 3x3 matrix (power iteration on M^T).
Eigen::Vector3d left_perron_vector(const Eigen::Matrix3d& m);

struct Trajectory {
  std::vector<NetworkState> states;  // index = round
};

struct CheckLine {
  std::string family;
  bool pass = true;
  double worst_margin = 0.0;
  long worst_round = -1;
  long rounds_checked = 0;
};

struct VerificationReport {
  std::vector<CheckLine> lines;
  bool all_pass = true;

  std::string to_text() const;
};

// Replays every per-round inequality of the convergence analysis against a
// recorded trajectory.  Rounds whose graph is not strongly connected are
// skipped by the families that need contraction constants.
VerificationReport verify_composite_relation(const Trajectory& traj,
                                             const MixingSequence& mixing,
                                             const ObjectiveFamily& f,
                                             const Eigen::VectorXd& x_star, double alpha);

}  // namespace abpp

#endif  // ABPP_DIAGNOSTICS_HPP
