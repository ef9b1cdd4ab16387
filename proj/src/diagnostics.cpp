#include "abpp/diagnostics.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace abpp {

double weighted_norm(const Eigen::MatrixXd& stack, const Eigen::VectorXd& weights) {
  if (stack.rows() != weights.size())
    throw std::invalid_argument("weighted_norm: dimension mismatch");
  double total = 0.0;
  for (int i = 0; i < stack.rows(); ++i)
    total += weights(i) * stack.row(i).squaredNorm();
  return std::sqrt(total);
}

double inverse_weighted_norm(const Eigen::MatrixXd& stack, const Eigen::VectorXd& weights) {
  if (stack.rows() != weights.size())
    throw std::invalid_argument("inverse_weighted_norm: dimension mismatch");
  double total = 0.0;
  for (int i = 0; i < stack.rows(); ++i)
    total += stack.row(i).squaredNorm() / weights(i);
  return std::sqrt(total);
}

Eigen::VectorXd weighted_average(const Eigen::MatrixXd& x, const Eigen::VectorXd& phi) {
  if (x.rows() != phi.size())
    throw std::invalid_argument("weighted_average: dimension mismatch");
  return x.transpose() * phi;
}

double dispersion_x(const Eigen::MatrixXd& x, const Eigen::VectorXd& phi) {
  if (phi.minCoeff() <= 0.0)
    throw std::invalid_argument("dispersion_x: weights must be positive");
  const Eigen::VectorXd avg = weighted_average(x, phi);
  double total = 0.0;
  for (int i = 0; i < x.rows(); ++i)
    total += phi(i) * (x.row(i).transpose() - avg).squaredNorm();
  return std::sqrt(total);
}

double dispersion_y(const Eigen::MatrixXd& y, const Eigen::VectorXd& pi) {
  if (y.rows() != pi.size())
    throw std::invalid_argument("dispersion_y: dimension mismatch");
  if (pi.minCoeff() <= 0.0)
    throw std::invalid_argument("dispersion_y: pi has a nonpositive entry");
  const Eigen::VectorXd total_dir = y.colwise().sum().transpose();
  double total = 0.0;
  for (int i = 0; i < y.rows(); ++i)
    total += pi(i) * (y.row(i).transpose() / pi(i) - total_dir).squaredNorm();
  return std::sqrt(total);
}

RoundConstants round_constants(const Eigen::VectorXd& phi_k, const Eigen::VectorXd& phi_next,
                               const Eigen::VectorXd& pi_k, const Eigen::VectorXd& pi_next,
                               const GraphMetrics* metrics, double a, double b, double lipschitz,
                               double strong_convexity, double alpha) {
  const auto n = phi_k.size();
  if (phi_next.size() != n || pi_k.size() != n || pi_next.size() != n)
    throw std::invalid_argument("round_constants: dimension mismatch");
  if (alpha <= 0.0 || alpha >= 2.0 / (static_cast<double>(n) * lipschitz))
    throw std::invalid_argument("round_constants: alpha outside (0, 2/(nL))");
  if (phi_k.minCoeff() <= 0.0 || phi_next.minCoeff() <= 0.0 || pi_k.minCoeff() <= 0.0 ||
      pi_next.minCoeff() <= 0.0)
    throw std::invalid_argument("round_constants: weight vectors must be positive");
  RoundConstants rc;
  const double npk = static_cast<double>(n) * pi_k.minCoeff();
  rc.q = std::max(std::abs(1.0 - alpha * npk * strong_convexity),
                  std::abs(1.0 - alpha * npk * lipschitz));
  rc.r = std::sqrt(static_cast<double>(n)) + 1.0 / std::sqrt(pi_next.minCoeff());
  rc.gamma = std::sqrt((phi_next.array() * pi_k.array()).maxCoeff());
  rc.varphi = std::sqrt(1.0 / phi_k.minCoeff());
  rc.varphi_next = std::sqrt(1.0 / phi_next.minCoeff());
  if (metrics != nullptr) {
    const double dk = static_cast<double>(metrics->diameter) *
                      static_cast<double>(metrics->max_edge_utility);
    const double maxphi = phi_k.maxCoeff();
    rc.c = std::sqrt(1.0 - phi_next.minCoeff() * a * a / (maxphi * maxphi * dk));
    const double minpi = pi_k.minCoeff();
    const double maxpi = pi_k.maxCoeff();
    rc.tau = std::sqrt(1.0 - minpi * minpi * b * b /
                                 (maxpi * maxpi * pi_next.maxCoeff() * dk));
  }
  return rc;
}

Eigen::Vector3d composite_vector(const NetworkState& state, const Eigen::VectorXd& phi,
                                 const Eigen::VectorXd& pi, const Eigen::VectorXd& x_star) {
  Eigen::Vector3d v;
  v(0) = (weighted_average(state.x, phi) - x_star).norm();
  v(1) = dispersion_x(state.x, phi);
  v(2) = dispersion_y(state.y, pi);
  return v;
}

Eigen::Matrix3d composite_matrix(const RoundConstants& rc, double lipschitz, int n,
                                 double alpha) {
  if (!rc.connected())
    throw std::invalid_argument("composite_matrix: contraction constants undefined for a disconnected round");
  const double L = lipschitz;
  const double sn = std::sqrt(static_cast<double>(n));
  const double c = *rc.c;
  const double tau = *rc.tau;
  Eigen::Matrix3d m;
  m(0, 0) = rc.q;
  m(0, 1) = alpha * L * sn * rc.varphi;
  m(0, 2) = alpha;
  m(1, 0) = alpha * L * rc.gamma * sn * rc.varphi;
  m(1, 1) = c + alpha * L * rc.gamma * sn * rc.varphi;
  m(1, 2) = alpha * rc.gamma;
  m(2, 0) = alpha * L * L * rc.r * sn * rc.varphi;
  m(2, 1) = L * rc.r * (c * rc.varphi_next + rc.varphi) + alpha * L * L * rc.r * sn * rc.varphi;
  m(2, 2) = tau + alpha * L * rc.r;
  return m;
}

UniformConstants uniform_constants(const MixingSequence& mixing, bool worst_case_sigma) {
  UniformConstants u;
  const int K = mixing.horizon();
  if (K == 0) throw std::invalid_argument("uniform_constants: empty sequence");
  const auto n = mixing.pi.front().size();
  double sigma = mixing.pi.front().minCoeff();
  for (const auto& pi : mixing.pi) sigma = std::min(sigma, pi.minCoeff());
  for (int k = 0; k < K; ++k) {
    if (!mixing.connected[static_cast<std::size_t>(k)])
      throw ConnectivityError("uniform_constants: round " + std::to_string(k) +
                              " is not strongly connected");
    // alpha plays no role in c, tau, r, varphi; pick any admissible value.
    const double probe_alpha = 1e-3 / (static_cast<double>(n));
    const auto rc = round_constants(
        mixing.phi[static_cast<std::size_t>(k)], mixing.phi[static_cast<std::size_t>(k) + 1],
        mixing.pi[static_cast<std::size_t>(k)], mixing.pi[static_cast<std::size_t>(k) + 1],
        &mixing.metrics[static_cast<std::size_t>(k)], mixing.a_min, mixing.b_min, 1.0, 1.0,
        probe_alpha);
    u.c = std::max(u.c, *rc.c);
    u.tau = std::max(u.tau, *rc.tau);
    u.r = std::max(u.r, rc.r);
    u.varphi = std::max(u.varphi, std::max(rc.varphi, rc.varphi_next));
  }
  u.sigma = worst_case_sigma
                ? std::pow(mixing.b_min, static_cast<double>(n)) / static_cast<double>(n)
                : sigma;
  return u;
}

Eigen::Matrix3d bound_matrix(const UniformConstants& u, double lipschitz,
                             double strong_convexity, int n, double alpha) {
  if (u.c <= 0.0 || u.c >= 1.0 || u.tau <= 0.0 || u.tau >= 1.0)
    throw std::invalid_argument("bound_matrix: c and tau must lie in (0,1)");
  const double upper = 2.0 / (static_cast<double>(n) * (lipschitz + strong_convexity));
  if (alpha < 0.0 || alpha > upper)
    throw std::invalid_argument("bound_matrix: alpha outside [0, 2/(n(L+mu))]");
  const double L = lipschitz;
  const double sn = std::sqrt(static_cast<double>(n));
  Eigen::Matrix3d m;
  m(0, 0) = 1.0 - alpha * static_cast<double>(n) * u.sigma * strong_convexity;
  m(0, 1) = alpha * L * sn * u.varphi;
  m(0, 2) = alpha;
  m(1, 0) = alpha * L * sn * u.varphi;
  m(1, 1) = u.c + alpha * L * sn * u.varphi;
  m(1, 2) = alpha;
  m(2, 0) = alpha * L * L * u.r * sn * u.varphi;
  m(2, 1) = L * u.r * (1.0 + u.c) * u.varphi + alpha * L * L * u.r * sn * u.varphi;
  m(2, 2) = u.tau + alpha * L * u.r;
  return m;
}

StepsizeBound stepsize_upper_bound(const UniformConstants& u, double lipschitz,
                                   double strong_convexity, int n) {
  if (u.c <= 0.0 || u.c >= 1.0 || u.tau <= 0.0 || u.tau >= 1.0)
    throw std::invalid_argument(
        "stepsize_upper_bound: degenerate contraction constants (disconnected graphs upstream?)");
  if (lipschitz <= 0.0 || strong_convexity <= 0.0 || u.r <= 0.0 || u.varphi <= 0.0 ||
      u.sigma <= 0.0)
    throw std::invalid_argument("stepsize_upper_bound: inputs must be positive");
  const double L = lipschitz;
  const double mu = strong_convexity;
  const double sn = std::sqrt(static_cast<double>(n));
  StepsizeBound b;
  b.eta = L * (static_cast<double>(n) * u.sigma * mu + L * sn * u.varphi) *
          ((1.0 + u.c) * u.r * u.varphi + (1.0 - u.c) * u.r + (1.0 - u.tau) * sn * u.varphi);
  b.consensus_x_term = (1.0 - u.c) / (L * sn * u.varphi);
  b.consensus_y_term = (1.0 - u.tau) / (L * u.r);
  b.determinant_term =
      static_cast<double>(n) * u.sigma * mu * (1.0 - u.tau) * (1.0 - u.c) / b.eta;
  b.strong_convexity_term = 2.0 / (static_cast<double>(n) * (L + mu));
  const double raw = std::min(std::min(b.consensus_x_term, b.consensus_y_term),
                              std::min(b.determinant_term, b.strong_convexity_term));
  // The spectral-radius conditions are strict inequalities; at exact
  // equality with the binding term det(I - M) is 0.  Pull the returned
  // stepsize slightly inside so the certificate holds at this value.
  b.value = raw * (1.0 - 1e-3);
  return b;
}

SpectralCertificate spectral_certificate(const Eigen::Matrix3d& m) {
  if (m.minCoeff() < 0.0)
    throw std::invalid_argument("spectral_certificate: matrix must be nonnegative");
  // For a nonnegative matrix the spectral radius is itself an eigenvalue
  // (the largest real root of the characteristic cubic), so ride Newton's
  // method down from the max row sum: the cubic is convex beyond its
  // largest root, giving monotone, quadratically accurate convergence even
  // when the root sits within 1e-12 of 1.
  // Extended precision keeps the Newton residual resolvable when the root
  // sits within a few hundred ulps of 1.
  const long double a = m(0, 0), b = m(0, 1), c = m(0, 2);
  const long double d0 = m(1, 0), e = m(1, 1), f = m(1, 2);
  const long double g = m(2, 0), h = m(2, 1), i = m(2, 2);
  const long double tr = a + e + i;
  const long double minors = a * e - b * d0 + a * i - c * g + e * i - f * h;
  const long double det =
      a * (e * i - f * h) - b * (d0 * i - f * g) + c * (d0 * h - e * g);
  auto poly = [&](long double x) { return ((x - tr) * x + minors) * x - det; };
  auto dpoly = [&](long double x) { return (3.0L * x - 2.0L * tr) * x + minors; };
  long double x = m.rowwise().sum().maxCoeff() + 1.0;
  for (int it = 0; it < 200; ++it) {
    const long double d = dpoly(x);
    if (d <= 0.0L) break;
    const long double next = x - poly(x) / d;
    if (!(next < x)) break;
    x = next;
  }
  SpectralCertificate cert;
  cert.rho = std::max(static_cast<double>(x), 0.0);
  const double det_shift = (Eigen::Matrix3d::Identity() - m).determinant();
  cert.certified = m(0, 0) < 1.0 && m(1, 1) < 1.0 && m(2, 2) < 1.0 && det_shift > 0.0;
  return cert;
}

Eigen::Vector3d left_perron_vector(const Eigen::Matrix3d& m) {
  // Power iteration stalls when the second eigenvalue sits near the Perron
  // root, so take the null space of (M^T - rho I) directly: the null vector
  // is orthogonal to every row, i.e. a cross product of two of them.
  const double rho = spectral_certificate(m).rho;
  const Eigen::Matrix3d a = m.transpose() - rho * Eigen::Matrix3d::Identity();
  Eigen::Vector3d best = Eigen::Vector3d::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      const Eigen::Vector3d cand =
          a.row(i).transpose().cross(a.row(j).transpose());
      if (cand.norm() > best.norm()) best = cand;
    }
  }
  if (best.sum() < 0.0) best = -best;
  const double s = best.sum();
  if (!(s > 0.0) || best.minCoeff() < -1e-9 * s)
    throw std::invalid_argument("left_perron_vector: matrix must be nonnegative and irreducible");
  return best.cwiseMax(0.0) / s;
}

namespace {

struct CheckAccum {
  CheckLine line;
  double slack;

  CheckAccum(std::string family, double slack_in) : slack(slack_in) {
    line.family = std::move(family);
    line.worst_margin = -std::numeric_limits<double>::infinity();
  }
  // lhs <= rhs within relative slack.
  void leq(double lhs, double rhs, long round) {
    const double margin = (lhs - rhs) / (1.0 + std::abs(rhs));
    note(margin, round);
  }
  void eq(double lhs, double rhs, long round) {
    const double margin = std::abs(lhs - rhs) / (1.0 + std::abs(rhs));
    note(margin, round);
  }
  void note(double margin, long round) {
    ++line.rounds_checked;
    if (margin > line.worst_margin) {
      line.worst_margin = margin;
      line.worst_round = round;
    }
  }
  CheckLine finish() {
    line.pass = line.rounds_checked == 0 || line.worst_margin <= slack;
    return line;
  }
};

}  // namespace

std::string VerificationReport::to_text() const {
  std::ostringstream out;
  for (const auto& l : lines) {
    out << l.family << ": " << (l.pass ? "pass" : "FAIL") << " rounds=" << l.rounds_checked;
    if (l.rounds_checked > 0)
      out << " worst_margin=" << l.worst_margin << " worst_round=" << l.worst_round;
    out << "\n";
  }
  out << (all_pass ? "all checks passed" : "VERIFICATION FAILED") << "\n";
  return out.str();
}

VerificationReport verify_composite_relation(const Trajectory& traj,
                                             const MixingSequence& mixing,
                                             const ObjectiveFamily& f,
                                             const Eigen::VectorXd& x_star, double alpha) {
  const long rounds = static_cast<long>(traj.states.size()) - 1;
  if (rounds < 0) throw std::invalid_argument("verify_composite_relation: empty trajectory");
  if (mixing.horizon() < rounds)
    throw std::invalid_argument("verify_composite_relation: mixing sequence shorter than trajectory");
  const int n = f.agents;
  const double L = f.lipschitz;
  const double sn = std::sqrt(static_cast<double>(n));

  CheckAccum conservation("lemma3-conservation", 1e-9);
  CheckAccum prop1a("prop1a-average-recursion", 1e-10);
  CheckAccum prop1b("prop1b-optimality-gap", 1e-8);
  CheckAccum prop2("prop2-x-dispersion", 1e-8);
  CheckAccum prop3id("prop3-norm-identity", 1e-10);
  CheckAccum prop3rec("prop3-y-dispersion", 1e-8);
  CheckAccum prop4("prop4-composite", 1e-8);
  CheckAccum prop4u("prop4-uniform-bound", 1e-8);
  CheckAccum phis("lemma2-phi-lower-bound", 1e-12);
  CheckAccum pis("lemma4-pi-lower-bound", 1e-12);

  bool all_connected = true;
  for (long k = 0; k < rounds; ++k)
    all_connected = all_connected && mixing.connected[static_cast<std::size_t>(k)];

  std::optional<Eigen::Matrix3d> Mu;
  if (all_connected) {
    const auto u = uniform_constants(mixing);
    if (alpha <= 2.0 / (static_cast<double>(n) * (L + f.strong_convexity)))
      Mu = bound_matrix(u, L, f.strong_convexity, n, alpha);
  }

  for (long k = 0; k <= rounds; ++k) {
    const auto ki = static_cast<std::size_t>(k);
    const NetworkState& s = traj.states[ki];
    const auto& phi = mixing.phi[ki];
    const auto& pi = mixing.pi[ki];

    const Eigen::VectorXd sum_y = s.y.colwise().sum().transpose();
    const Eigen::VectorXd sum_g = s.grads.colwise().sum().transpose();
    conservation.eq((sum_y - sum_g).norm() / (1.0 + sum_g.norm()), 0.0, k);
    // Prop 3 identity at every round.
    const double lhs_sq = inverse_weighted_norm(s.y, pi);
    const double S_k = dispersion_y(s.y, pi);
    prop3id.eq(lhs_sq * lhs_sq, S_k * S_k + sum_y.squaredNorm(), k);

    if (k == rounds) break;
    const NetworkState& s1 = traj.states[ki + 1];
    const auto& phi1 = mixing.phi[ki + 1];
    const auto& pi1 = mixing.pi[ki + 1];
    const GraphMetrics* metrics =
        mixing.connected[ki] ? &mixing.metrics[ki] : nullptr;
    const auto rc = round_constants(phi, phi1, pi, pi1, metrics, mixing.a_min, mixing.b_min,
                                    L, f.strong_convexity, alpha);

    const Eigen::VectorXd xhat = weighted_average(s.x, phi);
    const Eigen::VectorXd xhat1 = weighted_average(s1.x, phi1);
    // Prop 1(a): exact recursion of the weighted average.
    const Eigen::VectorXd predicted =
        xhat - alpha * (s.y.transpose() * phi1);
    prop1a.eq((xhat1 - predicted).norm() / (1.0 + xhat.norm()), 0.0, k);

    const double gap = (xhat - x_star).norm();
    const double gap1 = (xhat1 - x_star).norm();
    const double D_k = dispersion_x(s.x, phi);
    const double D_k1 = dispersion_x(s1.x, phi1);
    const double S_k1 = dispersion_y(s1.y, pi1);

    // Prop 1(b).
    prop1b.leq(gap1, rc.q * gap + alpha * L * sn * rc.varphi * D_k + alpha * S_k, k);

    if (rc.connected()) {
      // Prop 2: dispersion of y about its phi_{k+1}-average.
      const Eigen::VectorXd ybar = weighted_average(s.y, phi1);
      double ydisp = 0.0;
      for (int i = 0; i < n; ++i)
        ydisp += phi1(i) * (s.y.row(i).transpose() - ybar).squaredNorm();
      prop2.leq(D_k1, *rc.c * D_k + alpha * std::sqrt(ydisp), k);

      // Prop 3 recursion.
      prop3rec.leq(S_k1,
                   *rc.tau * S_k + alpha * L * rc.r * s.y.norm() +
                       L * rc.r * (*rc.c * rc.varphi_next + rc.varphi) * D_k,
                   k);

      const Eigen::Matrix3d Mk = composite_matrix(rc, L, n, alpha);
      const Eigen::Vector3d Vk(gap, D_k, S_k);
      const Eigen::Vector3d Vk1(gap1, D_k1, S_k1);
      const Eigen::Vector3d rhs = Mk * Vk;
      for (int row = 0; row < 3; ++row) prop4.leq(Vk1(row), rhs(row), k);
      if (Mu) {
        const Eigen::Vector3d rhs_u = (*Mu) * Vk;
        for (int row = 0; row < 3; ++row) prop4u.leq(Vk1(row), rhs_u(row), k);
      }
    }
  }

  if (all_connected) {
    const auto nd = static_cast<double>(n);
    const double phi_bound = std::pow(mixing.a_min, nd) / nd;
    const double pi_bound = std::pow(mixing.b_min, nd) / nd;
    for (long k = 0; k <= rounds; ++k) {
      pis.leq(pi_bound, mixing.pi[static_cast<std::size_t>(k)].minCoeff(), k);
      if (rounds - k >= n)
        phis.leq(phi_bound, mixing.phi[static_cast<std::size_t>(k)].minCoeff(), k);
    }
  }

  VerificationReport report;
  for (auto* acc : {&conservation, &prop1a, &prop1b, &prop2, &prop3id, &prop3rec, &prop4,
                    &prop4u, &phis, &pis}) {
    report.lines.push_back(acc->finish());
    report.all_pass = report.all_pass && report.lines.back().pass;
  }
  return report;
}

}  // namespace abpp
