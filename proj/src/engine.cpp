#include "abpp/engine.hpp"

#include <stdexcept>
#include <string>

namespace abpp {

namespace {

Eigen::MatrixXd stacked_gradients(const ObjectiveFamily& f, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i)
    g.row(i) = f.grad(i, x.row(i).transpose()).transpose();
  return g;
}

void check_finite(const Eigen::MatrixXd& m, long round, const char* what) {
  if (m.allFinite()) return;
  for (int i = 0; i < m.rows(); ++i) {
    if (!m.row(i).allFinite())
      throw DivergenceError(std::string(what) + " non-finite at round " +
                            std::to_string(round) + ", agent " + std::to_string(i) +
                            " (stepsize too large?)");
  }
}

}  // namespace

NetworkState init(const ObjectiveFamily& f, const Eigen::MatrixXd& x0) {
  if (x0.rows() != f.agents || x0.cols() != f.dimension)
    throw std::invalid_argument("init: x0 must be agents x dimension");
  NetworkState s;
  s.x = x0;
  s.grads = stacked_gradients(f, x0);
  s.y = s.grads;
  s.round = 0;
  return s;
}

NetworkState step(const NetworkState& state, const RowStochasticMatrix& A,
                  const ColumnStochasticMatrix& B, const ObjectiveFamily& f,
                  double alpha) {
  if (A.entries.rows() != state.x.rows() || B.entries.rows() != state.x.rows())
    throw std::invalid_argument("step: mixing matrix dimension mismatch");
  NetworkState next;
  next.round = state.round + 1;
  next.x = A.entries * state.x - alpha * state.y;
  check_finite(next.x, next.round, "x");
  next.grads = stacked_gradients(f, next.x);
  next.y = B.entries * state.y + next.grads - state.grads;
  check_finite(next.y, next.round, "y");
  return next;
}

NetworkState run(const ObjectiveFamily& f, const MixingSequence& mixing,
                 const RunConfig& cfg, const RoundCallback& on_round) {
  if (cfg.trace_every < 1) throw std::invalid_argument("run: trace_every must be >= 1");
  if (mixing.horizon() == 0 && cfg.horizon > 0)
    throw std::invalid_argument("run: empty mixing sequence");
  NetworkState state = init(f, cfg.x0);
  if (on_round) on_round(0, state);
  for (long k = 0; k < cfg.horizon; ++k) {
    const auto idx = static_cast<std::size_t>(k % mixing.horizon());
    state = step(state, mixing.A[idx], mixing.B[idx], f, cfg.alpha);
    if (on_round && ((k + 1) % cfg.trace_every == 0 || k + 1 == cfg.horizon))
      on_round(k + 1, state);
  }
  return state;
}

NetworkState run_push_diging(const ObjectiveFamily& f, const MixingSequence& mixing,
                             const RunConfig& cfg, const RoundCallback& on_round) {
  if (cfg.trace_every < 1) throw std::invalid_argument("run_push_diging: trace_every must be >= 1");
  const int n = f.agents;
  Eigen::MatrixXd u = cfg.x0;            // biased state
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n);  // push-sum weights
  NetworkState state = init(f, cfg.x0);  // state.x = de-biased iterates
  if (on_round) on_round(0, state);
  for (long k = 0; k < cfg.horizon; ++k) {
    const auto idx = static_cast<std::size_t>(k % mixing.horizon());
    const auto& B = mixing.B[idx].entries;
    u = B * (u - cfg.alpha * state.y);
    v = B * v;
    for (int i = 0; i < n; ++i) {
      if (v(i) < 1e-12)
        throw DivergenceError("push_diging: de-biasing weight underflow at round " +
                              std::to_string(k + 1) + ", agent " + std::to_string(i));
    }
    NetworkState next;
    next.round = k + 1;
    next.x = v.cwiseInverse().asDiagonal() * u;
    check_finite(next.x, next.round, "x");
    next.grads = stacked_gradients(f, next.x);
    next.y = B * state.y + next.grads - state.grads;
    check_finite(next.y, next.round, "y");
    state = std::move(next);
    if (on_round && ((k + 1) % cfg.trace_every == 0 || k + 1 == cfg.horizon))
      on_round(k + 1, state);
  }
  return state;
}

}  // namespace abpp
