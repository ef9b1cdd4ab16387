#ifndef ABPP_ENGINE_HPP
#define ABPP_ENGINE_HPP

#include <Eigen/Core>
#include <functional>

#include "abpp/mixing.hpp"
#include "abpp/objectives.hpp"

namespace abpp {

// Stacked iterates: row i holds agent i's decision x_i and direction y_i.
// `grads` caches the gradients at the current x so each round evaluates one
// gradient per agent.
struct NetworkState {
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
  Eigen::MatrixXd grads;
  long round = 0;
};

struct RunConfig {
  double alpha = 0.0;
  long horizon = 1;
  Eigen::MatrixXd x0;
  long trace_every = 1;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// x = x0, y_i = grad f_i(x_i), round 0.
NetworkState init(const ObjectiveFamily& f, const Eigen::MatrixXd& x0);

// One synchronous round: x' = A x - alpha y, then y' = B y + g(x') - g(x).
// Throws DivergenceError when a non-finite coordinate appears.
NetworkState step(const NetworkState& state, const RowStochasticMatrix& A,
                  const ColumnStochasticMatrix& B, const ObjectiveFamily& f,
                  double alpha);

using RoundCallback = std::function<void(long, const NetworkState&)>;

// Runs cfg.horizon rounds over the prebuilt matrices (cycled when shorter).
// The callback fires at round 0, every cfg.trace_every rounds after, and at
// the final round.
NetworkState run(const ObjectiveFamily& f, const MixingSequence& mixing,
                 const RunConfig& cfg, const RoundCallback& on_round = {});

// Push-sum gradient-tracking baseline: column-stochastic mixing of the
// state and the tracker with scalar de-biasing weights.
NetworkState run_push_diging(const ObjectiveFamily& f, const MixingSequence& mixing,
                             const RunConfig& cfg, const RoundCallback& on_round = {});

}  // namespace abpp

#endif  // ABPP_ENGINE_HPP
