#ifndef ABPP_MIXING_HPP
#define ABPP_MIXING_HPP

#include <Eigen/Core>
#include <span>
#include <vector>

#include "abpp/digraph.hpp"

namespace abpp {

// Row-stochastic mixing matrix compatible with a digraph: entry (i,j) is
// positive exactly for j in N_in(i) or j == i.
struct RowStochasticMatrix {
  Eigen::MatrixXd entries;
  double min_positive = 0.0;
};

// Column-stochastic counterpart: entry (j,i) is positive exactly for
// j in N_out(i) or j == i.
struct ColumnStochasticMatrix {
  Eigen::MatrixXd entries;
  double min_positive = 0.0;
};

// Uniform in-neighbor weights 1/(|N_in(i)|+1); exactly stochastic by
// construction (divide-by-count), no renormalization.
RowStochasticMatrix build_row_stochastic(const Digraph& g);

// Uniform out-neighbor splitting 1/(|N_out(i)|+1).
ColumnStochasticMatrix build_column_stochastic(const Digraph& g);

// Forward recursion pi_{k+1} = B_k pi_k from the uniform vector;
// returns horizon+1 stochastic vectors.
std::vector<Eigen::VectorXd> pi_sequence(std::span<const ColumnStochasticMatrix> Bs, int n);
std::vector<Eigen::VectorXd> pi_sequence(std::span<const ColumnStochasticMatrix> Bs);

// Backward recursion phi_k = A_k^T phi_{k+1} from the given terminal
// (index horizon); returns horizon+1 stochastic vectors satisfying
// phi_{k+1}^T A_k = phi_k^T exactly.
std::vector<Eigen::VectorXd> phi_sequence(std::span<const RowStochasticMatrix> As,
                                          const Eigen::VectorXd& terminal);
std::vector<Eigen::VectorXd> phi_sequence(std::span<const RowStochasticMatrix> As);

// Per-round matrices, weight vectors and graph metrics for a materialized
// run horizon; the single source both the engine and the diagnostics use,
// so they see bit-identical data.
struct MixingSequence {
  std::vector<RowStochasticMatrix> A;        // rounds 0..K-1
  std::vector<ColumnStochasticMatrix> B;     // rounds 0..K-1
  std::vector<bool> connected;               // per-round strong connectivity
  std::vector<GraphMetrics> metrics;         // valid only where connected
  std::vector<Eigen::VectorXd> phi;          // 0..K
  std::vector<Eigen::VectorXd> pi;           // 0..K
  double a_min = 0.0;                        // min over rounds of min(A_k^+)
  double b_min = 0.0;

  int horizon() const { return static_cast<int>(A.size()); }
};

// Builds matrices for `horizon` rounds, cycling the graph sequence if it is
// shorter.
MixingSequence build_mixing_sequence(const DigraphSequence& graphs, int horizon);

}  // namespace abpp

#endif  // ABPP_MIXING_HPP
