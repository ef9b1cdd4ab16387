#include "abpp/mixing.hpp"

#include <stdexcept>

namespace abpp {

RowStochasticMatrix build_row_stochastic(const Digraph& g) {
  const int n = g.node_count();
  RowStochasticMatrix A;
  A.entries = Eigen::MatrixXd::Zero(n, n);
  A.min_positive = 1.0;
  for (int i = 0; i < n; ++i) {
    const auto& in = g.in_neighbors(i);
    const double w = 1.0 / static_cast<double>(in.size() + 1);
    A.entries(i, i) = w;
    for (int j : in) A.entries(i, j) = w;
    A.min_positive = std::min(A.min_positive, w);
  }
  return A;
}

ColumnStochasticMatrix build_column_stochastic(const Digraph& g) {
  const int n = g.node_count();
  ColumnStochasticMatrix B;
  B.entries = Eigen::MatrixXd::Zero(n, n);
  B.min_positive = 1.0;
  for (int i = 0; i < n; ++i) {
    const auto& out = g.out_neighbors(i);
    const double w = 1.0 / static_cast<double>(out.size() + 1);
    B.entries(i, i) = w;
    for (int j : out) B.entries(j, i) = w;
    B.min_positive = std::min(B.min_positive, w);
  }
  return B;
}

std::vector<Eigen::VectorXd> pi_sequence(std::span<const ColumnStochasticMatrix> Bs, int n) {
  std::vector<Eigen::VectorXd> pis;
  pis.reserve(Bs.size() + 1);
  pis.push_back(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
  for (const auto& B : Bs) {
    if (B.entries.rows() != n || B.entries.cols() != n)
      throw std::invalid_argument("pi_sequence: dimension mismatch");
    pis.push_back(B.entries * pis.back());
  }
  return pis;
}

std::vector<Eigen::VectorXd> pi_sequence(std::span<const ColumnStochasticMatrix> Bs) {
  if (Bs.empty()) throw std::invalid_argument("pi_sequence: need at least one matrix or an explicit n");
  return pi_sequence(Bs, static_cast<int>(Bs.front().entries.rows()));
}

std::vector<Eigen::VectorXd> phi_sequence(std::span<const RowStochasticMatrix> As,
                                          const Eigen::VectorXd& terminal) {
  const auto K = As.size();
  std::vector<Eigen::VectorXd> phis(K + 1);
  phis[K] = terminal;
  for (std::size_t k = K; k-- > 0;) {
    const auto& A = As[k].entries;
    if (A.rows() != terminal.size() || A.cols() != terminal.size())
      throw std::invalid_argument("phi_sequence: dimension mismatch");
    phis[k] = A.transpose() * phis[k + 1];
  }
  return phis;
}

std::vector<Eigen::VectorXd> phi_sequence(std::span<const RowStochasticMatrix> As) {
  if (As.empty()) throw std::invalid_argument("phi_sequence: need at least one matrix");
  const auto n = As.front().entries.rows();
  return phi_sequence(As, Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

MixingSequence build_mixing_sequence(const DigraphSequence& graphs, int horizon) {
  if (graphs.graphs.empty()) throw std::invalid_argument("build_mixing_sequence: empty graph sequence");
  MixingSequence seq;
  seq.a_min = 1.0;
  seq.b_min = 1.0;
  seq.A.reserve(static_cast<std::size_t>(horizon));
  seq.B.reserve(static_cast<std::size_t>(horizon));
  for (long k = 0; k < horizon; ++k) {
    const Digraph& g = graphs.at(k);
    seq.A.push_back(build_row_stochastic(g));
    seq.B.push_back(build_column_stochastic(g));
    seq.a_min = std::min(seq.a_min, seq.A.back().min_positive);
    seq.b_min = std::min(seq.b_min, seq.B.back().min_positive);
    const bool sc = is_strongly_connected(g);
    seq.connected.push_back(sc);
    seq.metrics.push_back(sc ? graph_metrics(g) : GraphMetrics{});
  }
  const int n = graphs.node_count();
  seq.pi = pi_sequence(seq.B, n);
  seq.phi = phi_sequence(seq.A, Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
  return seq;
}

}  // namespace abpp
