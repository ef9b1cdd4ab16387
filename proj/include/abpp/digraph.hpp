#ifndef ABPP_DIGRAPH_HPP
#define ABPP_DIGRAPH_HPP

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace abpp {

// Directed graph on nodes 0..n-1 with no self-loops.  Edges are kept
// sorted (by source, then target) so every downstream computation iterates
// them in a fixed order.
class Digraph {
 public:
  Digraph(int n, std::vector<std::pair<int, int>> edges);

  static Digraph complete(int n);
  // Directed cycle visiting the nodes in the given order.
  static Digraph ring(const std::vector<int>& order);

  int node_count() const { return n_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& out_neighbors(int i) const { return out_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& in_neighbors(int i) const { return in_[static_cast<std::size_t>(i)]; }
  bool has_edge(int from, int to) const;

  bool operator==(const Digraph& other) const {
    return n_ == other.n_ && edges_ == other.edges_;
  }

 private:
  int n_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> out_;
  std::vector<std::vector<int>> in_;
};

// Marks an ordered pair with no directed path in distance matrices.
inline constexpr int kUnreachable = -1;

bool is_strongly_connected(const Digraph& g);

// Entry (j,l) is the minimum edge count of a directed path j->l,
// kUnreachable if none exists.  Diagonal is zero.
Eigen::MatrixXi all_pairs_distances(const Digraph& g);

struct GraphMetrics {
  int diameter = 0;           // D(G)
  int max_edge_utility = 0;   // K(G)
  Eigen::MatrixXi distances;  // shortest-path lengths
};

// Requires strong connectivity; throws ConnectivityError otherwise.
GraphMetrics graph_metrics(const Digraph& g);
int diameter(const Digraph& g);
int max_edge_utility(const Digraph& g);

struct ConnectivityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SequenceKind {
  kRandomSC,      // per-round permutation ring plus random extra edges
  kStatic,        // one graph repeated every round
  kCPartitioned,  // one strongly connected graph split across C rounds
};

SequenceKind parse_sequence_kind(const std::string& name);
std::string to_string(SequenceKind kind);

struct DigraphSequence {
  std::vector<Digraph> graphs;
  int window = 1;  // C: unions of this many consecutive rounds are strongly connected

  int node_count() const { return graphs.empty() ? 0 : graphs.front().node_count(); }
  int horizon() const { return static_cast<int>(graphs.size()); }
  // Round-k graph, cycling past the stored horizon.
  const Digraph& at(long k) const {
    return graphs[static_cast<std::size_t>(k % static_cast<long>(graphs.size()))];
  }
};

// Union of the edge sets of graphs[first..first+count).
Digraph union_graph(const DigraphSequence& seq, int first, int count);

struct SequenceParams {
  int n = 2;
  SequenceKind kind = SequenceKind::kRandomSC;
  int horizon = 1;
  int window = 1;
  std::uint64_t seed = 0;
  // Probability of each extra (non-ring) ordered pair being added per round.
  double extra_edge_prob = 0.15;
};

DigraphSequence generate_sequence(const SequenceParams& params);

// Line-oriented format: `round <k>` header, then one `j l` edge per line.
DigraphSequence read_sequence(std::istream& in);
DigraphSequence read_sequence_file(const std::string& path);
void write_sequence(std::ostream& out, const DigraphSequence& seq);

}  // namespace abpp

#endif  // ABPP_DIGRAPH_HPP
