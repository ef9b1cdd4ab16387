#include "abpp/digraph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>

#include "abpp/rng.hpp"

namespace abpp {

Digraph::Digraph(int n, std::vector<std::pair<int, int>> edges)
    : n_(n), edges_(std::move(edges)) {
  if (n_ < 1) throw std::invalid_argument("Digraph: node count must be positive");
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  out_.resize(static_cast<std::size_t>(n_));
  in_.resize(static_cast<std::size_t>(n_));
  for (const auto& [j, l] : edges_) {
    if (j < 0 || j >= n_ || l < 0 || l >= n_)
      throw std::invalid_argument("Digraph: edge endpoint out of range");
    if (j == l) throw std::invalid_argument("Digraph: self-loops are not allowed");
    out_[static_cast<std::size_t>(j)].push_back(l);
    in_[static_cast<std::size_t>(l)].push_back(j);
  }
}

Digraph Digraph::complete(int n) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1));
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < n; ++l)
      if (j != l) edges.emplace_back(j, l);
  return Digraph(n, std::move(edges));
}

Digraph Digraph::ring(const std::vector<int>& order) {
  const int n = static_cast<int>(order.size());
  if (n < 2) throw std::invalid_argument("Digraph::ring: need at least 2 nodes");
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) edges.emplace_back(order[static_cast<std::size_t>(i)],
                                                 order[static_cast<std::size_t>((i + 1) % n)]);
  return Digraph(n, std::move(edges));
}

bool Digraph::has_edge(int from, int to) const {
  return std::binary_search(edges_.begin(), edges_.end(), std::make_pair(from, to));
}

namespace {

// Single-source BFS distances along out-edges.
std::vector<int> bfs_distances(const Digraph& g, int source) {
  std::vector<int> dist(static_cast<std::size_t>(g.node_count()), kUnreachable);
  std::deque<int> queue{source};
  dist[static_cast<std::size_t>(source)] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : g.out_neighbors(u)) {
      if (dist[static_cast<std::size_t>(v)] == kUnreachable) {
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

}  // namespace

bool is_strongly_connected(const Digraph& g) {
  const int n = g.node_count();
  if (n == 1) return true;
  const auto forward = bfs_distances(g, 0);
  if (std::count(forward.begin(), forward.end(), kUnreachable) > 0) return false;
  // Reverse reachability: BFS over in-edges from node 0.
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::deque<int> queue{0};
  seen[0] = true;
  int visited = 1;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : g.in_neighbors(u)) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = true;
        ++visited;
        queue.push_back(v);
      }
    }
  }
  return visited == n;
}

Eigen::MatrixXi all_pairs_distances(const Digraph& g) {
  const int n = g.node_count();
  Eigen::MatrixXi dist(n, n);
  for (int j = 0; j < n; ++j) {
    const auto row = bfs_distances(g, j);
    for (int l = 0; l < n; ++l) dist(j, l) = row[static_cast<std::size_t>(l)];
  }
  return dist;
}

GraphMetrics graph_metrics(const Digraph& g) {
  if (!is_strongly_connected(g))
    throw ConnectivityError("graph_metrics: graph is not strongly connected");
  GraphMetrics m;
  m.distances = all_pairs_distances(g);
  const int n = g.node_count();
  m.diameter = n == 1 ? 0 : m.distances.maxCoeff();
  // K(G): an edge (u,v) lies on some shortest j->l path iff
  // d(j,u) + 1 + d(v,l) = d(j,l); coverings pick one path per ordered pair
  // independently, so the max over coverings is the per-edge pair count.
  int best = 0;
  for (const auto& [u, v] : g.edges()) {
    int count = 0;
    for (int j = 0; j < n; ++j) {
      if (m.distances(j, u) == kUnreachable) continue;
      for (int l = 0; l < n; ++l) {
        if (j == l) continue;
        if (m.distances(j, u) + 1 + m.distances(v, l) == m.distances(j, l)) ++count;
      }
    }
    best = std::max(best, count);
  }
  m.max_edge_utility = best;
  return m;
}

int diameter(const Digraph& g) { return graph_metrics(g).diameter; }

int max_edge_utility(const Digraph& g) { return graph_metrics(g).max_edge_utility; }

SequenceKind parse_sequence_kind(const std::string& name) {
  if (name == "random-sc") return SequenceKind::kRandomSC;
  if (name == "static") return SequenceKind::kStatic;
  if (name == "c-partitioned") return SequenceKind::kCPartitioned;
  throw std::invalid_argument("unknown graph sequence kind: " + name);
}

std::string to_string(SequenceKind kind) {
  switch (kind) {
    case SequenceKind::kRandomSC: return "random-sc";
    case SequenceKind::kStatic: return "static";
    case SequenceKind::kCPartitioned: return "c-partitioned";
  }
  return "?";
}

Digraph union_graph(const DigraphSequence& seq, int first, int count) {
  std::vector<std::pair<int, int>> edges;
  for (int k = first; k < first + count; ++k) {
    const auto& g = seq.graphs[static_cast<std::size_t>(k)];
    edges.insert(edges.end(), g.edges().begin(), g.edges().end());
  }
  return Digraph(seq.node_count(), std::move(edges));
}

namespace {

// Permutation ring plus independent extra edges; strongly connected by
// construction.
Digraph random_sc_graph(int n, double extra_edge_prob, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  auto g = Digraph::ring(order);
  std::vector<std::pair<int, int>> edges = g.edges();
  for (int j = 0; j < n; ++j) {
    for (int l = 0; l < n; ++l) {
      if (j == l) continue;
      if (rng.uniform() < extra_edge_prob) edges.emplace_back(j, l);
    }
  }
  return Digraph(n, std::move(edges));
}

}  // namespace

DigraphSequence generate_sequence(const SequenceParams& params) {
  if (params.n < 2) throw std::invalid_argument("generate_sequence: n must be >= 2");
  if (params.horizon < 1) throw std::invalid_argument("generate_sequence: horizon must be >= 1");
  if (params.window < 1) throw std::invalid_argument("generate_sequence: window must be >= 1");
  Rng rng(params.seed);
  DigraphSequence seq;
  seq.window = params.window;
  switch (params.kind) {
    case SequenceKind::kRandomSC: {
      seq.window = 1;
      for (int k = 0; k < params.horizon; ++k)
        seq.graphs.push_back(random_sc_graph(params.n, params.extra_edge_prob, rng));
      break;
    }
    case SequenceKind::kStatic: {
      seq.window = 1;
      const auto g = random_sc_graph(params.n, params.extra_edge_prob, rng);
      seq.graphs.assign(static_cast<std::size_t>(params.horizon), g);
      break;
    }
    case SequenceKind::kCPartitioned: {
      const int C = params.window;
      const auto base = random_sc_graph(params.n, params.extra_edge_prob, rng);
      if (static_cast<int>(base.edges().size()) < C)
        throw std::invalid_argument(
            "generate_sequence: c-partitioned needs at least C edges");
      // Round-robin edge split; the union over any C consecutive rounds of
      // the periodic pattern is the full edge set.
      std::vector<std::vector<std::pair<int, int>>> parts(static_cast<std::size_t>(C));
      int slot = 0;
      for (const auto& e : base.edges()) {
        parts[static_cast<std::size_t>(slot)].push_back(e);
        slot = (slot + 1) % C;
      }
      for (int k = 0; k < params.horizon; ++k)
        seq.graphs.emplace_back(params.n, parts[static_cast<std::size_t>(k % C)]);
      break;
    }
  }
  return seq;
}

DigraphSequence read_sequence(std::istream& in) {
  std::vector<std::vector<std::pair<int, int>>> rounds;
  std::string line;
  int line_no = 0;
  int max_node = -1;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;  // blank line
    if (first == "round") {
      int k = -1;
      if (!(ls >> k) || k != static_cast<int>(rounds.size()))
        throw std::runtime_error("graph file line " + std::to_string(line_no) +
                                 ": expected consecutive round headers");
      rounds.emplace_back();
    } else {
      if (rounds.empty())
        throw std::runtime_error("graph file line " + std::to_string(line_no) +
                                 ": edge before first round header");
      int j = 0, l = 0;
      std::istringstream es(line);
      if (!(es >> j >> l))
        throw std::runtime_error("graph file line " + std::to_string(line_no) +
                                 ": expected `j l` edge");
      rounds.back().emplace_back(j, l);
      max_node = std::max({max_node, j, l});
    }
  }
  if (rounds.empty()) throw std::runtime_error("graph file: no rounds");
  DigraphSequence seq;
  seq.window = 1;
  const int n = max_node + 1;
  for (auto& edges : rounds) seq.graphs.emplace_back(n, std::move(edges));
  return seq;
}

DigraphSequence read_sequence_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file: " + path);
  return read_sequence(in);
}

void write_sequence(std::ostream& out, const DigraphSequence& seq) {
  for (int k = 0; k < seq.horizon(); ++k) {
    out << "round " << k << "\n";
    for (const auto& [j, l] : seq.graphs[static_cast<std::size_t>(k)].edges())
      out << j << " " << l << "\n";
  }
}

}  // namespace abpp
