#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "segcn/matrix.hpp"
#include "segcn/rng.hpp"

namespace segcn {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

// Simple undirected graph in CSR form with both directions materialized.
// No self-loops, no duplicate pairs, neighbor lists sorted.
class UndirectedGraph {
 public:
  UndirectedGraph() = default;
  explicit UndirectedGraph(std::size_t num_nodes);

  // Builds from an unordered edge list. Pairs are symmetrized and deduplicated;
  // self-loops and out-of-range ids are rejected.
  static UndirectedGraph from_edges(std::size_t num_nodes, std::span<const Edge> edges);

  // Adopts raw CSR arrays after validating symmetry, ordering, and absence of
  // self-loops.
  static UndirectedGraph from_csr(std::size_t num_nodes, std::vector<std::uint64_t> offsets,
                                  std::vector<NodeId> neighbors);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  // Number of unordered pairs.
  std::size_t num_edges() const noexcept { return neighbors_.size() / 2; }

  std::size_t degree(NodeId u) const { return offsets_[u + 1] - offsets_[u]; }
  std::span<const NodeId> neighbors(NodeId u) const {
    return {neighbors_.data() + offsets_[u], degree(u)};
  }
  bool has_edge(NodeId u, NodeId v) const;

  // Unordered pairs with u < v, sorted lexicographically.
  std::vector<Edge> edges() const;

  const std::vector<std::uint64_t>& offsets() const noexcept { return offsets_; }
  const std::vector<NodeId>& neighbor_array() const noexcept { return neighbors_; }

  friend bool operator==(const UndirectedGraph&, const UndirectedGraph&) = default;

 private:
  std::size_t num_nodes_ = 0;
  std::vector<std::uint64_t> offsets_{0};
  std::vector<NodeId> neighbors_;
};

// D^{-1/2} (A + I) D^{-1/2}, with D the degree matrix of A + I.
struct NormalizedAdjacency {
  SparseMatrix matrix;

  std::size_t size() const noexcept { return matrix.rows(); }
};

NormalizedAdjacency normalize_adjacency(const UndirectedGraph& g);

struct PerturbConfig {
  double edge_drop_prob = 0.3;
  bool resample_each_epoch = true;
  std::uint64_t seed = 0;
};

// Independent Bernoulli(p) deletion of each unordered edge, before repair.
// Returns the surviving pairs (u < v).
std::vector<Edge> drop_edges(const UndirectedGraph& g, double drop_prob, Rng& rng);

// Graph collapse: drop edges independently, then give every node that lost all
// of its edges back one uniformly chosen original incident edge. Nodes are
// repaired in increasing id order.
UndirectedGraph perturb_graph(const UndirectedGraph& g, const PerturbConfig& cfg, Rng& rng);

}  // namespace segcn
