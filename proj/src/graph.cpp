#include "segcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace segcn {

UndirectedGraph::UndirectedGraph(std::size_t num_nodes)
    : num_nodes_(num_nodes), offsets_(num_nodes + 1, 0) {}

UndirectedGraph UndirectedGraph::from_edges(std::size_t num_nodes, std::span<const Edge> edges) {
  std::vector<std::uint64_t> degree(num_nodes + 1, 0);
  for (const auto& [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes) {
      throw std::invalid_argument("UndirectedGraph: edge (" + std::to_string(u) + "," +
                                  std::to_string(v) + ") out of range");
    }
    if (u == v) {
      throw std::invalid_argument("UndirectedGraph: self-loop at node " + std::to_string(u));
    }
    ++degree[u + 1];
    ++degree[v + 1];
  }
  for (std::size_t i = 0; i < num_nodes; ++i) degree[i + 1] += degree[i];

  std::vector<NodeId> scratch(degree.back());
  std::vector<std::uint64_t> fill(degree.begin(), degree.end() - 1);
  for (const auto& [u, v] : edges) {
    scratch[fill[u]++] = v;
    scratch[fill[v]++] = u;
  }

  UndirectedGraph g(num_nodes);
  g.neighbors_.reserve(scratch.size());
  for (std::size_t u = 0; u < num_nodes; ++u) {
    auto first = scratch.begin() + static_cast<std::ptrdiff_t>(degree[u]);
    auto last = scratch.begin() + static_cast<std::ptrdiff_t>(degree[u + 1]);
    std::sort(first, last);
    last = std::unique(first, last);
    g.neighbors_.insert(g.neighbors_.end(), first, last);
    g.offsets_[u + 1] = g.neighbors_.size();
  }
  return g;
}

UndirectedGraph UndirectedGraph::from_csr(std::size_t num_nodes,
                                          std::vector<std::uint64_t> offsets,
                                          std::vector<NodeId> neighbors) {
  if (offsets.size() != num_nodes + 1 || offsets.front() != 0 ||
      offsets.back() != neighbors.size()) {
    throw std::invalid_argument("UndirectedGraph: inconsistent CSR arrays");
  }
  UndirectedGraph g;
  g.num_nodes_ = num_nodes;
  g.offsets_ = std::move(offsets);
  g.neighbors_ = std::move(neighbors);
  for (NodeId u = 0; u < num_nodes; ++u) {
    if (g.offsets_[u] > g.offsets_[u + 1]) {
      throw std::invalid_argument("UndirectedGraph: offsets not monotone");
    }
    const auto nbrs = g.neighbors(u);
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      const NodeId v = nbrs[k];
      if (v >= num_nodes) throw std::invalid_argument("UndirectedGraph: neighbor out of range");
      if (v == u) {
        throw std::invalid_argument("UndirectedGraph: self-loop at node " + std::to_string(u));
      }
      if (k > 0 && nbrs[k - 1] >= v) {
        throw std::invalid_argument("UndirectedGraph: neighbors of node " + std::to_string(u) +
                                    " not strictly increasing");
      }
      if (!g.has_edge(v, u)) {
        throw std::invalid_argument("UndirectedGraph: asymmetric edge (" + std::to_string(u) +
                                    "," + std::to_string(v) + ")");
      }
    }
  }
  return g;
}

bool UndirectedGraph::has_edge(NodeId u, NodeId v) const {
  const auto nbrs = neighbors(u);
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

std::vector<Edge> UndirectedGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (NodeId u = 0; u < num_nodes_; ++u) {
    for (NodeId v : neighbors(u)) {
      if (u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

NormalizedAdjacency normalize_adjacency(const UndirectedGraph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<double> inv_sqrt_deg(n);
  for (NodeId u = 0; u < n; ++u) {
    inv_sqrt_deg[u] = 1.0 / std::sqrt(static_cast<double>(g.degree(u) + 1));
  }

  std::vector<std::uint64_t> offsets(n + 1, 0);
  std::vector<std::uint32_t> columns;
  std::vector<double> values;
  columns.reserve(g.neighbor_array().size() + n);
  values.reserve(g.neighbor_array().size() + n);
  for (NodeId u = 0; u < n; ++u) {
    bool diagonal_done = false;
    for (NodeId v : g.neighbors(u)) {
      if (!diagonal_done && v > u) {
        columns.push_back(u);
        values.push_back(inv_sqrt_deg[u] * inv_sqrt_deg[u]);
        diagonal_done = true;
      }
      columns.push_back(v);
      values.push_back(inv_sqrt_deg[u] * inv_sqrt_deg[v]);
    }
    if (!diagonal_done) {
      columns.push_back(u);
      values.push_back(inv_sqrt_deg[u] * inv_sqrt_deg[u]);
    }
    offsets[u + 1] = columns.size();
  }
  return {SparseMatrix(n, n, std::move(offsets), std::move(columns), std::move(values))};
}

std::vector<Edge> drop_edges(const UndirectedGraph& g, double drop_prob, Rng& rng) {
  if (!(drop_prob >= 0.0 && drop_prob <= 1.0)) {
    throw std::invalid_argument("edge_drop_prob must lie in [0, 1], got " +
                                std::to_string(drop_prob));
  }
  std::vector<Edge> kept;
  kept.reserve(g.num_edges());
  for (const Edge& e : g.edges()) {
    if (drop_prob == 0.0 || !rng.bernoulli(drop_prob)) kept.push_back(e);
  }
  return kept;
}

UndirectedGraph perturb_graph(const UndirectedGraph& g, const PerturbConfig& cfg, Rng& rng) {
  std::vector<Edge> kept = drop_edges(g, cfg.edge_drop_prob, rng);

  std::vector<std::size_t> degree(g.num_nodes(), 0);
  for (const auto& [u, v] : kept) {
    ++degree[u];
    ++degree[v];
  }
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    if (degree[u] > 0 || g.degree(u) == 0) continue;
    const auto nbrs = g.neighbors(u);
    const NodeId v = nbrs[rng.below(nbrs.size())];
    kept.emplace_back(std::min(u, v), std::max(u, v));
    ++degree[u];
    ++degree[v];
  }
  return UndirectedGraph::from_edges(g.num_nodes(), kept);
}

}  // namespace segcn
