#pragma once

#include <array>

#include "segcn/bundle.hpp"

namespace segcn {

// Intra-class wiring on local vertices 1..5. Vertex 1 is the labeled node and
// vertex 5 the remote one: it sits three hops away and reaches vertex 1 along
// four simple paths.
inline constexpr std::array<Edge, 6> kNode5Topology = {
    Edge{1, 2}, Edge{2, 3}, Edge{3, 4}, Edge{4, 5}, Edge{2, 4}, Edge{3, 5}};

inline constexpr std::size_t kNode5PerClass = 5;

// Global id of local vertex `local` (1-based) in class `cls`.
constexpr NodeId node5_id(std::size_t cls, std::size_t local) {
  return static_cast<NodeId>(cls * kNode5PerClass + (local - 1));
}

// Builds the Node5 toy dataset from Cora: for every class, the five
// lowest-id nodes of that class, wired by kNode5Topology. Local vertex 1 of
// each class forms the training set; the other 28 nodes are the test set and
// there is no validation set.
GraphBundle build_node5(const GraphBundle& cora);

}  // namespace segcn
