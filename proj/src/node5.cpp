#include "segcn/node5.hpp"

#include <stdexcept>
#include <string>

namespace segcn {

GraphBundle build_node5(const GraphBundle& cora) {
  const std::size_t classes = cora.num_classes;
  std::vector<std::vector<NodeId>> members(classes);
  for (NodeId i = 0; i < cora.num_nodes(); ++i) {
    const int y = cora.labels[i];
    if (y == kUnlabeled) continue;
    auto& m = members[static_cast<std::size_t>(y)];
    if (m.size() < kNode5PerClass) m.push_back(i);
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (members[c].size() < kNode5PerClass) {
      throw std::invalid_argument("build_node5: class " + std::to_string(c) + " has only " +
                                  std::to_string(members[c].size()) + " nodes");
    }
  }

  const std::size_t n = classes * kNode5PerClass;
  const auto& fo = cora.features.offsets();
  const auto& fc = cora.features.columns();
  const auto& fv = cora.features.values();
  std::vector<std::uint64_t> offsets{0};
  std::vector<std::uint32_t> columns;
  std::vector<double> values;
  std::vector<Edge> edges;
  GraphBundle out;
  out.name = "node5";
  out.num_classes = classes;
  out.encoding = cora.encoding;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t local = 1; local <= kNode5PerClass; ++local) {
      const NodeId src = members[c][local - 1];
      columns.insert(columns.end(), fc.begin() + static_cast<std::ptrdiff_t>(fo[src]),
                     fc.begin() + static_cast<std::ptrdiff_t>(fo[src + 1]));
      values.insert(values.end(), fv.begin() + static_cast<std::ptrdiff_t>(fo[src]),
                    fv.begin() + static_cast<std::ptrdiff_t>(fo[src + 1]));
      offsets.push_back(columns.size());
      out.labels.push_back(static_cast<int>(c));
      if (local == 1) {
        out.fixed_split.train.push_back(node5_id(c, local));
      } else {
        out.fixed_split.test.push_back(node5_id(c, local));
      }
    }
    for (const auto& [a, b] : kNode5Topology) edges.emplace_back(node5_id(c, a), node5_id(c, b));
  }
  out.features = SparseMatrix(n, cora.num_features(), std::move(offsets), std::move(columns),
                              std::move(values));
  out.graph = UndirectedGraph::from_edges(n, edges);
  out.validate();
  return out;
}

}  // namespace segcn
