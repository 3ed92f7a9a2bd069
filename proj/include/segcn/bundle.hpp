#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segcn/graph.hpp"
#include "segcn/matrix.hpp"
#include "segcn/rng.hpp"

namespace segcn {

// Label value for nodes without a ground-truth class. Such nodes may not
// appear in any split.
inline constexpr int kUnlabeled = 0xFFFF;

struct SplitSpec {
  std::vector<NodeId> train;
  std::vector<NodeId> validation;
  std::vector<NodeId> test;

  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

enum class FeatureEncoding : std::uint8_t { kDense = 0, kSparse = 1 };

// The on-disk unit of a dataset.
struct GraphBundle {
  std::string name;
  std::size_t num_classes = 0;
  SparseMatrix features;  // N x F
  std::vector<int> labels;
  UndirectedGraph graph;
  SplitSpec fixed_split;
  FeatureEncoding encoding = FeatureEncoding::kSparse;

  std::size_t num_nodes() const noexcept { return labels.size(); }
  std::size_t num_features() const noexcept { return features.cols(); }

  // Throws std::invalid_argument describing the first broken invariant.
  void validate() const;
};

class BundleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary "SEGB1" container, little-endian:
//   magic "SEGB1"
//   u16 name length, name bytes
//   u64 N, u64 F, u64 C, u64 unordered edge count
//   graph CSR: (N+1) x u64 offsets, 2E x u32 neighbor ids
//   u8 feature encoding; dense: N*F x f64 row-major;
//     sparse: (N+1) x u64 offsets, nnz x u32 columns, nnz x f64 values
//   N x u16 labels (0xFFFF = unlabeled)
//   train, validation, test: u64 count then count x u32 ids
//   u32 CRC-32 of every preceding byte
std::vector<std::uint8_t> encode_bundle(const GraphBundle& bundle);
GraphBundle decode_bundle(const std::vector<std::uint8_t>& bytes);

GraphBundle load_bundle(const std::filesystem::path& path);
void write_bundle(const GraphBundle& bundle, const std::filesystem::path& path);

// Reference statistics of the benchmark datasets.
struct DatasetStats {
  std::string name;
  std::size_t nodes;
  std::size_t edges;
  std::size_t classes;
  std::size_t features;
  // Unordered-pair count after deduplicating the public adjacency lists;
  // the headline edge counts tally raw citation links.
  std::size_t deduplicated_edges;
};

std::optional<DatasetStats> known_dataset_stats(const std::string& name);

// Checks bundle dimensions against the reference statistics when the bundle
// name is a known benchmark; no-op otherwise.
void check_known_stats(const GraphBundle& bundle);

// Scales each nonzero row to sum to 1; all-zero rows stay zero.
SparseMatrix row_normalize_features(const SparseMatrix& x);
DenseMatrix row_normalize_features(const DenseMatrix& x);

// Uniform, unstratified split: 20*C train, 500 validation, 1000 test.
SplitSpec make_random_split(const GraphBundle& bundle, Rng& rng);

// Random 500 validation and 1000 test nodes, then labels_per_class train nodes
// drawn from every class among the remainder.
SplitSpec make_label_count_split(const GraphBundle& bundle, std::size_t labels_per_class,
                                 Rng& rng);

inline constexpr std::size_t kValidationSize = 500;
inline constexpr std::size_t kTestSize = 1000;
inline constexpr std::size_t kTrainPerClass = 20;

}  // namespace segcn
