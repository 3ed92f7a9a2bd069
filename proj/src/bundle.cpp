#include "segcn/bundle.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

namespace segcn {
namespace {

constexpr char kMagic[5] = {'S', 'E', 'G', 'B', '1'};

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    if constexpr (std::is_floating_point_v<T>) {
      put(std::bit_cast<std::uint64_t>(static_cast<double>(value)));
    } else {
      using U = std::make_unsigned_t<T>;
      auto u = static_cast<U>(value);
      for (std::size_t i = 0; i < sizeof(T); ++i) {
        bytes_.push_back(static_cast<std::uint8_t>(u & 0xFF));
        if constexpr (sizeof(T) > 1) u >>= 8;
      }
    }
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  template <typename T>
  T get() {
    if constexpr (std::is_floating_point_v<T>) {
      return std::bit_cast<double>(get<std::uint64_t>());
    } else {
      need(sizeof(T));
      std::make_unsigned_t<T> u = 0;
      for (std::size_t i = 0; i < sizeof(T); ++i) {
        u |= static_cast<std::make_unsigned_t<T>>(
            static_cast<std::make_unsigned_t<T>>(data_[pos_ + i]) << (8 * i));
      }
      pos_ += sizeof(T);
      return static_cast<T>(u);
    }
  }

  template <typename T>
  std::vector<T> get_array(std::uint64_t count) {
    if (count > (size_ - pos_) / sizeof(T)) throw BundleError("bundle: truncated array");
    std::vector<T> out(count);
    for (auto& v : out) v = get<T>();
    return out;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (size_ - pos_ < n) throw BundleError("bundle: unexpected end of data");
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void put_indices(ByteWriter& w, const std::vector<NodeId>& ids) {
  w.put<std::uint64_t>(ids.size());
  for (NodeId id : ids) w.put<std::uint32_t>(id);
}

std::vector<NodeId> pick_without(std::vector<NodeId> pool, std::size_t count, Rng& rng) {
  // Partial Fisher-Yates over the pool.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

std::vector<NodeId> labeled_nodes(const GraphBundle& bundle) {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < bundle.num_nodes(); ++i) {
    if (bundle.labels[i] != kUnlabeled) out.push_back(i);
  }
  return out;
}

std::vector<NodeId> remove_ids(const std::vector<NodeId>& pool, const std::vector<NodeId>& a,
                               const std::vector<NodeId>& b) {
  std::vector<std::uint8_t> taken(*std::max_element(pool.begin(), pool.end()) + 1, 0);
  for (NodeId i : a) if (i < taken.size()) taken[i] = 1;
  for (NodeId i : b) if (i < taken.size()) taken[i] = 1;
  std::vector<NodeId> out;
  for (NodeId i : pool) if (!taken[i]) out.push_back(i);
  return out;
}

}  // namespace

void GraphBundle::validate() const {
  const std::size_t n = labels.size();
  if (features.rows() != n) {
    throw std::invalid_argument("bundle: feature rows " + std::to_string(features.rows()) +
                                " != node count " + std::to_string(n));
  }
  if (graph.num_nodes() != n) {
    throw std::invalid_argument("bundle: graph nodes " + std::to_string(graph.num_nodes()) +
                                " != node count " + std::to_string(n));
  }
  if (num_classes == 0) throw std::invalid_argument("bundle: zero classes");
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != kUnlabeled && (labels[i] < 0 || labels[i] >= static_cast<int>(num_classes))) {
      throw std::invalid_argument("bundle: label " + std::to_string(labels[i]) + " of node " +
                                  std::to_string(i) + " outside [0, C)");
    }
  }
  std::vector<std::uint8_t> seen(n, 0);
  for (const auto* part : {&fixed_split.train, &fixed_split.validation, &fixed_split.test}) {
    for (NodeId id : *part) {
      if (id >= n) throw std::invalid_argument("bundle: split index out of range");
      if (seen[id]) throw std::invalid_argument("bundle: split sets overlap at node " +
                                                std::to_string(id));
      if (labels[id] == kUnlabeled) {
        throw std::invalid_argument("bundle: unlabeled node " + std::to_string(id) + " in split");
      }
      seen[id] = 1;
    }
  }
  for (double v : features.values()) {
    if (!std::isfinite(v)) throw std::invalid_argument("bundle: non-finite feature value");
  }
}

std::vector<std::uint8_t> encode_bundle(const GraphBundle& bundle) {
  bundle.validate();
  ByteWriter w;
  w.put_bytes(kMagic, sizeof(kMagic));
  if (bundle.name.size() > 0xFFFF) throw BundleError("bundle: name too long");
  w.put<std::uint16_t>(static_cast<std::uint16_t>(bundle.name.size()));
  w.put_bytes(bundle.name.data(), bundle.name.size());
  const std::size_t n = bundle.num_nodes();
  w.put<std::uint64_t>(n);
  w.put<std::uint64_t>(bundle.num_features());
  w.put<std::uint64_t>(bundle.num_classes);
  w.put<std::uint64_t>(bundle.graph.num_edges());

  for (std::uint64_t off : bundle.graph.offsets()) w.put<std::uint64_t>(off);
  for (NodeId v : bundle.graph.neighbor_array()) w.put<std::uint32_t>(v);

  w.put<std::uint8_t>(static_cast<std::uint8_t>(bundle.encoding));
  if (bundle.encoding == FeatureEncoding::kDense) {
    const DenseMatrix dense = bundle.features.to_dense();
    for (double v : dense.values()) w.put<double>(v);
  } else {
    for (std::uint64_t off : bundle.features.offsets()) w.put<std::uint64_t>(off);
    for (std::uint32_t c : bundle.features.columns()) w.put<std::uint32_t>(c);
    for (double v : bundle.features.values()) w.put<double>(v);
  }

  for (int label : bundle.labels) w.put<std::uint16_t>(static_cast<std::uint16_t>(label));
  put_indices(w, bundle.fixed_split.train);
  put_indices(w, bundle.fixed_split.validation);
  put_indices(w, bundle.fixed_split.test);

  const std::uint32_t crc = crc32_of(w.bytes().data(), w.bytes().size());
  w.put<std::uint32_t>(crc);
  return std::move(w.bytes());
}

GraphBundle decode_bundle(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) + 4) throw BundleError("bundle: file too short");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw BundleError("bundle: bad magic (expected SEGB1)");
  }
  const std::size_t body = bytes.size() - 4;
  {
    ByteReader tail(bytes.data() + body, 4);
    const auto stored = tail.get<std::uint32_t>();
    const auto actual = crc32_of(bytes.data(), body);
    if (stored != actual) {
      throw BundleError("bundle: checksum mismatch (stored " + std::to_string(stored) +
                        ", computed " + std::to_string(actual) + ")");
    }
  }

  ByteReader r(bytes.data(), body);
  r.get_string(sizeof(kMagic));
  GraphBundle b;
  b.name = r.get_string(r.get<std::uint16_t>());
  const auto n = r.get<std::uint64_t>();
  const auto f = r.get<std::uint64_t>();
  const auto c = r.get<std::uint64_t>();
  const auto e = r.get<std::uint64_t>();
  if (n > 0xFFFFFFFFULL || f > 0xFFFFFFFFULL) throw BundleError("bundle: dimensions too large");
  b.num_classes = c;

  auto graph_offsets = r.get_array<std::uint64_t>(n + 1);
  if (graph_offsets.back() != 2 * e) {
    throw BundleError("bundle: header edge count " + std::to_string(e) +
                      " does not match adjacency size " + std::to_string(graph_offsets.back()));
  }
  auto neighbors = r.get_array<std::uint32_t>(graph_offsets.back());

  const auto encoding = r.get<std::uint8_t>();
  try {
    b.graph = UndirectedGraph::from_csr(n, std::move(graph_offsets), std::move(neighbors));
    if (encoding == static_cast<std::uint8_t>(FeatureEncoding::kDense)) {
      b.encoding = FeatureEncoding::kDense;
      if (f != 0 && n > (bytes.size() / 8) / f) throw BundleError("bundle: truncated features");
      auto values = r.get_array<double>(n * f);
      b.features = SparseMatrix::from_dense(DenseMatrix(n, f, std::move(values)));
    } else if (encoding == static_cast<std::uint8_t>(FeatureEncoding::kSparse)) {
      b.encoding = FeatureEncoding::kSparse;
      auto offsets = r.get_array<std::uint64_t>(n + 1);
      auto columns = r.get_array<std::uint32_t>(offsets.back());
      auto values = r.get_array<double>(offsets.back());
      b.features = SparseMatrix(n, f, std::move(offsets), std::move(columns), std::move(values));
    } else {
      throw BundleError("bundle: unknown feature encoding " + std::to_string(encoding));
    }
  } catch (const std::invalid_argument& ex) {
    throw BundleError(std::string("bundle: ") + ex.what());
  }

  auto labels = r.get_array<std::uint16_t>(n);
  b.labels.assign(labels.begin(), labels.end());
  b.fixed_split.train = r.get_array<std::uint32_t>(r.get<std::uint64_t>());
  b.fixed_split.validation = r.get_array<std::uint32_t>(r.get<std::uint64_t>());
  b.fixed_split.test = r.get_array<std::uint32_t>(r.get<std::uint64_t>());
  if (r.position() != body) throw BundleError("bundle: trailing bytes before checksum");

  try {
    b.validate();
  } catch (const std::invalid_argument& ex) {
    throw BundleError(ex.what());
  }
  return b;
}

GraphBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BundleError("cannot open bundle " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  GraphBundle b = decode_bundle(bytes);
  check_known_stats(b);
  return b;
}

void write_bundle(const GraphBundle& bundle, const std::filesystem::path& path) {
  const auto bytes = encode_bundle(bundle);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw BundleError("cannot write bundle " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw BundleError("write failed for " + path.string());
}

std::optional<DatasetStats> known_dataset_stats(const std::string& name) {
  static const DatasetStats kTable[] = {
      {"node5", 35, 42, 7, 1433, 42},
      {"citeseer", 3327, 4732, 6, 3703, 4552},
      {"cora", 2708, 5429, 7, 1433, 5278},
      {"pubmed", 19717, 44338, 3, 500, 44324},
  };
  for (const auto& s : kTable) {
    if (s.name == name) return s;
  }
  return std::nullopt;
}

void check_known_stats(const GraphBundle& bundle) {
  const auto stats = known_dataset_stats(bundle.name);
  if (!stats) return;
  std::string diff;
  auto check = [&](const char* what, std::size_t expected, std::size_t actual) {
    if (expected != actual) {
      diff += std::string(" ") + what + " expected " + std::to_string(expected) + " got " +
              std::to_string(actual) + ";";
    }
  };
  check("nodes", stats->nodes, bundle.num_nodes());
  check("classes", stats->classes, bundle.num_classes);
  check("features", stats->features, bundle.num_features());
  const std::size_t e = bundle.graph.num_edges();
  if (e != stats->edges && e != stats->deduplicated_edges) {
    diff += " edges expected " + std::to_string(stats->edges) + " (or " +
            std::to_string(stats->deduplicated_edges) + " deduplicated) got " +
            std::to_string(e) + ";";
  }
  if (!diff.empty()) throw BundleError("bundle '" + bundle.name + "' statistics mismatch:" + diff);
}

SparseMatrix row_normalize_features(const SparseMatrix& x) {
  std::vector<double> values = x.values();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double sum = 0.0;
    for (std::uint64_t k = x.row_begin(r); k < x.row_end(r); ++k) {
      if (values[k] < 0.0) throw std::invalid_argument("row_normalize_features: negative entry");
      sum += values[k];
    }
    if (sum == 0.0) continue;
    for (std::uint64_t k = x.row_begin(r); k < x.row_end(r); ++k) values[k] /= sum;
  }
  return x.with_values(std::move(values));
}

DenseMatrix row_normalize_features(const DenseMatrix& x) {
  return row_normalize_features(SparseMatrix::from_dense(x)).to_dense();
}

SplitSpec make_random_split(const GraphBundle& bundle, Rng& rng) {
  const std::size_t n_train = kTrainPerClass * bundle.num_classes;
  const std::size_t needed = n_train + kValidationSize + kTestSize;
  std::vector<NodeId> pool = labeled_nodes(bundle);
  if (pool.size() < needed) {
    throw std::invalid_argument("make_random_split: need " + std::to_string(needed) +
                                " labeled nodes, have " + std::to_string(pool.size()));
  }
  auto picked = pick_without(std::move(pool), needed, rng);
  SplitSpec s;
  s.train.assign(picked.begin(), picked.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(picked.begin() + static_cast<std::ptrdiff_t>(n_train),
                      picked.begin() + static_cast<std::ptrdiff_t>(n_train + kValidationSize));
  s.test.assign(picked.begin() + static_cast<std::ptrdiff_t>(n_train + kValidationSize),
                picked.end());
  return s;
}

SplitSpec make_label_count_split(const GraphBundle& bundle, std::size_t labels_per_class,
                                 Rng& rng) {
  std::vector<NodeId> pool = labeled_nodes(bundle);
  if (pool.size() < kValidationSize + kTestSize) {
    throw std::invalid_argument("make_label_count_split: too few labeled nodes");
  }
  auto held_out = pick_without(pool, kValidationSize + kTestSize, rng);
  SplitSpec s;
  s.validation.assign(held_out.begin(),
                      held_out.begin() + static_cast<std::ptrdiff_t>(kValidationSize));
  s.test.assign(held_out.begin() + static_cast<std::ptrdiff_t>(kValidationSize), held_out.end());

  const auto remainder = remove_ids(pool, s.validation, s.test);
  std::vector<std::vector<NodeId>> by_class(bundle.num_classes);
  for (NodeId i : remainder) by_class[static_cast<std::size_t>(bundle.labels[i])].push_back(i);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].size() < labels_per_class) {
      throw std::invalid_argument("make_label_count_split: class " + std::to_string(c) +
                                  " has only " + std::to_string(by_class[c].size()) +
                                  " nodes outside validation/test, need " +
                                  std::to_string(labels_per_class));
    }
    auto chosen = pick_without(std::move(by_class[c]), labels_per_class, rng);
    s.train.insert(s.train.end(), chosen.begin(), chosen.end());
  }
  return s;
}

}  // namespace segcn
