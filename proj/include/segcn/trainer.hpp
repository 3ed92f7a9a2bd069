#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "segcn/bundle.hpp"
#include "segcn/gcn.hpp"
#include "segcn/graph.hpp"
#include "segcn/losses.hpp"
#include "segcn/optim.hpp"
#include "segcn/self_training.hpp"

namespace segcn {

enum class SplitKind { kFixed, kRandom, kLabelCount };

struct SplitChoice {
  SplitKind kind = SplitKind::kFixed;
  std::size_t labels_per_class = 0;
  // Defaults to the run's global seed.
  std::optional<std::uint64_t> seed;
};

struct TrainConfig {
  SplitChoice split;
  Schedules schedules;
  AdamConfig adam;
  std::size_t hidden = kDefaultHidden;

  // Clean student pass (supervised term) and teacher.
  double student_dropout = 0.5;
  double teacher_dropout = 0.0;
  // Student pass feeding the consistency term when model perturbation is on.
  double perturbed_dropout = 0.8;

  // Mean Teacher machinery: consistency term and EMA teacher. Off means
  // vanilla GCN training, with the teacher mirroring the student.
  bool consistency = true;
  bool graph_perturbation = true;  // collapsed graph for the consistency pass
  bool model_perturbation = true;  // perturbed_dropout for the consistency pass
  bool feature_erase = false;      // random erasing of raw feature entries
  double feature_erase_rate = 0.1;
  PerturbConfig perturb;

  SelfTrainingMode self_training = SelfTrainingMode::kDual;
  bool pseudo_label_test_nodes = true;

  bool row_normalize = true;
  Reduction reduction = Reduction::kMean;
  std::uint64_t seed = 0;

  static TrainConfig baseline();
  static TrainConfig segcn();

  // Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  LossReport loss;
  double alpha = 0.0;
  double threshold = 0.0;
  double student_val_acc = 0.0;  // NaN when there is no validation set
  double teacher_val_acc = 0.0;
  std::size_t pseudo_count = 0;
  std::optional<double> pseudo_precision;
};

struct RunArtifacts {
  std::vector<EpochRecord> records;
  SplitSpec split;
  int best_epoch = -1;
  double best_val_acc = 0.0;
  GcnParams best_teacher;
  GcnParams best_student;
  double test_acc = 0.0;  // teacher at the validation peak
  double student_test_acc = 0.0;
  GcnParams final_teacher;
  GcnParams final_student;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs shared by every forward pass over a bundle.
struct PreparedData {
  NormalizedAdjacency a_hat;
  SparseMatrix features;
};

PreparedData prepare(const GraphBundle& bundle, bool row_normalize = true);

SplitSpec resolve_split(const TrainConfig& config, const GraphBundle& bundle);

using EpochCallback = std::function<void(const EpochRecord&)>;

RunArtifacts train(const TrainConfig& config, const GraphBundle& bundle,
                   const EpochCallback& on_epoch = {});

enum class SplitPart { kTrain, kValidation, kTest };

double accuracy(const DenseMatrix& probs, std::span<const int> labels,
                std::span<const NodeId> ids);

double evaluate(const GcnParams& params, const GraphBundle& bundle, const SplitSpec& split,
                SplitPart which, bool row_normalize = true);

// Activations of layer 1 (post-ReLU hidden, N x H) or layer 2 (logits, N x C),
// computed without dropout on the complete graph.
DenseMatrix layer_output(const GcnParams& params, const PreparedData& data, int layer);

// Tab-separated rows: node id, true label, activation values.
void export_embeddings(const GcnParams& params, const GraphBundle& bundle, int layer,
                       const std::filesystem::path& path, bool row_normalize = true);
void write_embeddings(const DenseMatrix& emb, std::span<const int> labels, std::ostream& out);

// One JSON object per line.
std::string to_json_line(const EpochRecord& record);

}  // namespace segcn
