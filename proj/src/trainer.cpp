#include "segcn/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "segcn/numerics.hpp"

namespace segcn {
namespace {

// Sub-stream ids for derive_seed.
enum Stream : std::uint64_t { kInitStream = 1, kDropoutStream = 2, kPerturbStream = 3,
                              kSplitStream = 4 };

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

NodeMask mask_of(std::size_t n, std::span<const NodeId> ids) {
  NodeMask m(n, false);
  for (NodeId i : ids) m[i] = true;
  return m;
}

SparseMatrix erase_features(const SparseMatrix& x, double rate, Rng& rng) {
  std::vector<double> v = x.values();
  for (double& value : v) {
    if (rng.bernoulli(rate)) value = 0.0;
  }
  return x.with_values(std::move(v));
}

void check_loss(int epoch, const LossReport& loss, std::size_t pseudo) {
  if (std::isfinite(loss.total) && std::isfinite(loss.sup_loss) &&
      std::isfinite(loss.unsup_loss)) {
    return;
  }
  std::ostringstream msg;
  msg << "non-finite loss at epoch " << epoch << ": sup=" << loss.sup_loss
      << " unsup=" << loss.unsup_loss << " lambda=" << loss.lambda << " total=" << loss.total
      << " pseudo_labels=" << pseudo;
  throw TrainingError(msg.str());
}

}  // namespace

TrainConfig TrainConfig::baseline() {
  TrainConfig c;
  c.consistency = false;
  c.graph_perturbation = false;
  c.model_perturbation = false;
  c.feature_erase = false;
  c.self_training = SelfTrainingMode::kOff;
  return c;
}

TrainConfig TrainConfig::segcn() { return TrainConfig{}; }

void TrainConfig::validate() const {
  schedules.validate();
  auto rate_ok = [](double r) { return r >= 0.0 && r < 1.0; };
  if (!rate_ok(student_dropout) || !rate_ok(teacher_dropout) || !rate_ok(perturbed_dropout)) {
    throw std::invalid_argument("config: dropout rates must lie in [0, 1)");
  }
  if (teacher_dropout > student_dropout) {
    throw std::invalid_argument("config: teacher dropout must not exceed student dropout");
  }
  if (model_perturbation && perturbed_dropout < student_dropout) {
    throw std::invalid_argument("config: perturbed dropout must be at least the student dropout");
  }
  if (!(perturb.edge_drop_prob >= 0.0 && perturb.edge_drop_prob <= 1.0)) {
    throw std::invalid_argument("config: edge_drop_prob outside [0, 1]");
  }
  if (!(feature_erase_rate >= 0.0 && feature_erase_rate < 1.0)) {
    throw std::invalid_argument("config: feature_erase_rate outside [0, 1)");
  }
  if (!consistency && (graph_perturbation || model_perturbation || feature_erase ||
                       self_training != SelfTrainingMode::kOff)) {
    throw std::invalid_argument(
        "config: perturbations and self-training require the consistency (mean teacher) mode");
  }
  if (hidden == 0) throw std::invalid_argument("config: hidden size must be positive");
  if (split.kind == SplitKind::kLabelCount && split.labels_per_class == 0) {
    throw std::invalid_argument("config: label-count split needs labels_per_class > 0");
  }
}

PreparedData prepare(const GraphBundle& bundle, bool row_normalize) {
  return {normalize_adjacency(bundle.graph),
          row_normalize ? row_normalize_features(bundle.features) : bundle.features};
}

SplitSpec resolve_split(const TrainConfig& config, const GraphBundle& bundle) {
  const std::uint64_t seed = derive_seed(config.split.seed.value_or(config.seed), kSplitStream);
  switch (config.split.kind) {
    case SplitKind::kFixed:
      return bundle.fixed_split;
    case SplitKind::kRandom: {
      Rng rng(seed);
      return make_random_split(bundle, rng);
    }
    case SplitKind::kLabelCount: {
      Rng rng(seed);
      return make_label_count_split(bundle, config.split.labels_per_class, rng);
    }
  }
  throw std::logic_error("unreachable split kind");
}

double accuracy(const DenseMatrix& probs, std::span<const int> labels,
                std::span<const NodeId> ids) {
  if (ids.empty()) throw std::invalid_argument("accuracy: empty index set");
  const auto pred = row_argmax(probs);
  std::size_t correct = 0;
  for (NodeId i : ids) correct += pred[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(ids.size());
}

RunArtifacts train(const TrainConfig& config, const GraphBundle& bundle,
                   const EpochCallback& on_epoch) {
  config.validate();
  const std::size_t n = bundle.num_nodes();
  const PreparedData data = prepare(bundle, config.row_normalize);
  const NormalizedAdjacency& a_hat = data.a_hat;
  const SparseMatrix& x = data.features;

  RunArtifacts run;
  run.split = resolve_split(config, bundle);
  const SplitSpec& split = run.split;
  if (split.train.empty()) throw std::invalid_argument("train: empty training set");

  Rng init_rng(derive_seed(config.seed, kInitStream));
  Rng dropout_rng(derive_seed(config.seed, kDropoutStream));
  Rng perturb_rng(derive_seed(derive_seed(config.seed, kPerturbStream), config.perturb.seed));

  GcnParams student = init_params(bundle.num_features(), config.hidden, bundle.num_classes,
                                  init_rng);
  GcnParams teacher = student;
  AdamState adam = AdamState::zeros_like(student);

  const NodeMask all_nodes(n, true);
  NodeMask eligible(n, true);
  for (NodeId i : split.train) eligible[i] = false;
  for (NodeId i : split.validation) eligible[i] = false;
  if (!config.pseudo_label_test_nodes) {
    for (NodeId i : split.test) eligible[i] = false;
  }

  std::vector<int> targets(n, -1);
  for (NodeId i : split.train) targets[i] = bundle.labels[i];
  const NodeMask train_mask = mask_of(n, split.train);

  std::optional<NormalizedAdjacency> fixed_collapsed;
  PseudoLabelSet pseudo;
  DenseMatrix teacher_probs;

  const int epochs = config.schedules.total_epochs;
  run.records.reserve(static_cast<std::size_t>(epochs));
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const ScheduleValues sched = eval_schedules(epoch, config.schedules);
    const double lambda = config.consistency ? sched.lambda : 0.0;
    const double alpha = config.consistency ? sched.alpha : 0.0;

    // Supervised term on true labels plus this epoch's pseudo-labels.
    std::vector<int> sup_targets = targets;
    NodeMask sup_mask = train_mask;
    for (std::size_t k = 0; k < pseudo.size(); ++k) {
      sup_targets[pseudo.nodes[k]] = pseudo.classes[k];
      sup_mask[pseudo.nodes[k]] = true;
    }

    const ForwardTrace clean = forward(student, a_hat, x, config.student_dropout, dropout_rng);
    const LossValue ce = cross_entropy(clean.probs, sup_targets, sup_mask, config.reduction);
    GradParams grads = backward(clean, student, a_hat, x, ce.grad_logits);

    double unsup = 0.0;
    if (config.consistency) {
      // A dropout-free teacher pass equals last epoch's evaluation pass.
      if (config.teacher_dropout > 0.0 || teacher_probs.size() == 0) {
        teacher_probs = forward(teacher, a_hat, x, config.teacher_dropout, dropout_rng).probs;
      }

      const NormalizedAdjacency* student_graph = &a_hat;
      NormalizedAdjacency collapsed;
      if (config.graph_perturbation) {
        if (config.perturb.resample_each_epoch) {
          collapsed = normalize_adjacency(perturb_graph(bundle.graph, config.perturb, perturb_rng));
          student_graph = &collapsed;
        } else {
          if (!fixed_collapsed) {
            fixed_collapsed =
                normalize_adjacency(perturb_graph(bundle.graph, config.perturb, perturb_rng));
          }
          student_graph = &*fixed_collapsed;
        }
      }
      const SparseMatrix erased = config.feature_erase
                                      ? erase_features(x, config.feature_erase_rate, dropout_rng)
                                      : SparseMatrix{};
      const SparseMatrix& student_x = config.feature_erase ? erased : x;
      const double rate =
          config.model_perturbation ? config.perturbed_dropout : config.student_dropout;

      const ForwardTrace noisy = forward(student, *student_graph, student_x, rate, dropout_rng);
      LossValue kl = kl_consistency(teacher_probs, noisy.probs, all_nodes, config.reduction);
      unsup = kl.value;
      if (lambda > 0.0) {
        kl.grad_logits *= lambda;
        grads += backward(noisy, student, *student_graph, student_x, kl.grad_logits);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = combine(ce.value, unsup, lambda);
    rec.alpha = alpha;
    rec.threshold = sched.threshold;
    check_loss(epoch, rec.loss, pseudo.size());

    adam_step(student, grads, adam, config.adam);
    ema_update(teacher, student, alpha);

    const DenseMatrix p_student = forward(student, a_hat, x).probs;
    const DenseMatrix p_teacher = config.consistency ? forward(teacher, a_hat, x).probs : p_student;
    if (config.teacher_dropout == 0.0) teacher_probs = p_teacher;

    if (split.validation.empty()) {
      rec.student_val_acc = kNaN;
      rec.teacher_val_acc = kNaN;
    } else {
      rec.student_val_acc = accuracy(p_student, bundle.labels, split.validation);
      rec.teacher_val_acc = accuracy(p_teacher, bundle.labels, split.validation);
    }

    if (config.self_training != SelfTrainingMode::kOff &&
        epoch >= config.schedules.self_training_start) {
      pseudo = select_pseudo_labels(p_student, p_teacher, sched.threshold, eligible,
                                    config.self_training);
      pseudo.epoch = epoch;
      std::size_t known = 0;
      std::size_t right = 0;
      for (std::size_t k = 0; k < pseudo.size(); ++k) {
        const int y = bundle.labels[pseudo.nodes[k]];
        if (y == kUnlabeled) continue;
        ++known;
        right += y == pseudo.classes[k] ? 1 : 0;
      }
      if (known > 0) rec.pseudo_precision = static_cast<double>(right) / known;
    } else {
      pseudo = PseudoLabelSet{};
    }
    rec.pseudo_count = pseudo.size();

    // Without a validation set the last epoch is kept.
    const bool improved = split.validation.empty() || run.best_epoch < 0 ||
                          rec.teacher_val_acc > run.best_val_acc;
    if (improved) {
      run.best_epoch = epoch;
      run.best_val_acc = rec.teacher_val_acc;
      run.best_teacher = teacher;
      run.best_student = student;
      if (!split.test.empty()) {
        run.test_acc = accuracy(p_teacher, bundle.labels, split.test);
        run.student_test_acc = accuracy(p_student, bundle.labels, split.test);
      }
    }

    if (on_epoch) on_epoch(rec);
    run.records.push_back(std::move(rec));
  }
  run.final_teacher = std::move(teacher);
  run.final_student = std::move(student);
  return run;
}

double evaluate(const GcnParams& params, const GraphBundle& bundle, const SplitSpec& split,
                SplitPart which, bool row_normalize) {
  const PreparedData data = prepare(bundle, row_normalize);
  const DenseMatrix probs = forward(params, data.a_hat, data.features).probs;
  switch (which) {
    case SplitPart::kTrain:
      return accuracy(probs, bundle.labels, split.train);
    case SplitPart::kValidation:
      return accuracy(probs, bundle.labels, split.validation);
    case SplitPart::kTest:
      return accuracy(probs, bundle.labels, split.test);
  }
  throw std::logic_error("unreachable split part");
}

DenseMatrix layer_output(const GcnParams& params, const PreparedData& data, int layer) {
  const ForwardTrace t = forward(params, data.a_hat, data.features);
  if (layer == 1) return t.hidden;
  if (layer == 2) return t.logits;
  throw std::invalid_argument("layer must be 1 or 2");
}

void write_embeddings(const DenseMatrix& emb, std::span<const int> labels, std::ostream& out) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    out << i << '\t' << labels[i];
    for (double v : emb.row(i)) out << '\t' << v;
    out << '\n';
  }
}

void export_embeddings(const GcnParams& params, const GraphBundle& bundle, int layer,
                       const std::filesystem::path& path, bool row_normalize) {
  const DenseMatrix emb = layer_output(params, prepare(bundle, row_normalize), layer);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write embeddings to " + path.string());
  write_embeddings(emb, bundle.labels, out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string to_json_line(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["sup_loss"] = r.loss.sup_loss;
  j["unsup_loss"] = r.loss.unsup_loss;
  j["lambda"] = r.loss.lambda;
  j["total_loss"] = r.loss.total;
  j["alpha"] = r.alpha;
  j["threshold"] = r.threshold;
  j["student_val_acc"] = r.student_val_acc;
  j["teacher_val_acc"] = r.teacher_val_acc;
  j["pseudo_count"] = r.pseudo_count;
  if (r.pseudo_precision) {
    j["pseudo_precision"] = *r.pseudo_precision;
  } else {
    j["pseudo_precision"] = nullptr;
  }
  return j.dump();
}

}  // namespace segcn
