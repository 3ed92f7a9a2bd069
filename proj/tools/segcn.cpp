// segcn: command-line front end for training and evaluating mean-teacher GCNs.
//
//   segcn train --dataset data/cora.segb --variant segcn --out runs/cora
//   segcn evaluate --dataset data/cora.segb --checkpoint runs/cora/best_teacher.ckpt
//   segcn suite --name ablation-cora --data-dir data --out ablation.csv
//   segcn export-embeddings --dataset data/cora.segb --checkpoint ... --layer 2 --out emb.tsv
//   segcn make-node5 --cora data/cora.segb --out data/node5.segb
//
// Options may also come from a config file (--config run.toml), with one
// section per subcommand; command-line flags take precedence.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "segcn/bundle.hpp"
#include "segcn/gcn.hpp"
#include "segcn/node5.hpp"
#include "segcn/suite.hpp"
#include "segcn/trainer.hpp"

namespace fs = std::filesystem;
using namespace segcn;

namespace {

// Binds a flag whose value, when given, overrides the variant preset.
class Overrides {
 public:
  template <typename T>
  CLI::Option* add(CLI::App& app, const std::string& name, const std::string& help,
                   std::function<void(TrainConfig&, const T&)> apply) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app.add_option(name, *value, help);
    entries_.push_back([opt, value, apply](TrainConfig& c) {
      if (opt->count() > 0) apply(c, *value);
    });
    return opt;
  }

  CLI::Option* flag(CLI::App& app, const std::string& name, const std::string& help,
                    std::function<void(TrainConfig&)> apply) {
    CLI::Option* opt = app.add_flag(name, help);
    entries_.push_back([opt, apply](TrainConfig& c) {
      if (opt->count() > 0) apply(c);
    });
    return opt;
  }

  void apply(TrainConfig& c) const {
    for (const auto& e : entries_) e(c);
  }

 private:
  std::vector<std::function<void(TrainConfig&)>> entries_;
};

void add_train_options(CLI::App& app, Overrides& o) {
  o.add<std::string>(app, "--split", "fixed | random | label-count",
                     [](TrainConfig& c, const std::string& v) {
                       if (v == "fixed") c.split.kind = SplitKind::kFixed;
                       else if (v == "random") c.split.kind = SplitKind::kRandom;
                       else if (v == "label-count") c.split.kind = SplitKind::kLabelCount;
                       else throw CLI::ValidationError("--split", "unknown split '" + v + "'");
                     })
      ->check(CLI::IsMember({"fixed", "random", "label-count"}));
  o.add<std::size_t>(app, "--labels-per-class", "train labels per class for label-count splits",
                     [](TrainConfig& c, const std::size_t& v) { c.split.labels_per_class = v; });
  o.add<std::uint64_t>(app, "--split-seed", "seed for random splits (default: --seed)",
                       [](TrainConfig& c, const std::uint64_t& v) { c.split.seed = v; });

  o.add<int>(app, "--epochs", "total training epochs",
             [](TrainConfig& c, const int& v) { c.schedules.total_epochs = v; });
  o.add<int>(app, "--ramp-length", "epochs for the consistency weight ramp",
             [](TrainConfig& c, const int& v) { c.schedules.ramp_length = v; });
  o.add<double>(app, "--lambda-max", "final consistency weight",
                [](TrainConfig& c, const double& v) { c.schedules.lambda_max = v; });
  o.add<double>(app, "--alpha-max", "EMA decay cap",
                [](TrainConfig& c, const double& v) { c.schedules.alpha_max = v; });
  o.add<double>(app, "--t-start", "initial pseudo-label threshold",
                [](TrainConfig& c, const double& v) { c.schedules.t_start = v; });
  o.add<double>(app, "--t-end", "final pseudo-label threshold",
                [](TrainConfig& c, const double& v) { c.schedules.t_end = v; });
  o.add<int>(app, "--self-training-start", "first epoch selecting pseudo-labels",
             [](TrainConfig& c, const int& v) { c.schedules.self_training_start = v; });

  o.add<double>(app, "--lr", "Adam learning rate",
                [](TrainConfig& c, const double& v) { c.adam.lr = v; });
  o.add<double>(app, "--weight-decay", "L2 weight decay",
                [](TrainConfig& c, const double& v) { c.adam.weight_decay = v; });
  o.flag(app, "--decay-all-layers", "apply weight decay to both layers",
         [](TrainConfig& c) { c.adam.decay_all_layers = true; });
  o.add<std::size_t>(app, "--hidden", "hidden units",
                     [](TrainConfig& c, const std::size_t& v) { c.hidden = v; });

  o.add<double>(app, "--student-dropout", "dropout of the clean student pass",
                [](TrainConfig& c, const double& v) { c.student_dropout = v; });
  o.add<double>(app, "--teacher-dropout", "teacher dropout",
                [](TrainConfig& c, const double& v) { c.teacher_dropout = v; });
  o.add<double>(app, "--perturbed-dropout", "dropout of the perturbed student pass",
                [](TrainConfig& c, const double& v) { c.perturbed_dropout = v; });
  o.add<double>(app, "--edge-drop", "edge drop probability of the collapsed graph",
                [](TrainConfig& c, const double& v) { c.perturb.edge_drop_prob = v; });
  o.add<std::uint64_t>(app, "--perturb-seed", "salt for the graph perturbation stream",
                       [](TrainConfig& c, const std::uint64_t& v) { c.perturb.seed = v; });
  o.flag(app, "--fixed-collapse", "sample the collapsed graph once instead of every epoch",
         [](TrainConfig& c) { c.perturb.resample_each_epoch = false; });
  o.add<double>(app, "--feature-erase-rate", "erase probability for the re variant",
                [](TrainConfig& c, const double& v) { c.feature_erase_rate = v; });
  o.add<std::string>(app, "--self-training", "off | teacher | dual",
                     [](TrainConfig& c, const std::string& v) {
                       c.self_training = v == "off"       ? SelfTrainingMode::kOff
                                         : v == "teacher" ? SelfTrainingMode::kTeacherOnly
                                                          : SelfTrainingMode::kDual;
                     })
      ->check(CLI::IsMember({"off", "teacher", "dual"}));
  o.flag(app, "--exclude-test-pseudo", "never pseudo-label test nodes",
         [](TrainConfig& c) { c.pseudo_label_test_nodes = false; });
  o.flag(app, "--no-row-normalize", "use raw features",
         [](TrainConfig& c) { c.row_normalize = false; });
  o.flag(app, "--sum-losses", "sum instead of average loss terms over nodes",
         [](TrainConfig& c) { c.reduction = Reduction::kSum; });
  o.add<std::uint64_t>(app, "--seed", "global seed",
                       [](TrainConfig& c, const std::uint64_t& v) { c.seed = v; });
}

SplitPart parse_part(const std::string& which) {
  if (which == "train") return SplitPart::kTrain;
  if (which == "val") return SplitPart::kValidation;
  return SplitPart::kTest;
}

nlohmann::ordered_json summary_json(const RunArtifacts& run, const TrainConfig& cfg,
                                    const std::string& variant, const GraphBundle& bundle) {
  nlohmann::ordered_json j;
  j["dataset"] = bundle.name;
  j["variant"] = variant;
  j["seed"] = cfg.seed;
  j["epochs"] = cfg.schedules.total_epochs;
  j["best_epoch"] = run.best_epoch;
  j["best_teacher_val_acc"] = run.best_val_acc;
  j["test_acc"] = run.test_acc;
  j["student_test_acc"] = run.student_test_acc;
  j["train_size"] = run.split.train.size();
  j["val_size"] = run.split.validation.size();
  j["test_size"] = run.split.test.size();
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-teacher graph convolutional networks for semi-supervised node classification"};
  app.set_config("--config", "", "TOML/INI config file with one section per subcommand");
  app.require_subcommand(1);

  // train
  CLI::App* train_cmd = app.add_subcommand("train", "train a model and write metrics/checkpoints");
  std::string dataset;
  std::string out_dir = "runs/latest";
  std::string variant = "segcn";
  int export_layer = 0;
  train_cmd->add_option("--dataset", dataset, "bundle file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
  train_cmd->add_option("--variant", variant, "preset: gcn, segcn or an ablation row")
      ->capture_default_str()
      ->check(CLI::IsMember({"gcn", "segcn", "re", "pa", "pf", "pa+pf", "pa+pf+t", "pa+pf+st"}));
  train_cmd->add_option("--export-layer", export_layer,
                        "also export best-teacher embeddings of layer 1 or 2")
      ->check(CLI::IsMember({0, 1, 2}));
  Overrides overrides;
  add_train_options(*train_cmd, overrides);

  // evaluate
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "accuracy of a checkpoint on a split");
  std::string checkpoint;
  std::string which = "test";
  std::string eval_split = "fixed";
  std::uint64_t eval_seed = 0;
  std::size_t eval_k = 0;
  bool eval_raw = false;
  eval_cmd->add_option("--dataset", dataset, "bundle file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--which", which, "train | val | test")
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_option("--split", eval_split, "fixed | random | label-count")
      ->capture_default_str()
      ->check(CLI::IsMember({"fixed", "random", "label-count"}));
  eval_cmd->add_option("--split-seed", eval_seed, "seed of a random split");
  eval_cmd->add_option("--labels-per-class", eval_k, "k of a label-count split");
  eval_cmd->add_flag("--no-row-normalize", eval_raw, "use raw features");

  // suite
  CLI::App* suite_cmd = app.add_subcommand("suite", "run a reproduction suite");
  std::string suite_name;
  std::string data_dir = "data";
  std::string summary_path = "summary.csv";
  int suite_seeds = 0;
  int suite_epochs = 0;
  suite_cmd->add_option("--name", suite_name, "suite name")
      ->required()
      ->check(CLI::IsMember(suite_names()));
  suite_cmd->add_option("--data-dir", data_dir, "directory with <dataset>.segb bundles")
      ->capture_default_str();
  suite_cmd->add_option("--out", summary_path, "summary CSV")->capture_default_str();
  suite_cmd->add_option("--seeds", suite_seeds, "runs per cell (0 = suite default)");
  suite_cmd->add_option("--epochs", suite_epochs, "override total epochs");

  // export-embeddings
  CLI::App* export_cmd =
      app.add_subcommand("export-embeddings", "write per-node layer activations as TSV");
  int layer = 2;
  std::string export_path = "embeddings.tsv";
  export_cmd->add_option("--dataset", dataset, "bundle file")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  export_cmd->add_option("--layer", layer, "1 (hidden) or 2 (logits)")
      ->capture_default_str()
      ->check(CLI::IsMember({1, 2}));
  export_cmd->add_option("--out", export_path, "output TSV")->capture_default_str();
  bool export_raw = false;
  export_cmd->add_flag("--no-row-normalize", export_raw, "use raw features");

  // make-node5
  CLI::App* node5_cmd = app.add_subcommand("make-node5", "build the Node5 toy bundle from Cora");
  std::string cora_path;
  std::string node5_path = "node5.segb";
  node5_cmd->add_option("--cora", cora_path, "Cora bundle")->required()->check(CLI::ExistingFile);
  node5_cmd->add_option("--out", node5_path, "output bundle")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      TrainConfig cfg = variant_config(variant);
      overrides.apply(cfg);
      cfg.schedules.ramp_length = std::min(cfg.schedules.ramp_length, cfg.schedules.total_epochs);
      const GraphBundle bundle = load_bundle(dataset);
      fs::create_directories(out_dir);
      std::ofstream metrics(fs::path(out_dir) / "metrics.jsonl", std::ios::trunc);
      const RunArtifacts run = train(cfg, bundle, [&](const EpochRecord& r) {
        metrics << to_json_line(r) << '\n';
      });
      save_checkpoint({run.best_teacher, run.best_epoch, ModelRole::kTeacher},
                      fs::path(out_dir) / "best_teacher.ckpt");
      save_checkpoint({run.best_student, run.best_epoch, ModelRole::kStudent},
                      fs::path(out_dir) / "best_student.ckpt");
      const auto summary = summary_json(run, cfg, variant, bundle);
      std::ofstream(fs::path(out_dir) / "summary.json") << summary.dump(2) << '\n';
      if (export_layer != 0) {
        export_embeddings(run.best_teacher, bundle, export_layer,
                          fs::path(out_dir) / ("embeddings_layer" +
                                               std::to_string(export_layer) + ".tsv"),
                          cfg.row_normalize);
      }
      std::cout << summary.dump() << '\n';
    } else if (*eval_cmd) {
      const GraphBundle bundle = load_bundle(dataset);
      const Checkpoint ckpt = load_checkpoint(checkpoint);
      TrainConfig cfg;
      cfg.split.kind = eval_split == "random"        ? SplitKind::kRandom
                       : eval_split == "label-count" ? SplitKind::kLabelCount
                                                     : SplitKind::kFixed;
      cfg.split.labels_per_class = eval_k;
      cfg.split.seed = eval_seed;
      const SplitSpec split = resolve_split(cfg, bundle);
      const double acc = evaluate(ckpt.params, bundle, split, parse_part(which), !eval_raw);
      nlohmann::ordered_json j;
      j["dataset"] = bundle.name;
      j["role"] = to_string(ckpt.role);
      j["epoch"] = ckpt.epoch;
      j["which"] = which;
      j["accuracy"] = acc;
      std::cout << j.dump() << '\n';
    } else if (*suite_cmd) {
      SuiteOptions opts;
      opts.data_dir = data_dir;
      opts.seeds = suite_seeds;
      if (suite_epochs > 0) opts.epochs = suite_epochs;
      opts.log = [](const std::string& line) { std::cerr << line << '\n'; };
      const auto cells = run_suite(suite_name, opts);
      std::ofstream out(summary_path, std::ios::trunc);
      write_summary_csv(cells, out);
      write_summary_csv(cells, std::cout);
    } else if (*export_cmd) {
      const GraphBundle bundle = load_bundle(dataset);
      const Checkpoint ckpt = load_checkpoint(checkpoint);
      export_embeddings(ckpt.params, bundle, layer, export_path, !export_raw);
    } else if (*node5_cmd) {
      const GraphBundle node5 = build_node5(load_bundle(cora_path));
      write_bundle(node5, node5_path);
      std::cout << "wrote " << node5_path << ": " << node5.num_nodes() << " nodes, "
                << node5.graph.num_edges() << " edges\n";
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
