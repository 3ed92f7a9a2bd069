#include "segcn/suite.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace segcn {

std::vector<std::string> ablation_variants() {
  return {"gcn", "re", "pa", "pf", "pa+pf", "pa+pf+t", "pa+pf+st"};
}

TrainConfig variant_config(const std::string& variant) {
  if (variant == "gcn") return TrainConfig::baseline();
  if (variant == "segcn" || variant == "pa+pf+st") return TrainConfig::segcn();

  TrainConfig c = TrainConfig::segcn();
  c.graph_perturbation = false;
  c.model_perturbation = false;
  c.self_training = SelfTrainingMode::kOff;
  if (variant == "re") {
    c.feature_erase = true;
  } else if (variant == "pa") {
    c.graph_perturbation = true;
  } else if (variant == "pf") {
    c.model_perturbation = true;
  } else if (variant == "pa+pf") {
    c.graph_perturbation = c.model_perturbation = true;
  } else if (variant == "pa+pf+t") {
    c.graph_perturbation = c.model_perturbation = true;
    c.self_training = SelfTrainingMode::kTeacherOnly;
  } else {
    throw std::invalid_argument("unknown variant '" + variant + "'");
  }
  return c;
}

std::vector<std::string> suite_names() {
  return {"fixed-splits", "random-splits", "pubmed-labels", "ablation-cora"};
}

std::pair<double, double> mean_and_std_error(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

SuiteCell run_cell(const std::string& suite, const GraphBundle& bundle,
                   const std::string& variant, const SplitChoice& split, int seeds,
                   std::optional<int> epochs, const std::function<void(const std::string&)>& log) {
  SuiteCell cell{suite, bundle.name, variant, split.labels_per_class, {}, 0.0, 0.0};
  for (int s = 0; s < seeds; ++s) {
    TrainConfig cfg = variant_config(variant);
    cfg.seed = static_cast<std::uint64_t>(s);
    cfg.split = split;
    if (epochs) cfg.schedules.total_epochs = *epochs;
    cfg.schedules.ramp_length = std::min(cfg.schedules.ramp_length, cfg.schedules.total_epochs);
    const RunArtifacts run = train(cfg, bundle);
    cell.accuracies.push_back(run.test_acc);
    if (log) {
      std::ostringstream msg;
      msg << suite << ' ' << bundle.name << ' ' << variant;
      if (split.labels_per_class) msg << " k=" << split.labels_per_class;
      msg << " seed=" << s << " best_epoch=" << run.best_epoch << " test_acc=" << run.test_acc;
      log(msg.str());
    }
  }
  std::tie(cell.mean, cell.std_error) = mean_and_std_error(cell.accuracies);
  return cell;
}

std::vector<SuiteCell> run_suite(const std::string& name, const SuiteOptions& options) {
  auto load = [&](const std::string& dataset) {
    return load_bundle(options.data_dir / (dataset + ".segb"));
  };
  std::vector<SuiteCell> cells;
  if (name == "fixed-splits" || name == "random-splits") {
    const bool random = name == "random-splits";
    const int seeds = options.seeds > 0 ? options.seeds : (random ? 20 : 5);
    SplitChoice split;
    split.kind = random ? SplitKind::kRandom : SplitKind::kFixed;
    for (const char* dataset : {"citeseer", "cora", "pubmed"}) {
      const GraphBundle bundle = load(dataset);
      for (const char* variant : {"gcn", "segcn"}) {
        cells.push_back(run_cell(name, bundle, variant, split, seeds, options.epochs, options.log));
      }
    }
  } else if (name == "pubmed-labels") {
    const int seeds = options.seeds > 0 ? options.seeds : 5;
    const GraphBundle bundle = load("pubmed");
    for (std::size_t k : {50u, 100u, 200u}) {
      SplitChoice split{SplitKind::kLabelCount, k, std::nullopt};
      for (const char* variant : {"gcn", "segcn"}) {
        cells.push_back(run_cell(name, bundle, variant, split, seeds, options.epochs, options.log));
      }
    }
  } else if (name == "ablation-cora") {
    const int seeds = options.seeds > 0 ? options.seeds : 5;
    const GraphBundle bundle = load("cora");
    for (const auto& variant : ablation_variants()) {
      cells.push_back(run_cell(name, bundle, variant, SplitChoice{}, seeds, options.epochs,
                               options.log));
    }
  } else {
    throw std::invalid_argument("unknown suite '" + name + "'");
  }
  return cells;
}

void write_summary_csv(const std::vector<SuiteCell>& cells, std::ostream& out) {
  out << "suite,dataset,variant,labels_per_class,runs,mean_acc,std_error\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& c : cells) {
    out << c.suite << ',' << c.dataset << ',' << c.variant << ',' << c.labels_per_class << ','
        << c.accuracies.size() << ',' << c.mean << ',' << c.std_error << '\n';
  }
}

}  // namespace segcn
