#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "segcn/trainer.hpp"

namespace segcn {

struct SuiteOptions {
  std::filesystem::path data_dir;  // holds citeseer.segb, cora.segb, pubmed.segb
  // Runs per cell; 0 selects the suite default (20 for random-splits, else 5).
  int seeds = 0;
  // Overrides schedules.total_epochs when set.
  std::optional<int> epochs;
  std::function<void(const std::string&)> log;
};

struct SuiteCell {
  std::string suite;
  std::string dataset;
  std::string variant;
  std::size_t labels_per_class = 0;
  std::vector<double> accuracies;
  double mean = 0.0;
  double std_error = 0.0;
};

// Ablation rows, in table order.
std::vector<std::string> ablation_variants();

// Configuration for a named variant: "gcn", "segcn", or an ablation row
// ("re", "pa", "pf", "pa+pf", "pa+pf+t", "pa+pf+st").
TrainConfig variant_config(const std::string& variant);

std::vector<std::string> suite_names();

// Runs one of: fixed-splits, random-splits, pubmed-labels, ablation-cora.
std::vector<SuiteCell> run_suite(const std::string& name, const SuiteOptions& options);

// Test accuracies of `variant` over seeds 0..seeds-1.
SuiteCell run_cell(const std::string& suite, const GraphBundle& bundle,
                   const std::string& variant, const SplitChoice& split, int seeds,
                   std::optional<int> epochs, const std::function<void(const std::string&)>& log);

// Mean and standard error of the mean (sample std / sqrt(n)).
std::pair<double, double> mean_and_std_error(const std::vector<double>& values);

void write_summary_csv(const std::vector<SuiteCell>& cells, std::ostream& out);

}  // namespace segcn
