// Acceptance checks, one PASS/FAIL line per criterion.
//
//   acceptance --group core
//   acceptance --group benchmarks --data-dir DIR
//
// The benchmark group reads citeseer.segb, cora.segb and pubmed.segb from DIR.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "segcn/bundle.hpp"
#include "segcn/node5.hpp"
#include "segcn/suite.hpp"
#include "segcn/trainer.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace segcn;
using oracle::Mat;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s  %-32s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

// ---------------------------------------------------------------- gradients

struct GradInstance {
  std::size_t n, f, h, c;
  Mat a;
  NormalizedAdjacency a_hat;
  Mat a_pert;
  NormalizedAdjacency a_hat_pert;
  SparseMatrix x;
  GcnParams params;
  std::vector<int> labels;
  NodeMask labeled;
  DenseMatrix teacher;
};

GradInstance grad_instance(std::mt19937_64& gen) {
  std::uniform_int_distribution<std::size_t> nd(3, 10), fd(2, 8), cd(2, 4);
  GradInstance in;
  in.n = nd(gen);
  in.f = fd(gen);
  in.h = 4;
  in.c = cd(gen);
  const auto edges = oracle::random_edges(in.n, 0.4, gen);
  in.a = oracle::normalized_adjacency(in.n, edges);
  in.a_hat = normalize_adjacency(UndirectedGraph::from_edges(in.n, edges));
  std::vector<Edge> kept;
  for (std::size_t k = 0; k < edges.size(); k += 2) kept.push_back(edges[k]);
  in.a_pert = oracle::normalized_adjacency(in.n, kept);
  in.a_hat_pert = normalize_adjacency(UndirectedGraph::from_edges(in.n, kept));
  DenseMatrix xd = oracle::random_dense(in.n, in.f, gen, 0.0, 1.0);
  std::bernoulli_distribution zero(0.3), coin(0.5);
  for (double& v : xd.values())
    if (zero(gen)) v = 0.0;
  in.x = SparseMatrix::from_dense(xd);
  in.params.theta0 = oracle::random_dense(in.f, in.h, gen, -0.3, 0.3);
  in.params.theta1 = oracle::random_dense(in.h, in.c, gen);
  std::uniform_int_distribution<int> label(0, static_cast<int>(in.c) - 1);
  in.labeled.assign(in.n, false);
  for (std::size_t i = 0; i < in.n; ++i) {
    in.labels.push_back(label(gen));
    in.labeled[i] = coin(gen);
  }
  in.labeled[0] = true;
  in.teacher = oracle::random_probs(in.n, in.c, gen, 2.0);
  return in;
}

enum class Objective { kCe, kKl, kCombined };

double gradient_error(const GradInstance& in, Objective obj, std::uint64_t seed) {
  Rng rng(seed);
  const NodeMask all(in.n, true);
  const double lambda = 0.8;
  const auto clean = forward(in.params, in.a_hat, in.x, 0.5, rng);
  const auto pert = forward(in.params, in.a_hat_pert, in.x, 0.8, rng);

  GradParams g{DenseMatrix(in.f, in.h), DenseMatrix(in.h, in.c)};
  if (obj != Objective::kKl) {
    g += backward(clean, in.params, in.a_hat, in.x,
                  cross_entropy(clean.probs, in.labels, in.labeled).grad_logits);
  }
  if (obj != Objective::kCe) {
    auto kl = kl_consistency(in.teacher, pert.probs, all);
    if (obj == Objective::kCombined) kl.grad_logits *= lambda;
    g += backward(pert, in.params, in.a_hat_pert, in.x, kl.grad_logits);
  }

  const Mat pt = oracle::from(in.teacher);
  const Mat x_clean = oracle::masked_features(in.x, clean.input_mask);
  const Mat x_pert = oracle::masked_features(in.x, pert.input_mask);
  Mat w0 = oracle::from(in.params.theta0), w1 = oracle::from(in.params.theta1);
  auto f = [&] {
    double total = 0.0;
    if (obj != Objective::kKl) {
      total += oracle::mean_cross_entropy(
          oracle::gcn_probs_masked(in.a, x_clean, w0, w1, clean.hidden_mask), in.labels,
          in.labeled);
    }
    if (obj != Objective::kCe) {
      const double kl =
          oracle::mean_kl(pt, oracle::gcn_probs_masked(in.a_pert, x_pert, w0, w1, pert.hidden_mask),
                          all);
      total += obj == Objective::kCombined ? lambda * kl : kl;
    }
    return total;
  };
  const Mat fd0 = oracle::finite_difference(w0, f, 1e-5);
  const Mat fd1 = oracle::finite_difference(w1, f, 1e-5);
  return std::max(oracle::max_rel_error(oracle::from(g.grad_theta0), fd0, 1e-6),
                  oracle::max_rel_error(oracle::from(g.grad_theta1), fd1, 1e-6));
}

void gradient_oracle() {
  Stopwatch clock;
  std::mt19937_64 gen(2024);
  const int per_objective = 10;
  std::map<std::string, double> worst;
  for (auto [name, obj] : {std::pair{"ce", Objective::kCe}, std::pair{"kl", Objective::kKl},
                           std::pair{"combined", Objective::kCombined}}) {
    double w = 0.0;
    for (int i = 0; i < per_objective; ++i) {
      const auto in = grad_instance(gen);
      w = std::max(w, gradient_error(in, obj, static_cast<std::uint64_t>(i)));
    }
    worst[name] = w;
  }
  const double secs = clock.seconds();
  bool ok = secs < 10.0;
  std::ostringstream d;
  for (const auto& [name, w] : worst) {
    ok = ok && w < 1e-5;
    d << name << " max_rel=" << fmt("%.2e", w) << ' ';
  }
  d << "(" << per_objective << " instances each, limit 1e-5) time=" << fmt("%.2fs", secs);
  report("gradient-oracle", ok, d.str());
}

// ---------------------------------------------------------------- properties

struct PropertyTally {
  std::map<std::string, int> failed;
  void check(const std::string& what, bool ok) {
    if (!ok) ++failed[what];
    else failed.try_emplace(what, 0);
  }
};

void property_suite() {
  Stopwatch clock;
  PropertyTally t;
  std::mt19937_64 gen(77);
  std::uniform_int_distribution<std::size_t> size(1, 200);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int instances = 100;
  for (int trial = 0; trial < instances; ++trial) {
    const std::size_t n = size(gen);
    const auto edges = oracle::random_edges(n, 0.1 * unit(gen), gen);
    const auto g = UndirectedGraph::from_edges(n, edges);

    // Normalization.
    const auto a = normalize_adjacency(g);
    t.check("normalize-vs-oracle",
            oracle::max_abs_diff(oracle::from(a.matrix), oracle::normalized_adjacency(n, edges)) <
                1e-12);
    bool symmetric = true, in_range = true, diag = true;
    for (NodeId i = 0; i < n; ++i) {
      diag = diag && a.matrix.at(i, i) > 0.0;
      for (auto k = a.matrix.row_begin(i); k < a.matrix.row_end(i); ++k) {
        const double v = a.matrix.values()[k];
        symmetric = symmetric && a.matrix.at(a.matrix.columns()[k], i) == v;
        in_range = in_range && v > 0.0 && v <= 1.0;
      }
    }
    t.check("normalize-symmetric", symmetric);
    t.check("normalize-range", in_range);
    t.check("normalize-self-loops", diag);
    t.check("normalize-pattern", a.matrix.nnz() == 2 * g.num_edges() + n);

    // Perturbation.
    const PerturbConfig cfg{unit(gen), true, 0};
    Rng r1(trial), r2(trial);
    const auto p = perturb_graph(g, cfg, r1);
    t.check("perturb-deterministic", p == perturb_graph(g, cfg, r2));
    bool subset = true, connected = true;
    for (const auto& [u, v] : p.edges()) subset = subset && g.has_edge(u, v);
    for (NodeId u = 0; u < n; ++u)
      connected = connected && (g.degree(u) == 0 || p.degree(u) >= 1);
    t.check("perturb-subset", subset);
    t.check("perturb-no-new-isolated", connected);
    Rng r3(trial);
    t.check("perturb-p0-identity", perturb_graph(g, {0.0, true, 0}, r3) == g);

    // Numerics.
    const std::size_t cols = 1 + trial % 7;
    const DenseMatrix x = oracle::random_dense(n, cols, gen, -5, 5);
    t.check("spmm-vs-oracle",
            oracle::max_abs_diff(oracle::from(spmm(a.matrix, x)),
                                 oracle::matmul(oracle::from(a.matrix), oracle::from(x))) < 1e-12);
    const DenseMatrix s = row_softmax(x);
    DenseMatrix shifted = x;
    for (std::size_t i = 0; i < n; ++i)
      for (double& v : shifted.row(i)) v += 100.0 * static_cast<double>(i % 3) - 50.0;
    bool sums = true;
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = s.row(i);
      sums = sums && std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) < 1e-12;
    }
    t.check("softmax-row-sums", sums);
    t.check("softmax-shift-invariant",
            oracle::max_abs_diff(oracle::from(s), oracle::from(row_softmax(shifted))) < 1e-12);
    Rng d1(trial), d2(trial);
    const double rate = 0.9 * unit(gen);
    const auto [dropped, mask] = apply_dropout(x, rate, d1);
    const auto [dropped2, mask2] = apply_dropout(x, rate, d2);
    t.check("dropout-replay", dropped == dropped2 && apply_mask(x, mask) == dropped);
    bool scaled = true;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double v = dropped.values()[k];
      const double expect = x.values()[k] / (1.0 - rate);
      scaled = scaled && (v == 0.0 || std::abs(v - expect) <= 1e-14 * std::abs(expect));
    }
    t.check("dropout-scaling", scaled);

    // Losses.
    const DenseMatrix pt = oracle::random_probs(n, 3, gen, 4.0);
    const DenseMatrix ps = oracle::random_probs(n, 3, gen, 4.0);
    t.check("kl-nonnegative", kl_consistency(pt, ps, NodeMask(n, true)).value >= -1e-12);
    t.check("kl-self-zero", std::abs(kl_consistency(pt, pt, NodeMask(n, true)).value) < 1e-12);
  }
  const double secs = clock.seconds();
  int bad = 0;
  std::string which;
  for (const auto& [name, count] : t.failed)
    if (count > 0) {
      bad += count;
      which += " " + name;
    }
  std::ostringstream d;
  d << t.failed.size() << " invariants x " << instances << " instances, " << bad
    << " violations" << which << " time=" << fmt("%.2fs", secs);
  report("normalization-perturbation", bad == 0 && secs < 30.0, d.str());
}

// ---------------------------------------------------------------- determinism

void determinism() {
  synthetic::Spec spec;
  spec.seed = 3;
  const auto bundle = synthetic::make_bundle(spec);
  bool same = true;
  std::size_t lines = 0;
  for (const char* variant : {"gcn", "segcn"}) {
    auto cfg = variant_config(variant);
    cfg.seed = 11;
    cfg.schedules.total_epochs = 300;
    cfg.schedules.ramp_length = 100;
    cfg.schedules.self_training_start = 100;
    std::vector<std::string> a, b;
    train(cfg, bundle, [&](const EpochRecord& r) { a.push_back(to_json_line(r)); });
    train(cfg, bundle, [&](const EpochRecord& r) { b.push_back(to_json_line(r)); });
    same = same && a == b;
    lines += a.size();
  }
  report("determinism", same,
         std::to_string(lines) + " metric lines compared across repeated gcn/segcn runs");
}

// ---------------------------------------------------------------- benchmarks

struct Bench {
  fs::path dir;
  std::optional<int> epochs;
  std::map<std::string, std::optional<GraphBundle>> bundles;
  std::map<std::string, std::string> load_errors;
  std::map<std::string, SuiteCell> cells;
  std::map<std::string, double> cell_seconds;

  const GraphBundle* bundle(const std::string& name) {
    auto it = bundles.find(name);
    if (it == bundles.end()) {
      try {
        it = bundles.emplace(name, load_bundle(dir / (name + ".segb"))).first;
      } catch (const std::exception& ex) {
        load_errors[name] = ex.what();
        it = bundles.emplace(name, std::nullopt).first;
      }
    }
    return it->second ? &*it->second : nullptr;
  }

  std::string missing(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& n : names)
      if (!bundle(n)) out += (out.empty() ? "" : "; ") + load_errors[n];
    return out;
  }

  const SuiteCell& cell(const std::string& dataset, const std::string& variant,
                        std::size_t labels_per_class = 0) {
    const std::string key = dataset + "/" + variant + "/" + std::to_string(labels_per_class);
    auto it = cells.find(key);
    if (it == cells.end()) {
      SplitChoice split;
      if (labels_per_class > 0) {
        split.kind = SplitKind::kLabelCount;
        split.labels_per_class = labels_per_class;
      }
      Stopwatch clock;
      auto c = run_cell("acceptance", *bundle(dataset), variant, split, 5, epochs, {});
      cell_seconds[key] = clock.seconds();
      it = cells.emplace(key, std::move(c)).first;
    }
    return it->second;
  }

  double seconds(const std::string& dataset, const std::string& variant) {
    return cell_seconds[dataset + "/" + variant + "/0"];
  }
};

std::string pct(double acc) { return fmt("%.1f", 100.0 * acc); }

void baseline_reproduction(Bench& b) {
  const std::vector<std::string> names{"citeseer", "cora", "pubmed"};
  if (auto m = b.missing(names); !m.empty()) {
    report("baseline-reproduction", false, "data unavailable: " + m);
    return;
  }
  const std::map<std::string, double> floor{{"citeseer", 0.685}, {"cora", 0.790}, {"pubmed", 0.770}};
  bool ok = true;
  std::ostringstream d;
  for (const auto& n : names) {
    const double acc = b.cell(n, "gcn").mean;
    const double secs = b.seconds(n, "gcn");
    ok = ok && acc >= floor.at(n) && secs <= 300.0;
    d << n << ' ' << pct(acc) << " (>= " << pct(floor.at(n)) << ", " << fmt("%.0fs", secs)
      << " <= 300s) ";
  }
  report("baseline-reproduction", ok, d.str());
}

void segcn_reproduction(Bench& b) {
  const std::vector<std::string> names{"citeseer", "cora", "pubmed"};
  if (auto m = b.missing(names); !m.empty()) {
    report("segcn-reproduction", false, "data unavailable: " + m);
    return;
  }
  const std::map<std::string, double> floor{{"citeseer", 0.715}, {"cora", 0.820}, {"pubmed", 0.775}};
  bool ok = true;
  std::ostringstream d;
  for (const auto& n : names) {
    const double acc = b.cell(n, "segcn").mean;
    ok = ok && acc >= floor.at(n);
    d << n << ' ' << pct(acc) << " (>= " << pct(floor.at(n)) << ")";
    if (n != "pubmed") {
      const double delta = acc - b.cell(n, "gcn").mean;
      ok = ok && delta >= 0.020;
      d << " delta " << fmt("%+.1f", 100.0 * delta) << " (>= +2.0)";
    }
    d << ' ';
  }
  report("segcn-reproduction", ok, d.str());
}

void ablation_ordering(Bench& b) {
  if (auto m = b.missing({"cora"}); !m.empty()) {
    report("ablation-ordering", false, "data unavailable: " + m);
    return;
  }
  auto acc = [&](const std::string& v) { return b.cell("cora", v).mean; };
  const double gcn = acc("gcn"), pa = acc("pa"), pf = acc("pf"), papf = acc("pa+pf"),
               t = acc("pa+pf+t"), st = acc("pa+pf+st"), re = acc("re");
  const bool c1 = pa > gcn, c2 = papf >= std::max(pa, pf), c3 = st >= t, c4 = re <= gcn + 0.005;
  std::ostringstream d;
  d << "gcn " << pct(gcn) << " re " << pct(re) << " pa " << pct(pa) << " pf " << pct(pf)
    << " pa+pf " << pct(papf) << " T " << pct(t) << " S&T " << pct(st) << " | pa>gcn "
    << (c1 ? "ok" : "no") << ", pa+pf>=max " << (c2 ? "ok" : "no") << ", S&T>=T "
    << (c3 ? "ok" : "no") << ", re<=gcn+0.5 " << (c4 ? "ok" : "no");
  report("ablation-ordering", c1 && c2 && c3 && c4, d.str());
}

void pubmed_label_sweep(Bench& b) {
  if (auto m = b.missing({"pubmed"}); !m.empty()) {
    report("pubmed-label-sweep", false, "data unavailable: " + m);
    return;
  }
  bool ok = true;
  std::ostringstream d;
  for (std::size_t k : {50u, 100u, 200u}) {
    const double ours = b.cell("pubmed", "segcn", k).mean;
    const double base = b.cell("pubmed", "gcn", k).mean;
    ok = ok && ours > base;
    d << "k=" << k << " segcn " << pct(ours) << " gcn " << pct(base) << ' ';
    if (k == 100) {
      ok = ok && ours >= 0.825;
      d << "(>= 82.5) ";
    }
  }
  report("pubmed-label-sweep", ok, d.str());
}

// Distance from each class's local vertex 5 to its class centroid, divided by
// the mean distance between class centroids.
double remote_vertex_distance(const DenseMatrix& emb, std::size_t classes) {
  const std::size_t dim = emb.cols();
  std::vector<std::vector<double>> centroid(classes, std::vector<double>(dim, 0.0));
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t local = 1; local <= 5; ++local)
      for (std::size_t j = 0; j < dim; ++j) centroid[c][j] += emb(node5_id(c, local), j) / 5.0;
  auto dist = [&](auto&& a, auto&& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(s);
  };
  double remote = 0.0;
  for (std::size_t c = 0; c < classes; ++c)
    remote += dist(emb.row(node5_id(c, 5)), centroid[c]) / static_cast<double>(classes);
  double spread = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < classes; ++a)
    for (std::size_t c = a + 1; c < classes; ++c, ++pairs) spread += dist(centroid[a], centroid[c]);
  spread /= static_cast<double>(pairs);
  return spread > 0.0 ? remote / spread : INFINITY;
}

void node5_sanity(Bench& b) {
  if (auto m = b.missing({"cora"}); !m.empty()) {
    report("node5-sanity", false, "data unavailable: " + m);
    return;
  }
  Stopwatch clock;
  const GraphBundle node5 = build_node5(*b.bundle("cora"));
  const PreparedData data = prepare(node5);
  std::map<std::string, double> acc, distance;
  for (const char* variant : {"gcn", "segcn"}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      TrainConfig cfg = variant_config(variant);
      cfg.seed = seed;
      const auto run = train(cfg, node5);
      acc[variant] += run.test_acc / 10.0;
      distance[variant] +=
          remote_vertex_distance(layer_output(run.best_teacher, data, 2), node5.num_classes) /
          10.0;
    }
  }
  const double secs = clock.seconds();
  const double ratio = distance["segcn"] / distance["gcn"];
  const bool ok = acc["segcn"] >= acc["gcn"] && ratio < 1.0 && secs < 60.0;
  std::ostringstream d;
  d << "acc segcn " << pct(acc["segcn"]) << " gcn " << pct(acc["gcn"]) << ", distance ratio "
    << fmt("%.3f", ratio) << " (< 1), time=" << fmt("%.1fs", secs) << " (< 60s)";
  report("node5-sanity", ok, d.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string group = "core";
  std::string data_dir = "data";
  int epochs = 0;
  app.add_option("--group", group, "core | benchmarks")->check(CLI::IsMember({"core", "benchmarks"}));
  app.add_option("--data-dir", data_dir, "directory with <dataset>.segb bundles");
  app.add_option("--epochs", epochs, "override total epochs (smoke runs only)");
  CLI11_PARSE(app, argc, argv);

  try {
    if (group == "core") {
      gradient_oracle();
      property_suite();
      determinism();
    } else {
      Bench b;
      b.dir = data_dir;
      if (epochs > 0) b.epochs = epochs;
      baseline_reproduction(b);
      segcn_reproduction(b);
      ablation_ordering(b);
      pubmed_label_sweep(b);
      node5_sanity(b);
    }
  } catch (const std::exception& ex) {
    std::printf("FAIL  %-32s %s\n", "unexpected-error", ex.what());
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
