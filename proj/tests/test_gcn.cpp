#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "segcn/gcn.hpp"
#include "segcn/losses.hpp"
#include "support/oracles.hpp"

using namespace segcn;
using oracle::Mat;

namespace {

struct Instance {
  std::size_t n, f, h, c;
  std::vector<Edge> edges;
  NormalizedAdjacency a_hat;
  Mat a;
  SparseMatrix x;
  GcnParams params;
  std::vector<int> labels;
};

Instance make_instance(std::mt19937_64& gen) {
  std::uniform_int_distribution<std::size_t> nd(3, 10), fd(2, 8), cd(2, 4);
  Instance in;
  in.n = nd(gen);
  in.f = fd(gen);
  in.h = 4;
  in.c = cd(gen);
  in.edges = oracle::random_edges(in.n, 0.4, gen);
  in.a_hat = normalize_adjacency(UndirectedGraph::from_edges(in.n, in.edges));
  in.a = oracle::normalized_adjacency(in.n, in.edges);
  DenseMatrix xd = oracle::random_dense(in.n, in.f, gen, 0.0, 1.0);
  std::bernoulli_distribution zero(0.3);
  for (double& v : xd.values())
    if (zero(gen)) v = 0.0;
  in.x = SparseMatrix::from_dense(xd);
  in.params.theta0 = oracle::random_dense(in.f, in.h, gen);
  in.params.theta1 = oracle::random_dense(in.h, in.c, gen);
  std::uniform_int_distribution<int> label(0, static_cast<int>(in.c) - 1);
  for (std::size_t i = 0; i < in.n; ++i) in.labels.push_back(label(gen));
  return in;
}

// Literal forward with the masks recorded in `trace`.
Mat oracle_probs(const Instance& in, const Mat& a, const Mat& w0, const Mat& w1,
                 const ForwardTrace& trace) {
  return oracle::gcn_probs_masked(a, oracle::masked_features(in.x, trace.input_mask), w0, w1,
                                  trace.hidden_mask);
}

NodeMask random_mask(std::size_t n, std::mt19937_64& gen) {
  std::bernoulli_distribution coin(0.5);
  NodeMask m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = coin(gen);
  m[0] = true;
  return m;
}

void require_grad_close(const GradParams& g, const Mat& fd0, const Mat& fd1) {
  CHECK(oracle::max_rel_error(oracle::from(g.grad_theta0), fd0, 1e-6) < 1e-5);
  CHECK(oracle::max_rel_error(oracle::from(g.grad_theta1), fd1, 1e-6) < 1e-5);
}

}  // namespace

TEST_CASE("zero weights give uniform predictions") {
  std::mt19937_64 gen(1);
  auto in = make_instance(gen);
  in.params.theta0 = DenseMatrix(in.f, in.h);
  in.params.theta1 = DenseMatrix(in.h, in.c);
  const auto t = forward(in.params, in.a_hat, in.x);
  for (double v : t.probs.values()) CHECK(v == doctest::Approx(1.0 / in.c).epsilon(1e-15));
}

TEST_CASE("forward on a three-node path") {
  const std::vector<Edge> path{{0, 1}, {1, 2}};
  const auto a_hat = normalize_adjacency(UndirectedGraph::from_edges(3, path));
  const DenseMatrix xd(3, 2, {1.0, 0.0, 0.5, 0.5, 0.0, 1.0});
  const GcnParams p{DenseMatrix(2, 2, {0.3, -0.2, 0.1, 0.4}),
                    DenseMatrix(2, 3, {0.5, -0.5, 0.2, 0.1, 0.3, -0.4})};
  const auto t = forward(p, a_hat, SparseMatrix::from_dense(xd));
  const Mat expected = oracle::gcn_probs(oracle::normalized_adjacency(3, path), oracle::from(xd),
                                         oracle::from(p.theta0), oracle::from(p.theta1));
  CHECK(oracle::max_abs_diff(oracle::from(t.probs), expected) < 1e-12);
}

TEST_CASE("forward matches the literal formula with and without dropout") {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto in = make_instance(gen);
    Rng rng(static_cast<std::uint64_t>(trial));
    for (double rate : {0.0, 0.5, 0.8}) {
      const auto t = forward(in.params, in.a_hat, in.x, rate, rng);
      const Mat expected = oracle_probs(in, in.a, oracle::from(in.params.theta0),
                                        oracle::from(in.params.theta1), t);
      REQUIRE(oracle::max_abs_diff(oracle::from(t.probs), expected) < 1e-12);
      for (std::size_t i = 0; i < in.n; ++i) {
        const auto row = t.probs.row(i);
        REQUIRE(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("cross-entropy gradients match finite differences") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 8; ++trial) {
    CAPTURE(trial);
    auto in = make_instance(gen);
    const NodeMask mask = random_mask(in.n, gen);
    Rng rng(100 + trial);
    const double rate = trial % 2 ? 0.5 : 0.0;
    const auto t = forward(in.params, in.a_hat, in.x, rate, rng);
    const auto loss = cross_entropy(t.probs, in.labels, mask);
    const auto g = backward(t, in.params, in.a_hat, in.x, loss.grad_logits);

    Mat w0 = oracle::from(in.params.theta0), w1 = oracle::from(in.params.theta1);
    auto f = [&] { return oracle::mean_cross_entropy(oracle_probs(in, in.a, w0, w1, t), in.labels, mask); };
    CHECK(loss.value == doctest::Approx(f()).epsilon(1e-12));
    const Mat fd0 = oracle::finite_difference(w0, f);
    const Mat fd1 = oracle::finite_difference(w1, f);
    require_grad_close(g, fd0, fd1);
  }
}

TEST_CASE("consistency gradients match finite differences") {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 8; ++trial) {
    CAPTURE(trial);
    auto in = make_instance(gen);
    const DenseMatrix teacher = oracle::random_probs(in.n, in.c, gen, 2.0);
    const NodeMask all(in.n, true);
    // Keep logits moderate so no probability reaches the log floor.
    in.params.theta0 *= 0.2;
    Rng rng(200 + trial);
    const auto t = forward(in.params, in.a_hat, in.x, 0.8, rng);
    const auto loss = kl_consistency(teacher, t.probs, all);
    const auto g = backward(t, in.params, in.a_hat, in.x, loss.grad_logits);

    const Mat pt = oracle::from(teacher);
    Mat w0 = oracle::from(in.params.theta0), w1 = oracle::from(in.params.theta1);
    auto f = [&] { return oracle::mean_kl(pt, oracle_probs(in, in.a, w0, w1, t), all); };
    CHECK(loss.value == doctest::Approx(f()).epsilon(1e-10));
    require_grad_close(g, oracle::finite_difference(w0, f), oracle::finite_difference(w1, f));
  }
}

TEST_CASE("combined two-pass objective gradients match finite differences") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 6; ++trial) {
    CAPTURE(trial);
    auto in = make_instance(gen);
    // Perturbed adjacency: drop every other edge.
    std::vector<Edge> kept;
    for (std::size_t k = 0; k < in.edges.size(); k += 2) kept.push_back(in.edges[k]);
    const auto a_pert = normalize_adjacency(UndirectedGraph::from_edges(in.n, kept));
    const Mat a_pert_dense = oracle::normalized_adjacency(in.n, kept);
    const DenseMatrix teacher = oracle::random_probs(in.n, in.c, gen);
    const NodeMask labeled = random_mask(in.n, gen);
    const NodeMask all(in.n, true);
    const double lambda = 0.75;

    Rng rng(300 + trial);
    const auto clean = forward(in.params, in.a_hat, in.x, 0.5, rng);
    const auto pert = forward(in.params, a_pert, in.x, 0.8, rng);
    const auto ce = cross_entropy(clean.probs, in.labels, labeled);
    auto kl = kl_consistency(teacher, pert.probs, all);
    GradParams g = backward(clean, in.params, in.a_hat, in.x, ce.grad_logits);
    kl.grad_logits *= lambda;
    g += backward(pert, in.params, a_pert, in.x, kl.grad_logits);

    const Mat pt = oracle::from(teacher);
    Mat w0 = oracle::from(in.params.theta0), w1 = oracle::from(in.params.theta1);
    auto f = [&] {
      return oracle::mean_cross_entropy(oracle_probs(in, in.a, w0, w1, clean), in.labels, labeled) +
             lambda * oracle::mean_kl(pt, oracle_probs(in, a_pert_dense, w0, w1, pert), all);
    };
    CHECK(combine(ce.value, kl.value, lambda).total == doctest::Approx(f()).epsilon(1e-10));
    require_grad_close(g, oracle::finite_difference(w0, f), oracle::finite_difference(w1, f));
  }
}

TEST_CASE("backward is linear in the upstream gradient") {
  std::mt19937_64 gen(6);
  const auto in = make_instance(gen);
  Rng rng(7);
  const auto t = forward(in.params, in.a_hat, in.x, 0.5, rng);

  const auto zero = backward(t, in.params, in.a_hat, in.x, DenseMatrix(in.n, in.c));
  for (double v : zero.grad_theta0.values()) CHECK(v == 0.0);
  for (double v : zero.grad_theta1.values()) CHECK(v == 0.0);

  const DenseMatrix up = oracle::random_dense(in.n, in.c, gen);
  DenseMatrix doubled = up;
  doubled *= 2.0;
  const auto g1 = backward(t, in.params, in.a_hat, in.x, up);
  const auto g2 = backward(t, in.params, in.a_hat, in.x, doubled);
  for (std::size_t k = 0; k < g1.grad_theta0.values().size(); ++k)
    CHECK(g2.grad_theta0.values()[k] == 2.0 * g1.grad_theta0.values()[k]);
  for (std::size_t k = 0; k < g1.grad_theta1.values().size(); ++k)
    CHECK(g2.grad_theta1.values()[k] == 2.0 * g1.grad_theta1.values()[k]);

  CHECK_THROWS_AS(backward(t, in.params, in.a_hat, in.x, DenseMatrix(in.n, in.c + 1)),
                  std::invalid_argument);
}

TEST_CASE("forward is equivariant under node relabeling") {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = make_instance(gen);
    std::vector<NodeId> perm(in.n);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), gen);  // node i becomes perm[i]
    std::vector<Edge> edges;
    for (auto [u, v] : in.edges) edges.emplace_back(perm[u], perm[v]);
    const DenseMatrix xd = in.x.to_dense();
    DenseMatrix xp(in.n, in.f);
    for (std::size_t i = 0; i < in.n; ++i)
      for (std::size_t j = 0; j < in.f; ++j) xp(perm[i], j) = xd(i, j);
    const auto a_perm = normalize_adjacency(UndirectedGraph::from_edges(in.n, edges));
    const auto base = forward(in.params, in.a_hat, in.x);
    const auto moved = forward(in.params, a_perm, SparseMatrix::from_dense(xp));
    for (std::size_t i = 0; i < in.n; ++i)
      for (std::size_t j = 0; j < in.c; ++j)
        REQUIRE(std::abs(moved.probs(perm[i], j) - base.probs(i, j)) < 1e-12);
  }
}

TEST_CASE("shape mismatches are rejected") {
  std::mt19937_64 gen(9);
  auto in = make_instance(gen);
  GcnParams bad = in.params;
  bad.theta0 = DenseMatrix(in.f + 1, in.h);
  CHECK_THROWS_AS(forward(bad, in.a_hat, in.x), std::invalid_argument);
  bad = in.params;
  bad.theta1 = DenseMatrix(in.h + 1, in.c);
  CHECK_THROWS_AS(forward(bad, in.a_hat, in.x), std::invalid_argument);
  const auto other = normalize_adjacency(UndirectedGraph(in.n + 1));
  CHECK_THROWS_AS(forward(in.params, other, in.x), std::invalid_argument);
  Rng rng(0);
  CHECK_THROWS_AS(forward(in.params, in.a_hat, in.x, 1.0, rng), std::invalid_argument);
}

TEST_CASE("init_params") {
  Rng a(5), b(5);
  const auto p = init_params(30, 16, 7, a);
  CHECK(p.in_dim() == 30);
  CHECK(p.hidden_dim() == 16);
  CHECK(p.num_classes() == 7);
  CHECK(p == init_params(30, 16, 7, b));
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "segcn_test_ckpt";
  std::filesystem::create_directories(dir);
  Rng rng(3);
  const Checkpoint ckpt{init_params(12, 5, 3, rng), 417, ModelRole::kTeacher};
  save_checkpoint(ckpt, dir / "t.ckpt");
  const auto back = load_checkpoint(dir / "t.ckpt");
  CHECK(back.params == ckpt.params);
  CHECK(back.epoch == 417);
  CHECK(back.role == ModelRole::kTeacher);
  CHECK(to_string(back.role) == "teacher");
  CHECK(to_string(ModelRole::kStudent) == "student");

  {
    std::ofstream out(dir / "bad.ckpt", std::ios::binary);
    out << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), std::runtime_error);

  std::filesystem::resize_file(dir / "t.ckpt", 40);
  CHECK_THROWS_AS(load_checkpoint(dir / "t.ckpt"), std::runtime_error);
  std::filesystem::remove_all(dir);
}
