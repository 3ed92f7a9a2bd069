#include <doctest.h>

#include <algorithm>
#include <random>

#include "segcn/self_training.hpp"
#include "support/oracles.hpp"

using namespace segcn;

TEST_CASE("dual agreement examples") {
  const NodeMask eligible(1, true);
  SUBCASE("agreeing and confident") {
    const DenseMatrix ps(1, 3, {0.95, 0.03, 0.02});
    const DenseMatrix pt(1, 3, {0.92, 0.05, 0.03});
    const auto sel = select_pseudo_labels(ps, pt, 0.9, eligible);
    REQUIRE(sel.size() == 1);
    CHECK(sel.nodes[0] == 0);
    CHECK(sel.classes[0] == 0);
    CHECK(sel.threshold == 0.9);
  }
  SUBCASE("teacher below threshold") {
    const DenseMatrix ps(1, 3, {0.95, 0.03, 0.02});
    const DenseMatrix pt(1, 3, {0.85, 0.10, 0.05});
    CHECK(select_pseudo_labels(ps, pt, 0.9, eligible).size() == 0);
  }
  SUBCASE("confident but disagreeing") {
    const DenseMatrix ps(1, 3, {0.95, 0.03, 0.02});
    const DenseMatrix pt(1, 3, {0.02, 0.96, 0.02});
    CHECK(select_pseudo_labels(ps, pt, 0.9, eligible).size() == 0);
  }
}

TEST_CASE("selection properties") {
  std::mt19937_64 gen(1);
  std::bernoulli_distribution coin(0.7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 60;
    const DenseMatrix ps = oracle::random_probs(n, 4, gen, 6.0);
    DenseMatrix pt = ps;
    // Teacher roughly follows the student.
    const DenseMatrix noise = oracle::random_probs(n, 4, gen, 3.0);
    for (std::size_t k = 0; k < pt.values().size(); ++k)
      pt.values()[k] = 0.8 * pt.values()[k] + 0.2 * noise.values()[k];
    NodeMask eligible(n);
    for (std::size_t i = 0; i < n; ++i) eligible[i] = coin(gen);

    std::size_t prev = 0;
    for (double t = 0.95; t >= 0.5; t -= 0.05) {
      const auto dual = select_pseudo_labels(ps, pt, t, eligible, SelfTrainingMode::kDual);
      const auto teacher =
          select_pseudo_labels(ps, pt, t, eligible, SelfTrainingMode::kTeacherOnly);
      REQUIRE(dual.size() >= prev);
      prev = dual.size();
      REQUIRE(std::is_sorted(dual.nodes.begin(), dual.nodes.end()));
      for (std::size_t k = 0; k < dual.size(); ++k) {
        const NodeId i = dual.nodes[k];
        REQUIRE(eligible[i]);
        REQUIRE(ps(i, dual.classes[k]) > t);
        REQUIRE(pt(i, dual.classes[k]) > t);
        REQUIRE(std::binary_search(teacher.nodes.begin(), teacher.nodes.end(), i));
      }
      for (NodeId i : teacher.nodes) REQUIRE(eligible[i]);
    }
    CHECK(select_pseudo_labels(ps, pt, 0.5, eligible, SelfTrainingMode::kOff).size() == 0);
  }
}
