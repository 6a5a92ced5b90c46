#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "heurevo/error.hpp"
#include "heurevo/metrics.hpp"
#include "../test_util.hpp"

namespace heurevo {
namespace {

using testing::random_set;
using testing::random_tensor;

// Brute-force oracle: re-derives every per-set and per-agent error with
// plain loops over the raw coordinate arrays.
struct Oracle {
  std::size_t best_k = 0;
  double min_ade = 0.0;
  double min_fde = 0.0;
  std::vector<std::size_t> agent_best;
};

Oracle brute_force(const PredictionSet& p, const TrajTensor& gt) {
  const std::size_t K = p.k(), A = gt.num_agents(), T = gt.num_frames();
  std::vector<double> set_ade(K), set_fde(K);
  std::vector<std::vector<double>> agent_ade(A, std::vector<double>(K));
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0, f = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      double sa = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        const double dx = p.at(k, a, t).x - gt.at(a, t).x;
        const double dy = p.at(k, a, t).y - gt.at(a, t).y;
        sa += std::sqrt(dx * dx + dy * dy);
      }
      const double dx = p.at(k, a, T - 1).x - gt.at(a, T - 1).x;
      const double dy = p.at(k, a, T - 1).y - gt.at(a, T - 1).y;
      f += std::sqrt(dx * dx + dy * dy);
      s += sa;
      agent_ade[a][k] = sa / static_cast<double>(T);
    }
    set_ade[k] = s / static_cast<double>(A * T);
    set_fde[k] = f / static_cast<double>(A);
  }
  Oracle o;
  o.best_k = static_cast<std::size_t>(std::min_element(set_ade.begin(), set_ade.end()) - set_ade.begin());
  o.min_ade = set_ade[o.best_k];
  o.min_fde = set_fde[o.best_k];
  for (std::size_t a = 0; a < A; ++a) {
    o.agent_best.push_back(static_cast<std::size_t>(
        std::min_element(agent_ade[a].begin(), agent_ade[a].end()) - agent_ade[a].begin()));
  }
  return o;
}

TEST(Ade, IdentityIsZero) {
  std::mt19937_64 rng(1);
  const auto gt = random_tensor(3, 12, rng);
  EXPECT_EQ(ade(gt, gt), 0.0);
  EXPECT_EQ(fde(gt, gt), 0.0);
}

TEST(Ade, UniformUnitOffset) {
  TrajTensor gt(2, 12);
  TrajTensor pred = gt.translated({1.0, 0.0});
  EXPECT_DOUBLE_EQ(ade(pred, gt), 1.0);
}

TEST(Ade, MatchesHandSummedMean) {
  std::mt19937_64 rng(7);
  const auto gt = random_tensor(2, 3, rng);
  const auto pred = random_tensor(2, 3, rng);
  double sum = 0.0;
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t t = 0; t < 3; ++t) {
      sum += std::hypot(pred.at(a, t).x - gt.at(a, t).x, pred.at(a, t).y - gt.at(a, t).y);
    }
  }
  EXPECT_NEAR(ade(pred, gt), sum / 6.0, 1e-12);
}

TEST(Fde, ThreeFourFiveOnFinalFrame) {
  TrajTensor gt(1, 12);
  TrajTensor pred(1, 12);
  pred.set(0, 11, {3.0, 4.0});
  EXPECT_DOUBLE_EQ(fde(pred, gt), 5.0);
}

TEST(Fde, MatchesFinalFrameLoop) {
  std::mt19937_64 rng(9);
  const auto gt = random_tensor(4, 5, rng);
  const auto pred = random_tensor(4, 5, rng);
  double sum = 0.0;
  for (std::size_t a = 0; a < 4; ++a) sum += (pred.at(a, 4) - gt.at(a, 4)).norm();
  EXPECT_NEAR(fde(pred, gt), sum / 4.0, 1e-12);
}

TEST(Ade, RejectsShapeMismatchAndNaN) {
  TrajTensor a(2, 12), b(3, 12);
  EXPECT_THROW(ade(a, b), ContractError);
  EXPECT_THROW(fde(a, TrajTensor(2, 11)), ContractError);
  TrajTensor bad(2, 12);
  bad.set(1, 3, {std::nan(""), 0.0});
  EXPECT_THROW(ade(bad, a), ValidationError);
  TrajTensor px(2, 12, Unit::kPixels);
  EXPECT_THROW(ade(px, a), ContractError);
}

TEST(MinOfK, SingleSampleEqualsPlainMetrics) {
  std::mt19937_64 rng(3);
  const auto gt = random_tensor(3, 12, rng);
  const auto p = random_set(1, 3, 12, rng);
  const auto m = evaluate_min_of_k(p, gt);
  EXPECT_EQ(m.best_k, 0u);
  EXPECT_NEAR(m.min_ade, ade(p.sample(0), gt), 1e-12);
  EXPECT_NEAR(m.min_fde, fde(p.sample(0), gt), 1e-12);
}

TEST(MinOfK, ExactMatchSetWins) {
  std::mt19937_64 rng(4);
  const auto gt = random_tensor(2, 12, rng);
  auto p = random_set(3, 2, 12, rng);
  p.set_sample(2, gt);
  const auto m = evaluate_min_of_k(p, gt);
  EXPECT_EQ(m.best_k, 2u);
  EXPECT_EQ(m.min_ade, 0.0);
  EXPECT_EQ(m.min_fde, 0.0);
  EXPECT_EQ(m.objective_j, 0.0);
}

TEST(MinOfK, MatchesBruteForceEnumeration) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto gt = random_tensor(3, 7, rng);
    const auto p = random_set(5, 3, 7, rng);
    const auto m = evaluate_min_of_k(p, gt);
    const auto o = brute_force(p, gt);
    EXPECT_EQ(m.best_k, o.best_k);
    EXPECT_NEAR(m.min_ade, o.min_ade, 1e-12);
    EXPECT_NEAR(m.min_fde, o.min_fde, 1e-12);
    EXPECT_EQ(m.per_agent_best_index, o.agent_best);
  }
}

TEST(MinOfK, TiesResolveToLowestIndex) {
  TrajTensor gt(1, 4);
  PredictionSet p(4, 1, 4);
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t t = 0; t < 4; ++t) p.set(k, 0, t, {k == 0 ? 2.0 : 1.0, 0.0});
  }
  const auto m = evaluate_min_of_k(p, gt);
  EXPECT_EQ(m.best_k, 1u);
  EXPECT_EQ(m.per_agent_best_index[0], 1u);
}

TEST(MinOfK, WeightedRuleUsesObjectiveScore) {
  // Set 0: small ADE, huge final error. Set 1: larger ADE, exact final frame.
  TrajTensor gt(1, 4);
  PredictionSet p(2, 1, 4);
  p.set(0, 0, 3, {4.0, 0.0});  // ADE 1.0, FDE 4.0 -> J = 2.2
  for (std::size_t t = 0; t < 3; ++t) p.set(1, 0, t, {1.8, 0.0});  // ADE 1.35, FDE 0 -> J = 0.81
  EXPECT_EQ(evaluate_min_of_k(p, gt, SelectionRule::kAde).best_k, 0u);
  const auto w = evaluate_min_of_k(p, gt, SelectionRule::kWeighted);
  EXPECT_EQ(w.best_k, 1u);
  EXPECT_NEAR(w.objective_j, 0.6 * 1.35, 1e-12);
}

TEST(MinOfK, RejectsEmptyKAndNonFinite) {
  TrajTensor gt(1, 12);
  EXPECT_THROW(evaluate_min_of_k(PredictionSet(0, 1, 12), gt), ValidationError);
  PredictionSet p(2, 1, 12);
  p.set(1, 0, 0, {std::numeric_limits<double>::infinity(), 0.0});
  EXPECT_THROW(evaluate_min_of_k(p, gt), ValidationError);
  EXPECT_THROW(evaluate_min_of_k(PredictionSet(2, 2, 12), gt), ContractError);
}

// Property checks over random instances.
TEST(MinOfKProperties, MinAdeBoundsEverySet) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const auto gt = random_tensor(1 + trial % 4, 1 + trial % 6, rng);
    const auto p = random_set(1 + trial % 6, gt.num_agents(), gt.num_frames(), rng);
    const auto m = evaluate_min_of_k(p, gt);
    for (std::size_t k = 0; k < p.k(); ++k) EXPECT_LE(m.min_ade, ade(p.sample(k), gt) * (1.0 + 1e-12));
    EXPECT_NEAR(m.objective_j, 0.6 * m.min_ade + 0.4 * m.min_fde, 1e-12 * (1.0 + m.objective_j));
    for (std::size_t idx : m.per_agent_best_index) EXPECT_LT(idx, p.k());
  }
}

TEST(MinOfKProperties, PermutingSamplesRemapsIndices) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const auto gt = random_tensor(3, 8, rng);
    const auto p = random_set(6, 3, 8, rng);
    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    PredictionSet q(6, 3, 8);
    for (std::size_t k = 0; k < 6; ++k) q.set_sample(k, p.sample(perm[k]));  // q[k] = p[perm[k]]
    const auto mp = evaluate_min_of_k(p, gt);
    const auto mq = evaluate_min_of_k(q, gt);
    EXPECT_EQ(perm[mq.best_k], mp.best_k);
    EXPECT_DOUBLE_EQ(mq.min_ade, mp.min_ade);
    EXPECT_DOUBLE_EQ(mq.min_fde, mp.min_fde);
    for (std::size_t a = 0; a < 3; ++a) {
      EXPECT_EQ(perm[mq.per_agent_best_index[a]], mp.per_agent_best_index[a]);
    }
  }
}

TEST(MinOfKProperties, TranslationInvariant) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> shift(-1e3, 1e3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto gt = random_tensor(2, 12, rng);
    const auto pred = random_tensor(2, 12, rng);
    const Vec2 c{shift(rng), shift(rng)};
    EXPECT_NEAR(ade(pred.translated(c), gt.translated(c)), ade(pred, gt), 1e-9);
    EXPECT_NEAR(fde(pred.translated(c), gt.translated(c)), fde(pred, gt), 1e-9);
  }
}

TEST(Objective, SlopesAreExactWeights) {
  EXPECT_DOUBLE_EQ(combined_objective(1.0, 0.0), 0.6);
  EXPECT_DOUBLE_EQ(combined_objective(0.0, 1.0), 0.4);
  EXPECT_DOUBLE_EQ(combined_objective(2.0, 1.0) - combined_objective(1.0, 1.0), 0.6);
}

TEST(Histogram, ZeroFilledCounts) {
  EvalMetrics m;
  m.per_agent_best_index = {0, 0};
  const std::vector<EvalMetrics> results{m};
  const auto h = best_index_histogram(results, 3);
  EXPECT_EQ(h, (BestIndexHistogram{{0, 2}, {1, 0}, {2, 0}}));
}

TEST(Histogram, TotalEqualsAgentCount) {
  std::mt19937_64 rng(51);
  std::vector<EvalMetrics> results;
  long long agents = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + rng() % 5;
    agents += static_cast<long long>(n);
    results.push_back(evaluate_min_of_k(random_set(20, n, 12, rng), random_tensor(n, 12, rng)));
  }
  const auto h = best_index_histogram(results, 20);
  EXPECT_EQ(h.size(), 20u);
  long long total = 0;
  for (const auto& [k, c] : h) total += c;
  EXPECT_EQ(total, agents);
}

TEST(Histogram, RejectsOutOfRangeIndex) {
  EvalMetrics m;
  m.per_agent_best_index = {5};
  const std::vector<EvalMetrics> results{m};
  EXPECT_THROW(best_index_histogram(results, 3), ContractError);
}

TEST(Accumulator, AveragesScenesAndPoolsHistogram) {
  MetricsAccumulator acc(3);
  EvalMetrics a{1.0, 2.0, 0, 0.0, {0, 1}};
  EvalMetrics b{3.0, 4.0, 1, 0.0, {1}};
  acc.add(a);
  acc.add(b);
  EXPECT_DOUBLE_EQ(acc.mean_ade(), 2.0);
  EXPECT_DOUBLE_EQ(acc.mean_fde(), 3.0);
  EXPECT_DOUBLE_EQ(acc.objective(), 0.6 * 2.0 + 0.4 * 3.0);
  EXPECT_EQ(acc.histogram(), (BestIndexHistogram{{0, 1}, {1, 2}, {2, 0}}));
}

}  // namespace
}  // namespace heurevo
