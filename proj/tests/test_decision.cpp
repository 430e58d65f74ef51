#include <gtest/gtest.h>

#include <cmath>

#include "gaga/decision.hpp"
#include "gaga/rng.hpp"
#include "test_utils.hpp"

using namespace gaga;

namespace {

// exhaustive reference: try every prefix of the v0-ascending order and keep
// the largest whose mean stays at or below the target
std::pair<std::size_t, double> best_prefix_by_search(std::vector<double> v0, double target) {
  std::sort(v0.begin(), v0.end());
  std::size_t best = 0;
  double best_bfdr = 0.0;
  double running = 0.0;
  for (std::size_t t = 0; t < v0.size(); ++t) {
    running += v0[t];
    const double mean = running / static_cast<double>(t + 1);
    if (mean <= target) {
      best = t + 1;
      best_bfdr = mean;
    }
  }
  return {best, best_bfdr};
}

PatternPosterior posterior_of(const std::vector<std::vector<double>>& rows) {
  PatternPosterior post;
  post.n = rows.size();
  post.H = rows.front().size();
  for (const auto& r : rows)
    for (double v : r) post.v.push_back(v);
  return post;
}

}  // namespace

TEST(BfdrThreshold, WorkedExample) {
  const std::vector<double> v0 = {0.01, 0.02, 0.10, 0.40};
  const BfdrResult res = bfdr_threshold(v0, 0.05);
  EXPECT_EQ(res.n_declared, 3u);
  EXPECT_NEAR(res.bfdr, 0.13 / 3.0, 1e-12);
  EXPECT_EQ(res.declared, (std::vector<std::uint8_t>{1, 1, 1, 0}));
  EXPECT_NEAR(res.threshold, 1.0 - 0.10, 1e-12);
}

TEST(BfdrThreshold, NoneDeclaredWhenAllAboveTarget) {
  const std::vector<double> v0 = {0.4, 0.6, 0.9};
  const BfdrResult res = bfdr_threshold(v0, 0.05);
  EXPECT_EQ(res.n_declared, 0u);
  EXPECT_DOUBLE_EQ(res.bfdr, 0.0);
  EXPECT_DOUBLE_EQ(res.threshold, 1.0);
}

TEST(BfdrThreshold, TargetOneDeclaresEverything) {
  const std::vector<double> v0 = {0.4, 0.6, 0.9};
  const BfdrResult res = bfdr_threshold(v0, 1.0);
  EXPECT_EQ(res.n_declared, 3u);
}

TEST(BfdrThreshold, MatchesExhaustiveSearchOnRandomVectors) {
  Rng rng(101);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 60);
    std::vector<double> v0(n);
    for (double& v : v0) {
      const double u = rng.uniform();
      v = u < 0.3 ? rng.uniform() * 0.05 : rng.uniform();  // mix of small and diffuse
      if (rng.uniform() < 0.2) v = std::round(v * 20.0) / 20.0;  // inject ties
    }
    const double target = rng.uniform();
    const BfdrResult res = bfdr_threshold(v0, target);
    const auto [want_count, want_bfdr] = best_prefix_by_search(v0, target);
    EXPECT_EQ(res.n_declared, want_count);
    if (want_count > 0) EXPECT_NEAR(res.bfdr, want_bfdr, 1e-12);
    // declared set is exactly the prefix: every declared v0 <= every undeclared v0
    double max_declared = -1.0, min_undeclared = 2.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (res.declared[i]) {
        max_declared = std::max(max_declared, v0[i]);
      } else {
        min_undeclared = std::min(min_undeclared, v0[i]);
      }
    }
    EXPECT_LE(max_declared, min_undeclared);
  }
}

TEST(BfdrThreshold, RunningMeanMonotoneInPrefixLength) {
  Rng rng(7);
  std::vector<double> v0(50);
  for (double& v : v0) v = rng.uniform();
  std::sort(v0.begin(), v0.end());
  double prev_mean = 0.0, running = 0.0;
  for (std::size_t t = 0; t < v0.size(); ++t) {
    running += v0[t];
    const double mean = running / static_cast<double>(t + 1);
    EXPECT_GE(mean, prev_mean - 1e-15);
    prev_mean = mean;
  }
}

TEST(ClassifyGenes, UndeclaredGoesToNull) {
  const auto post = posterior_of({{0.9, 0.05, 0.05}});
  const std::vector<std::uint8_t> declared = {0};
  EXPECT_EQ(classify_genes(post, declared), (std::vector<std::size_t>{0}));
}

TEST(ClassifyGenes, DeclaredTakesArgmaxOverNonNull) {
  const auto post = posterior_of({{0.1, 0.3, 0.6}});
  const std::vector<std::uint8_t> declared = {1};
  EXPECT_EQ(classify_genes(post, declared), (std::vector<std::size_t>{2}));
}

TEST(ClassifyGenes, TieBreaksTowardLowestIndex) {
  const auto post = posterior_of({{0.10, 0.45, 0.45}});
  const std::vector<std::uint8_t> declared = {1};
  EXPECT_EQ(classify_genes(post, declared), (std::vector<std::size_t>{1}));
}

TEST(ClassifyGenes, InvariantUnderMonotoneTransformOfRows) {
  Rng rng(31);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> row(4);
    for (double& v : row) v = rng.uniform() + 0.01;
    std::vector<double> squashed(4);
    for (std::size_t l = 0; l < 4; ++l) squashed[l] = std::sqrt(row[l]) + 1.0;
    const std::vector<std::uint8_t> declared = {1};
    const auto a = classify_genes(posterior_of({row}), declared);
    const auto b = classify_genes(posterior_of({squashed}), declared);
    EXPECT_EQ(a, b);
  }
}

TEST(BfnrEstimate, AllDeclaredGivesZero) {
  const std::vector<double> v0 = {0.1, 0.2};
  const std::vector<std::uint8_t> declared = {1, 1};
  EXPECT_DOUBLE_EQ(bfnr_estimate(v0, declared), 0.0);
}

TEST(BfnrEstimate, MeanOverUndeclared) {
  const std::vector<double> v0 = {0.9, 0.8};
  const std::vector<std::uint8_t> declared = {0, 0};
  EXPECT_NEAR(bfnr_estimate(v0, declared), 0.15, 1e-12);
}

TEST(BfnrEstimate, CertainNullsContributeNothing) {
  const std::vector<double> v0 = {1.0, 1.0, 1.0};
  const std::vector<std::uint8_t> declared = {0, 0, 0};
  EXPECT_DOUBLE_EQ(bfnr_estimate(v0, declared), 0.0);
}

TEST(Decide, EndToEndConsistency) {
  const auto post = posterior_of({{0.01, 0.5, 0.49},
                                  {0.02, 0.1, 0.88},
                                  {0.10, 0.8, 0.10},
                                  {0.40, 0.3, 0.30},
                                  {0.95, 0.02, 0.03}});
  const DecisionResult dec = decide(post, 0.05);
  EXPECT_EQ(dec.declared, (std::vector<std::uint8_t>{1, 1, 1, 0, 0}));
  EXPECT_EQ(dec.assigned_pattern, (std::vector<std::size_t>{1, 2, 1, 0, 0}));
  EXPECT_NEAR(dec.bfdr_estimate, 0.13 / 3.0, 1e-12);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(dec.declared[i] != 0, dec.assigned_pattern[i] != 0);
  }
}
