#include <gtest/gtest.h>

#include <cmath>

#include "gaga/fitting.hpp"
#include "gaga/simulation.hpp"
#include "test_utils.hpp"

using namespace gaga;

namespace {

const PatternSet kPatterns =
    make_pattern_set({parse_pattern("0 0", 2), parse_pattern("0 1", 2)});

GaGaHyper true_hyper() {
  GaGaHyper h;
  h.alpha0 = 3.0;
  h.nu = 0.02;
  h.beta = 4.0;
  h.mu = 25.0;
  h.pi = {0.9, 0.1};
  return h;
}

FitConfig quick_config() {
  FitConfig cfg;
  cfg.max_iterations = 25;
  cfg.rel_loglik_tol = 1e-6;
  cfg.m_step_budget = 120;
  cfg.threads = 2;
  return cfg;
}

}  // namespace

TEST(InitHyperparams, RecoversScaleWithinFactorThree) {
  const GaGaHyper truth = true_hyper();
  const auto sim = simulate_parametric(truth, 3000, 8, kPatterns, 42);
  const GaGaHyper init = init_hyperparams(sim.x, sim.groups, kPatterns);
  EXPECT_GT(init.alpha0, truth.alpha0 / 3.0);
  EXPECT_LT(init.alpha0, truth.alpha0 * 3.0);
  EXPECT_GT(init.nu, truth.nu / 3.0);
  EXPECT_LT(init.nu, truth.nu * 3.0);
  EXPECT_GT(init.beta, truth.beta / 3.0);
  EXPECT_LT(init.beta, truth.beta * 3.0);
  EXPECT_GT(init.mu, truth.mu / 3.0);
  EXPECT_LT(init.mu, truth.mu * 3.0);
}

TEST(InitHyperparams, UniformPi) {
  const auto sim = simulate_parametric(true_hyper(), 200, 4, kPatterns, 1);
  const GaGaHyper init = init_hyperparams(sim.x, sim.groups, kPatterns);
  ASSERT_EQ(init.pi.size(), 2u);
  EXPECT_DOUBLE_EQ(init.pi[0], 0.5);
  EXPECT_DOUBLE_EQ(init.pi[1], 0.5);
}

TEST(InitHyperparams, AllConstantMatrixIsDegenerate) {
  const auto m = validate_expression_matrix(
      {{5.0, 5.0, 5.0, 5.0}, {2.0, 2.0, 2.0, 2.0}}, {"g1", "g2"}, {"a", "b", "c", "d"});
  const auto groups = make_group_assignment({1, 1, 2, 2}, 2);
  try {
    init_hyperparams(m, groups, kPatterns);
    FAIL();
  } catch (const data_error& e) {
    EXPECT_EQ(e.code(), errc::degenerate_data);
  }
}

TEST(InitHyperparams, MixtureComponentsSortedByNu) {
  const auto sim = simulate_parametric(true_hyper(), 500, 4, kPatterns, 3);
  const MiGaGaHyper init = init_hyperparams(sim.x, sim.groups, kPatterns, 3);
  ASSERT_EQ(init.M(), 3u);
  EXPECT_LE(init.components[0].nu, init.components[1].nu);
  EXPECT_LE(init.components[1].nu, init.components[2].nu);
  EXPECT_EQ(init.rho, (std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}));
}

TEST(TotalLogMarginal, SingleGeneSinglePattern) {
  const auto pats = make_pattern_set({parse_pattern("0 0", 2)});
  const auto m = validate_expression_matrix({{2.0, 3.0, 2.5, 2.2}}, {"g"},
                                            {"a", "b", "c", "d"});
  const auto groups = make_group_assignment({1, 1, 2, 2}, 2);
  GaGaHyper h = true_hyper();
  h.pi = {1.0};
  const double total = total_log_marginal(m, groups, pats, h);
  const auto st = compute_sufficient_stats(m.row(0), groups, pats);
  EXPECT_NEAR(total, gene_pattern_log_marginal(st, 0, h), 1e-12);
}

TEST(TotalLogMarginal, AdditiveOverGenes) {
  const auto m2 = validate_expression_matrix({{2.0, 3.0, 2.5, 2.2}, {5.0, 6.0, 9.0, 8.0}},
                                             {"g1", "g2"}, {"a", "b", "c", "d"});
  const auto m_a = validate_expression_matrix({{2.0, 3.0, 2.5, 2.2}}, {"g1"},
                                              {"a", "b", "c", "d"});
  const auto m_b = validate_expression_matrix({{5.0, 6.0, 9.0, 8.0}}, {"g2"},
                                              {"a", "b", "c", "d"});
  const auto groups = make_group_assignment({1, 1, 2, 2}, 2);
  const GaGaHyper h = true_hyper();
  EXPECT_NEAR(total_log_marginal(m2, groups, kPatterns, h),
              total_log_marginal(m_a, groups, kPatterns, h) +
                  total_log_marginal(m_b, groups, kPatterns, h),
              1e-10);
}

TEST(EmFitGaga, TraceMonotoneAndConverges) {
  const auto sim = simulate_parametric(true_hyper(), 600, 5, kPatterns, 7);
  const FitResult res = em_fit_gaga(sim.x, sim.groups, kPatterns, quick_config());
  ASSERT_GE(res.loglik_trace.size(), 2u);
  for (std::size_t t = 1; t < res.loglik_trace.size(); ++t) {
    EXPECT_GE(res.loglik_trace[t], res.loglik_trace[t - 1] - 1e-8) << "iteration " << t;
  }
  EXPECT_EQ(res.kind, ModelKind::gaga);
  EXPECT_GT(res.iterations, 0u);
}

TEST(EmFitGaga, DeterministicAcrossRunsAndThreadCounts) {
  const auto sim = simulate_parametric(true_hyper(), 300, 4, kPatterns, 11);
  FitConfig cfg = quick_config();
  cfg.max_iterations = 6;
  cfg.threads = 1;
  const FitResult a = em_fit_gaga(sim.x, sim.groups, kPatterns, cfg);
  const FitResult b = em_fit_gaga(sim.x, sim.groups, kPatterns, cfg);
  cfg.threads = 2;
  const FitResult c = em_fit_gaga(sim.x, sim.groups, kPatterns, cfg);
  EXPECT_EQ(a.gaga().alpha0, b.gaga().alpha0);
  EXPECT_EQ(a.gaga().nu, b.gaga().nu);
  EXPECT_EQ(a.gaga().beta, b.gaga().beta);
  EXPECT_EQ(a.gaga().mu, b.gaga().mu);
  EXPECT_EQ(a.gaga().pi, b.gaga().pi);
  EXPECT_EQ(a.loglik_trace, b.loglik_trace);
  EXPECT_EQ(a.gaga().alpha0, c.gaga().alpha0);
  EXPECT_EQ(a.gaga().nu, c.gaga().nu);
  EXPECT_EQ(a.gaga().beta, c.gaga().beta);
  EXPECT_EQ(a.gaga().mu, c.gaga().mu);
  EXPECT_EQ(a.gaga().pi, c.gaga().pi);
  EXPECT_EQ(a.loglik_trace, c.loglik_trace);
}

TEST(EmFitGaga, ImprovesOnTheInitialLoglik) {
  const auto sim = simulate_parametric(true_hyper(), 600, 5, kPatterns, 13);
  const FitResult res = em_fit_gaga(sim.x, sim.groups, kPatterns, quick_config());
  EXPECT_GT(res.final_loglik(), res.loglik_trace.front());
}

TEST(EmFitMigaga, SingleComponentMatchesGaga) {
  const auto sim = simulate_parametric(true_hyper(), 400, 5, kPatterns, 17);
  FitConfig cfg = quick_config();
  cfg.max_iterations = 10;
  const FitResult g = em_fit_gaga(sim.x, sim.groups, kPatterns, cfg);
  const FitResult m = em_fit_migaga(sim.x, sim.groups, kPatterns, 1, cfg);
  EXPECT_EQ(m.kind, ModelKind::migaga);
  EXPECT_LT(testutil::rel_err(m.migaga().components[0].alpha0, g.gaga().alpha0), 1e-9);
  EXPECT_LT(testutil::rel_err(m.migaga().components[0].nu, g.gaga().nu), 1e-9);
  EXPECT_LT(testutil::rel_err(m.migaga().beta, g.gaga().beta), 1e-9);
  EXPECT_LT(testutil::rel_err(m.migaga().mu, g.gaga().mu), 1e-9);
  EXPECT_NEAR(m.final_loglik(), g.final_loglik(), 1e-6 * std::abs(g.final_loglik()));
}

TEST(EmFitMigaga, RecoversWellSeparatedComponents) {
  MiGaGaHyper truth;
  truth.components = {{6.0, 0.01}, {6.0, 1.0}};  // component means ~120 and ~1.2
  truth.rho = {0.55, 0.45};
  truth.dirichlet_r = {1.0, 1.0};
  truth.beta = 8.0;
  truth.mu = 40.0;
  truth.pi = {0.9, 0.1};
  const auto sim = simulate_parametric(truth, 1200, 6, kPatterns, 19);
  FitConfig cfg = quick_config();
  cfg.max_iterations = 30;
  const FitResult res = em_fit_migaga(sim.x, sim.groups, kPatterns, 2, cfg);
  const MiGaGaHyper& h = res.migaga();
  ASSERT_EQ(h.M(), 2u);
  EXPECT_LE(h.components[0].nu, h.components[1].nu);
  EXPECT_LT(testutil::rel_err(h.components[0].nu, truth.components[0].nu), 0.15);
  EXPECT_LT(testutil::rel_err(h.components[1].nu, truth.components[1].nu), 0.15);
  EXPECT_NEAR(h.rho[0], truth.rho[0], 0.05);
  for (std::size_t t = 1; t < res.loglik_trace.size(); ++t)
    EXPECT_GE(res.loglik_trace[t], res.loglik_trace[t - 1] - 1e-8);
}

TEST(BicSelect, SingleCandidateReturnsOne) {
  const auto sim = simulate_parametric(true_hyper(), 250, 4, kPatterns, 23);
  FitConfig cfg = quick_config();
  cfg.max_iterations = 5;
  const BicSelection sel = bic_select(sim.x, sim.groups, kPatterns, 1, cfg);
  EXPECT_EQ(sel.chosen_M, 1u);
  ASSERT_EQ(sel.entries.size(), 1u);
  EXPECT_TRUE(sel.entries[0].ok);
}

TEST(PruneClusters, ThresholdZeroIsIdentity) {
  MiGaGaHyper h;
  h.components = {{3.0, 0.1}, {4.0, 1.0}};
  h.rho = {0.7, 0.3};
  h.dirichlet_r = {1.0, 1.0};
  h.beta = 2.0;
  h.mu = 10.0;
  h.pi = {0.9, 0.1};
  const MiGaGaHyper out = prune_clusters(h, 0.0);
  EXPECT_EQ(out.M(), 2u);
  EXPECT_EQ(out.rho, h.rho);
}

TEST(PruneClusters, DropsLightComponentAndRenormalizes) {
  MiGaGaHyper h;
  h.components = {{3.0, 0.1}, {4.0, 1.0}};
  h.rho = {0.99, 0.01};
  h.dirichlet_r = {1.0, 1.0};
  h.beta = 2.0;
  h.mu = 10.0;
  h.pi = {0.9, 0.1};
  const MiGaGaHyper out = prune_clusters(h, 0.05);
  ASSERT_EQ(out.M(), 1u);
  EXPECT_DOUBLE_EQ(out.rho[0], 1.0);
  EXPECT_DOUBLE_EQ(out.components[0].nu, 0.1);
}

TEST(PruneClusters, RhoAlwaysRenormalized) {
  MiGaGaHyper h;
  h.components = {{3.0, 0.1}, {4.0, 0.5}, {5.0, 1.0}};
  h.rho = {0.5, 0.3, 0.2};
  h.dirichlet_r = {1.0, 1.0, 1.0};
  h.beta = 2.0;
  h.mu = 10.0;
  h.pi = {1.0};
  const MiGaGaHyper out = prune_clusters(h, 0.25);
  double total = 0.0;
  for (double r : out.rho) total += r;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_EQ(out.M(), 2u);
}

TEST(PruneClusters, AllPrunedThrows) {
  MiGaGaHyper h;
  h.components = {{3.0, 0.1}, {4.0, 1.0}};
  h.rho = {0.5, 0.5};
  h.dirichlet_r = {1.0, 1.0};
  h.beta = 2.0;
  h.mu = 10.0;
  h.pi = {1.0};
  try {
    prune_clusters(h, 0.9);
    FAIL();
  } catch (const numeric_error& e) {
    EXPECT_EQ(e.code(), errc::all_clusters_pruned);
  }
}
