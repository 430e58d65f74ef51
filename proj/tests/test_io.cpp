#include <gtest/gtest.h>

#include <cmath>

#include "gaga/io.hpp"
#include "test_utils.hpp"

using namespace gaga;

TEST(FormatDouble, ExactRoundTrip) {
  Rng rng(1);
  for (int rep = 0; rep < 200; ++rep) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform() * 40.0 - 20.0);
    EXPECT_EQ(parse_double(format_double(v), "test"), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(LoadExpressionTsv, WellFormedFile) {
  testutil::TempDir tmp("io1");
  testutil::spit(tmp.path("x.tsv"),
                 "gene_id\ta1\ta2\ta3\n"
                 "g1\t1.5\t2.5\t3.5\n"
                 "g2\t4\t5\t6\n");
  const auto m = load_expression_tsv(tmp.path("x.tsv"));
  EXPECT_EQ(m.gene_ids, (std::vector<std::string>{"g1", "g2"}));
  EXPECT_EQ(m.array_ids, (std::vector<std::string>{"a1", "a2", "a3"}));
  EXPECT_DOUBLE_EQ(m.at(1, 2), 6.0);
}

TEST(LoadExpressionTsv, MissingCellNamesTheLine) {
  testutil::TempDir tmp("io2");
  testutil::spit(tmp.path("x.tsv"),
                 "gene_id\ta1\ta2\n"
                 "g1\t1.5\t2.5\n"
                 "g2\t4\n");
  try {
    load_expression_tsv(tmp.path("x.tsv"));
    FAIL();
  } catch (const data_error& e) {
    EXPECT_EQ(e.code(), errc::parse_error);
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos);
  }
}

TEST(LoadExpressionTsv, OffsetAppliedBeforeValidation) {
  testutil::TempDir tmp("io3");
  testutil::spit(tmp.path("x.tsv"),
                 "gene_id\ta1\ta2\n"
                 "g1\t0\t2.5\n");
  EXPECT_THROW(load_expression_tsv(tmp.path("x.tsv")), data_error);
  const auto m = load_expression_tsv(tmp.path("x.tsv"), 1.0);
  EXPECT_DOUBLE_EQ(m.at(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(m.at(0, 1), 3.5);
}

TEST(LoadExpressionTsv, BadNumber) {
  testutil::TempDir tmp("io4");
  testutil::spit(tmp.path("x.tsv"), "gene_id\ta1\ta2\ng1\t1.5\tabc\n");
  EXPECT_THROW(load_expression_tsv(tmp.path("x.tsv")), data_error);
}

TEST(LoadGroupsTsv, FirstAppearanceOrderDefinesIndices) {
  testutil::TempDir tmp("io5");
  testutil::spit(tmp.path("g.tsv"), "a1\tALL\na2\tALL\na3\tMLL\n");
  const auto gm = load_groups_tsv(tmp.path("g.tsv"), {"a1", "a2", "a3"});
  EXPECT_EQ(gm.assignment.K, 2);
  EXPECT_EQ(gm.assignment.labels, (std::vector<int>{1, 1, 2}));
  EXPECT_EQ(gm.labels, (std::vector<std::string>{"ALL", "MLL"}));
}

TEST(LoadGroupsTsv, ErrorCases) {
  testutil::TempDir tmp("io6");
  testutil::spit(tmp.path("unknown.tsv"), "a1\tA\na2\tB\nzz\tA\n");
  try {
    load_groups_tsv(tmp.path("unknown.tsv"), {"a1", "a2"});
    FAIL();
  } catch (const data_error& e) {
    EXPECT_EQ(e.code(), errc::unknown_array);
  }
  testutil::spit(tmp.path("dup.tsv"), "a1\tA\na1\tB\na2\tA\n");
  try {
    load_groups_tsv(tmp.path("dup.tsv"), {"a1", "a2"});
    FAIL();
  } catch (const data_error& e) {
    EXPECT_EQ(e.code(), errc::duplicate_array);
  }
  testutil::spit(tmp.path("missing.tsv"), "a1\tA\n");
  try {
    load_groups_tsv(tmp.path("missing.tsv"), {"a1", "a2"});
    FAIL();
  } catch (const data_error& e) {
    EXPECT_EQ(e.code(), errc::missing_array);
  }
}

TEST(LoadPatternsFile, MaqcStyleFivePatterns) {
  testutil::TempDir tmp("io7");
  testutil::spit(tmp.path("p.txt"), "0 0 0 0\n0 1 1 1\n0 0 1 1\n0 0 0 1\n0 1 2 3\n");
  const auto pats = load_patterns_file(tmp.path("p.txt"), 4);
  ASSERT_EQ(pats.H(), 5u);
  EXPECT_EQ(pats[0].n_distinct, 1);
  EXPECT_EQ(pats[1].n_distinct, 2);
  EXPECT_EQ(pats[2].n_distinct, 2);
  EXPECT_EQ(pats[3].n_distinct, 2);
  EXPECT_EQ(pats[4].n_distinct, 4);
}

TEST(LoadPatternsFile, TwoHypothesisSetup) {
  testutil::TempDir tmp("io8");
  testutil::spit(tmp.path("p.txt"), "0 0\n0 1\n");
  const auto pats = load_patterns_file(tmp.path("p.txt"), 2);
  EXPECT_EQ(pats.H(), 2u);
}

TEST(LoadPatternsFile, FirstPatternMustBeNull) {
  testutil::TempDir tmp("io9");
  testutil::spit(tmp.path("p.txt"), "0 1\n0 0\n");
  try {
    load_patterns_file(tmp.path("p.txt"), 2);
    FAIL();
  } catch (const data_error& e) {
    EXPECT_EQ(e.code(), errc::first_pattern_not_null);
  }
}

TEST(FitFileRoundTrip, GagaByteStable) {
  testutil::TempDir tmp("io10");
  FitFile f;
  f.kind = ModelKind::gaga;
  f.group_labels = {"ALL", "MLL"};
  f.patterns = make_pattern_set({parse_pattern("0 0", 2), parse_pattern("0 1", 2)});
  GaGaHyper h;
  h.alpha0 = 3.0000000001;
  h.nu = 0.02;
  h.beta = 1.0 / 3.0;
  h.mu = 25.123456789012345;
  h.pi = {0.9, 0.1};
  f.hyper = h;
  f.converged = true;
  f.iterations = 17;
  f.loglik = -12345.678901234567;
  f.seed = 42;
  save_fit_file(tmp.path("fit.txt"), f);
  const std::string bytes1 = testutil::slurp(tmp.path("fit.txt"));
  const FitFile g = load_fit_file(tmp.path("fit.txt"));
  save_fit_file(tmp.path("fit2.txt"), g);
  EXPECT_EQ(bytes1, testutil::slurp(tmp.path("fit2.txt")));
  const auto& hh = std::get<GaGaHyper>(g.hyper);
  EXPECT_EQ(hh.alpha0, h.alpha0);
  EXPECT_EQ(hh.nu, h.nu);
  EXPECT_EQ(hh.beta, h.beta);
  EXPECT_EQ(hh.mu, h.mu);
  EXPECT_EQ(hh.pi, h.pi);
  EXPECT_EQ(g.iterations, 17u);
  EXPECT_EQ(g.seed, 42u);
  EXPECT_TRUE(g.converged);
  EXPECT_EQ(g.loglik, f.loglik);
  EXPECT_EQ(g.group_labels, f.group_labels);
  EXPECT_EQ(g.patterns.H(), 2u);
}

TEST(FitFileRoundTrip, MigagaByteStable) {
  testutil::TempDir tmp("io11");
  FitFile f;
  f.kind = ModelKind::migaga;
  f.group_labels = {"A", "B", "C", "D"};
  f.patterns = make_pattern_set({parse_pattern("0 0 0 0", 4), parse_pattern("0 1 2 3", 4)});
  MiGaGaHyper h;
  h.components = {{2.5, 0.001}, {3.5, 0.1}};
  h.rho = {0.25, 0.75};
  h.dirichlet_r = {1.0, 1.0};
  h.beta = 7.0;
  h.mu = 123.456;
  h.pi = {0.6, 0.4};
  f.hyper = h;
  f.converged = false;
  f.iterations = 200;
  f.loglik = -9.87e6;
  f.seed = 0;
  save_fit_file(tmp.path("fit.txt"), f);
  const std::string bytes1 = testutil::slurp(tmp.path("fit.txt"));
  const FitFile g = load_fit_file(tmp.path("fit.txt"));
  save_fit_file(tmp.path("fit2.txt"), g);
  EXPECT_EQ(bytes1, testutil::slurp(tmp.path("fit2.txt")));
  const auto& hh = std::get<MiGaGaHyper>(g.hyper);
  EXPECT_EQ(hh.components[0].alpha0, 2.5);
  EXPECT_EQ(hh.components[1].nu, 0.1);
  EXPECT_EQ(hh.rho, h.rho);
  EXPECT_FALSE(g.converged);
}

TEST(FitFile, RejectsUnsupportedVersion) {
  testutil::TempDir tmp("io12");
  testutil::spit(tmp.path("fit.txt"), "gagafit\t2\nmodel\tgaga\n");
  EXPECT_THROW(load_fit_file(tmp.path("fit.txt")), data_error);
}

TEST(ExpressionTsvRoundTrip, ValuesExact) {
  testutil::TempDir tmp("io13");
  const auto m = testutil::random_matrix(10, 4, 123);
  write_expression_tsv(tmp.path("x.tsv"), m);
  const auto m2 = load_expression_tsv(tmp.path("x.tsv"));
  EXPECT_EQ(m.values, m2.values);
  EXPECT_EQ(m.gene_ids, m2.gene_ids);
  EXPECT_EQ(m.array_ids, m2.array_ids);
}

TEST(TruthTsvRoundTrip, DeltaPreserved) {
  testutil::TempDir tmp("io14");
  SimTruth truth;
  truth.delta = {0, 1, 0, 1};
  truth.cluster = {0, 0, 1, 1};
  truth.alpha = {10.0, 20.0, 30.0, 40.0};
  truth.lambda = {{1.0}, {2.0, 3.0}, {4.0}, {5.0, 6.0}};
  write_truth_tsv(tmp.path("t.tsv"), {"g1", "g2", "g3", "g4"}, truth);
  const SimTruth back = load_truth_tsv(tmp.path("t.tsv"));
  EXPECT_EQ(back.delta, truth.delta);
  EXPECT_EQ(back.cluster, truth.cluster);
  EXPECT_EQ(back.alpha, truth.alpha);
}
