#pragma once

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gaga/errors.hpp"
#include "gaga/inference.hpp"
#include "gaga/rng.hpp"
#include "gaga/types.hpp"

namespace gaga {

// Generating truth of a simulated data set.
struct SimTruth {
  std::vector<std::size_t> delta;            // true pattern per gene
  std::vector<std::size_t> cluster;          // mixture component per gene (0 for GaGa)
  std::vector<double> alpha;                 // drawn alpha_i
  std::vector<std::vector<double>> lambda;   // per gene, one mean per pattern class
  std::uint64_t seed = 0;
};

struct ParametricSim {
  ExpressionMatrix x;
  GroupAssignment groups;
  SimTruth truth;
};

namespace detail {

inline std::string padded_index(const char* prefix, std::size_t i, int width) {
  std::string s = std::to_string(i + 1);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return std::string(prefix) + s;
}

template <typename LambdaDraw>
ParametricSim simulate_from_hierarchy(std::span<const double> pi, double beta, double mu,
                                      LambdaDraw&& draw_lambda, std::size_t n_genes,
                                      std::size_t arrays_per_group, const PatternSet& patterns,
                                      std::uint64_t seed) {
  if (arrays_per_group < 1)
    throw data_error(errc::domain_error, "need at least one array per group");
  if (n_genes < 1) throw data_error(errc::domain_error, "need at least one gene");
  const std::size_t K = patterns.K();
  const std::size_t J = K * arrays_per_group;

  ParametricSim sim;
  sim.truth.seed = seed;
  sim.truth.delta.resize(n_genes);
  sim.truth.cluster.resize(n_genes);
  sim.truth.alpha.resize(n_genes);
  sim.truth.lambda.resize(n_genes);

  std::vector<int> labels(J);
  sim.x.array_ids.reserve(J);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t a = 0; a < arrays_per_group; ++a) {
      labels[k * arrays_per_group + a] = static_cast<int>(k + 1);
      sim.x.array_ids.push_back(padded_index("a", k * arrays_per_group + a, 4));
    }
  }
  sim.groups = make_group_assignment(std::move(labels), static_cast<int>(K));

  sim.x.gene_ids.reserve(n_genes);
  sim.x.values.assign(n_genes * J, 0.0);
  const Rng root(seed);
  for (std::size_t i = 0; i < n_genes; ++i) {
    sim.x.gene_ids.push_back(padded_index("g", i, 6));
    Rng rng = root.substream(i);  // per-gene substream: order-independent
    const std::size_t delta = rng.categorical(pi);
    const Pattern& pat = patterns[delta];
    const std::size_t m = draw_lambda.pick_component(rng);
    const double alpha = rng.gamma(beta, beta / mu);
    std::vector<double> lam(static_cast<std::size_t>(pat.n_distinct));
    for (double& l : lam) l = draw_lambda.draw(rng, m);
    for (std::size_t j = 0; j < J; ++j) {
      const int cls = pat.classes[static_cast<std::size_t>(sim.groups.labels[j] - 1)];
      sim.x.values[i * J + j] = rng.gamma(alpha, alpha / lam[static_cast<std::size_t>(cls)]);
    }
    sim.truth.delta[i] = delta;
    sim.truth.cluster[i] = m;
    sim.truth.alpha[i] = alpha;
    sim.truth.lambda[i] = std::move(lam);
  }
  return sim;
}

}  // namespace detail

// Draws from the model hierarchy: delta ~ Mult(pi), alpha ~ Ga(beta, beta/mu),
// one lambda per pattern class from the (mixture) IGa prior, then
// x_ij ~ Ga(alpha, alpha/lambda_class(j)).
inline ParametricSim simulate_parametric(const GaGaHyper& h, std::size_t n_genes,
                                         std::size_t arrays_per_group,
                                         const PatternSet& patterns, std::uint64_t seed) {
  validate_hyper(h);
  if (h.pi.size() != patterns.H())
    throw data_error(errc::shape_mismatch, "pi length does not match pattern count");
  struct Draw {
    double alpha0, nu;
    std::size_t pick_component(Rng&) const { return 0; }
    double draw(Rng& rng, std::size_t) const { return rng.inverse_gamma(alpha0, alpha0 / nu); }
  } draw{h.alpha0, h.nu};
  return detail::simulate_from_hierarchy(h.pi, h.beta, h.mu, draw, n_genes, arrays_per_group,
                                         patterns, seed);
}

inline ParametricSim simulate_parametric(const MiGaGaHyper& h, std::size_t n_genes,
                                         std::size_t arrays_per_group,
                                         const PatternSet& patterns, std::uint64_t seed) {
  validate_hyper(h);
  if (h.pi.size() != patterns.H())
    throw data_error(errc::shape_mismatch, "pi length does not match pattern count");
  struct Draw {
    const MiGaGaHyper* h;
    std::size_t pick_component(Rng& rng) const { return rng.categorical(h->rho); }
    double draw(Rng& rng, std::size_t m) const {
      return rng.inverse_gamma(h->components[m].alpha0,
                               h->components[m].alpha0 / h->components[m].nu);
    }
  } draw{&h};
  return detail::simulate_from_hierarchy(h.pi, h.beta, h.mu, draw, n_genes, arrays_per_group,
                                         patterns, seed);
}

// Array bootstrap: every output column carries one pooled source-array draw
// shared by all EE genes (conserving EE-EE correlation) and one group-restricted
// draw shared by all DE genes.
inline ExpressionMatrix simulate_bootstrap(const ExpressionMatrix& source,
                                           const GroupAssignment& groups,
                                           std::span<const std::uint8_t> de_flags,
                                           std::uint64_t seed) {
  if (source.n_arrays() != groups.n_arrays())
    throw data_error(errc::shape_mismatch, "group labels do not match array count");
  if (de_flags.size() != source.n_genes())
    throw data_error(errc::shape_mismatch, "DE flags do not match gene count");
  const std::size_t J = source.n_arrays();
  std::vector<std::vector<std::size_t>> group_arrays(static_cast<std::size_t>(groups.K));
  for (std::size_t j = 0; j < J; ++j)
    group_arrays[static_cast<std::size_t>(groups.labels[j] - 1)].push_back(j);
  for (const auto& ga : group_arrays) {
    if (ga.empty()) throw data_error(errc::group_empty, "a group has no source arrays");
  }

  Rng rng(seed);
  std::vector<std::size_t> pooled_idx(J), group_idx(J);
  for (std::size_t j = 0; j < J; ++j) {
    pooled_idx[j] = static_cast<std::size_t>(rng.uniform() * static_cast<double>(J));
    pooled_idx[j] = std::min(pooled_idx[j], J - 1);
    const auto& ga = group_arrays[static_cast<std::size_t>(groups.labels[j] - 1)];
    std::size_t pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(ga.size()));
    group_idx[j] = ga[std::min(pick, ga.size() - 1)];
  }

  ExpressionMatrix out;
  out.gene_ids = source.gene_ids;
  out.array_ids.reserve(J);
  for (std::size_t j = 0; j < J; ++j) out.array_ids.push_back(detail::padded_index("b", j, 4));
  out.values.assign(source.n_genes() * J, 0.0);
  for (std::size_t i = 0; i < source.n_genes(); ++i) {
    for (std::size_t j = 0; j < J; ++j) {
      const std::size_t src = de_flags[i] ? group_idx[j] : pooled_idx[j];
      out.values[i * J + j] = source.at(i, src);
    }
  }
  return out;
}

struct FdrPower {
  double fdr = 0.0;
  double power = 0.0;
  bool power_defined = false;
  std::size_t n_declared = 0;
  std::size_t n_true_de = 0;
  std::size_t n_false_discoveries = 0;
};

inline FdrPower evaluate_fdr_power(std::span<const std::size_t> assigned,
                                   const SimTruth& truth) {
  if (assigned.size() != truth.delta.size())
    throw data_error(errc::shape_mismatch, "assignment does not match truth length");
  FdrPower res;
  std::size_t true_positives = 0;
  for (std::size_t i = 0; i < assigned.size(); ++i) {
    const bool declared = assigned[i] != 0;
    const bool de = truth.delta[i] != 0;
    if (declared) {
      ++res.n_declared;
      if (!de) ++res.n_false_discoveries;
      if (de) ++true_positives;
    }
    if (de) ++res.n_true_de;
  }
  res.fdr = res.n_declared > 0 ? static_cast<double>(res.n_false_discoveries) /
                                     static_cast<double>(res.n_declared)
                               : 0.0;
  if (res.n_true_de > 0) {
    res.power = static_cast<double>(true_positives) / static_cast<double>(res.n_true_de);
    res.power_defined = true;
  }
  return res;
}

struct RocPoint {
  std::size_t n_declared = 0;
  double fdr = 0.0;
  double power = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // swept over declaration counts 0..n
  double auc = 0.0;              // trapezoid over the achieved FDR range
  double fdr_max = 0.0;
};

// Sweep declarations in v0-ascending order; AUC integrates the best-power
// envelope over the FDR values the sweep actually reaches.
inline RocCurve roc_curve(std::span<const double> v0, const SimTruth& truth) {
  if (v0.size() != truth.delta.size())
    throw data_error(errc::shape_mismatch, "v0 does not match truth length");
  std::size_t n_de = 0;
  for (std::size_t d : truth.delta)
    if (d != 0) ++n_de;
  if (n_de == 0) throw data_error(errc::no_true_de, "truth contains no DE gene");

  std::vector<std::size_t> order(v0.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v0[a] < v0[b]; });

  RocCurve curve;
  curve.points.reserve(v0.size() + 1);
  curve.points.push_back({0, 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (truth.delta[order[rank]] != 0) {
      ++tp;
    } else {
      ++fp;
    }
    RocPoint p;
    p.n_declared = rank + 1;
    p.fdr = static_cast<double>(fp) / static_cast<double>(rank + 1);
    p.power = static_cast<double>(tp) / static_cast<double>(n_de);
    curve.points.push_back(p);
    curve.fdr_max = std::max(curve.fdr_max, p.fdr);
  }

  // monotone envelope: best power attainable at or below each achieved FDR
  std::vector<std::pair<double, double>> pts;
  pts.reserve(curve.points.size());
  for (const auto& p : curve.points) pts.emplace_back(p.fdr, p.power);
  std::sort(pts.begin(), pts.end());
  double best = 0.0, auc = 0.0, prev_fdr = 0.0, prev_power = 0.0;
  for (const auto& [f, pw] : pts) {
    best = std::max(best, pw);
    if (f > prev_fdr) {
      auc += (f - prev_fdr) * prev_power;
      prev_fdr = f;
    }
    prev_power = best;
  }
  curve.auc = auc;
  return curve;
}

struct TTestResult {
  std::vector<double> t;
  std::vector<double> df;
  std::vector<double> p;
  std::vector<std::uint8_t> declared;
  std::size_t n_declared = 0;
};

// Welch two-sample t with Benjamini-Hochberg step-up; reference baseline for
// the simulation harness, expects log2-scale input.
inline TTestResult baseline_ttest_bh(const ExpressionMatrix& log2_x,
                                     const GroupAssignment& groups, double target) {
  if (groups.K != 2)
    throw data_error(errc::shape_mismatch, "the t-test baseline handles exactly two groups");
  if (log2_x.n_arrays() != groups.n_arrays())
    throw data_error(errc::shape_mismatch, "group labels do not match array count");
  std::size_t nA = 0, nB = 0;
  for (int z : groups.labels) (z == 1 ? nA : nB) += 1;
  if (nA < 2 || nB < 2)
    throw data_error(errc::too_few_replicates, "each group needs at least two arrays");

  const std::size_t n = log2_x.n_genes();
  TTestResult res;
  res.t.assign(n, 0.0);
  res.df.assign(n, 0.0);
  res.p.assign(n, 1.0);
  res.declared.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = log2_x.row(i);
    double sumA = 0.0, sumB = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j)
      (groups.labels[j] == 1 ? sumA : sumB) += row[j];
    const double mA = sumA / static_cast<double>(nA);
    const double mB = sumB / static_cast<double>(nB);
    double ssA = 0.0, ssB = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double d = row[j] - (groups.labels[j] == 1 ? mA : mB);
      (groups.labels[j] == 1 ? ssA : ssB) += d * d;
    }
    const double varA = ssA / static_cast<double>(nA - 1);
    const double varB = ssB / static_cast<double>(nB - 1);
    const double se2 = varA / static_cast<double>(nA) + varB / static_cast<double>(nB);
    if (!(se2 > 0.0)) continue;  // zero-variance guard: p stays 1
    const double t = (mA - mB) / std::sqrt(se2);
    const double df =
        se2 * se2 / (varA * varA / (static_cast<double>(nA) * static_cast<double>(nA) *
                                    static_cast<double>(nA - 1)) +
                     varB * varB / (static_cast<double>(nB) * static_cast<double>(nB) *
                                    static_cast<double>(nB - 1)));
    boost::math::students_t_distribution<double> dist(df);
    res.t[i] = t;
    res.df[i] = df;
    res.p[i] = 2.0 * boost::math::cdf(dist, -std::abs(t));
  }

  // BH step-up at level target
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return res.p[a] < res.p[b]; });
  std::size_t cutoff = 0;
  for (std::size_t rank = 0; rank < n; ++rank) {
    const double bound =
        target * static_cast<double>(rank + 1) / static_cast<double>(n);
    if (res.p[order[rank]] <= bound) cutoff = rank + 1;
  }
  for (std::size_t rank = 0; rank < cutoff; ++rank) res.declared[order[rank]] = 1;
  res.n_declared = cutoff;
  return res;
}

}  // namespace gaga
