#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gaga/errors.hpp"
#include "gaga/gas.hpp"
#include "gaga/numeric.hpp"
#include "gaga/rng.hpp"
#include "gaga/types.hpp"

namespace gaga {

// Shared hyperparameters: lambda_ik ~ IGa(alpha0, alpha0/nu),
// alpha_i ~ Ga(beta, beta/mu), delta_i ~ Mult(pi).
struct GaGaHyper {
  double alpha0 = 1.0;
  double nu = 1.0;
  double beta = 1.0;
  double mu = 1.0;
  std::vector<double> pi;
};

struct MixComponent {
  double alpha0 = 1.0;
  double nu = 1.0;
};

// Mixture prior on lambda: one latent cluster per gene, shared by all of the
// gene's class means. Components are kept sorted by nu ascending.
struct MiGaGaHyper {
  std::vector<MixComponent> components;
  std::vector<double> rho;
  std::vector<double> dirichlet_r;
  double beta = 1.0;
  double mu = 1.0;
  std::vector<double> pi;

  std::size_t M() const { return components.size(); }
};

namespace detail {

inline void check_probability_vector(std::span<const double> p, const char* what) {
  if (p.empty()) throw data_error(errc::shape_mismatch, std::string(what) + " is empty");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw data_error(errc::domain_error, std::string(what) + " entries must be in [0, 1]");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw data_error(errc::domain_error, std::string(what) + " must sum to 1 within 1e-12");
}

inline void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw data_error(errc::domain_error, std::string(what) + " must be positive and finite");
}

}  // namespace detail

inline void validate_hyper(const GaGaHyper& h) {
  detail::check_positive(h.alpha0, "alpha0");
  detail::check_positive(h.nu, "nu");
  detail::check_positive(h.beta, "beta");
  detail::check_positive(h.mu, "mu");
  detail::check_probability_vector(h.pi, "pi");
}

inline void validate_hyper(const MiGaGaHyper& h) {
  if (h.components.empty()) throw data_error(errc::shape_mismatch, "mixture has no components");
  for (const auto& c : h.components) {
    detail::check_positive(c.alpha0, "alpha0_m");
    detail::check_positive(c.nu, "nu_m");
  }
  for (std::size_t m = 1; m < h.components.size(); ++m) {
    if (h.components[m].nu < h.components[m - 1].nu)
      throw data_error(errc::domain_error, "components must be sorted by nu ascending");
  }
  if (h.rho.size() != h.components.size() || h.dirichlet_r.size() != h.components.size())
    throw data_error(errc::shape_mismatch, "rho/dirichlet weights must match component count");
  for (double r : h.dirichlet_r) detail::check_positive(r, "dirichlet weight");
  detail::check_positive(h.beta, "beta");
  detail::check_positive(h.mu, "mu");
  detail::check_probability_vector(h.rho, "rho");
  detail::check_probability_vector(h.pi, "pi");
}

// Posterior pattern probabilities v (n x H); for mixtures also the joint
// (pattern, cluster) responsibilities w (n x H x M) with sum_m w_ilm = v_il.
struct PatternPosterior {
  std::size_t n = 0;
  std::size_t H = 0;
  std::size_t M = 1;
  std::vector<double> v;  // row-major n x H
  std::vector<double> w;  // row-major n x H x M; empty when M == 1 and not tracked

  double at(std::size_t gene, std::size_t pattern) const { return v[gene * H + pattern]; }
  std::span<const double> row(std::size_t gene) const { return {v.data() + gene * H, H}; }
};

namespace detail {

// GasParams for the alpha_i posterior under one pattern,
// GaS(J, beta, beta/mu - P, alpha0, alpha0/nu, S)
inline GasParams alpha_posterior_params(const GeneSuffStats& st, std::size_t pattern,
                                        double alpha0, double nu, double beta, double mu) {
  const PatternStats& ps = st.per_pattern.at(pattern);
  GasParams g;
  g.a = ps.counts;
  g.b = beta;
  g.c = beta / mu - st.log_product;
  g.d = alpha0;
  g.r = alpha0 / nu;
  g.s = ps.sums;
  if (!(gas_rate(g) > 0.0))
    throw numeric_error(errc::integrability_violation,
                        "alpha posterior not integrable; sufficient statistics are inconsistent");
  return g;
}

}  // namespace detail

// log f(x_i | delta_i = pattern, omega) for one prior component. The
// pattern-independent factors exp(-P_i) and (beta/mu)^beta / Gamma(beta) are
// included, so the value is a genuine log marginal density.
inline double gene_pattern_log_marginal(const GeneSuffStats& st, std::size_t pattern,
                                        double alpha0, double nu, double beta, double mu) {
  const GasParams g = detail::alpha_posterior_params(st, pattern, alpha0, nu, beta, mu);
  const double n_distinct = static_cast<double>(g.a.size());
  return -st.log_product + beta * std::log(beta / mu) - std::lgamma(beta) +
         n_distinct * (alpha0 * std::log(alpha0 / nu) - std::lgamma(alpha0)) -
         gas_log_norm_const(g);
}

inline double gene_pattern_log_marginal(const GeneSuffStats& st, std::size_t pattern,
                                        const GaGaHyper& h) {
  return gene_pattern_log_marginal(st, pattern, h.alpha0, h.nu, h.beta, h.mu);
}

// softmax of log pi_l + log marginal_l; patterns with pi_l = 0 are excluded
// before the log-sum-exp and get v_il = 0
inline std::vector<double> pattern_posterior(const GeneSuffStats& st, const GaGaHyper& h) {
  validate_hyper(h);
  const std::size_t H = h.pi.size();
  if (H != st.per_pattern.size())
    throw data_error(errc::shape_mismatch, "pi length does not match pattern count");
  std::vector<double> logw(H, kNegInf);
  for (std::size_t l = 0; l < H; ++l) {
    if (h.pi[l] > 0.0) logw[l] = std::log(h.pi[l]) + gene_pattern_log_marginal(st, l, h);
  }
  const double lse = log_sum_exp(logw);
  std::vector<double> v(H, 0.0);
  for (std::size_t l = 0; l < H; ++l) {
    if (h.pi[l] > 0.0) v[l] = std::exp(logw[l] - lse);
  }
  return v;
}

struct ClusterPatternPosterior {
  std::vector<double> v;  // length H
  std::vector<double> w;  // row-major H x M
};

inline ClusterPatternPosterior cluster_pattern_joint_posterior(const GeneSuffStats& st,
                                                               const MiGaGaHyper& h) {
  validate_hyper(h);
  const std::size_t H = h.pi.size();
  const std::size_t M = h.M();
  if (H != st.per_pattern.size())
    throw data_error(errc::shape_mismatch, "pi length does not match pattern count");
  std::vector<double> logw(H * M, kNegInf);
  for (std::size_t l = 0; l < H; ++l) {
    if (h.pi[l] <= 0.0) continue;
    for (std::size_t m = 0; m < M; ++m) {
      if (h.rho[m] <= 0.0) continue;
      logw[l * M + m] =
          std::log(h.pi[l]) + std::log(h.rho[m]) +
          gene_pattern_log_marginal(st, l, h.components[m].alpha0, h.components[m].nu, h.beta,
                                    h.mu);
    }
  }
  const double lse = log_sum_exp(logw);
  ClusterPatternPosterior out;
  out.w.assign(H * M, 0.0);
  out.v.assign(H, 0.0);
  for (std::size_t l = 0; l < H; ++l) {
    for (std::size_t m = 0; m < M; ++m) {
      if (std::isfinite(logw[l * M + m])) {
        const double wv = std::exp(logw[l * M + m] - lse);
        out.w[l * M + m] = wv;
        out.v[l] += wv;
      }
    }
  }
  return out;
}

// Joint posterior draws of (alpha_i, lambda_i) under one pattern:
// alpha from its gamma-shape posterior, then lambda_k | alpha from
// IGa(alpha J_k + alpha0, alpha0/nu + alpha S_k).
struct GeneParamDraws {
  std::vector<double> alpha;                // length count
  std::vector<std::vector<double>> lambda;  // count x n_distinct
};

inline GeneParamDraws sample_alpha_lambda_posterior(const GeneSuffStats& st, std::size_t pattern,
                                                    double alpha0, double nu, double beta,
                                                    double mu, std::size_t count,
                                                    std::uint64_t seed) {
  const GasParams g = detail::alpha_posterior_params(st, pattern, alpha0, nu, beta, mu);
  const PatternStats& ps = st.per_pattern.at(pattern);
  Rng rng(seed);
  GeneParamDraws draws;
  draws.alpha = gas_sample(g, count, rng);
  draws.lambda.reserve(count);
  for (double a : draws.alpha) {
    std::vector<double> lam;
    lam.reserve(ps.counts.size());
    for (std::size_t k = 0; k < ps.counts.size(); ++k) {
      lam.push_back(rng.inverse_gamma(a * ps.counts[k] + alpha0, alpha0 / nu + a * ps.sums[k]));
    }
    draws.lambda.push_back(std::move(lam));
  }
  return draws;
}

inline GeneParamDraws sample_alpha_lambda_posterior(const GeneSuffStats& st, std::size_t pattern,
                                                    const GaGaHyper& h, std::size_t count,
                                                    std::uint64_t seed) {
  return sample_alpha_lambda_posterior(st, pattern, h.alpha0, h.nu, h.beta, h.mu, count, seed);
}

struct FoldChange {
  std::vector<double> class_means;  // E[lambda_ik | x, delta, omega] per class
  struct Ratio {
    std::size_t numerator_class;
    std::size_t denominator_class;
    double value;
  };
  std::vector<Ratio> ratios;  // every ordered class pair; empty for the null pattern
};

// Rao-Blackwellized posterior means: the analytic IGa conditional mean
// (alpha0/nu + alpha S) / (alpha J + alpha0 - 1) averaged over alpha draws.
inline FoldChange estimate_fold_change(const GeneSuffStats& st, std::size_t pattern,
                                       double alpha0, double nu, double beta, double mu,
                                       std::size_t draw_count, std::uint64_t seed) {
  const GasParams g = detail::alpha_posterior_params(st, pattern, alpha0, nu, beta, mu);
  const PatternStats& ps = st.per_pattern.at(pattern);
  const std::vector<double> alphas = gas_sample(g, draw_count, seed);
  const std::size_t n_classes = ps.counts.size();
  FoldChange fc;
  fc.class_means.assign(n_classes, 0.0);
  for (double a : alphas) {
    for (std::size_t k = 0; k < n_classes; ++k) {
      const double shape = a * ps.counts[k] + alpha0;
      if (!(shape > 1.0))
        throw numeric_error(errc::moment_undefined,
                            "posterior mean of lambda undefined: alpha*J + alpha0 <= 1");
      fc.class_means[k] += (alpha0 / nu + a * ps.sums[k]) / (shape - 1.0);
    }
  }
  for (double& m : fc.class_means) m /= static_cast<double>(draw_count);
  for (std::size_t k = 0; k < n_classes; ++k) {
    for (std::size_t k2 = 0; k2 < n_classes; ++k2) {
      if (k == k2) continue;
      fc.ratios.push_back({k, k2, fc.class_means[k] / fc.class_means[k2]});
    }
  }
  return fc;
}

inline FoldChange estimate_fold_change(const GeneSuffStats& st, std::size_t pattern,
                                       const GaGaHyper& h, std::size_t draw_count,
                                       std::uint64_t seed) {
  return estimate_fold_change(st, pattern, h.alpha0, h.nu, h.beta, h.mu, draw_count, seed);
}

// Mixture fold change: component-conditional estimates mixed by the gene's
// cluster responsibilities under the given pattern.
inline FoldChange estimate_fold_change(const GeneSuffStats& st, std::size_t pattern,
                                       const MiGaGaHyper& h, std::size_t draw_count,
                                       std::uint64_t seed) {
  const ClusterPatternPosterior post = cluster_pattern_joint_posterior(st, h);
  const std::size_t M = h.M();
  const double vl = post.v.at(pattern);
  const std::size_t n_classes = st.per_pattern.at(pattern).counts.size();
  FoldChange fc;
  fc.class_means.assign(n_classes, 0.0);
  Rng seq(seed);
  for (std::size_t m = 0; m < M; ++m) {
    const double weight = vl > 0.0 ? post.w[pattern * M + m] / vl : (m == 0 ? 1.0 : 0.0);
    if (weight == 0.0) continue;
    const FoldChange part =
        estimate_fold_change(st, pattern, h.components[m].alpha0, h.components[m].nu, h.beta,
                             h.mu, draw_count, seq.substream(m).next_u64());
    for (std::size_t k = 0; k < n_classes; ++k) fc.class_means[k] += weight * part.class_means[k];
  }
  for (std::size_t k = 0; k < n_classes; ++k) {
    for (std::size_t k2 = 0; k2 < n_classes; ++k2) {
      if (k == k2) continue;
      fc.ratios.push_back({k, k2, fc.class_means[k] / fc.class_means[k2]});
    }
  }
  return fc;
}

// One observation per draw: alpha ~ Ga(beta, beta/mu), lambda from the
// (mixture) IGa prior, x ~ Ga(alpha, alpha/lambda).
inline std::vector<double> prior_predictive_sample(const GaGaHyper& h, std::size_t count,
                                                   std::uint64_t seed) {
  validate_hyper(h);
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double alpha = rng.gamma(h.beta, h.beta / h.mu);
    const double lambda = rng.inverse_gamma(h.alpha0, h.alpha0 / h.nu);
    out.push_back(rng.gamma(alpha, alpha / lambda));
  }
  return out;
}

inline std::vector<double> prior_predictive_sample(const MiGaGaHyper& h, std::size_t count,
                                                   std::uint64_t seed) {
  validate_hyper(h);
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double alpha = rng.gamma(h.beta, h.beta / h.mu);
    const std::size_t m = rng.categorical(h.rho);
    const double lambda =
        rng.inverse_gamma(h.components[m].alpha0, h.components[m].alpha0 / h.components[m].nu);
    out.push_back(rng.gamma(alpha, alpha / lambda));
  }
  return out;
}

// Per-gene overall mean and coefficient of variation from the pooled
// within-group variance. Genes with one observation in every group have no
// within-group variance estimate and are flagged.
struct MeanCv {
  double mean = 0.0;
  double cv = 0.0;
  bool cv_defined = false;
};

inline std::vector<MeanCv> gene_mean_cv_diagnostics(const ExpressionMatrix& x,
                                                    const GroupAssignment& groups) {
  if (x.n_arrays() != groups.n_arrays())
    throw data_error(errc::shape_mismatch, "group labels do not match array count");
  const std::size_t J = x.n_arrays();
  const std::size_t K = static_cast<std::size_t>(groups.K);
  std::vector<MeanCv> out;
  out.reserve(x.n_genes());
  std::vector<double> gsum(K), gsumsq(K), gcount(K);
  for (std::size_t i = 0; i < x.n_genes(); ++i) {
    std::fill(gsum.begin(), gsum.end(), 0.0);
    std::fill(gsumsq.begin(), gsumsq.end(), 0.0);
    std::fill(gcount.begin(), gcount.end(), 0.0);
    const auto row = x.row(i);
    double total = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      const std::size_t k = static_cast<std::size_t>(groups.labels[j] - 1);
      gsum[k] += row[j];
      gsumsq[k] += row[j] * row[j];
      gcount[k] += 1.0;
      total += row[j];
    }
    MeanCv mc;
    mc.mean = total / static_cast<double>(J);
    double ss_within = 0.0;
    double df = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      if (gcount[k] < 2.0) continue;
      ss_within += std::max(0.0, gsumsq[k] - gsum[k] * gsum[k] / gcount[k]);
      df += gcount[k] - 1.0;
    }
    if (df > 0.0 && mc.mean > 0.0) {
      mc.cv = std::sqrt(ss_within / df) / mc.mean;
      mc.cv_defined = true;
    }
    out.push_back(mc);
  }
  return out;
}

}  // namespace gaga
