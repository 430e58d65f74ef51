#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "gaga/errors.hpp"
#include "gaga/inference.hpp"
#include "gaga/numeric.hpp"
#include "gaga/types.hpp"

namespace gaga {

enum class ModelKind { gaga, migaga };

struct FitConfig {
  std::size_t max_iterations = 200;
  double rel_loglik_tol = 1e-6;
  std::size_t m_step_budget = 200;  // objective evaluations per M-step
  std::uint64_t seed = 0;
  int threads = 1;
};

inline void validate_config(const FitConfig& cfg) {
  if (cfg.max_iterations < 1)
    throw data_error(errc::domain_error, "max_iterations must be at least 1");
  if (!(cfg.rel_loglik_tol > 0.0))
    throw data_error(errc::domain_error, "rel_loglik_tol must be positive");
  if (cfg.m_step_budget < 8)
    throw data_error(errc::domain_error, "m_step optimizer budget too small");
}

struct FitResult {
  ModelKind kind = ModelKind::gaga;
  std::variant<GaGaHyper, MiGaGaHyper> hyper;
  std::vector<double> loglik_trace;
  bool converged = false;
  std::size_t iterations = 0;
  std::vector<std::string> warnings;

  const GaGaHyper& gaga() const { return std::get<GaGaHyper>(hyper); }
  const MiGaGaHyper& migaga() const { return std::get<MiGaGaHyper>(hyper); }
  double final_loglik() const { return loglik_trace.back(); }
};

namespace detail {

// ----- Nelder-Mead maximization (log-parameter space, derivative free) -----

template <typename F>
std::vector<double> nelder_mead_maximize(F&& f, std::vector<double> x0, double step,
                                         std::size_t budget, double* best_value = nullptr) {
  const std::size_t dim = x0.size();
  const std::size_t n_vertices = dim + 1;
  std::vector<std::vector<double>> verts(n_vertices, x0);
  for (std::size_t j = 0; j < dim; ++j) verts[j + 1][j] += step;
  std::vector<double> vals(n_vertices);
  std::size_t evals = 0;
  for (std::size_t v = 0; v < n_vertices; ++v) {
    vals[v] = f(verts[v]);
    ++evals;
  }
  std::vector<std::size_t> order(n_vertices);

  const auto sort_order = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
  };

  while (evals + 2 <= budget) {
    sort_order();
    const std::size_t best = order.front(), worst = order.back();
    // centroid of all but the worst vertex
    std::vector<double> cen(dim, 0.0);
    for (std::size_t v = 0; v < n_vertices; ++v) {
      if (v == worst) continue;
      for (std::size_t j = 0; j < dim; ++j) cen[j] += verts[v][j];
    }
    for (double& c : cen) c /= static_cast<double>(dim);

    const auto blend = [&](double t) {
      std::vector<double> p(dim);
      for (std::size_t j = 0; j < dim; ++j) p[j] = cen[j] + t * (cen[j] - verts[worst][j]);
      return p;
    };

    std::vector<double> refl = blend(1.0);
    const double f_refl = f(refl);
    ++evals;
    if (f_refl > vals[best]) {
      std::vector<double> exp_p = blend(2.0);
      const double f_exp = f(exp_p);
      ++evals;
      if (f_exp > f_refl) {
        verts[worst] = std::move(exp_p);
        vals[worst] = f_exp;
      } else {
        verts[worst] = std::move(refl);
        vals[worst] = f_refl;
      }
      continue;
    }
    const double second_worst = vals[order[n_vertices - 2]];
    if (f_refl > second_worst) {
      verts[worst] = std::move(refl);
      vals[worst] = f_refl;
      continue;
    }
    std::vector<double> con = blend(f_refl > vals[worst] ? 0.5 : -0.5);
    const double f_con = f(con);
    ++evals;
    if (f_con > std::max(f_refl, vals[worst])) {
      verts[worst] = std::move(con);
      vals[worst] = f_con;
      continue;
    }
    // shrink toward the best vertex
    for (std::size_t v = 0; v < n_vertices; ++v) {
      if (v == best) continue;
      for (std::size_t j = 0; j < dim; ++j)
        verts[v][j] = verts[best][j] + 0.5 * (verts[v][j] - verts[best][j]);
      if (evals >= budget) break;
      vals[v] = f(verts[v]);
      ++evals;
    }
    // converge when the simplex values flatten out
    double lo = vals[0], hi = vals[0];
    for (double v : vals) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo < 1e-10 * (std::abs(hi) + 1.0)) break;
  }
  sort_order();
  if (best_value) *best_value = vals[order.front()];
  return verts[order.front()];
}

// ----- precomputed sufficient statistics and marginal evaluation -----

struct StatsTable {
  std::size_t n = 0;
  std::size_t H = 0;
  std::vector<GeneSuffStats> genes;
};

inline StatsTable build_stats_table(const ExpressionMatrix& x, const GroupAssignment& groups,
                                    const PatternSet& patterns, int threads = 1) {
  if (x.n_arrays() != groups.n_arrays())
    throw data_error(errc::shape_mismatch, "group labels do not match array count");
  if (static_cast<std::size_t>(groups.K) != patterns.K())
    throw data_error(errc::shape_mismatch, "patterns disagree with the group count");
  StatsTable tab;
  tab.n = x.n_genes();
  tab.H = patterns.H();
  tab.genes.resize(tab.n);
  parallel_for(tab.n, threads, [&](std::size_t i) {
    tab.genes[i] = compute_sufficient_stats(x.row(i), groups, patterns);
  });
  return tab;
}

// Per-(gene, pattern) GasParams with the data-dependent fields prebuilt;
// evaluating a new hyperparameter point only rewrites b, c, d, r.
class MarginalTable {
 public:
  MarginalTable(const StatsTable& stats, int threads)
      : stats_(&stats), threads_(threads), gas_(stats.n * stats.H) {
    for (std::size_t i = 0; i < stats.n; ++i) {
      for (std::size_t l = 0; l < stats.H; ++l) {
        GasParams& g = gas_[i * stats.H + l];
        g.a = stats.genes[i].per_pattern[l].counts;
        g.s = stats.genes[i].per_pattern[l].sums;
      }
    }
  }

  std::size_t n() const { return stats_->n; }
  std::size_t H() const { return stats_->H; }

  // fills out[i*H + l] with log f(x_i | delta=l) for one prior component;
  // entries become NaN when the evaluation fails numerically
  void evaluate(double alpha0, double nu, double beta, double mu,
                std::span<double> out) const {
    const double const_beta = beta * std::log(beta / mu) - std::lgamma(beta);
    const double const_alpha0 = alpha0 * std::log(alpha0 / nu) - std::lgamma(alpha0);
    const std::size_t H = stats_->H;
    parallel_for(stats_->n, threads_, [&](std::size_t i) {
      const double log_product = stats_->genes[i].log_product;
      for (std::size_t l = 0; l < H; ++l) {
        GasParams& g = gas_[i * H + l];
        g.b = beta;
        g.c = beta / mu - log_product;
        g.d = alpha0;
        g.r = alpha0 / nu;
        double value = std::numeric_limits<double>::quiet_NaN();
        try {
          if (gas_rate(g) > 0.0) {
            value = -log_product + const_beta +
                    static_cast<double>(g.a.size()) * const_alpha0 - gas_log_norm_const(g);
          }
        } catch (const numeric_error&) {
        }
        out[i * H + l] = value;
      }
    });
  }

 private:
  const StatsTable* stats_;
  int threads_;
  mutable std::vector<GasParams> gas_;  // rows are gene-partitioned across threads
};

inline double total_from_rows(std::span<const double> per_gene) {
  return pairwise_sum(per_gene);
}

}  // namespace detail

// ----- initialization -----

namespace detail {

struct MomentFit {
  double alpha0, nu;
};

// match mean and variance of IGa(alpha0, alpha0/nu) to the empirical gene means
inline MomentFit iga_moment_match(std::span<const double> means) {
  double m = 0.0;
  for (double v : means) m += v;
  m /= static_cast<double>(means.size());
  double var = 0.0;
  for (double v : means) var += (v - m) * (v - m);
  var /= static_cast<double>(means.size());
  double alpha0;
  if (var > 0.0 && m > 0.0) {
    alpha0 = 2.0 + m * m / var;
  } else {
    alpha0 = 1e4;
  }
  alpha0 = std::clamp(alpha0, 1.01, 1e4);
  const double nu = alpha0 / (m * (alpha0 - 1.0));
  return {alpha0, nu};
}

}  // namespace detail

// Method-of-moments start: gene means drive (alpha0, nu), gene CVs drive
// (beta, mu) via alpha_i ~ 1/CV_i^2, pi uniform.
inline GaGaHyper init_hyperparams(const ExpressionMatrix& x, const GroupAssignment& groups,
                                  const PatternSet& patterns) {
  const auto diag = gene_mean_cv_diagnostics(x, groups);
  std::vector<double> means;
  std::vector<double> alpha_hat;
  means.reserve(diag.size());
  for (const auto& mc : diag) {
    means.push_back(mc.mean);
    if (mc.cv_defined && mc.cv > 0.0) alpha_hat.push_back(1.0 / (mc.cv * mc.cv));
  }
  if (alpha_hat.empty())
    throw data_error(errc::degenerate_data,
                     "no gene has positive within-group variance; cannot initialize");
  GaGaHyper h;
  const auto mm = detail::iga_moment_match(means);
  h.alpha0 = mm.alpha0;
  h.nu = mm.nu;
  double am = 0.0;
  for (double v : alpha_hat) am += v;
  am /= static_cast<double>(alpha_hat.size());
  double av = 0.0;
  for (double v : alpha_hat) av += (v - am) * (v - am);
  av /= static_cast<double>(alpha_hat.size());
  h.mu = am;
  h.beta = av > 0.0 ? std::clamp(am * am / av, 0.01, 1e4) : 1e4;
  h.pi.assign(patterns.H(), 1.0 / static_cast<double>(patterns.H()));
  return h;
}

// Mixture start: genes sliced at quantiles of log gene-mean, one component
// per slice, each moment-matched on its own slice.
inline MiGaGaHyper init_hyperparams(const ExpressionMatrix& x, const GroupAssignment& groups,
                                    const PatternSet& patterns, std::size_t M) {
  if (M < 1) throw data_error(errc::domain_error, "M must be at least 1");
  const GaGaHyper base = init_hyperparams(x, groups, patterns);
  MiGaGaHyper h;
  h.beta = base.beta;
  h.mu = base.mu;
  h.pi = base.pi;
  h.dirichlet_r.assign(M, 1.0);
  h.rho.assign(M, 1.0 / static_cast<double>(M));
  if (M == 1) {
    h.components.push_back({base.alpha0, base.nu});
    return h;
  }
  std::vector<double> means;
  means.reserve(x.n_genes());
  for (std::size_t i = 0; i < x.n_genes(); ++i) {
    const auto row = x.row(i);
    double m = 0.0;
    for (double v : row) m += v;
    means.push_back(m / static_cast<double>(row.size()));
  }
  std::vector<double> sorted = means;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t m = 0; m < M; ++m) {
    const std::size_t lo = m * sorted.size() / M;
    const std::size_t hi = std::max(lo + 1, (m + 1) * sorted.size() / M);
    std::span<const double> slice(sorted.data() + lo, std::min(hi, sorted.size()) - lo);
    const auto mm = detail::iga_moment_match(slice);
    h.components.push_back({mm.alpha0, mm.nu});
  }
  std::stable_sort(h.components.begin(), h.components.end(),
                   [](const MixComponent& a, const MixComponent& b) { return a.nu < b.nu; });
  return h;
}

// ----- total log marginal -----

namespace detail {

inline double total_log_marginal_gaga(const MarginalTable& table,
                                      std::span<const double> logm, const GaGaHyper& h) {
  const std::size_t n = table.n(), H = table.H();
  std::vector<double> per_gene(n);
  std::vector<double> logpi(H, kNegInf);
  for (std::size_t l = 0; l < H; ++l)
    if (h.pi[l] > 0.0) logpi[l] = std::log(h.pi[l]);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> terms(H, kNegInf);
    for (std::size_t l = 0; l < H; ++l) {
      if (h.pi[l] > 0.0) terms[l] = logpi[l] + logm[i * H + l];
    }
    per_gene[i] = log_sum_exp(terms);
  }
  return total_from_rows(per_gene);
}

inline double total_log_marginal_migaga(std::size_t n, std::size_t H, std::size_t M,
                                        std::span<const double> logm, const MiGaGaHyper& h) {
  std::vector<double> per_gene(n);
  std::vector<double> terms(H * M);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < H; ++l) {
      for (std::size_t m = 0; m < M; ++m) {
        terms[l * M + m] = (h.pi[l] > 0.0 && h.rho[m] > 0.0)
                               ? std::log(h.pi[l]) + std::log(h.rho[m]) +
                                     logm[(i * H + l) * M + m]
                               : kNegInf;
      }
    }
    per_gene[i] = log_sum_exp(terms);
  }
  return total_from_rows(per_gene);
}

}  // namespace detail

inline double total_log_marginal(const ExpressionMatrix& x, const GroupAssignment& groups,
                                 const PatternSet& patterns, const GaGaHyper& h,
                                 int threads = 1) {
  validate_hyper(h);
  const auto stats = detail::build_stats_table(x, groups, patterns, threads);
  detail::MarginalTable table(stats, threads);
  std::vector<double> logm(stats.n * stats.H);
  table.evaluate(h.alpha0, h.nu, h.beta, h.mu, logm);
  for (double v : logm)
    if (std::isnan(v)) throw numeric_error(errc::non_finite_objective, "marginal evaluation failed");
  return detail::total_log_marginal_gaga(table, logm, h);
}

inline double total_log_marginal(const ExpressionMatrix& x, const GroupAssignment& groups,
                                 const PatternSet& patterns, const MiGaGaHyper& h,
                                 int threads = 1) {
  validate_hyper(h);
  const auto stats = detail::build_stats_table(x, groups, patterns, threads);
  detail::MarginalTable table(stats, threads);
  const std::size_t n = stats.n, H = stats.H, M = h.M();
  std::vector<double> logm(n * H * M);
  std::vector<double> comp(n * H);
  for (std::size_t m = 0; m < M; ++m) {
    table.evaluate(h.components[m].alpha0, h.components[m].nu, h.beta, h.mu, comp);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < H; ++l) logm[(i * H + l) * M + m] = comp[i * H + l];
  }
  for (double v : logm)
    if (std::isnan(v)) throw numeric_error(errc::non_finite_objective, "marginal evaluation failed");
  return detail::total_log_marginal_migaga(n, H, M, logm, h);
}

// ----- EM -----

namespace detail {

// Q(theta) = sum_i sum_l v_il log f(x_i | l; theta); -inf when any entry fails
class GagaMStepObjective {
 public:
  GagaMStepObjective(const MarginalTable& table, std::span<const double> v)
      : table_(&table), v_(v), scratch_(table.n() * table.H()), per_gene_(table.n()) {}

  double operator()(const std::vector<double>& u) {
    for (double uj : u)
      if (!(std::abs(uj) < 30.0)) return kNegInf;
    table_->evaluate(std::exp(u[0]), std::exp(u[1]), std::exp(u[2]), std::exp(u[3]), scratch_);
    const std::size_t n = table_->n(), H = table_->H();
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t l = 0; l < H; ++l) {
        const double w = v_[i * H + l];
        if (w > 0.0) {
          const double lm = scratch_[i * H + l];
          if (std::isnan(lm)) return kNegInf;
          acc += w * lm;
        }
      }
      per_gene_[i] = acc;
    }
    const double q = total_from_rows(per_gene_);
    return std::isfinite(q) ? q : kNegInf;
  }

 private:
  const MarginalTable* table_;
  std::span<const double> v_;
  std::vector<double> scratch_;
  std::vector<double> per_gene_;
};

class MigagaMStepObjective {
 public:
  MigagaMStepObjective(const MarginalTable& table, std::size_t M, std::span<const double> w)
      : table_(&table), M_(M), w_(w), scratch_(table.n() * table.H()), per_gene_(table.n()) {}

  // layout: [log a0_1, log nu_1, ..., log a0_M, log nu_M, log beta, log mu]
  double operator()(const std::vector<double>& u) {
    for (double uj : u)
      if (!(std::abs(uj) < 30.0)) return kNegInf;
    const std::size_t n = table_->n(), H = table_->H();
    const double beta = std::exp(u[2 * M_]);
    const double mu = std::exp(u[2 * M_ + 1]);
    std::fill(per_gene_.begin(), per_gene_.end(), 0.0);
    for (std::size_t m = 0; m < M_; ++m) {
      table_->evaluate(std::exp(u[2 * m]), std::exp(u[2 * m + 1]), beta, mu, scratch_);
      for (std::size_t i = 0; i < n; ++i) {
        double acc = per_gene_[i];
        for (std::size_t l = 0; l < H; ++l) {
          const double wv = w_[(i * H + l) * M_ + m];
          if (wv > 0.0) {
            const double lm = scratch_[i * H + l];
            if (std::isnan(lm)) return kNegInf;
            acc += wv * lm;
          }
        }
        per_gene_[i] = acc;
      }
    }
    const double q = total_from_rows(per_gene_);
    return std::isfinite(q) ? q : kNegInf;
  }

 private:
  const MarginalTable* table_;
  std::size_t M_;
  std::span<const double> w_;
  std::vector<double> scratch_;
  std::vector<double> per_gene_;
};

}  // namespace detail

inline FitResult em_fit_gaga(const ExpressionMatrix& x, const GroupAssignment& groups,
                             const PatternSet& patterns, const FitConfig& cfg,
                             const GaGaHyper* start = nullptr) {
  validate_config(cfg);
  if (patterns.H() < 2)
    throw data_error(errc::shape_mismatch, "fitting needs at least two patterns");
  GaGaHyper h = start ? *start : init_hyperparams(x, groups, patterns);
  validate_hyper(h);
  const auto stats = detail::build_stats_table(x, groups, patterns, cfg.threads);
  detail::MarginalTable table(stats, cfg.threads);
  const std::size_t n = stats.n, H = stats.H;

  FitResult res;
  res.kind = ModelKind::gaga;
  std::vector<double> logm(n * H);
  std::vector<double> v(n * H);

  double loglik_prev = 0.0;
  for (std::size_t iter = 0;; ++iter) {
    table.evaluate(h.alpha0, h.nu, h.beta, h.mu, logm);
    for (double lm : logm)
      if (std::isnan(lm))
        throw numeric_error(errc::non_finite_objective, "marginal not finite at current fit");
    const double loglik = detail::total_log_marginal_gaga(table, logm, h);
    if (!std::isfinite(loglik))
      throw numeric_error(errc::non_finite_objective, "total log marginal not finite");
    res.loglik_trace.push_back(loglik);
    if (iter > 0 &&
        std::abs(loglik - loglik_prev) <= cfg.rel_loglik_tol * std::abs(loglik_prev)) {
      res.converged = true;
      break;
    }
    if (iter == cfg.max_iterations) break;
    loglik_prev = loglik;

    // E-step
    std::vector<double> terms(H);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t l = 0; l < H; ++l)
        terms[l] = h.pi[l] > 0.0 ? std::log(h.pi[l]) + logm[i * H + l] : kNegInf;
      const double lse = log_sum_exp(terms);
      for (std::size_t l = 0; l < H; ++l)
        v[i * H + l] = h.pi[l] > 0.0 ? std::exp(terms[l] - lse) : 0.0;
    }

    // M-step: closed-form pi, simplex search over (alpha0, nu, beta, mu)
    for (std::size_t l = 0; l < H; ++l) {
      double col = 0.0;
      for (std::size_t i = 0; i < n; ++i) col += v[i * H + l];
      h.pi[l] = col / static_cast<double>(n);
    }
    detail::GagaMStepObjective q(table, v);
    std::vector<double> u0 = {std::log(h.alpha0), std::log(h.nu), std::log(h.beta),
                              std::log(h.mu)};
    const double q0 = q(u0);
    double q_best = 0.0;
    std::vector<double> u_best =
        detail::nelder_mead_maximize(q, u0, 0.15, cfg.m_step_budget, &q_best);
    if (q_best > q0) {  // a worse point is never accepted
      h.alpha0 = std::exp(u_best[0]);
      h.nu = std::exp(u_best[1]);
      h.beta = std::exp(u_best[2]);
      h.mu = std::exp(u_best[3]);
    }
    res.iterations = iter + 1;
  }
  res.hyper = h;
  return res;
}

inline FitResult em_fit_migaga(const ExpressionMatrix& x, const GroupAssignment& groups,
                               const PatternSet& patterns, std::size_t M, const FitConfig& cfg,
                               const MiGaGaHyper* start = nullptr) {
  validate_config(cfg);
  if (M < 1) throw data_error(errc::domain_error, "M must be at least 1");
  if (patterns.H() < 2)
    throw data_error(errc::shape_mismatch, "fitting needs at least two patterns");
  MiGaGaHyper h = start ? *start : init_hyperparams(x, groups, patterns, M);
  if (h.M() != M) throw data_error(errc::shape_mismatch, "start hyper disagrees with M");
  validate_hyper(h);
  const auto stats = detail::build_stats_table(x, groups, patterns, cfg.threads);
  detail::MarginalTable table(stats, cfg.threads);
  const std::size_t n = stats.n, H = stats.H;

  FitResult res;
  res.kind = ModelKind::migaga;
  std::vector<double> logm(n * H * M);
  std::vector<double> comp(n * H);
  std::vector<double> w(n * H * M);
  bool empty_cluster_seen = false;

  const auto eval_all = [&] {
    for (std::size_t m = 0; m < M; ++m) {
      table.evaluate(h.components[m].alpha0, h.components[m].nu, h.beta, h.mu, comp);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < H; ++l) logm[(i * H + l) * M + m] = comp[i * H + l];
    }
  };

  double loglik_prev = 0.0;
  for (std::size_t iter = 0;; ++iter) {
    eval_all();
    for (double lm : logm)
      if (std::isnan(lm))
        throw numeric_error(errc::non_finite_objective, "marginal not finite at current fit");
    const double loglik = detail::total_log_marginal_migaga(n, H, M, logm, h);
    if (!std::isfinite(loglik))
      throw numeric_error(errc::non_finite_objective, "total log marginal not finite");
    res.loglik_trace.push_back(loglik);
    if (iter > 0 &&
        std::abs(loglik - loglik_prev) <= cfg.rel_loglik_tol * std::abs(loglik_prev)) {
      res.converged = true;
      break;
    }
    if (iter == cfg.max_iterations) break;
    loglik_prev = loglik;

    // E-step: joint (pattern, cluster) responsibilities
    std::vector<double> terms(H * M);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t l = 0; l < H; ++l)
        for (std::size_t m = 0; m < M; ++m)
          terms[l * M + m] = (h.pi[l] > 0.0 && h.rho[m] > 0.0)
                                 ? std::log(h.pi[l]) + std::log(h.rho[m]) +
                                       logm[(i * H + l) * M + m]
                                 : kNegInf;
      const double lse = log_sum_exp(terms);
      for (std::size_t lm = 0; lm < H * M; ++lm)
        w[i * H * M + lm] = std::isfinite(terms[lm]) ? std::exp(terms[lm] - lse) : 0.0;
    }

    // M-step: closed-form pi and rho (MAP with Dirichlet weights), then
    // simplex search over the component and shared shape hyperparameters
    for (std::size_t l = 0; l < H; ++l) {
      double col = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t m = 0; m < M; ++m) col += w[(i * H + l) * M + m];
      h.pi[l] = col / static_cast<double>(n);
    }
    std::vector<double> mass(M, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < H; ++l)
        for (std::size_t m = 0; m < M; ++m) mass[m] += w[(i * H + l) * M + m];
    double rho_total = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      if (mass[m] < 1e-6 * static_cast<double>(n) && !empty_cluster_seen) {
        empty_cluster_seen = true;
        res.warnings.push_back("EmptyCluster: component " + std::to_string(m) +
                               " responsibility mass below 1e-6 * n at iteration " +
                               std::to_string(iter + 1));
      }
      h.rho[m] = std::max(0.0, mass[m] + h.dirichlet_r[m] - 1.0);
      rho_total += h.rho[m];
    }
    if (rho_total <= 0.0)
      throw numeric_error(errc::non_finite_objective, "all mixture weights collapsed to zero");
    for (double& rv : h.rho) rv /= rho_total;

    detail::MigagaMStepObjective q(table, M, w);
    std::vector<double> u0;
    for (std::size_t m = 0; m < M; ++m) {
      u0.push_back(std::log(h.components[m].alpha0));
      u0.push_back(std::log(h.components[m].nu));
    }
    u0.push_back(std::log(h.beta));
    u0.push_back(std::log(h.mu));
    const double q0 = q(u0);
    double q_best = 0.0;
    std::vector<double> u_best =
        detail::nelder_mead_maximize(q, u0, 0.15, cfg.m_step_budget, &q_best);
    if (q_best > q0) {
      for (std::size_t m = 0; m < M; ++m) {
        h.components[m].alpha0 = std::exp(u_best[2 * m]);
        h.components[m].nu = std::exp(u_best[2 * m + 1]);
      }
      h.beta = std::exp(u_best[2 * M]);
      h.mu = std::exp(u_best[2 * M + 1]);
    }

    // canonical label order: components sorted by nu, rho carried along
    std::vector<std::size_t> order(M);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return h.components[a].nu < h.components[b].nu;
    });
    MiGaGaHyper sorted = h;
    for (std::size_t m = 0; m < M; ++m) {
      sorted.components[m] = h.components[order[m]];
      sorted.rho[m] = h.rho[order[m]];
      sorted.dirichlet_r[m] = h.dirichlet_r[order[m]];
    }
    h = std::move(sorted);
    res.iterations = iter + 1;
  }
  res.hyper = h;
  return res;
}

// ----- BIC model-size selection and cluster pruning -----

struct BicEntry {
  std::size_t M = 0;
  bool ok = false;
  std::string error;
  double bic = 0.0;
  FitResult fit;
};

struct BicSelection {
  std::size_t chosen_M = 0;
  std::vector<BicEntry> entries;
};

inline BicSelection bic_select(const ExpressionMatrix& x, const GroupAssignment& groups,
                               const PatternSet& patterns, std::size_t M_max,
                               const FitConfig& cfg) {
  if (M_max < 1) throw data_error(errc::domain_error, "M_max must be at least 1");
  BicSelection sel;
  const double logn = std::log(static_cast<double>(x.n_genes()));
  const double H = static_cast<double>(patterns.H());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t M = 1; M <= M_max; ++M) {
    BicEntry entry;
    entry.M = M;
    try {
      entry.fit = em_fit_migaga(x, groups, patterns, M, cfg);
      const double q = 2.0 * static_cast<double>(M) + 2.0 + (H - 1.0) +
                       (static_cast<double>(M) - 1.0);
      entry.bic = -2.0 * entry.fit.final_loglik() + q * logn;
      entry.ok = true;
      if (entry.bic < best) {  // ties keep the smaller M
        best = entry.bic;
        sel.chosen_M = M;
      }
    } catch (const error& e) {
      entry.error = e.what();
    }
    sel.entries.push_back(std::move(entry));
  }
  if (sel.chosen_M == 0)
    throw numeric_error(errc::non_finite_objective, "every mixture size failed to fit");
  return sel;
}

inline MiGaGaHyper prune_clusters(const MiGaGaHyper& h, double threshold) {
  if (!(threshold >= 0.0) || !(threshold < 1.0))
    throw data_error(errc::domain_error, "prune threshold must be in [0, 1)");
  MiGaGaHyper out;
  out.beta = h.beta;
  out.mu = h.mu;
  out.pi = h.pi;
  double total = 0.0;
  for (std::size_t m = 0; m < h.M(); ++m) {
    if (h.rho[m] >= threshold) {
      out.components.push_back(h.components[m]);
      out.rho.push_back(h.rho[m]);
      out.dirichlet_r.push_back(h.dirichlet_r[m]);
      total += h.rho[m];
    }
  }
  if (out.components.empty())
    throw numeric_error(errc::all_clusters_pruned, "no component survives the threshold");
  for (double& rv : out.rho) rv /= total;
  return out;
}

}  // namespace gaga
