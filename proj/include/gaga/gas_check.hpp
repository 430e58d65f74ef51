#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "gaga/gas.hpp"
#include "gaga/rng.hpp"

namespace gaga {

// Approximation-vs-oracle comparison over randomly drawn parameter sets in the
// regime where the gamma approximation is advertised to hold: per-class counts
// 3..30, d in [0.5, 5], posterior mass concentrated at large y (small CVs put
// the shape posterior at y ~ 1e5..1e6).
struct GasCheckReport {
  std::size_t count = 0;
  std::size_t n_refined = 0;
  double max_density_error = 0.0;      // sup |approx - true| relative to the true peak
  double max_logc_abs_error = 0.0;     // max |log C_approx - log C_oracle|
  double max_logc_rel_error = 0.0;     // max of the above over |log C_oracle|
  double min_abs_logc = 0.0;
};

inline GasCheckReport gas_accuracy_sweep(std::size_t count, std::uint64_t seed,
                                         double oracle_tol = 1e-9) {
  Rng rng(seed);
  GasCheckReport rep;
  rep.count = count;
  rep.min_abs_logc = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < count; ++it) {
    const std::size_t p = 1 + static_cast<std::size_t>(rng.uniform() * 3.0);
    std::vector<double> a(p), s(p);
    for (double& ai : a) ai = 3.0 + std::floor(rng.uniform() * 28.0);
    const double d = 0.5 + 4.5 * rng.uniform();
    const double mean_scale = 50.0 + 450.0 * rng.uniform();
    for (std::size_t i = 0; i < p; ++i) s[i] = a[i] * mean_scale * (0.7 + 0.7 * rng.uniform());
    const double r = d * mean_scale * (0.5 + 1.5 * rng.uniform());
    const double b = 1.0 + 9.0 * rng.uniform();
    const double mode = std::exp(std::log(1e5) + rng.uniform() * std::log(10.0));
    double shape0 = b;
    for (double ai : a) shape0 += 0.5 * (ai - 1.0);
    const double rate0 = (shape0 - 1.0) / mode;
    double c = rate0;
    for (std::size_t i = 0; i < p; ++i) c -= a[i] * std::log(s[i] / a[i]);
    const GasParams g = make_gas_params(a, b, c, d, r, s);

    const double logc_oracle = gas_log_norm_const_oracle(g, oracle_tol);
    GammaApprox ap = gas_gamma_approx(g);
    if (ap.mode() > 0.0) ap = gas_mode_refine(g, ap);
    if (ap.refined) ++rep.n_refined;
    const double logc_approx = gas_log_norm_const(g, ap);

    const double abs_err = std::abs(logc_approx - logc_oracle);
    rep.max_logc_abs_error = std::max(rep.max_logc_abs_error, abs_err);
    rep.max_logc_rel_error = std::max(rep.max_logc_rel_error, abs_err / std::abs(logc_oracle));
    rep.min_abs_logc = std::min(rep.min_abs_logc, std::abs(logc_oracle));

    const double m = ap.mode() > 0.0 ? ap.mode() : ap.mean();
    const double sd = ap.sd();
    const double lo = std::max(1e-3, m - 6.0 * sd);
    const double hi = m + 8.0 * sd;
    const double peak = std::exp(gas_log_density_unnorm(m, g) + logc_oracle);
    double worst = 0.0;
    for (int k = 0; k < 300; ++k) {
      const double y = lo + (hi - lo) * static_cast<double>(k) / 299.0;
      const double f_true = std::exp(gas_log_density_unnorm(y, g) + logc_oracle);
      const double f_approx = std::exp(ap.log_pdf(y));
      worst = std::max(worst, std::abs(f_approx - f_true));
    }
    rep.max_density_error = std::max(rep.max_density_error, worst / peak);
  }
  return rep;
}

}  // namespace gaga
