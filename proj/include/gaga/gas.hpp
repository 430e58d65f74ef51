#pragma once

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gaga/errors.hpp"
#include "gaga/numeric.hpp"
#include "gaga/rng.hpp"

namespace gaga {

// Parameters of the gamma-shape distribution
//
//   f(y) = C * y^(b - p*d - 1) * exp(-y*c)
//          * prod_i Gamma(a_i*y + d) / Gamma(y)^(a_i) * (y / (r + s_i*y))^(a_i*y + d)
//
// In the posterior use a = per-class observation counts, b = beta,
// c = beta/mu - P_i, d = alpha0, r = alpha0/nu, s = per-class observation sums.
// Factors with a_i = 0 and d = 0 contribute an empty product; p = 0 reduces
// the family to Ga(b, c) exactly.
struct GasParams {
  std::vector<double> a;
  double b = 1.0;
  double c = 1.0;
  double d = 0.0;
  double r = 1.0;
  std::vector<double> s;

  std::size_t p() const { return a.size(); }
};

namespace detail {

inline void check_gas_basic(const GasParams& g) {
  if (g.a.size() != g.s.size())
    throw numeric_error(errc::shape_mismatch, "a and s must have equal length");
  if (!(g.b > 0.0)) throw numeric_error(errc::domain_error, "b must be positive");
  if (!(g.d >= 0.0)) throw numeric_error(errc::domain_error, "d must be nonnegative");
  if (!(g.r > 0.0)) throw numeric_error(errc::domain_error, "r must be positive");
  for (double ai : g.a)
    if (!(ai >= 0.0)) throw numeric_error(errc::domain_error, "a_i must be nonnegative");
  for (double si : g.s)
    if (!(si > 0.0)) throw numeric_error(errc::domain_error, "s_i must be positive");
}

// rate of the approximating gamma: c + sum_{a_i > 0} a_i log(s_i / a_i);
// positivity of this sum is exactly the integrability constraint on c.
inline double gas_rate(const GasParams& g) {
  CompensatedSum acc;
  acc.add(g.c);
  for (std::size_t i = 0; i < g.a.size(); ++i) {
    if (g.a[i] > 0.0) acc.add(g.a[i] * std::log(g.s[i] / g.a[i]));
  }
  return acc.value();
}

}  // namespace detail

// Validating constructor; rejects parameter sets whose density is not
// integrable. Aggregate initialization stays available for evaluating the
// kernel of non-normalizable parameter sets.
inline GasParams make_gas_params(std::vector<double> a, double b, double c, double d, double r,
                                 std::vector<double> s) {
  GasParams g{std::move(a), b, c, d, r, std::move(s)};
  detail::check_gas_basic(g);
  if (!(detail::gas_rate(g) > 0.0))
    throw numeric_error(errc::integrability_violation,
                        "c must exceed -sum a_i*log(s_i/a_i) for the density to be integrable");
  return g;
}

// log of the density kernel (C omitted), entirely on the log scale
inline double gas_log_density_unnorm(double y, const GasParams& g) {
  if (!(y > 0.0)) throw numeric_error(errc::domain_error, "gamma-shape support is y > 0");
  detail::check_gas_basic(g);
  const double p = static_cast<double>(g.p());
  const double logy = std::log(y);
  CompensatedSum acc;
  acc.add((g.b - p * g.d - 1.0) * logy);
  acc.add(-y * g.c);
  for (std::size_t i = 0; i < g.a.size(); ++i) {
    const double ai = g.a[i];
    if (ai == 0.0 && g.d == 0.0) continue;  // empty factor
    const double z = ai * y + g.d;
    acc.add(std::lgamma(z));
    if (ai != 0.0) acc.add(-ai * std::lgamma(y));
    acc.add(z * (logy - std::log(g.r + g.s[i] * y)));
  }
  return acc.value();
}

// d/dy of gas_log_density_unnorm
inline double gas_score(double y, const GasParams& g) {
  const double p = static_cast<double>(g.p());
  double out = (g.b - p * g.d - 1.0) / y - g.c;
  for (std::size_t i = 0; i < g.a.size(); ++i) {
    const double ai = g.a[i];
    if (ai == 0.0 && g.d == 0.0) continue;
    const double si = g.s[i];
    const double z = ai * y + g.d;
    if (ai != 0.0) {
      out += ai * (boost::math::digamma(z) - boost::math::digamma(y));
      out += ai * (std::log(y) - std::log(g.r + si * y));
    }
    out += z * g.r / (y * (g.r + si * y));
  }
  return out;
}

// d2/dy2 of gas_log_density_unnorm
inline double gas_curvature(double y, const GasParams& g) {
  const double p = static_cast<double>(g.p());
  double out = -(g.b - p * g.d - 1.0) / (y * y);
  for (std::size_t i = 0; i < g.a.size(); ++i) {
    const double ai = g.a[i];
    if (ai == 0.0 && g.d == 0.0) continue;
    const double si = g.s[i];
    const double z = ai * y + g.d;
    const double denom = g.r + si * y;
    if (ai != 0.0) {
      out += ai * ai * boost::math::trigamma(z) - ai * boost::math::trigamma(y);
      out += ai * (1.0 / y - si / denom);
    }
    out += ai * g.r / (y * denom) - z * g.r * (g.r + 2.0 * si * y) / (y * y * denom * denom);
  }
  return out;
}

struct GammaApprox {
  double shape = 0.0;
  double rate = 0.0;
  bool refined = false;

  double mode() const { return (shape - 1.0) / rate; }
  double mean() const { return shape / rate; }
  double sd() const { return std::sqrt(shape) / rate; }
  double log_pdf(double y) const {
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(y) - rate * y;
  }
};

// Large-y gamma approximation Ga(b + 0.5*sum(a_i - 1), c + sum a_i log(s_i/a_i))
inline GammaApprox gas_gamma_approx(const GasParams& g) {
  detail::check_gas_basic(g);
  double shape = g.b;
  for (double ai : g.a) {
    if (ai > 0.0) shape += 0.5 * (ai - 1.0);
  }
  const double rate = detail::gas_rate(g);
  if (!(rate > 0.0))
    throw numeric_error(errc::integrability_violation,
                        "approximating gamma has nonpositive rate (non-integrable density)");
  if (!(shape > 0.0))
    throw numeric_error(errc::approx_degenerate, "approximating gamma has nonpositive shape");
  return GammaApprox{shape, rate, false};
}

namespace detail {

// score threshold triggering Newton refinement: 1e-3 of the score magnitude
// one approximation sd away from the mode
inline double refine_trigger(const GasParams& g, const GammaApprox& ap) {
  const double probe = ap.mode() + ap.sd();
  return 1e-3 * std::abs(gas_score(probe, g));
}

inline GammaApprox newton_refine(const GasParams& g, const GammaApprox& ap) {
  // The score is positive left of the mode and negative right of it; bracket
  // the sign change first so Newton can be safeguarded by bisection (the log
  // density is not globally concave).
  double lo = ap.mode(), hi = ap.mode();
  double sc = gas_score(lo, g);
  if (sc > 0.0) {
    for (int it = 0;; ++it) {
      hi = hi * 2.0;
      if (gas_score(hi, g) <= 0.0) break;
      lo = hi;
      if (it >= 200)
        throw numeric_error(errc::refine_failed, "score has no zero right of the start");
    }
  } else if (sc < 0.0) {
    for (int it = 0;; ++it) {
      lo = lo * 0.5;
      if (gas_score(lo, g) >= 0.0) break;
      hi = lo;
      if (it >= 200)
        throw numeric_error(errc::refine_failed, "score has no zero left of the start");
    }
  }
  double y = 0.5 * (lo + hi);
  bool converged = false;
  int newton_steps = 0;
  for (int it = 0; it < 120; ++it) {
    sc = gas_score(y, g);
    if (sc > 0.0) {
      lo = y;
    } else {
      hi = y;
    }
    if (hi - lo <= 1e-12 * y) {
      converged = true;
      break;
    }
    const double cv = newton_steps < 20 ? gas_curvature(y, g) : 0.0;
    double ynew;
    if (cv < 0.0) {
      ynew = y - sc / cv;
      ++newton_steps;
      if (!(ynew > lo && ynew < hi)) ynew = 0.5 * (lo + hi);  // safeguard
    } else {
      ynew = 0.5 * (lo + hi);  // bisection once the Newton budget is spent
    }
    const double step = ynew - y;
    y = ynew;
    if (std::abs(step) <= 1e-12 * y) {
      converged = true;
      break;
    }
  }
  if (!converged) throw numeric_error(errc::refine_failed, "mode search did not converge");
  const double h = -gas_curvature(y, g);
  if (!(h > 0.0)) throw numeric_error(errc::refine_failed, "nonpositive curvature at mode");
  // gamma matching mode m* and second derivative h: shape = 1 + h m*^2, rate = h m*
  return GammaApprox{1.0 + h * y * y, h * y, true};
}

}  // namespace detail

// Returns the input when the approximate mode already zeroes the score;
// otherwise Newton-refines the mode and matches the curvature there.
inline GammaApprox gas_mode_refine(const GasParams& g, const GammaApprox& ap) {
  if (!(ap.mode() > 0.0))
    throw numeric_error(errc::refine_failed, "gamma approximation has no interior mode");
  const double tau = detail::refine_trigger(g, ap);
  if (std::abs(gas_score(ap.mode(), g)) <= tau) return ap;
  return detail::newton_refine(g, ap);
}

// log C by evaluating the (possibly refined) gamma approximation and the
// unnormalized density at the approximation's mode. Exact when p = 0.
inline double gas_log_norm_const(const GasParams& g, const GammaApprox& ap) {
  GammaApprox use = ap;
  double at = 0.0;
  if (use.mode() > 0.0) {
    if (!use.refined) use = gas_mode_refine(g, use);
    at = use.mode();
  } else {
    at = use.mean();  // shape <= 1: no interior mode, any evaluation point is exact for p = 0
  }
  return use.log_pdf(at) - gas_log_density_unnorm(at, g);
}

inline double gas_log_norm_const(const GasParams& g) {
  return gas_log_norm_const(g, gas_gamma_approx(g));
}

// Adaptive quadrature reference for log C: integrate exp(log f) in u = log y,
// doubling the Simpson grid until successive log-integrals agree within tol.
inline double gas_log_norm_const_oracle(const GasParams& g, double tol) {
  detail::check_gas_basic(g);
  if (!(tol > 0.0)) throw numeric_error(errc::domain_error, "tolerance must be positive");
  if (!(detail::gas_rate(g) > 0.0))
    throw numeric_error(errc::integrability_violation, "density is not integrable");

  const GammaApprox ap = gas_gamma_approx(g);
  const auto q = [&](double u) { return gas_log_density_unnorm(std::exp(u), g) + u; };

  // bracket the peak of q starting from the approximation
  double u0 = std::log(ap.mode() > 0.0 ? ap.mode() : ap.mean());
  double lo = u0, hi = u0;
  double qlo, qhi, qmid = q(u0);
  for (double step = 0.5;; step *= 2.0) {
    lo = u0 - step;
    qlo = q(lo);
    if (qlo < qmid) break;
    u0 = lo;
    qmid = qlo;
    if (step > 1e6) throw numeric_error(errc::quadrature_non_convergence, "no left bracket");
  }
  for (double step = 0.5;; step *= 2.0) {
    hi = u0 + step;
    qhi = q(hi);
    if (qhi < qmid) break;
    u0 = hi;
    qmid = qhi;
    if (step > 1e6) throw numeric_error(errc::quadrature_non_convergence, "no right bracket");
  }
  // golden-section for the peak location
  constexpr double kGolden = 0.6180339887498949;
  double a1 = lo, b1 = hi;
  for (int it = 0; it < 200 && (b1 - a1) > 1e-12 * std::max(1.0, std::abs(u0)); ++it) {
    const double m1 = b1 - kGolden * (b1 - a1);
    const double m2 = a1 + kGolden * (b1 - a1);
    if (q(m1) < q(m2)) {
      a1 = m1;
    } else {
      b1 = m2;
    }
  }
  const double ustar = 0.5 * (a1 + b1);
  const double qmax = q(ustar);

  // expand until the integrand falls below peak * 1e-12
  const double drop = -std::log(1e-12);
  double ul = ustar, ur = ustar;
  for (double step = 0.25; q(ul) > qmax - drop;) {
    ul -= step;
    step *= 1.5;
    if (ustar - ul > 1e7) throw numeric_error(errc::quadrature_non_convergence, "left tail");
  }
  for (double step = 0.25; q(ur) > qmax - drop;) {
    ur += step;
    step *= 1.5;
    if (ur - ustar > 1e7) throw numeric_error(errc::quadrature_non_convergence, "right tail");
  }

  const auto simpson_log = [&](std::size_t intervals) {
    const double h = (ur - ul) / static_cast<double>(intervals);
    CompensatedSum acc;
    acc.add(std::exp(q(ul) - qmax));
    acc.add(std::exp(q(ur) - qmax));
    for (std::size_t k = 1; k < intervals; ++k) {
      const double w = (k % 2 == 1) ? 4.0 : 2.0;
      acc.add(w * std::exp(q(ul + h * static_cast<double>(k)) - qmax));
    }
    return qmax + std::log(acc.value() * h / 3.0);
  };

  double prev = simpson_log(64);
  for (std::size_t n = 128; n <= (1u << 22); n *= 2) {
    const double cur = simpson_log(n);
    if (std::abs(cur - prev) < tol) return -cur;
    prev = cur;
  }
  throw numeric_error(errc::quadrature_non_convergence,
                      "Simpson refinement did not reach tol=" + std::to_string(tol));
}

// draws from the (refined) gamma approximation
inline std::vector<double> gas_sample(const GasParams& g, std::size_t count, Rng& rng) {
  GammaApprox ap = gas_gamma_approx(g);
  if (ap.mode() > 0.0) ap = gas_mode_refine(g, ap);
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(rng.gamma(ap.shape, ap.rate));
  return out;
}

inline std::vector<double> gas_sample(const GasParams& g, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  return gas_sample(g, count, rng);
}

}  // namespace gaga
