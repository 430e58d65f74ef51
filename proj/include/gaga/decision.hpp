#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "gaga/errors.hpp"
#include "gaga/inference.hpp"

namespace gaga {

struct BfdrResult {
  double threshold = 1.0;  // t* on 1 - v_i0; genes with 1 - v_i0 >= t* are declared
  std::vector<std::uint8_t> declared;
  double bfdr = 0.0;
  std::size_t n_declared = 0;
};

// Optimal threshold rule: sort by v0 ascending and declare the largest prefix
// whose running mean stays at or below the target. The running mean of sorted
// v0 is non-decreasing, so the prefix is unique.
inline BfdrResult bfdr_threshold(std::span<const double> v0, double target) {
  for (double v : v0) {
    if (!(v >= 0.0 && v <= 1.0))
      throw data_error(errc::domain_error, "v0 entries must lie in [0, 1]");
  }
  if (!(target >= 0.0))
    throw data_error(errc::domain_error, "target BFDR must be nonnegative");
  std::vector<std::size_t> order(v0.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v0[a] < v0[b]; });
  BfdrResult res;
  res.declared.assign(v0.size(), 0);
  double running = 0.0;
  std::size_t count = 0;
  double sum_declared = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    running += v0[order[rank]];
    const double mean = running / static_cast<double>(rank + 1);
    if (mean <= target) {
      count = rank + 1;
      sum_declared = running;
    } else {
      break;  // running mean only grows from here
    }
  }
  for (std::size_t rank = 0; rank < count; ++rank) res.declared[order[rank]] = 1;
  res.n_declared = count;
  res.bfdr = count > 0 ? sum_declared / static_cast<double>(count) : 0.0;
  res.threshold = count > 0 ? 1.0 - v0[order[count - 1]] : 1.0;
  return res;
}

// Declared genes go to their highest-probability non-null pattern (ties to the
// lowest index); undeclared genes go to pattern 0.
inline std::vector<std::size_t> classify_genes(const PatternPosterior& post,
                                               std::span<const std::uint8_t> declared) {
  if (declared.size() != post.n)
    throw data_error(errc::shape_mismatch, "declared flags do not match gene count");
  std::vector<std::size_t> assigned(post.n, 0);
  if (post.H < 2) return assigned;
  for (std::size_t i = 0; i < post.n; ++i) {
    if (!declared[i]) continue;
    std::size_t best = 1;
    for (std::size_t l = 2; l < post.H; ++l) {
      if (post.at(i, l) > post.at(i, best)) best = l;
    }
    assigned[i] = best;
  }
  return assigned;
}

// mean of 1 - v_i0 over undeclared genes; 0 when everything is declared
inline double bfnr_estimate(std::span<const double> v0,
                            std::span<const std::uint8_t> declared) {
  if (v0.size() != declared.size())
    throw data_error(errc::shape_mismatch, "declared flags do not match v0 length");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < v0.size(); ++i) {
    if (!declared[i]) {
      total += 1.0 - v0[i];
      ++count;
    }
  }
  return count > 0 ? total / static_cast<double>(count) : 0.0;
}

struct DecisionResult {
  std::vector<std::uint8_t> declared;
  std::vector<std::size_t> assigned_pattern;  // 0 for undeclared genes
  double threshold = 1.0;
  double bfdr_estimate = 0.0;
  double bfnr_estimate = 0.0;
};

inline DecisionResult decide(const PatternPosterior& post, double target) {
  std::vector<double> v0(post.n);
  for (std::size_t i = 0; i < post.n; ++i) v0[i] = post.at(i, 0);
  const BfdrResult b = bfdr_threshold(v0, target);
  DecisionResult res;
  res.declared = b.declared;
  res.assigned_pattern = classify_genes(post, res.declared);
  res.threshold = b.threshold;
  res.bfdr_estimate = b.bfdr;
  res.bfnr_estimate = bfnr_estimate(v0, res.declared);
  return res;
}

}  // namespace gaga
