#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gaga/errors.hpp"

namespace gaga {

// Strictly positive gene x array intensities on the original linear scale.
struct ExpressionMatrix {
  std::vector<std::string> gene_ids;
  std::vector<std::string> array_ids;
  std::vector<double> values;  // row-major, n_genes x n_arrays

  std::size_t n_genes() const { return gene_ids.size(); }
  std::size_t n_arrays() const { return array_ids.size(); }
  double at(std::size_t gene, std::size_t array) const {
    return values[gene * array_ids.size() + array];
  }
  std::span<const double> row(std::size_t gene) const {
    return {values.data() + gene * array_ids.size(), array_ids.size()};
  }
};

namespace detail {
inline void require_unique(const std::vector<std::string>& ids, const char* what) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second)
      throw data_error(errc::duplicate_id, std::string(what) + " id '" + id + "' appears twice");
  }
}
}  // namespace detail

inline ExpressionMatrix validate_expression_matrix(std::vector<std::vector<double>> rows,
                                                   std::vector<std::string> gene_ids,
                                                   std::vector<std::string> array_ids) {
  if (gene_ids.empty())
    throw data_error(errc::shape_mismatch, "need at least one gene");
  if (array_ids.size() < 2)
    throw data_error(errc::shape_mismatch, "need at least two arrays");
  if (rows.size() != gene_ids.size())
    throw data_error(errc::shape_mismatch, "row count does not match gene id count");
  detail::require_unique(gene_ids, "gene");
  detail::require_unique(array_ids, "array");

  ExpressionMatrix m;
  m.gene_ids = std::move(gene_ids);
  m.array_ids = std::move(array_ids);
  m.values.reserve(m.gene_ids.size() * m.array_ids.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.array_ids.size())
      throw data_error(errc::shape_mismatch,
                       "gene '" + m.gene_ids[i] + "' has " + std::to_string(rows[i].size()) +
                           " values, expected " + std::to_string(m.array_ids.size()));
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      const double v = rows[i][j];
      if (!std::isfinite(v))
        throw data_error(errc::non_finite_value, "gene '" + m.gene_ids[i] + "', array '" +
                                                     m.array_ids[j] + "' is not finite");
      if (!(v > 0.0))
        throw data_error(errc::non_positive_value,
                         "gene '" + m.gene_ids[i] + "', array '" + m.array_ids[j] +
                             "' is not strictly positive (gamma support is (0, inf))");
      m.values.push_back(v);
    }
  }
  return m;
}

// z_j in 1..K; every group occupied
struct GroupAssignment {
  std::vector<int> labels;
  int K = 0;

  std::size_t n_arrays() const { return labels.size(); }
};

inline GroupAssignment make_group_assignment(std::vector<int> labels, int K) {
  if (K < 2) throw data_error(errc::shape_mismatch, "need at least two groups");
  std::vector<int> counts(static_cast<std::size_t>(K), 0);
  for (int z : labels) {
    if (z < 1 || z > K)
      throw data_error(errc::shape_mismatch,
                       "group index " + std::to_string(z) + " outside 1.." + std::to_string(K));
    ++counts[static_cast<std::size_t>(z - 1)];
  }
  for (int k = 0; k < K; ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0)
      throw data_error(errc::group_empty, "group " + std::to_string(k + 1) + " has no arrays");
  }
  return GroupAssignment{std::move(labels), K};
}

// An expression pattern: a partition of the K groups into classes of equal
// mean. Canonical form relabels class codes in first-use order from 0.
struct Pattern {
  std::vector<int> classes;
  int n_distinct = 0;

  std::size_t K() const { return classes.size(); }
  bool is_null() const { return n_distinct == 1; }
  bool operator==(const Pattern& o) const { return classes == o.classes; }
};

inline Pattern canonicalize_pattern(std::span<const int> codes) {
  Pattern p;
  p.classes.reserve(codes.size());
  std::unordered_map<int, int> relabel;
  for (int code : codes) {
    auto [it, inserted] = relabel.emplace(code, static_cast<int>(relabel.size()));
    p.classes.push_back(it->second);
    (void)inserted;
  }
  p.n_distinct = static_cast<int>(relabel.size());
  return p;
}

inline Pattern parse_pattern(const std::string& text, int K) {
  std::istringstream in(text);
  std::vector<int> codes;
  std::string tok;
  while (in >> tok) {
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(tok, &pos);
    } catch (const std::exception&) {
      throw data_error(errc::non_integer_code, "pattern code '" + tok + "' is not an integer");
    }
    if (pos != tok.size() || v < 0)
      throw data_error(errc::non_integer_code,
                       "pattern code '" + tok + "' is not a nonnegative integer");
    codes.push_back(v);
  }
  if (static_cast<int>(codes.size()) != K)
    throw data_error(errc::wrong_arity, "pattern '" + text + "' has " +
                                            std::to_string(codes.size()) + " codes, expected " +
                                            std::to_string(K));
  return canonicalize_pattern(codes);
}

// The H hypotheses; index 0 must be the null pattern (all groups equal).
struct PatternSet {
  std::vector<Pattern> patterns;

  std::size_t H() const { return patterns.size(); }
  std::size_t K() const { return patterns.empty() ? 0 : patterns.front().K(); }
  const Pattern& operator[](std::size_t l) const { return patterns[l]; }
};

inline PatternSet make_pattern_set(std::vector<Pattern> patterns) {
  if (patterns.empty()) throw data_error(errc::shape_mismatch, "pattern set is empty");
  const std::size_t K = patterns.front().K();
  for (const auto& p : patterns) {
    if (p.K() != K)
      throw data_error(errc::wrong_arity, "patterns disagree on the number of groups");
  }
  if (!patterns.front().is_null())
    throw data_error(errc::first_pattern_not_null,
                     "pattern at index 0 must merge all groups (the null pattern)");
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    for (std::size_t j = i + 1; j < patterns.size(); ++j) {
      if (patterns[i] == patterns[j])
        throw data_error(errc::duplicate_pattern,
                         "patterns " + std::to_string(i) + " and " + std::to_string(j) +
                             " are identical after canonicalization");
    }
  }
  return PatternSet{std::move(patterns)};
}

// Per-pattern class sums and counts for one gene; class order is the
// pattern's canonical code order.
struct PatternStats {
  std::vector<double> sums;    // S_k
  std::vector<double> counts;  // J_k
};

struct GeneSuffStats {
  double log_product = 0.0;  // P_i  = sum_j log x_ij
  std::vector<PatternStats> per_pattern;
};

inline GeneSuffStats compute_sufficient_stats(std::span<const double> gene_row,
                                              const GroupAssignment& groups,
                                              const PatternSet& patterns) {
  if (gene_row.size() != groups.labels.size())
    throw data_error(errc::shape_mismatch, "gene row length does not match group labels");
  GeneSuffStats st;
  for (double v : gene_row) st.log_product += std::log(v);
  st.per_pattern.reserve(patterns.H());
  for (const auto& pat : patterns.patterns) {
    PatternStats ps;
    ps.sums.assign(static_cast<std::size_t>(pat.n_distinct), 0.0);
    ps.counts.assign(static_cast<std::size_t>(pat.n_distinct), 0.0);
    for (std::size_t j = 0; j < gene_row.size(); ++j) {
      const int cls = pat.classes[static_cast<std::size_t>(groups.labels[j] - 1)];
      ps.sums[static_cast<std::size_t>(cls)] += gene_row[j];
      ps.counts[static_cast<std::size_t>(cls)] += 1.0;
    }
    st.per_pattern.push_back(std::move(ps));
  }
  return st;
}

}  // namespace gaga
