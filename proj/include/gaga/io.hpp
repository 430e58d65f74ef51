#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

#include "gaga/errors.hpp"
#include "gaga/fitting.hpp"
#include "gaga/inference.hpp"
#include "gaga/simulation.hpp"
#include "gaga/types.hpp"

namespace gaga {

// Locale-independent number formatting: 17 significant digits, enough for an
// exact double round trip.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& tok, const std::string& where) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw data_error(errc::parse_error, where + ": '" + tok + "' is not a number");
  return v;
}

inline std::uint64_t parse_u64(const std::string& tok, const std::string& where) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
    throw data_error(errc::parse_error, where + ": '" + tok + "' is not a nonnegative integer");
  return v;
}

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string chomp(std::string line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
  return line;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error(errc::parse_error, "cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error(errc::parse_error, "cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

// ----- expression matrix TSV: header "gene_id<TAB>array ids...", one gene per row -----

inline ExpressionMatrix load_expression_tsv(const std::string& path, double offset = 0.0) {
  auto in = detail::open_input(path);
  std::string line;
  if (!std::getline(in, line))
    throw data_error(errc::parse_error, path + ": empty file");
  auto header = detail::split_tabs(detail::chomp(line));
  if (header.size() < 2 || header[0] != "gene_id")
    throw data_error(errc::parse_error, path + ":1: header must be gene_id followed by array ids");
  std::vector<std::string> array_ids(header.begin() + 1, header.end());

  std::vector<std::string> gene_ids;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::chomp(line);
    if (line.empty()) continue;
    auto cells = detail::split_tabs(line);
    if (cells.size() != array_ids.size() + 1)
      throw data_error(errc::parse_error, path + ":" + std::to_string(lineno) + ": expected " +
                                              std::to_string(array_ids.size() + 1) +
                                              " columns, found " + std::to_string(cells.size()));
    gene_ids.push_back(cells[0]);
    std::vector<double> row;
    row.reserve(array_ids.size());
    for (std::size_t j = 1; j < cells.size(); ++j) {
      if (cells[j].empty())
        throw data_error(errc::parse_error,
                         path + ":" + std::to_string(lineno) + ": missing cell");
      row.push_back(parse_double(cells[j], path + ":" + std::to_string(lineno)) + offset);
    }
    rows.push_back(std::move(row));
  }
  return validate_expression_matrix(std::move(rows), std::move(gene_ids), std::move(array_ids));
}

inline void write_expression_tsv(const std::string& path, const ExpressionMatrix& x) {
  auto out = detail::open_output(path);
  out << "gene_id";
  for (const auto& a : x.array_ids) out << '\t' << a;
  out << '\n';
  for (std::size_t i = 0; i < x.n_genes(); ++i) {
    out << x.gene_ids[i];
    for (std::size_t j = 0; j < x.n_arrays(); ++j) out << '\t' << format_double(x.at(i, j));
    out << '\n';
  }
}

// ----- group TSV: two columns, array_id and group label, no header -----

struct GroupMapping {
  GroupAssignment assignment;
  std::vector<std::string> labels;  // group k uses labels[k-1]
};

inline GroupMapping load_groups_tsv(const std::string& path,
                                    const std::vector<std::string>& array_ids) {
  auto in = detail::open_input(path);
  std::string line;
  std::vector<int> z(array_ids.size(), 0);
  std::vector<bool> seen(array_ids.size(), false);
  std::vector<std::string> labels;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::chomp(line);
    if (line.empty()) continue;
    auto cells = detail::split_tabs(line);
    if (cells.size() != 2)
      throw data_error(errc::parse_error,
                       path + ":" + std::to_string(lineno) + ": expected array_id<TAB>group");
    const auto it = std::find(array_ids.begin(), array_ids.end(), cells[0]);
    if (it == array_ids.end())
      throw data_error(errc::unknown_array, "array '" + cells[0] + "' is not in the matrix");
    const std::size_t j = static_cast<std::size_t>(it - array_ids.begin());
    if (seen[j])
      throw data_error(errc::duplicate_array, "array '" + cells[0] + "' listed twice");
    seen[j] = true;
    auto lit = std::find(labels.begin(), labels.end(), cells[1]);
    if (lit == labels.end()) {
      labels.push_back(cells[1]);  // first-appearance order defines the index
      lit = labels.end() - 1;
    }
    z[j] = static_cast<int>(lit - labels.begin()) + 1;
  }
  for (std::size_t j = 0; j < array_ids.size(); ++j) {
    if (!seen[j])
      throw data_error(errc::missing_array, "array '" + array_ids[j] + "' has no group");
  }
  GroupMapping gm;
  gm.assignment = make_group_assignment(std::move(z), static_cast<int>(labels.size()));
  gm.labels = std::move(labels);
  return gm;
}

inline void write_groups_tsv(const std::string& path, const std::vector<std::string>& array_ids,
                             const GroupAssignment& groups,
                             const std::vector<std::string>& labels) {
  auto out = detail::open_output(path);
  for (std::size_t j = 0; j < array_ids.size(); ++j) {
    out << array_ids[j] << '\t' << labels[static_cast<std::size_t>(groups.labels[j] - 1)]
        << '\n';
  }
}

// ----- pattern file: one pattern per line, K integer codes; line 1 is the null -----

inline PatternSet load_patterns_file(const std::string& path, int K) {
  auto in = detail::open_input(path);
  std::string line;
  std::vector<Pattern> patterns;
  while (std::getline(in, line)) {
    line = detail::chomp(line);
    if (line.empty()) continue;
    patterns.push_back(parse_pattern(line, K));
  }
  return make_pattern_set(std::move(patterns));
}

// ----- simulation truth TSV -----

inline void write_truth_tsv(const std::string& path, const std::vector<std::string>& gene_ids,
                            const SimTruth& truth) {
  auto out = detail::open_output(path);
  out << "gene_id\tdelta\tcluster\talpha\tlambda\n";
  for (std::size_t i = 0; i < gene_ids.size(); ++i) {
    out << gene_ids[i] << '\t' << truth.delta[i] << '\t' << truth.cluster[i] << '\t'
        << format_double(truth.alpha[i]) << '\t';
    for (std::size_t k = 0; k < truth.lambda[i].size(); ++k) {
      if (k) out << ',';
      out << format_double(truth.lambda[i][k]);
    }
    out << '\n';
  }
}

// reads back at least delta (and alpha/lambda when present)
inline SimTruth load_truth_tsv(const std::string& path) {
  auto in = detail::open_input(path);
  std::string line;
  if (!std::getline(in, line))
    throw data_error(errc::parse_error, path + ": empty file");
  const auto header = detail::split_tabs(detail::chomp(line));
  if (header.size() < 2 || header[0] != "gene_id" || header[1] != "delta")
    throw data_error(errc::parse_error, path + ":1: expected gene_id and delta columns");
  SimTruth truth;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::chomp(line);
    if (line.empty()) continue;
    const auto cells = detail::split_tabs(line);
    if (cells.size() < 2)
      throw data_error(errc::parse_error, path + ":" + std::to_string(lineno) + ": short row");
    truth.delta.push_back(parse_u64(cells[1], path + ":" + std::to_string(lineno)));
    if (cells.size() > 2 && header.size() > 2 && header[2] == "cluster")
      truth.cluster.push_back(parse_u64(cells[2], path + ":" + std::to_string(lineno)));
    if (cells.size() > 3) truth.alpha.push_back(parse_double(cells[3], path));
  }
  return truth;
}

// ----- fit persistence: versioned tab-separated text, fixed line order -----

struct FitFile {
  int version = 1;
  ModelKind kind = ModelKind::gaga;
  std::vector<std::string> group_labels;
  PatternSet patterns;
  std::variant<GaGaHyper, MiGaGaHyper> hyper;
  bool converged = false;
  std::size_t iterations = 0;
  double loglik = 0.0;
  std::uint64_t seed = 0;
};

inline void save_fit_file(const std::string& path, const FitFile& f) {
  auto out = detail::open_output(path);
  out << "gagafit\t" << f.version << '\n';
  out << "model\t" << (f.kind == ModelKind::gaga ? "gaga" : "migaga") << '\n';
  out << "k\t" << f.group_labels.size() << '\n';
  out << "labels";
  for (const auto& l : f.group_labels) out << '\t' << l;
  out << '\n';
  out << "h\t" << f.patterns.H() << '\n';
  for (const auto& p : f.patterns.patterns) {
    out << "pattern\t";
    for (std::size_t k = 0; k < p.classes.size(); ++k) {
      if (k) out << ' ';
      out << p.classes[k];
    }
    out << '\n';
  }
  if (f.kind == ModelKind::gaga) {
    const auto& h = std::get<GaGaHyper>(f.hyper);
    out << "alpha0\t" << format_double(h.alpha0) << '\n';
    out << "nu\t" << format_double(h.nu) << '\n';
    out << "beta\t" << format_double(h.beta) << '\n';
    out << "mu\t" << format_double(h.mu) << '\n';
    out << "pi";
    for (double p : h.pi) out << '\t' << format_double(p);
    out << '\n';
  } else {
    const auto& h = std::get<MiGaGaHyper>(f.hyper);
    out << "m\t" << h.M() << '\n';
    for (const auto& c : h.components)
      out << "component\t" << format_double(c.alpha0) << '\t' << format_double(c.nu) << '\n';
    out << "rho";
    for (double r : h.rho) out << '\t' << format_double(r);
    out << '\n';
    out << "dirichlet";
    for (double r : h.dirichlet_r) out << '\t' << format_double(r);
    out << '\n';
    out << "beta\t" << format_double(h.beta) << '\n';
    out << "mu\t" << format_double(h.mu) << '\n';
    out << "pi";
    for (double p : h.pi) out << '\t' << format_double(p);
    out << '\n';
  }
  out << "converged\t" << (f.converged ? 1 : 0) << '\n';
  out << "iterations\t" << f.iterations << '\n';
  out << "loglik\t" << format_double(f.loglik) << '\n';
  out << "seed\t" << f.seed << '\n';
}

namespace detail {

class FitReader {
 public:
  FitReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  std::vector<std::string> expect(const std::string& key, std::size_t min_fields) {
    std::string line;
    if (!std::getline(in_, line))
      throw data_error(errc::parse_error, path_ + ": unexpected end of file, wanted '" + key + "'");
    ++lineno_;
    auto cells = split_tabs(chomp(line));
    if (cells.empty() || cells[0] != key)
      throw data_error(errc::parse_error, path_ + ":" + std::to_string(lineno_) +
                                              ": expected '" + key + "' line");
    if (cells.size() < min_fields + 1)
      throw data_error(errc::parse_error,
                       path_ + ":" + std::to_string(lineno_) + ": '" + key + "' line too short");
    cells.erase(cells.begin());
    return cells;
  }

  double expect_double(const std::string& key) { return parse_double(expect(key, 1)[0], path_); }

 private:
  std::istream& in_;
  std::string path_;
  std::size_t lineno_ = 0;
};

}  // namespace detail

inline FitFile load_fit_file(const std::string& path) {
  auto in = detail::open_input(path);
  detail::FitReader rd(in, path);
  FitFile f;
  const auto ver = rd.expect("gagafit", 1);
  f.version = static_cast<int>(parse_u64(ver[0], path));
  if (f.version != 1)
    throw data_error(errc::parse_error, path + ": unsupported fit file version " + ver[0]);
  const auto model = rd.expect("model", 1);
  if (model[0] == "gaga") {
    f.kind = ModelKind::gaga;
  } else if (model[0] == "migaga") {
    f.kind = ModelKind::migaga;
  } else {
    throw data_error(errc::parse_error, path + ": unknown model '" + model[0] + "'");
  }
  const std::size_t K = parse_u64(rd.expect("k", 1)[0], path);
  f.group_labels = rd.expect("labels", K);
  if (f.group_labels.size() != K)
    throw data_error(errc::parse_error, path + ": label count does not match k");
  const std::size_t H = parse_u64(rd.expect("h", 1)[0], path);
  std::vector<Pattern> patterns;
  for (std::size_t l = 0; l < H; ++l)
    patterns.push_back(parse_pattern(rd.expect("pattern", 1)[0], static_cast<int>(K)));
  f.patterns = make_pattern_set(std::move(patterns));
  if (f.kind == ModelKind::gaga) {
    GaGaHyper h;
    h.alpha0 = rd.expect_double("alpha0");
    h.nu = rd.expect_double("nu");
    h.beta = rd.expect_double("beta");
    h.mu = rd.expect_double("mu");
    for (const auto& tok : rd.expect("pi", H)) h.pi.push_back(parse_double(tok, path));
    validate_hyper(h);
    f.hyper = std::move(h);
  } else {
    MiGaGaHyper h;
    const std::size_t M = parse_u64(rd.expect("m", 1)[0], path);
    for (std::size_t m = 0; m < M; ++m) {
      const auto c = rd.expect("component", 2);
      h.components.push_back({parse_double(c[0], path), parse_double(c[1], path)});
    }
    for (const auto& tok : rd.expect("rho", M)) h.rho.push_back(parse_double(tok, path));
    for (const auto& tok : rd.expect("dirichlet", M))
      h.dirichlet_r.push_back(parse_double(tok, path));
    h.beta = rd.expect_double("beta");
    h.mu = rd.expect_double("mu");
    for (const auto& tok : rd.expect("pi", H)) h.pi.push_back(parse_double(tok, path));
    validate_hyper(h);
    f.hyper = std::move(h);
  }
  f.converged = parse_u64(rd.expect("converged", 1)[0], path) != 0;
  f.iterations = parse_u64(rd.expect("iterations", 1)[0], path);
  f.loglik = rd.expect_double("loglik");
  f.seed = parse_u64(rd.expect("seed", 1)[0], path);
  return f;
}

}  // namespace gaga
