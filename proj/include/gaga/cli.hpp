#pragma once

#include <CLI11.hpp>
#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gaga/decision.hpp"
#include "gaga/errors.hpp"
#include "gaga/fitting.hpp"
#include "gaga/gas_check.hpp"
#include "gaga/inference.hpp"
#include "gaga/io.hpp"
#include "gaga/simulation.hpp"

namespace gaga {
namespace cli {

struct CommonData {
  ExpressionMatrix x;
  GroupMapping groups;
};

inline CommonData load_common(const std::string& data_path, const std::string& groups_path,
                              double offset) {
  CommonData d;
  d.x = load_expression_tsv(data_path, offset);
  d.groups = load_groups_tsv(groups_path, d.x.array_ids);
  return d;
}

inline PatternPosterior compute_posteriors(const detail::StatsTable& stats, const FitFile& fit,
                                           int threads) {
  PatternPosterior post;
  post.n = stats.n;
  post.H = stats.H;
  post.v.assign(post.n * post.H, 0.0);
  if (fit.kind == ModelKind::gaga) {
    const auto& h = std::get<GaGaHyper>(fit.hyper);
    parallel_for(post.n, threads, [&](std::size_t i) {
      const auto v = pattern_posterior(stats.genes[i], h);
      std::copy(v.begin(), v.end(), post.v.begin() + static_cast<std::ptrdiff_t>(i * post.H));
    });
  } else {
    const auto& h = std::get<MiGaGaHyper>(fit.hyper);
    post.M = h.M();
    post.w.assign(post.n * post.H * post.M, 0.0);
    parallel_for(post.n, threads, [&](std::size_t i) {
      const auto joint = cluster_pattern_joint_posterior(stats.genes[i], h);
      std::copy(joint.v.begin(), joint.v.end(),
                post.v.begin() + static_cast<std::ptrdiff_t>(i * post.H));
      std::copy(joint.w.begin(), joint.w.end(),
                post.w.begin() + static_cast<std::ptrdiff_t>(i * post.H * post.M));
    });
  }
  return post;
}

inline int cmd_fit(const std::string& data_path, const std::string& groups_path,
                   const std::string& patterns_path, const std::string& model,
                   std::size_t components, std::size_t bic_max, double prune,
                   const std::string& out_path, double offset, const FitConfig& cfg,
                   std::ostream& out, std::ostream& err) {
  const CommonData d = load_common(data_path, groups_path, offset);
  const PatternSet patterns = load_patterns_file(patterns_path, d.groups.assignment.K);

  FitFile f;
  f.group_labels = d.groups.labels;
  f.patterns = patterns;
  f.seed = cfg.seed;
  if (model == "gaga") {
    const FitResult res = em_fit_gaga(d.x, d.groups.assignment, patterns, cfg);
    f.kind = ModelKind::gaga;
    f.hyper = res.gaga();
    f.converged = res.converged;
    f.iterations = res.iterations;
    f.loglik = res.final_loglik();
    for (const auto& w : res.warnings) err << "warning: " << w << '\n';
  } else {
    FitResult res;
    if (bic_max > 0) {
      const BicSelection sel = bic_select(d.x, d.groups.assignment, patterns, bic_max, cfg);
      for (const auto& e : sel.entries) {
        if (e.ok) {
          err << "bic: M=" << e.M << " bic=" << format_double(e.bic) << '\n';
        } else {
          err << "bic: M=" << e.M << " failed: " << e.error << '\n';
        }
      }
      err << "bic: selected M=" << sel.chosen_M << '\n';
      for (const auto& e : sel.entries) {
        if (e.M == sel.chosen_M) res = e.fit;
      }
    } else {
      res = em_fit_migaga(d.x, d.groups.assignment, patterns, components, cfg);
    }
    MiGaGaHyper h = res.migaga();
    if (prune > 0.0) {
      const std::size_t before = h.M();
      h = prune_clusters(h, prune);
      if (h.M() != before)
        err << "pruned " << (before - h.M()) << " component(s) below rho=" << prune << '\n';
    }
    f.kind = ModelKind::migaga;
    f.hyper = std::move(h);
    f.converged = res.converged;
    f.iterations = res.iterations;
    f.loglik = res.final_loglik();
    for (const auto& w : res.warnings) err << "warning: " << w << '\n';
  }
  save_fit_file(out_path, f);
  out << "wrote " << out_path << (f.converged ? " (converged in " : " (stopped after ")
      << f.iterations << " iterations, loglik " << format_double(f.loglik) << ")\n";
  return 0;
}

inline int cmd_test(const std::string& fit_path, const std::string& data_path,
                    const std::string& groups_path, const std::string& out_path, double fdr,
                    double offset, std::size_t fold_draws, int threads, std::ostream& out,
                    std::ostream& err) {
  const FitFile fit = load_fit_file(fit_path);
  const CommonData d = load_common(data_path, groups_path, offset);
  if (d.groups.labels != fit.group_labels)
    throw data_error(errc::shape_mismatch,
                     "group labels of the data do not match the labels stored in the fit");
  const auto stats =
      detail::build_stats_table(d.x, d.groups.assignment, fit.patterns, threads);
  const PatternPosterior post = compute_posteriors(stats, fit, threads);
  const DecisionResult dec = decide(post, fdr);

  // fold changes for declared genes under their assigned pattern; seeds are
  // per-gene substreams of a fixed constant so reruns are bit-identical
  const Rng fold_root(0x60a6af01dULL);
  std::vector<std::string> fold_cells(post.n);
  parallel_for(post.n, threads, [&](std::size_t i) {
    if (!dec.declared[i]) return;
    const std::size_t pat = dec.assigned_pattern[i];
    FoldChange fc;
    if (fit.kind == ModelKind::gaga) {
      fc = estimate_fold_change(stats.genes[i], pat, std::get<GaGaHyper>(fit.hyper), fold_draws,
                                fold_root.substream(i).next_u64());
    } else {
      fc = estimate_fold_change(stats.genes[i], pat, std::get<MiGaGaHyper>(fit.hyper),
                                fold_draws, fold_root.substream(i).next_u64());
    }
    std::string cell;
    for (const auto& ratio : fc.ratios) {
      if (!cell.empty()) cell += ';';
      cell += 'c' + std::to_string(ratio.numerator_class) + '/' + 'c' +
              std::to_string(ratio.denominator_class) + ':' + format_double(ratio.value);
    }
    fold_cells[i] = std::move(cell);
  });

  auto tsv = detail::open_output(out_path);
  tsv << "gene_id";
  for (std::size_t l = 0; l < post.H; ++l) tsv << "\tv" << l;
  tsv << "\tassigned_pattern\tdeclared\tfold_changes\n";
  for (std::size_t i = 0; i < post.n; ++i) {
    tsv << d.x.gene_ids[i];
    for (std::size_t l = 0; l < post.H; ++l) tsv << '\t' << format_double(post.at(i, l));
    tsv << '\t' << dec.assigned_pattern[i] << '\t' << (dec.declared[i] ? 1 : 0) << '\t'
        << fold_cells[i] << '\n';
  }
  std::size_t n_declared = 0;
  for (auto flag : dec.declared) n_declared += flag;
  err << "declared " << n_declared << " of " << post.n << " genes (BFDR target "
      << format_double(fdr) << ", estimate " << format_double(dec.bfdr_estimate)
      << ", BFNR estimate " << format_double(dec.bfnr_estimate) << ", threshold "
      << format_double(dec.threshold) << ")\n";
  out << "wrote " << out_path << '\n';
  return 0;
}

inline int cmd_sim(const std::string& fit_path, std::size_t genes, std::size_t arrays_per_group,
                   std::uint64_t seed, const std::string& prefix, std::ostream& out) {
  const FitFile fit = load_fit_file(fit_path);
  ParametricSim sim;
  if (fit.kind == ModelKind::gaga) {
    sim = simulate_parametric(std::get<GaGaHyper>(fit.hyper), genes, arrays_per_group,
                              fit.patterns, seed);
  } else {
    sim = simulate_parametric(std::get<MiGaGaHyper>(fit.hyper), genes, arrays_per_group,
                              fit.patterns, seed);
  }
  write_expression_tsv(prefix + ".x.tsv", sim.x);
  write_groups_tsv(prefix + ".groups.tsv", sim.x.array_ids, sim.groups, fit.group_labels);
  write_truth_tsv(prefix + ".truth.tsv", sim.x.gene_ids, sim.truth);
  out << "wrote " << prefix << ".x.tsv, " << prefix << ".groups.tsv, " << prefix
      << ".truth.tsv\n";
  return 0;
}

inline int cmd_bootstrap_sim(const std::string& data_path, const std::string& groups_path,
                             const std::string& truth_path, std::uint64_t seed,
                             const std::string& prefix, double offset, std::ostream& out) {
  const CommonData d = load_common(data_path, groups_path, offset);
  const SimTruth truth = load_truth_tsv(truth_path);
  if (truth.delta.size() != d.x.n_genes())
    throw data_error(errc::shape_mismatch, "truth file does not match the gene count");
  std::vector<std::uint8_t> de(truth.delta.size());
  for (std::size_t i = 0; i < de.size(); ++i) de[i] = truth.delta[i] != 0;
  const ExpressionMatrix boot = simulate_bootstrap(d.x, d.groups.assignment, de, seed);
  write_expression_tsv(prefix + ".x.tsv", boot);
  write_groups_tsv(prefix + ".groups.tsv", boot.array_ids, d.groups.assignment,
                   d.groups.labels);
  out << "wrote " << prefix << ".x.tsv, " << prefix << ".groups.tsv\n";
  return 0;
}

inline int cmd_roc(const std::string& results_path, const std::string& truth_path,
                   const std::string& out_path, std::ostream& out) {
  // v0 column from a test results TSV
  auto in = detail::open_input(results_path);
  std::string line;
  if (!std::getline(in, line))
    throw data_error(errc::parse_error, results_path + ": empty file");
  const auto header = detail::split_tabs(detail::chomp(line));
  std::size_t v0_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "v0") v0_col = c;
  }
  if (v0_col == header.size())
    throw data_error(errc::parse_error, results_path + ": no v0 column");
  std::vector<double> v0;
  while (std::getline(in, line)) {
    line = detail::chomp(line);
    if (line.empty()) continue;
    const auto cells = detail::split_tabs(line);
    if (cells.size() <= v0_col)
      throw data_error(errc::parse_error, results_path + ": short row");
    v0.push_back(parse_double(cells[v0_col], results_path));
  }
  const SimTruth truth = load_truth_tsv(truth_path);
  if (truth.delta.size() != v0.size())
    throw data_error(errc::shape_mismatch, "truth and results disagree on the gene count");
  const RocCurve curve = roc_curve(v0, truth);
  auto tsv = detail::open_output(out_path);
  tsv << "# auc\t" << format_double(curve.auc) << "\tfdr_max\t" << format_double(curve.fdr_max)
      << '\n';
  tsv << "n_declared\tfdr\tpower\n";
  for (const auto& p : curve.points)
    tsv << p.n_declared << '\t' << format_double(p.fdr) << '\t' << format_double(p.power)
        << '\n';
  out << "auc " << format_double(curve.auc) << " over achieved FDR range [0, "
      << format_double(curve.fdr_max) << "]; wrote " << out_path << '\n';
  return 0;
}

inline int cmd_gas_check(std::size_t count, std::uint64_t seed, double tol, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const GasCheckReport rep = gas_accuracy_sweep(count, seed, tol);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out << "gas-check over " << rep.count << " parameter sets (seed " << seed << ")\n";
  out << "  max normalized density error: " << format_double(rep.max_density_error) << '\n';
  out << "  max |dlogC|: " << format_double(rep.max_logc_abs_error)
      << "  (relative: " << format_double(rep.max_logc_rel_error) << ")\n";
  out << "  refined: " << rep.n_refined << "/" << rep.count << ", elapsed "
      << format_double(secs) << "s\n";
  return 0;
}

inline int cmd_diag(const std::string& data_path, const std::string& groups_path,
                    const std::string& out_path, const std::string& fit_path,
                    std::size_t samples, std::uint64_t seed, const std::string& out_pred_path,
                    std::ostream& out) {
  bool did_something = false;
  if (!data_path.empty()) {
    const CommonData d = load_common(data_path, groups_path, 0.0);
    const auto diag = gene_mean_cv_diagnostics(d.x, d.groups.assignment);
    auto tsv = detail::open_output(out_path);
    tsv << "gene_id\tmean\tcv\tcv_defined\n";
    for (std::size_t i = 0; i < diag.size(); ++i) {
      tsv << d.x.gene_ids[i] << '\t' << format_double(diag[i].mean) << '\t'
          << (diag[i].cv_defined ? format_double(diag[i].cv) : "NA") << '\t'
          << (diag[i].cv_defined ? 1 : 0) << '\n';
    }
    out << "wrote " << out_path << '\n';
    did_something = true;
  }
  if (!fit_path.empty()) {
    const FitFile fit = load_fit_file(fit_path);
    std::vector<double> draws;
    if (fit.kind == ModelKind::gaga) {
      draws = prior_predictive_sample(std::get<GaGaHyper>(fit.hyper), samples, seed);
    } else {
      draws = prior_predictive_sample(std::get<MiGaGaHyper>(fit.hyper), samples, seed);
    }
    auto tsv = detail::open_output(out_pred_path);
    tsv << "sample\n";
    for (double v : draws) tsv << format_double(v) << '\n';
    out << "wrote " << out_pred_path << '\n';
    did_something = true;
  }
  if (!did_something)
    throw data_error(errc::parse_error, "diag needs --data/--groups/--out or --fit/--out-pred");
  return 0;
}

}  // namespace cli

// Batch front end. Returns 0 on success, 1 on usage errors, 2 on data or
// validation errors, 3 on numeric failures.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"hierarchical gamma models for differential expression analysis"};
  app.require_subcommand(1);

  // fit
  auto* fit = app.add_subcommand("fit", "fit hyperparameters by empirical-Bayes EM");
  std::string data_path, groups_path, patterns_path, out_path, model = "gaga";
  std::size_t components = 2, bic_max = 0;
  double offset = 0.0, prune = 0.0;
  FitConfig cfg;
  fit->add_option("--data", data_path, "expression TSV")->required();
  fit->add_option("--groups", groups_path, "array-to-group TSV")->required();
  fit->add_option("--patterns", patterns_path, "pattern file")->required();
  fit->add_option("--out", out_path, "output fit file")->required();
  fit->add_option("--model", model, "gaga or migaga")
      ->check(CLI::IsMember({"gaga", "migaga"}));
  fit->add_option("--components", components, "mixture components (migaga)");
  fit->add_option("--bic-max", bic_max, "select M in 1..bic-max by BIC (migaga)");
  fit->add_option("--prune", prune, "drop components with rho below this (migaga)");
  fit->add_option("--offset", offset, "constant added to every value before validation");
  fit->add_option("--max-iter", cfg.max_iterations, "EM iteration cap");
  fit->add_option("--tol", cfg.rel_loglik_tol, "relative log-marginal convergence tolerance");
  fit->add_option("--budget", cfg.m_step_budget, "M-step objective evaluations");
  fit->add_option("--seed", cfg.seed, "seed recorded in the fit file");
  fit->add_option("--threads", cfg.threads, "worker threads (results are thread-invariant)");

  // test
  auto* test = app.add_subcommand("test", "posterior pattern probabilities and gene lists");
  std::string fit_path;
  double fdr = 0.05;
  std::size_t fold_draws = 100;
  int threads = 1;
  test->add_option("--fit", fit_path, "fit file from 'fit'")->required();
  test->add_option("--data", data_path, "expression TSV")->required();
  test->add_option("--groups", groups_path, "array-to-group TSV")->required();
  test->add_option("--out", out_path, "per-gene results TSV")->required();
  test->add_option("--fdr", fdr, "BFDR target (default 0.05)");
  test->add_option("--offset", offset, "constant added to every value before validation");
  test->add_option("--fold-draws", fold_draws, "posterior draws per fold-change estimate");
  test->add_option("--threads", threads, "worker threads (results are thread-invariant)");

  // sim
  auto* sim = app.add_subcommand("sim", "parametric simulation from a fitted hierarchy");
  std::size_t genes = 1000, arrays_per_group = 5;
  std::uint64_t seed = 0;
  std::string prefix;
  sim->add_option("--fit", fit_path, "fit file providing the generating hyperparameters")
      ->required();
  sim->add_option("--genes", genes, "genes to simulate")->required();
  sim->add_option("--arrays-per-group", arrays_per_group, "arrays per group")->required();
  sim->add_option("--seed", seed, "simulation seed")->required();
  sim->add_option("--out-prefix", prefix, "output prefix")->required();

  // bootstrap-sim
  auto* boot = app.add_subcommand("bootstrap-sim", "array bootstrap of an existing data set");
  std::string truth_path;
  boot->add_option("--data", data_path, "source expression TSV")->required();
  boot->add_option("--groups", groups_path, "array-to-group TSV")->required();
  boot->add_option("--truth", truth_path, "truth TSV with the per-gene DE status")->required();
  boot->add_option("--seed", seed, "resampling seed")->required();
  boot->add_option("--out-prefix", prefix, "output prefix")->required();
  boot->add_option("--offset", offset, "constant added to every value before validation");

  // roc
  auto* roc = app.add_subcommand("roc", "FDR/power sweep against a known truth");
  std::string results_path;
  roc->add_option("--results", results_path, "results TSV from 'test'")->required();
  roc->add_option("--truth", truth_path, "truth TSV from 'sim'")->required();
  roc->add_option("--out", out_path, "ROC points TSV")->required();

  // gas-check (debug)
  auto* check = app.add_subcommand("gas-check", "approximation-vs-oracle accuracy report");
  check->group("");  // hidden
  std::size_t check_count = 200;
  std::uint64_t check_seed = 1;
  double check_tol = 1e-9;
  check->add_option("--count", check_count, "parameter sets to sweep");
  check->add_option("--seed", check_seed, "sweep seed");
  check->add_option("--tol", check_tol, "oracle tolerance");

  // diag
  auto* diag = app.add_subcommand("diag", "mean/CV table and prior-predictive samples");
  std::size_t samples = 10000;
  std::string out_pred_path;
  diag->add_option("--data", data_path, "expression TSV");
  diag->add_option("--groups", groups_path, "array-to-group TSV");
  diag->add_option("--out", out_path, "mean/CV TSV");
  diag->add_option("--fit", fit_path, "fit file for prior-predictive draws");
  diag->add_option("--samples", samples, "prior-predictive draw count");
  diag->add_option("--seed", seed, "sampling seed");
  diag->add_option("--out-pred", out_pred_path, "prior-predictive samples TSV");

  std::vector<const char*> argv;
  argv.push_back("gaga");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return 1;
  }

  try {
    if (fit->parsed()) {
      if (model == "gaga" && (bic_max > 0 || prune > 0.0))
        throw data_error(errc::parse_error, "--bic-max/--prune apply to --model migaga");
      return cli::cmd_fit(data_path, groups_path, patterns_path, model, components, bic_max,
                          prune, out_path, offset, cfg, out, err);
    }
    if (test->parsed())
      return cli::cmd_test(fit_path, data_path, groups_path, out_path, fdr, offset, fold_draws,
                           threads, out, err);
    if (sim->parsed()) return cli::cmd_sim(fit_path, genes, arrays_per_group, seed, prefix, out);
    if (boot->parsed())
      return cli::cmd_bootstrap_sim(data_path, groups_path, truth_path, seed, prefix, offset,
                                    out);
    if (roc->parsed()) return cli::cmd_roc(results_path, truth_path, out_path, out);
    if (check->parsed()) return cli::cmd_gas_check(check_count, check_seed, check_tol, out);
    if (diag->parsed())
      return cli::cmd_diag(data_path, groups_path, out_path, fit_path, samples, seed,
                           out_pred_path, out);
    err << "no subcommand given\n";
    return 1;
  } catch (const data_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const numeric_error& e) {
    err << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace gaga
