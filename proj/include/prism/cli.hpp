#pragma once

// Command-line front end. Exit codes: 0 success, 1 property or certification
// failure, 2 usage or I/O error. Reports go to `out`, diagnostics to `err`.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prism/bound.hpp"
#include "prism/error.hpp"
#include "prism/geometry.hpp"
#include "prism/matio.hpp"
#include "prism/oracle.hpp"
#include "prism/regularizer.hpp"
#include "prism/report.hpp"

namespace prism::cli {

enum ExitCode : int { kOk = 0, kPropertyFailure = 1, kUsage = 2 };

namespace detail {

namespace fs = std::filesystem;

struct PairSource {
  std::string variant_id, family, method;
  fs::path features;
  std::optional<fs::path> head;
  std::optional<double> empirical_gap;
};

inline void emit_rows(std::ostream& out, const std::vector<report::Row>& rows, report::Format fmt, bool bound_view) {
  switch (fmt) {
    case report::Format::kCsv:
      bound_view ? report::write_bound_csv(out, rows) : report::write_decomposition_csv(out, rows);
      break;
    case report::Format::kTable:
      bound_view ? report::write_bound_table(out, rows) : report::write_decomposition_table(out, rows);
      break;
    case report::Format::kJson:
      out << report::rows_json(rows).dump(2) << '\n';
      break;
  }
}

struct DecomposeArgs {
  std::string target, proxy, manifest;
  std::string alignment = "identity";
  std::string format = "table";
  bool skip_bad = false;
};

inline int cmd_decompose(const DecomposeArgs& a, std::ostream& out, std::ostream& err) {
  const auto fmt = report::parse_format(a.format);
  const auto kind = parse_alignment(a.alignment);
  fs::path target_path;
  std::vector<PairSource> sources;
  if (!a.manifest.empty()) {
    const auto m = matio::read_manifest(a.manifest);
    target_path = m.target_feature_path;
    for (const auto& v : m.variants) sources.push_back({v.variant_id, v.family, v.method, v.feature_path, {}, {}});
  } else {
    if (a.target.empty() || a.proxy.empty()) {
      err << "decompose: give --target and --proxy, or --manifest\n";
      return kUsage;
    }
    target_path = a.target;
    sources.push_back({fs::path(a.proxy).stem().string(), "", "", a.proxy, {}, {}});
  }
  const Matrix zt = matio::read_matrix(target_path);

  std::vector<report::Row> rows;
  bool any_failed = false;
  for (const auto& s : sources) {
    report::Row row{s.variant_id, s.family, s.method, {}, {}, {}};
    try {
      const Matrix zp = matio::read_matrix(s.features);
      bound::BoundReport r;
      r.decomposition = geometry::decompose(zt, zp, bound::resolve_alignment(zt, zp, kind));
      r.alignment = kind;
      r.variant_id = s.variant_id;
      row.report = r;
    } catch (const Error& e) {
      if (!a.skip_bad) throw;
      err << "decompose: variant '" << s.variant_id << "' failed: " << e.what() << '\n';
      row.error = e.what();
      any_failed = true;
    }
    rows.push_back(std::move(row));
  }
  emit_rows(out, rows, fmt, false);
  return any_failed ? kPropertyFailure : kOk;
}

struct BoundArgs {
  std::string manifest;
  std::string alignment = "identity";
  std::string k_feat_mode = "exact";
  std::string gamma_path = "matmul";
  std::string format = "table";
  bool skip_bad = false;
};

inline int cmd_bound(const BoundArgs& a, std::ostream& out, std::ostream& err) {
  const auto fmt = report::parse_format(a.format);
  const auto kind = parse_alignment(a.alignment);
  const auto m = matio::read_manifest(a.manifest);
  if (!m.target_head_path) {
    err << "bound: manifest has no target_head_path; K_feat needs the target head\n";
    return kUsage;
  }
  const Matrix zt = matio::read_matrix(m.target_feature_path);
  const Matrix ht = matio::read_matrix(*m.target_head_path);

  bound::BoundOptions opts;
  opts.k_feat_mode = parse_kfeat_mode(a.k_feat_mode);
  opts.gamma_path = a.gamma_path == "eigen" ? headterm::GammaPath::kEigen : headterm::GammaPath::kMatmul;
  opts.k_feat = bound::resolve_kfeat(ht, opts);

  std::vector<report::Row> rows;
  bool any_failed = false;
  for (const auto& v : m.variants) {
    report::Row row{v.variant_id, v.family, v.method, {}, {}, v.empirical_gap};
    try {
      const Matrix zp = matio::read_matrix(v.feature_path);
      const auto w = bound::resolve_alignment(zt, zp, kind);
      bound::BoundReport r;
      if (v.head_path) {
        r = bound::prism_bound(zt, zp, ht, matio::read_matrix(*v.head_path), w, opts);
      } else {
        r = bound::frozen_head_bound(zt, zp, *opts.k_feat, w, opts.k_feat_mode);
      }
      r.variant_id = v.variant_id;
      r.empirical_gap = v.empirical_gap;
      row.report = r;
    } catch (const Error& e) {
      if (!a.skip_bad) throw;
      err << "bound: variant '" << v.variant_id << "' failed: " << e.what() << '\n';
      row.error = e.what();
      any_failed = true;
    }
    rows.push_back(std::move(row));
  }
  emit_rows(out, rows, fmt, true);
  return any_failed ? kPropertyFailure : kOk;
}

struct VerifyArgs {
  std::uint64_t seed = 0;
  std::size_t trials = 200;
  Eigen::Index n = 64, d = 16, v = 32;
  bool random_sizes = false;
  std::vector<std::string> kinds;
  std::vector<double> magnitudes;
  std::string alignment = "both";
  std::string k_feat_mode = "exact";
  std::string csv;
};

inline int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
  if (a.trials == 0) {
    err << "verify: --trials must be >= 1\n";
    return kUsage;
  }
  oracle::SweepConfig cfg;
  cfg.seed = a.seed;
  cfg.trials = a.trials;
  cfg.n = a.n;
  cfg.d = a.d;
  cfg.v = a.v;
  cfg.randomize_sizes = a.random_sizes;
  cfg.k_feat_mode = parse_kfeat_mode(a.k_feat_mode);
  if (!a.kinds.empty()) {
    cfg.kinds.clear();
    for (const auto& k : a.kinds) cfg.kinds.push_back(oracle::parse_perturbation(k));
  }
  if (!a.magnitudes.empty()) cfg.magnitudes = a.magnitudes;
  if (a.alignment != "both") cfg.alignments = {parse_alignment(a.alignment)};

  const auto summary = oracle::run_sweep(cfg);
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!f) {
      err << "verify: cannot write '" << a.csv << "'\n";
      return kUsage;
    }
    report::write_verification_csv(f, summary.records);
  }
  out << "records: " << summary.records.size() << '\n'
      << "violations: " << summary.violations << '\n'
      << "max_slack_ratio: " << report::num17(summary.max_slack_ratio) << '\n';
  return summary.violations == 0 ? kOk : kPropertyFailure;
}

struct RankArgs {
  std::uint64_t seed = 0;
  std::vector<double> grid;
  Eigen::Index n = oracle::kRankSamples, d = oracle::kRankDim, v = oracle::kRankVocab;
  std::string alignment = "identity";
  double min_r_s = 0.9;
};

inline int cmd_rank(const RankArgs& a, std::ostream& out, std::ostream&) {
  const std::vector<double> grid = a.grid.empty() ? oracle::default_rank_grid() : a.grid;
  const auto summary = oracle::rank_experiment(a.seed, grid, a.n, a.d, a.v, parse_alignment(a.alignment));
  bool ok = true;
  out << "kind,r_s\n";
  for (const auto& axis : summary.axes) {
    out << oracle::to_string(axis.kind) << ',' << report::num17(axis.r_s) << '\n';
    ok = ok && axis.r_s >= a.min_r_s;
  }
  out << "mean," << report::num17(summary.mean_r_s) << '\n';
  return ok ? kOk : kPropertyFailure;
}

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::size_t instances = 50;
  std::size_t coords = 20;
  Eigen::Index n = 6, d = 4;
  double tolerance = 1e-5;
};

inline int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
  if (a.instances == 0 || a.coords == 0 || a.n < 1 || a.d < 1) {
    err << "gradcheck: instances, coords, n and d must be >= 1\n";
    return kUsage;
  }
  double worst = 0.0, ray = 0.0;
  for (std::size_t i = 0; i < a.instances; ++i) {
    auto g = rng::Xoshiro256::stream(a.seed + i, 11);
    const Matrix z0 = rng::normal_matrix(g, a.n, a.d);
    const Matrix zt = rng::normal_matrix(g, a.n, a.d);
    worst = std::max(worst, regularizer::finite_difference_check(z0, zt, a.coords, a.seed + i).max_rel_error);
    ray = std::max(ray, regularizer::shape_penalty_grad(z0, 3.0 * z0).grad.cwiseAbs().maxCoeff());
  }
  out << "instances: " << a.instances << '\n'
      << "coordinates: " << a.instances * a.coords << '\n'
      << "max_rel_error: " << report::num17(worst) << '\n'
      << "ray_grad_max_abs: " << report::num17(ray) << '\n';
  return worst <= a.tolerance && ray <= 1e-12 ? kOk : kPropertyFailure;
}

struct DemoArgs {
  std::uint64_t seed = 1;
  std::vector<double> lambdas;
  std::size_t steps = 200;
  double lr = 0.5;
  std::string out_dir;
};

inline std::string lambda_tag(double lambda) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", lambda);
  return buf;
}

inline int cmd_demo(const DemoArgs& a, std::ostream& out, std::ostream& err) {
  if (a.steps == 0) {
    err << "demo: --steps must be >= 1\n";
    return kUsage;
  }
  std::vector<double> lambdas = a.lambdas.empty() ? regularizer::default_lambda_grid() : a.lambdas;
  std::sort(lambdas.begin(), lambdas.end());
  if (!a.out_dir.empty()) fs::create_directories(a.out_dir);

  out << "lambda,steps,final_omega,final_task_loss,final_downstream_gap,diverged\n";
  bool monotone = true;
  double prev_omega = -2.0;
  for (double lambda : lambdas) {
    const auto res = regularizer::drift_demo(a.seed, lambda, a.steps, a.lr);
    if (!a.out_dir.empty()) {
      const fs::path path = fs::path(a.out_dir) / ("demo_lambda_" + lambda_tag(lambda) + ".csv");
      std::ofstream f(path);
      if (!f) {
        err << "demo: cannot write '" << path.string() << "'\n";
        return kUsage;
      }
      report::write_demo_csv(f, res);
    }
    const double omega = res.omega_trajectory.back();
    out << report::num17(lambda) << ',' << res.steps << ',' << report::num17(omega) << ','
        << report::num17(res.task_loss_trajectory.back()) << ','
        << report::num17(res.downstream_gap_trajectory.back()) << ',' << (res.diverged ? "true" : "false") << '\n';
    monotone = monotone && !res.diverged && omega >= prev_omega;
    prev_omega = omega;
  }
  return monotone ? kOk : kPropertyFailure;
}

struct SynthArgs {
  std::uint64_t seed = 0;
  Eigen::Index n = 64, d = 16, v = 32;
  std::string kind = "gaussian_noise";
  std::vector<double> magnitudes{0.1, 0.5, 1.0};
  std::string out_dir;
};

/// Writes a target and one proxy per magnitude plus a manifest, for trying
/// the other subcommands without real model dumps.
inline int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream&) {
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  const auto kind = oracle::parse_perturbation(a.kind);
  const auto base = oracle::gen_instance(a.seed, a.n, a.d, a.v, kind, 0.0);
  matio::write_matrix(base.z_t, dir / "target_features.prsm");
  matio::write_matrix(base.h_t, dir / "target_head.prsm");
  Matrix labels(a.n, 1);
  for (Eigen::Index i = 0; i < a.n; ++i) labels(i, 0) = static_cast<double>(base.labels[static_cast<std::size_t>(i)]);
  matio::write_matrix(labels, dir / "labels.prsm");

  nlohmann::json manifest{{"target_id", "synthetic-seed" + std::to_string(a.seed)},
                          {"benchmark_id", "synthetic"},
                          {"target_feature_path", "target_features.prsm"},
                          {"target_head_path", "target_head.prsm"},
                          {"variants", nlohmann::json::array()}};
  for (std::size_t i = 0; i < a.magnitudes.size(); ++i) {
    const auto inst = oracle::gen_instance(a.seed, a.n, a.d, a.v, kind, a.magnitudes[i]);
    const std::string id = "m" + std::to_string(i);
    matio::write_matrix(inst.z_p, dir / (id + "_features.prsm"));
    nlohmann::json entry{{"variant_id", id},
                         {"family", "synthetic"},
                         {"method", a.kind + "@" + lambda_tag(a.magnitudes[i])},
                         {"feature_path", id + "_features.prsm"}};
    if (kind == oracle::Perturbation::kHeadNoise || kind == oracle::Perturbation::kCombined) {
      matio::write_matrix(inst.h_p, dir / (id + "_head.prsm"));
      entry["head_path"] = id + "_head.prsm";
    }
    const double gap = std::abs(oracle::empirical_risk(inst.z_t, inst.h_t, inst.labels) -
                                oracle::empirical_risk(inst.z_p, inst.h_p, inst.labels));
    entry["empirical_gap"] = gap;
    manifest["variants"].push_back(std::move(entry));
  }
  std::ofstream f(dir / "manifest.json");
  f << manifest.dump(2) << '\n';
  out << "wrote " << a.magnitudes.size() << " variants to " << dir.string() << '\n';
  return kOk;
}

}  // namespace detail

/// Entry point shared by the binary and the tests. `args` excludes argv[0].
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"prism: scale/shape/head risk-gap diagnostics for model variants", "prism"};
  app.require_subcommand(1);

  detail::DecomposeArgs dec;
  auto* sc_dec = app.add_subcommand("decompose", "Scale/shape decomposition of proxy features against a target");
  sc_dec->add_option("--target", dec.target, "Target feature MatrixFile");
  sc_dec->add_option("--proxy", dec.proxy, "Proxy feature MatrixFile");
  sc_dec->add_option("--manifest", dec.manifest, "Variant manifest (one row per variant)");
  sc_dec->add_option("--alignment", dec.alignment, "identity | procrustes")->capture_default_str();
  sc_dec->add_option("--format", dec.format, "table | csv | json")->capture_default_str();
  sc_dec->add_flag("--skip-bad", dec.skip_bad, "Mark unreadable variants failed instead of aborting");

  detail::BoundArgs bnd;
  auto* sc_bnd = app.add_subcommand("bound", "Per-variant bound reports from a manifest");
  sc_bnd->add_option("--manifest", bnd.manifest, "Variant manifest")->required();
  sc_bnd->add_option("--alignment", bnd.alignment, "identity | procrustes")->capture_default_str();
  sc_bnd->add_option("--k-feat-mode", bnd.k_feat_mode, "exact | spectral")->capture_default_str();
  sc_bnd->add_option("--gamma-path", bnd.gamma_path, "matmul | eigen")->capture_default_str();
  sc_bnd->add_option("--format", bnd.format, "table | csv | json")->capture_default_str();
  sc_bnd->add_flag("--skip-bad", bnd.skip_bad, "Mark unreadable variants failed (exit 1) instead of aborting");

  detail::VerifyArgs ver;
  auto* sc_ver = app.add_subcommand("verify", "Brute-force bound certification on synthetic instances");
  sc_ver->add_option("--seed", ver.seed)->capture_default_str();
  sc_ver->add_option("--trials", ver.trials)->capture_default_str();
  sc_ver->add_option("--n", ver.n)->capture_default_str();
  sc_ver->add_option("--d", ver.d)->capture_default_str();
  sc_ver->add_option("--V", ver.v)->capture_default_str();
  sc_ver->add_flag("--random-sizes", ver.random_sizes, "Draw n, d, V per trial from [1, n] x [1, d] x [1, V]");
  sc_ver->add_option("--kinds", ver.kinds, "Perturbation kinds (default: all five)");
  sc_ver->add_option("--magnitudes", ver.magnitudes, "Magnitude grid (default: 0.1 0.25 0.5 0.75 1)");
  sc_ver->add_option("--alignment", ver.alignment, "both | identity | procrustes")->capture_default_str();
  sc_ver->add_option("--k-feat-mode", ver.k_feat_mode, "exact | spectral")->capture_default_str();
  sc_ver->add_option("--csv", ver.csv, "Write one verification record per row to this file");

  detail::RankArgs rnk;
  auto* sc_rnk = app.add_subcommand("rank", "Spearman correlation of bound vs gap along each perturbation axis");
  sc_rnk->add_option("--seed", rnk.seed)->capture_default_str();
  sc_rnk->add_option("--grid", rnk.grid, "Magnitude grid (>= 3 distinct values)");
  sc_rnk->add_option("--n", rnk.n)->capture_default_str();
  sc_rnk->add_option("--d", rnk.d)->capture_default_str();
  sc_rnk->add_option("--V", rnk.v)->capture_default_str();
  sc_rnk->add_option("--alignment", rnk.alignment, "identity | procrustes")->capture_default_str();
  sc_rnk->add_option("--min-rs", rnk.min_r_s, "Per-axis r_s required for exit 0")->capture_default_str();

  detail::GradcheckArgs grd;
  auto* sc_grd = app.add_subcommand("gradcheck", "Finite-difference check of the shape-penalty gradient");
  sc_grd->add_option("--seed", grd.seed)->capture_default_str();
  sc_grd->add_option("--instances", grd.instances)->capture_default_str();
  sc_grd->add_option("--coords", grd.coords)->capture_default_str();
  sc_grd->add_option("--n", grd.n)->capture_default_str();
  sc_grd->add_option("--d", grd.d)->capture_default_str();
  sc_grd->add_option("--tolerance", grd.tolerance)->capture_default_str();

  detail::DemoArgs dmo;
  auto* sc_dmo = app.add_subcommand("demo", "Shape-regularized drift demo over a lambda grid");
  sc_dmo->add_option("--seed", dmo.seed)->capture_default_str();
  sc_dmo->add_option("--lambda", dmo.lambdas, "Lambda grid (default: 0 0.01 0.05 0.1 0.5 1)");
  sc_dmo->add_option("--steps", dmo.steps)->capture_default_str();
  sc_dmo->add_option("--lr", dmo.lr)->capture_default_str();
  sc_dmo->add_option("--out-dir", dmo.out_dir, "Directory for one trajectory CSV per lambda");

  detail::SynthArgs syn;
  auto* sc_syn = app.add_subcommand("synth", "Write a synthetic target/proxy family and manifest");
  sc_syn->add_option("--seed", syn.seed)->capture_default_str();
  sc_syn->add_option("--n", syn.n)->capture_default_str();
  sc_syn->add_option("--d", syn.d)->capture_default_str();
  sc_syn->add_option("--V", syn.v)->capture_default_str();
  sc_syn->add_option("--kind", syn.kind)->capture_default_str();
  sc_syn->add_option("--magnitudes", syn.magnitudes);
  sc_syn->add_option("--out-dir", syn.out_dir)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kOk;
    }
    err << "prism: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (sc_dec->parsed()) return detail::cmd_decompose(dec, out, err);
    if (sc_bnd->parsed()) return detail::cmd_bound(bnd, out, err);
    if (sc_ver->parsed()) return detail::cmd_verify(ver, out, err);
    if (sc_rnk->parsed()) return detail::cmd_rank(rnk, out, err);
    if (sc_grd->parsed()) return detail::cmd_gradcheck(grd, out, err);
    if (sc_dmo->parsed()) return detail::cmd_demo(dmo, out, err);
    if (sc_syn->parsed()) return detail::cmd_synth(syn, out, err);
  } catch (const Error& e) {
    err << "prism: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "prism: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace prism::cli
