#pragma once

// Report emitters. CSV uses 17 significant digits so every double round-trips;
// the table view uses 4 decimals. Column order follows rho_T, rho_P, Omega,
// delta, gamma, B, |dR|.

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/bound.hpp"
#include "prism/geometry.hpp"
#include "prism/oracle.hpp"
#include "prism/regularizer.hpp"

namespace prism::report {

enum class Format { kTable, kCsv, kJson };

inline Format parse_format(const std::string& s) {
  if (s == "table") return Format::kTable;
  if (s == "csv") return Format::kCsv;
  if (s == "json") return Format::kJson;
  prism::detail::fail(ErrorCode::kInvalidArgument, "unknown format '" + s + "'");
}

inline std::string num17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string fixed4(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

/// Row of a bound or decomposition report, with its manifest context.
struct Row {
  std::string variant_id;
  std::string family;
  std::string method;
  std::optional<bound::BoundReport> report;
  /// Empty on success; otherwise the failure message and the row is marked failed.
  std::string error;
  std::optional<double> empirical_gap;
};

// ---------------------------------------------------------------------------
// Decomposition

inline const char* kDecompositionCsvHeader = "variant_id,rho_t,rho_p,omega,scale_term,shape_term,residual,alignment";

inline void write_decomposition_csv(std::ostream& out, const std::vector<Row>& rows) {
  out << kDecompositionCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.variant_id;
    if (!r.report) {
      out << ",,,,,,,failed\n";
      continue;
    }
    const auto& d = r.report->decomposition;
    out << ',' << num17(d.rho_t) << ',' << num17(d.rho_p) << ',' << num17(d.omega) << ',' << num17(d.scale_term)
        << ',' << num17(d.shape_term) << ',' << num17(d.residual) << ',' << to_string(d.alignment) << '\n';
  }
}

inline void write_decomposition_table(std::ostream& out, const std::vector<Row>& rows) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %12s %12s %8s %14s %14s %14s  %s\n", "variant", "rho_T", "rho_P", "Omega",
                "scale", "shape", "residual", "alignment");
  out << buf;
  for (const auto& r : rows) {
    if (!r.report) {
      std::snprintf(buf, sizeof buf, "%-16s failed: %s\n", r.variant_id.c_str(), r.error.c_str());
      out << buf;
      continue;
    }
    const auto& d = r.report->decomposition;
    std::snprintf(buf, sizeof buf, "%-16s %12s %12s %8s %14s %14s %14s  %s\n", r.variant_id.c_str(),
                  fixed4(d.rho_t).c_str(), fixed4(d.rho_p).c_str(), fixed4(d.omega).c_str(),
                  fixed4(d.scale_term).c_str(), fixed4(d.shape_term).c_str(), fixed4(d.residual).c_str(),
                  to_string(d.alignment).c_str());
    out << buf;
  }
}

inline nlohmann::json decomposition_json(const geometry::ScaleShapeDecomposition& d) {
  return {{"rho_t", d.rho_t},           {"rho_p", d.rho_p},           {"omega", d.omega},
          {"scale_term", d.scale_term}, {"shape_term", d.shape_term}, {"residual", d.residual},
          {"alignment", to_string(d.alignment)}};
}

// ---------------------------------------------------------------------------
// Bound

inline const char* kBoundCsvHeader =
    "variant_id,family,method,rho_t,rho_p,omega,delta,gamma,bound,empirical_gap,scale_term,shape_term,residual,"
    "k_feat,k_feat_mode,alignment,head,status";

inline void write_bound_csv(std::ostream& out, const std::vector<Row>& rows) {
  out << kBoundCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.variant_id << ',' << r.family << ',' << r.method << ',';
    if (!r.report) {
      out << ",,,,,,," << (r.empirical_gap ? num17(*r.empirical_gap) : "") << ",,,,,,,,failed\n";
      continue;
    }
    const auto& b = *r.report;
    const auto& d = b.decomposition;
    out << num17(d.rho_t) << ',' << num17(d.rho_p) << ',' << num17(d.omega) << ',' << num17(b.delta) << ','
        << num17(b.gamma) << ',' << num17(b.bound) << ',' << (b.empirical_gap ? num17(*b.empirical_gap) : "") << ','
        << num17(d.scale_term) << ',' << num17(d.shape_term) << ',' << num17(d.residual) << ',' << num17(b.k_feat)
        << ',' << to_string(b.k_feat_mode) << ',' << to_string(b.alignment) << ','
        << (b.frozen_head ? "frozen-head" : "head") << ",ok\n";
  }
}

inline void write_bound_table(std::ostream& out, const std::vector<Row>& rows) {
  char buf[320];
  std::snprintf(buf, sizeof buf, "%-16s %-10s %-14s %10s %10s %8s %12s %12s %12s %10s\n", "variant", "family",
                "method", "rho_T", "rho_P", "Omega", "delta", "gamma", "B", "|dR|");
  out << buf;
  for (const auto& r : rows) {
    if (!r.report) {
      std::snprintf(buf, sizeof buf, "%-16s failed: %s\n", r.variant_id.c_str(), r.error.c_str());
      out << buf;
      continue;
    }
    const auto& b = *r.report;
    const auto& d = b.decomposition;
    const std::string gamma = b.frozen_head ? "0 (frozen)" : fixed4(b.gamma);
    std::snprintf(buf, sizeof buf, "%-16s %-10s %-14s %10s %10s %8s %12s %12s %12s %10s\n", r.variant_id.c_str(),
                  r.family.c_str(), r.method.c_str(), fixed4(d.rho_t).c_str(), fixed4(d.rho_p).c_str(),
                  fixed4(d.omega).c_str(), fixed4(b.delta).c_str(), gamma.c_str(), fixed4(b.bound).c_str(),
                  b.empirical_gap ? fixed4(*b.empirical_gap).c_str() : "-");
    out << buf;
  }
}

inline nlohmann::json bound_json(const bound::BoundReport& b) {
  nlohmann::json j{{"variant_id", b.variant_id},
                   {"k_feat", b.k_feat},
                   {"k_feat_mode", to_string(b.k_feat_mode)},
                   {"k_pred", b.k_pred},
                   {"decomposition", decomposition_json(b.decomposition)},
                   {"delta", b.delta},
                   {"gamma", b.gamma},
                   {"bound", b.bound},
                   {"alignment", to_string(b.alignment)},
                   {"frozen_head", b.frozen_head}};
  j["empirical_gap"] = b.empirical_gap ? nlohmann::json(*b.empirical_gap) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json rows_json(const std::vector<Row>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j = r.report ? bound_json(*r.report) : nlohmann::json{{"variant_id", r.variant_id}};
    j["family"] = r.family;
    j["method"] = r.method;
    j["status"] = r.report ? "ok" : "failed";
    if (!r.error.empty()) j["error"] = r.error;
    arr.push_back(std::move(j));
  }
  return arr;
}

// ---------------------------------------------------------------------------
// Verification sweeps and the drift demo

inline const char* kVerificationCsvHeader =
    "seed,kind,magnitude,n,d,V,alignment,risk_t,risk_p,gap,scale_term,shape_term,delta,gamma,bound,holds,slack_ratio";

inline void write_verification_csv(std::ostream& out, const std::vector<oracle::VerificationRecord>& records) {
  out << kVerificationCsvHeader << '\n';
  for (const auto& r : records) {
    const auto& b = r.report;
    out << r.seed << ',' << oracle::to_string(r.perturbation) << ',' << num17(r.magnitude) << ',' << r.n << ','
        << r.d << ',' << r.v << ',' << to_string(b.alignment) << ',' << num17(r.risk_t) << ',' << num17(r.risk_p)
        << ',' << num17(r.gap) << ',' << num17(b.decomposition.scale_term) << ','
        << num17(b.decomposition.shape_term) << ',' << num17(b.delta) << ',' << num17(b.gamma) << ','
        << num17(r.bound) << ',' << (r.holds ? "true" : "false") << ',' << num17(r.slack_ratio) << '\n';
  }
}

inline void write_demo_csv(std::ostream& out, const regularizer::DemoResult& res) {
  out << "step,omega,task_loss,downstream_gap\n";
  for (std::size_t i = 0; i < res.omega_trajectory.size(); ++i) {
    out << i << ',' << num17(res.omega_trajectory[i]) << ',' << num17(res.task_loss_trajectory[i]) << ','
        << num17(res.downstream_gap_trajectory[i]) << '\n';
  }
}

}  // namespace prism::report
