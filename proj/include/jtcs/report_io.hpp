#pragma once

// Report serialization. CSV schema:
//   metric,value,std_err,bound,bound_name,N,M,K,alpha,beta,sigma2,eps,trials,seed
// one row per metric, config echo rows first. Floating values are rendered
// with 17 significant digits so parsing them back reproduces the exact
// doubles. JSON mirrors the same fields as one object per row plus an
// explicit config object. Files are written to a temporary path and
// renamed, so readers never observe a partial report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "jtcs/montecarlo.hpp"

namespace jtcs {

enum class OutputFormat { Csv, Json };

inline OutputFormat format_from_path(const std::string& path) {
  const auto dot = path.rfind('.');
  if (dot != std::string::npos && path.substr(dot) == ".json") return OutputFormat::Json;
  return OutputFormat::Csv;
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

struct ResolvedRowContext {
  std::optional<int> n, m, k;
  std::optional<double> alpha, beta;
};

inline ResolvedRowContext resolve_row(const ReportContext& ctx, const MetricRow& row) {
  ResolvedRowContext r;
  r.n = row.n_override ? row.n_override : ctx.N;
  r.m = row.m_override ? row.m_override : ctx.M;
  r.k = row.k_override ? row.k_override : ctx.K;
  if (r.n && r.k && *r.n > 0) r.alpha = static_cast<double>(*r.k) / static_cast<double>(*r.n);
  if (r.m && r.k && *r.k > 0) r.beta = static_cast<double>(*r.m) / static_cast<double>(*r.k);
  return r;
}

inline void append_csv_row(std::string& out, const ReportContext& ctx, const MetricRow& row) {
  const ResolvedRowContext rc = resolve_row(ctx, row);
  out += row.metric;
  out += ',';
  out += fmt17(row.value);
  out += ',';
  if (row.std_err) out += fmt17(*row.std_err);
  out += ',';
  if (row.bound) out += fmt17(*row.bound);
  out += ',';
  out += row.bound_name;
  out += ',';
  if (rc.n) out += std::to_string(*rc.n);
  out += ',';
  if (rc.m) out += std::to_string(*rc.m);
  out += ',';
  if (rc.k) out += std::to_string(*rc.k);
  out += ',';
  if (rc.alpha) out += fmt17(*rc.alpha);
  out += ',';
  if (rc.beta) out += fmt17(*rc.beta);
  out += ',';
  if (ctx.sigma2) out += fmt17(*ctx.sigma2);
  out += ',';
  if (row.eps) out += fmt17(*row.eps);
  out += ',';
  out += std::to_string(ctx.trials);
  out += ',';
  out += std::to_string(ctx.seed);
  out += '\n';
}

}  // namespace detail

inline std::string render_csv(const ExperimentReport& report) {
  std::string out = "metric,value,std_err,bound,bound_name,N,M,K,alpha,beta,sigma2,eps,trials,seed\n";
  for (const auto& [name, value] : report.config_rows) {
    MetricRow row;
    row.metric = name;
    row.value = value;
    detail::append_csv_row(out, report.ctx, row);
  }
  for (const auto& row : report.rows) detail::append_csv_row(out, report.ctx, row);
  return out;
}

inline std::string render_json(const ExperimentReport& report) {
  nlohmann::json config;
  if (report.ctx.N) config["N"] = *report.ctx.N;
  if (report.ctx.M) config["M"] = *report.ctx.M;
  if (report.ctx.K) config["K"] = *report.ctx.K;
  if (report.ctx.sigma2) config["sigma2"] = *report.ctx.sigma2;
  if (report.ctx.alpha) config["alpha"] = *report.ctx.alpha;
  if (report.ctx.beta) config["beta"] = *report.ctx.beta;
  config["trials"] = report.ctx.trials;
  config["seed"] = report.ctx.seed;
  for (const auto& [name, value] : report.config_rows) config[name] = value;

  nlohmann::json rows = nlohmann::json::array();
  auto null_or = [](std::optional<double> v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  for (const auto& row : report.rows) {
    const detail::ResolvedRowContext rc = detail::resolve_row(report.ctx, row);
    nlohmann::json j;
    j["metric"] = row.metric;
    j["value"] = row.value;
    j["std_err"] = null_or(row.std_err);
    j["bound"] = null_or(row.bound);
    j["bound_name"] = row.bound_name;
    j["N"] = rc.n ? nlohmann::json(*rc.n) : nlohmann::json(nullptr);
    j["M"] = rc.m ? nlohmann::json(*rc.m) : nlohmann::json(nullptr);
    j["K"] = rc.k ? nlohmann::json(*rc.k) : nlohmann::json(nullptr);
    j["alpha"] = null_or(rc.alpha);
    j["beta"] = null_or(rc.beta);
    j["sigma2"] = null_or(report.ctx.sigma2);
    j["eps"] = null_or(row.eps);
    j["trials"] = report.ctx.trials;
    j["seed"] = report.ctx.seed;
    rows.push_back(std::move(j));
  }
  nlohmann::json root;
  root["config"] = std::move(config);
  root["rows"] = std::move(rows);
  return root.dump(2) + "\n";
}

// Atomic write: the report lands under a temporary name in the target
// directory, then a rename makes it visible.
inline void write_report(const ExperimentReport& report, OutputFormat format,
                         const std::string& path) {
  const std::string body =
      format == OutputFormat::Csv ? render_csv(report) : render_json(report);
  const std::filesystem::path target(path);
  const std::filesystem::path temp = target.string() + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output path for writing: " + path);
    out << body;
    out.flush();
    if (!out) throw std::runtime_error("failed while writing output file: " + path);
  }
  std::error_code ec;
  std::filesystem::rename(temp, target, ec);
  if (ec) {
    std::filesystem::remove(temp);
    throw std::runtime_error("cannot move report into place at " + path + ": " + ec.message());
  }
}

}  // namespace jtcs
