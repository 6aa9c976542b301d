#pragma once

// Command-line front end. Subcommands: miss-prob, false-alarm, mse,
// concentration, bounds. Flags may also come from a flat key=value config
// file via --config; explicit flags override file values. Reports are
// written atomically as CSV or JSON; identical invocations produce
// byte-identical files.

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "jtcs/montecarlo.hpp"
#include "jtcs/report_io.hpp"

namespace jtcs::cli {

namespace detail {

struct OutputFlags {
  std::string out;
  std::string format;  // "", "csv", "json"

  OutputFormat resolve() const {
    if (format == "csv") return OutputFormat::Csv;
    if (format == "json") return OutputFormat::Json;
    return format_from_path(out);
  }
};

inline void add_output_flags(CLI::App* sub, OutputFlags& flags) {
  sub->add_option("--out", flags.out, "output file path")->required();
  sub->add_option("--format", flags.format, "output format (default: by extension)")
      ->check(CLI::IsMember({"csv", "json"}));
  // Consumed before CLI11 sees the argument list; registered here so the
  // help text documents it.
  static std::string config_doc_sink;
  sub->add_option("--config", config_doc_sink,
                  "flat key=value config file; explicit flags override it");
}

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// Merges a flat key=value config file into the argument list. Keys become
// long options; a key is skipped when the matching flag was given
// explicitly, so command-line flags always win.
inline std::vector<std::string> apply_config_file(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size();) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
  if (path.empty()) return args;

  std::ifstream file(path);
  if (!file) throw std::runtime_error("cannot read config file: " + path);

  std::vector<std::string> explicit_flags;
  for (const auto& arg : args) {
    if (arg.rfind("--", 0) == 0) explicit_flags.push_back(arg.substr(0, arg.find('=')));
  }

  std::string line;
  while (std::getline(file, line)) {
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config file line is not key=value: " + stripped);
    const std::string key = "--" + trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (std::find(explicit_flags.begin(), explicit_flags.end(), key) != explicit_flags.end())
      continue;
    args.push_back(key);
    args.push_back(value);
  }
  return args;
}

struct EpsFlags {
  std::vector<double> absolute;  // signal^2 units
  std::vector<double> relative;  // fractions of sigma_n^2
};

inline void add_experiment_flags(CLI::App* sub, ExperimentConfig& cfg, EpsFlags& eps,
                                 std::string& ensemble, std::string& signal_mode,
                                 std::string& support_mode, std::string& matrix_mode) {
  sub->add_option("--N", cfg.N, "number of measurements")->required();
  sub->add_option("--M", cfg.M, "signal length")->required();
  sub->add_option("--K", cfg.K, "sparsity level")->required();
  sub->add_option("--ensemble", ensemble, "gaussian | rademacher | sparse-ternary");
  sub->add_option("--sigma2", cfg.sigma_n_sq, "noise variance");
  sub->add_option("--eps", eps.absolute, "typicality slack values (comma separated)")
      ->delimiter(',');
  sub->add_option("--eps-rel", eps.relative,
                  "typicality slack as fractions of sigma2, converted before the check")
      ->delimiter(',');
  sub->add_option("--mu", cfg.mu, "minimum nonzero signal magnitude");
  sub->add_option("--signal-mode", signal_mode, "constant | uniform");
  sub->add_option("--signal-max", cfg.signal_mag_max, "max magnitude for uniform mode");
  sub->add_option("--support-mode", support_mode, "first-k | random");
  sub->add_option("--matrix-mode", matrix_mode, "fixed | resampled");
  sub->add_option("--trials", cfg.trials, "Monte Carlo trials");
  sub->add_option("--seed", cfg.seed, "RNG seed");
  sub->add_option("--budget", cfg.enum_budget, "max C(M,K) the subset scan accepts");
}

inline void finish_experiment_config(ExperimentConfig& cfg, const EpsFlags& eps,
                                     const std::string& ensemble,
                                     const std::string& signal_mode,
                                     const std::string& support_mode,
                                     const std::string& matrix_mode) {
  if (!eps.absolute.empty() || !eps.relative.empty()) {
    cfg.eps_list = eps.absolute;
    for (double rel : eps.relative) cfg.eps_list.push_back(rel * cfg.sigma_n_sq);
  }
  cfg.ensemble = ensemble_from_string(ensemble);
  if (signal_mode == "constant") cfg.signal_mode = SignalMode::ConstantMagnitude;
  else if (signal_mode == "uniform") cfg.signal_mode = SignalMode::UniformMagnitude;
  else throw std::invalid_argument("unknown signal-mode '" + signal_mode + "' (valid: constant, uniform)");
  if (support_mode == "first-k") cfg.support_mode = SupportMode::FixedFirstK;
  else if (support_mode == "random") cfg.support_mode = SupportMode::UniformRandom;
  else throw std::invalid_argument("unknown support-mode '" + support_mode + "' (valid: first-k, random)");
  if (matrix_mode == "fixed") cfg.matrix_mode = MatrixMode::FixedAcrossTrials;
  else if (matrix_mode == "resampled") cfg.matrix_mode = MatrixMode::ResampledPerTrial;
  else throw std::invalid_argument("unknown matrix-mode '" + matrix_mode + "' (valid: fixed, resampled)");
  if (cfg.signal_mode == SignalMode::UniformMagnitude && cfg.signal_mag_max == 0.0)
    cfg.signal_mag_max = cfg.mu;
}

// Closed-form tabulation for the bounds subcommand, one row set per eps.
inline ExperimentReport bounds_report(int N, int M, int K, double sigma2,
                                      const std::vector<double>& eps_list, double gamma2,
                                      double mu, double tail_energy, double s_norm_sq,
                                      std::uint64_t seed) {
  ExperimentReport report;
  report.ctx.N = N;
  report.ctx.M = M;
  report.ctx.K = K;
  report.ctx.sigma2 = sigma2;
  report.ctx.trials = 0;
  report.ctx.seed = seed;
  report.ctx.alpha = static_cast<double>(K) / N;
  report.ctx.beta = static_cast<double>(M) / K;
  report.config_rows.emplace_back("config.gamma2", gamma2);
  report.config_rows.emplace_back("config.mu", mu);
  report.config_rows.emplace_back("config.tail_energy", tail_energy);
  report.config_rows.emplace_back("config.s_norm_sq", s_norm_sq);

  auto push = [&](const std::string& name, double value,
                  std::optional<double> eps = std::nullopt) {
    MetricRow row;
    row.metric = name;
    row.value = value;
    row.eps = eps;
    report.rows.push_back(row);
  };

  const double beta = *report.ctx.beta;
  if (beta > 1.0 && 9.0 + 4.0 * std::log(beta - 1.0) > 0.0)
    push("alpha_threshold", alpha_threshold(beta));
  push("crb_s_asymptotic", crb_s_asymptotic(*report.ctx.alpha, sigma2));

  for (double eps : eps_list) {
    const BoundInputs b(N, K, M, sigma2, eps, gamma2, mu * mu, s_norm_sq);
    push("sigma_prime_sq", b.sigma_prime_sq, eps);
    push("eps_prime", b.eps_prime, eps);
    if (sigma2 > 0.0) {
      const MissBoundTerms terms = chernoff_miss_bound_terms(b);
      push("chernoff_miss_bound", terms.total(), eps);
      push("miss_bound_upper_tail", terms.upper_tail, eps);
      push("miss_bound_lower_tail", terms.lower_tail, eps);
      if (terms.lower_tail_degenerate) push("miss_bound_lower_tail_degenerate", 1.0, eps);
    }
    if (gamma2 > eps && sigma2 > 0.0) {
      push("false_typ_bound_exact",
           false_typicality_bound(b, FalseTypicalityVariant::Exact), eps);
      const NuStarResult star = nu_star(b);
      push("nu_star", star.nu, eps);
      push("g_min", star.g_min, eps);
      // Grid consistency of the exported closed form: relative gap between
      // g(nu*) and the minimum of g over a dense grid of admissible tilts.
      double grid_min = std::numeric_limits<double>::infinity();
      const int points = 20001;
      for (int i = 0; i < points; ++i) {
        const double nu = 2.0 * star.nu * (1.0 - static_cast<double>(i) / points);
        if (nu >= 0.0) continue;
        grid_min = std::min(grid_min, g_of_nu(nu, b));
      }
      push("nu_star_grid_consistency", relative_error(star.g_min, std::min(grid_min, star.g_min)), eps);
    }
    if (tail_energy > 0.0) {
      const BoundInputs bt(N, K, M, sigma2, eps, gamma2, mu * mu, tail_energy);
      if (tail_energy > bt.eps_prime) {
        push("false_typ_bound_asymptotic",
             false_typicality_bound(bt, FalseTypicalityVariant::Asymptotic), eps);
        push("false_typ_bound_prior",
             false_typicality_bound(bt, FalseTypicalityVariant::PriorWork), eps);
      }
    }
    if (mu > 0.0) {
      push("f_at_1", f_z(1.0, b), eps);
      push("f_at_1_over_K", f_z(1.0 / K, b), eps);
      if (b.mu_sq > b.eps_prime) push("mse_upper_bound", mse_upper_bound(b), eps);
    }
  }
  return report;
}

}  // namespace detail

inline int parse_and_run(std::vector<std::string> args) {
  static const char* kValid = "miss-prob, false-alarm, mse, concentration, bounds";
  if (!args.empty() && !args[0].empty() && args[0][0] != '-') {
    const std::string& name = args[0];
    if (name != "miss-prob" && name != "false-alarm" && name != "mse" &&
        name != "concentration" && name != "bounds") {
      std::cerr << "error: unknown subcommand '" << name << "' (valid subcommands: " << kValid
                << ")\n";
      return 2;
    }
  }

  CLI::App app{"joint-typicality estimation experiments for noisy compressed sensing"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  detail::EpsFlags eps_flags;
  std::string ensemble = "gaussian";
  std::string signal_mode = "constant";
  std::string support_mode = "first-k";
  std::string matrix_mode = "fixed";

  auto* miss = app.add_subcommand("miss-prob", "P{true support not typical} vs the Chernoff miss bound");
  detail::OutputFlags miss_out;
  detail::add_experiment_flags(miss, cfg, eps_flags, ensemble, signal_mode, support_mode, matrix_mode);
  detail::add_output_flags(miss, miss_out);

  auto* false_alarm = app.add_subcommand("false-alarm", "P{wrong support typical} vs the false-typicality bounds");
  detail::OutputFlags false_out;
  std::vector<int> xi_indices;
  detail::add_experiment_flags(false_alarm, cfg, eps_flags, ensemble, signal_mode, support_mode, matrix_mode);
  false_alarm->add_option("--xi", xi_indices,
                          "wrong support (1-based, comma separated); default differs from tau in the last index")
      ->delimiter(',');
  detail::add_output_flags(false_alarm, false_out);

  auto* mse = app.add_subcommand("mse", "joint-typicality estimator MSE vs SLSE and CRB-S");
  detail::OutputFlags mse_out;
  detail::add_experiment_flags(mse, cfg, eps_flags, ensemble, signal_mode, support_mode, matrix_mode);
  detail::add_output_flags(mse, mse_out);

  auto* conc = app.add_subcommand("concentration", "concentration violation rates and Gram statistics");
  detail::OutputFlags conc_out;
  ConcentrationConfig conc_cfg;
  conc->add_option("--N-list", conc_cfg.n_list, "N grid (comma separated)")->delimiter(',');
  conc->add_option("--M", conc_cfg.M, "signal length");
  conc->add_option("--eps", conc_cfg.eps, "concentration slack in (0,1)");
  conc->add_option("--trials", conc_cfg.trials, "matrices sampled per grid point");
  conc->add_option("--gram-seeds", conc_cfg.gram_seeds, "matrices per Gram statistic");
  conc->add_option("--seed", conc_cfg.seed, "RNG seed");
  detail::add_output_flags(conc, conc_out);

  auto* bounds = app.add_subcommand("bounds", "tabulate the closed-form bounds");
  detail::OutputFlags bounds_out;
  int b_N = 0, b_M = 0, b_K = 0;
  double b_sigma2 = 1.0, b_gamma2 = 0.0, b_mu = 0.0, b_tail = -1.0, b_snorm = -1.0;
  std::vector<double> b_eps = {0.1};
  std::uint64_t b_seed = 1;
  bounds->add_option("--N", b_N)->required();
  bounds->add_option("--M", b_M)->required();
  bounds->add_option("--K", b_K)->required();
  bounds->add_option("--sigma2", b_sigma2, "noise variance");
  bounds->add_option("--eps", b_eps, "typicality slack values")->delimiter(',');
  bounds->add_option("--gamma2", b_gamma2, "non-centrality energy for the exact bound");
  bounds->add_option("--mu", b_mu, "minimum nonzero magnitude");
  bounds->add_option("--tail-energy", b_tail, "missed-tap energy (default mu^2)");
  bounds->add_option("--s-norm-sq", b_snorm, "signal energy for the MSE bound (default K mu^2)");
  bounds->add_option("--seed", b_seed, "echoed into the report");
  detail::add_output_flags(bounds, bounds_out);

  try {
    args = detail::apply_config_file(std::move(args));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (miss->parsed() || false_alarm->parsed() || mse->parsed()) {
      detail::finish_experiment_config(cfg, eps_flags, ensemble, signal_mode, support_mode, matrix_mode);
    }
    ExperimentReport report;
    const detail::OutputFlags* out = nullptr;
    if (miss->parsed()) {
      report = run_miss_probability(cfg);
      out = &miss_out;
    } else if (false_alarm->parsed()) {
      SupportSet xi;
      if (xi_indices.empty()) {
        std::vector<int> idx;
        for (int i = 1; i < cfg.K; ++i) idx.push_back(i);
        idx.push_back(cfg.K + 1);
        xi = SupportSet(std::move(idx));
      } else {
        std::sort(xi_indices.begin(), xi_indices.end());
        xi = SupportSet(xi_indices);
      }
      report = run_false_typicality(cfg, xi);
      out = &false_out;
    } else if (mse->parsed()) {
      report = run_mse(cfg);
      out = &mse_out;
    } else if (conc->parsed()) {
      report = run_concentration(conc_cfg);
      out = &conc_out;
    } else {
      if (b_mu > 0.0 && b_tail < 0.0) b_tail = b_mu * b_mu;
      if (b_tail < 0.0) b_tail = 0.0;
      if (b_mu > 0.0 && b_snorm < 0.0) b_snorm = b_K * b_mu * b_mu;
      if (b_snorm < 0.0) b_snorm = 0.0;
      report = detail::bounds_report(b_N, b_M, b_K, b_sigma2, b_eps, b_gamma2, b_mu, b_tail,
                                     b_snorm, b_seed);
      out = &bounds_out;
    }
    write_report(report, out->resolve(), out->out);
    std::cerr << "wrote " << out->out << " (" << report.wall_seconds << " s)\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

inline int parse_and_run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return parse_and_run(std::move(args));
}

}  // namespace jtcs::cli
