// Acceptance suite: one numbered criterion per check, one PASS/FAIL line
// each, nonzero exit if anything fails. The CLI binary path may be passed
// as argv[1] (used by the determinism criterion; skipped with a FAIL note
// if absent).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "jtcs/bounds.hpp"
#include "jtcs/estimators.hpp"
#include "jtcs/montecarlo.hpp"

using namespace jtcs;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Criterion {
 public:
  Criterion(int index, std::string name) : index_(index), name_(std::move(name)) {
    start_ = std::chrono::steady_clock::now();
  }

  void expect(bool ok, const std::string& detail) {
    if (!ok && why_.empty()) why_ = detail;
    ok_ = ok_ && ok;
  }

  ~Criterion() {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (ok_) {
      std::printf("[PASS] criterion %2d: %s (%.1f s)\n", index_, name_.c_str(), secs);
    } else {
      std::printf("[FAIL] criterion %2d: %s (%.1f s) -- %s\n", index_, name_.c_str(), secs,
                  why_.c_str());
      ++g_failures;
    }
    std::fflush(stdout);
  }

 private:
  int index_;
  std::string name_;
  bool ok_ = true;
  std::string why_;
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Random valid bound inputs with eps < gamma^2, matching the generator the
// unit tests use.
BoundInputs random_inputs(std::uint64_t seed) {
  rng::Stream s(rng::substream(0xB0D5, seed));
  const int N = 32 + static_cast<int>(s.uniform() * 480.0);
  const int K = 1 + static_cast<int>(s.uniform() * (N / 4 - 1));
  const int M = K * (2 + static_cast<int>(s.uniform() * 14.0));
  const double sigma_sq = 0.05 + 3.95 * s.uniform();
  const double gamma_sq = 0.05 + 9.95 * s.uniform();
  const double eps = gamma_sq * (0.05 + 0.9 * s.uniform());
  const double mu_sq = 0.1 + 8.9 * s.uniform();
  const double s_norm_sq = K * mu_sq * (1.0 + s.uniform());
  return BoundInputs(N, K, M, sigma_sq, eps, gamma_sq, mu_sq, s_norm_sq);
}

void criterion_1_slse_efficiency() {
  Criterion c(1, "SLSE Monte Carlo MSE matches sigma^2 Tr[(A_tau^T A_tau)^-1] within 2%");
  const int N = 32, M = 64, K = 3;
  const double sigma_sq = 1.0;
  const auto A = sample_matrix(EnsembleKind::GaussianUnit, N, M, 2024);
  const SupportSet tau = SupportSet::first_k(K);
  const SubsetFactor factor(A, tau);
  const Matrix a_tau = submatrix(A, tau);
  const long long trials = 200000;
  double err_sum = 0.0;
  for (long long t = 0; t < trials; ++t) {
    const std::uint64_t trial = rng::substream(1, static_cast<std::uint64_t>(t));
    const auto s = sample_sparse_signal(M, K, 2.0, SignalMode::ConstantMagnitude, 0.0,
                                        SupportMode::FixedFirstK, rng::substream(trial, 1));
    Vector noise(N);
    const std::uint64_t noise_key = rng::substream(trial, 2);
    for (int i = 0; i < N; ++i) noise[i] = rng::gaussian_at(noise_key, static_cast<std::uint64_t>(i));
    const Vector y = a_tau * s.on_support() + noise;
    err_sum += (factor.solve(y) - s.on_support()).squaredNorm();
  }
  const double mse = err_sum / static_cast<double>(trials);
  const double expected = sigma_sq * factor.trace_gram_inverse();
  const double rel = std::abs(mse - expected) / expected;
  c.expect(rel < 0.02, "relative gap " + fmt(rel) + " (mse " + fmt(mse) + " vs " + fmt(expected) + ")");
}

void criterion_2_chi_square_moments() {
  Criterion c(2, "phi_1 / phi_2 sample moments match the (non)central chi-square formulas");
  ExperimentConfig cfg;
  cfg.N = 64;
  cfg.M = 16;
  cfg.K = 4;
  cfg.sigma_n_sq = 1.0;
  cfg.eps_list = {0.2};
  cfg.mu = 2.0;
  cfg.trials = 100000;
  cfg.seed = 11;

  const auto miss = run_miss_probability(cfg);
  const auto* mean1 = miss.find("phi1_mean");
  const auto* var1 = miss.find("phi1_var");
  c.expect(std::abs(mean1->value - *mean1->bound) < 0.01 * *mean1->bound,
           "phi1 mean " + fmt(mean1->value) + " vs " + fmt(*mean1->bound));
  c.expect(std::abs(var1->value - *var1->bound) < 0.05 * *var1->bound,
           "phi1 var " + fmt(var1->value) + " vs " + fmt(*var1->bound));

  const auto false_typ = run_false_typicality(cfg, SupportSet({1, 2, 3, 5}));
  const auto* mean2 = false_typ.find("phi2_mean");
  c.expect(std::abs(mean2->value - *mean2->bound) < 0.01 * *mean2->bound,
           "phi2 mean " + fmt(mean2->value) + " vs " + fmt(*mean2->bound));
}

void criterion_3_miss_bound_grid() {
  Criterion c(3, "miss probability under the Chernoff bound and non-increasing in N");
  const std::vector<double> eps_list = {0.1, 0.2, 0.3};
  std::vector<std::vector<double>> p(eps_list.size()), se(eps_list.size());
  for (int N : {64, 128, 256, 512}) {
    ExperimentConfig cfg;
    cfg.N = N;
    cfg.K = N / 16;
    cfg.M = 4 * cfg.K;
    cfg.sigma_n_sq = 1.0;
    cfg.eps_list = eps_list;
    cfg.mu = 2.0;
    cfg.trials = 10000;
    cfg.seed = 33;
    const auto report = run_miss_probability(cfg);
    for (std::size_t e = 0; e < eps_list.size(); ++e) {
      const auto* row = report.find("p_miss", eps_list[e]);
      c.expect(row->value - 4.0 * *row->std_err <= *row->bound,
               "N=" + std::to_string(N) + " eps=" + fmt(eps_list[e]) + ": p " + fmt(row->value) +
                   " exceeds bound " + fmt(*row->bound));
      p[e].push_back(row->value);
      se[e].push_back(*row->std_err);
    }
  }
  for (std::size_t e = 0; e < eps_list.size(); ++e) {
    for (std::size_t i = 1; i < p[e].size(); ++i) {
      const double slack = 2.0 * std::sqrt(se[e][i] * se[e][i] + se[e][i - 1] * se[e][i - 1]);
      c.expect(p[e][i] <= p[e][i - 1] + slack,
               "eps=" + fmt(eps_list[e]) + ": p grew from " + fmt(p[e][i - 1]) + " to " +
                   fmt(p[e][i]));
    }
  }
}

void criterion_4_false_typicality_grid() {
  Criterion c(4, "false-typicality probability under the exact bound on the N grid");
  for (int N : {64, 128, 256, 512}) {
    ExperimentConfig cfg;
    cfg.N = N;
    cfg.K = N / 16;
    cfg.M = 4 * cfg.K;
    cfg.sigma_n_sq = 1.0;
    cfg.eps_list = {0.3};
    cfg.mu = 2.0;
    cfg.trials = 10000;
    cfg.seed = 44;
    // xi differs from tau in exactly one index.
    std::vector<int> xi_idx;
    for (int i = 1; i < cfg.K; ++i) xi_idx.push_back(i);
    xi_idx.push_back(cfg.K + 1);
    const auto report = run_false_typicality(cfg, SupportSet(std::move(xi_idx)));
    const auto* row = report.find("p_false_typical", 0.3);
    c.expect(row->value - 4.0 * *row->std_err <= *row->bound,
             "N=" + std::to_string(N) + ": p " + fmt(row->value) + " exceeds bound " +
                 fmt(*row->bound));
  }
}

void criterion_5_projected_energy_convergence() {
  Criterion c(5, "gamma^2 N / ((N-K) sum s_i^2) concentrates: median deviation halves 64 -> 1024");
  for (EnsembleKind kind : {EnsembleKind::GaussianUnit, EnsembleKind::Rademacher,
                            EnsembleKind::SparseTernary}) {
    auto deviation_at = [&](int N) {
      const int K = N / 16;
      const int M = 4 * K;
      std::vector<double> devs;
      for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto A = sample_matrix(kind, N, M,
                                     rng::substream(0xC5 + static_cast<int>(kind), seed));
        Vector values = Vector::Zero(M);
        for (int i = 0; i < K; ++i) values[i] = 1.0;
        const auto s = SparseSignal::from_values(std::move(values));
        std::vector<int> xi_idx;
        for (int i = K + 1; i <= 2 * K; ++i) xi_idx.push_back(i);
        const double g = gamma_sq(A, SupportSet(std::move(xi_idx)), s);
        devs.push_back(std::abs(g * N / (static_cast<double>(N - K) * K) - 1.0));
      }
      return median(devs);
    };
    const double d64 = deviation_at(64);
    const double d1024 = deviation_at(1024);
    c.expect(d1024 <= 0.5 * d64, std::string(to_string(kind)) + ": median dev " + fmt(d1024) +
                                     " at N=1024 vs " + fmt(d64) + " at N=64");
  }
}

void criterion_6_crb_asymptote() {
  Criterion c(6, "|CRB-S / (alpha sigma^2) - 1| median shrinks from N=64 to N=512 at alpha=1/16");
  for (EnsembleKind kind : {EnsembleKind::GaussianUnit, EnsembleKind::Rademacher,
                            EnsembleKind::SparseTernary}) {
    auto deviation_at = [&](int N) {
      const int K = N / 16;
      std::vector<double> devs;
      for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto A = sample_matrix(kind, N, 4 * K,
                                     rng::substream(0xC6 + static_cast<int>(kind), seed));
        const double value = crb_s(A, SupportSet::first_k(K), 1.0);
        devs.push_back(std::abs(value / (static_cast<double>(K) / N) - 1.0));
      }
      return median(devs);
    };
    const double d64 = deviation_at(64);
    const double d512 = deviation_at(512);
    std::printf("    %-14s median |crb/(alpha sigma^2) - 1|: %s at N=64, %s at N=512\n",
                to_string(kind), fmt(d64).c_str(), fmt(d512).c_str());
    c.expect(d512 < d64, std::string(to_string(kind)) + ": median dev " + fmt(d512) +
                             " at N=512 vs " + fmt(d64) + " at N=64");
  }
}

void criterion_7_mse_trend() {
  Criterion c(7, "best-over-eps MSE(typical)/CRB-S decreases over N in {40,80,160}");
  std::vector<double> ratios;
  for (int N : {40, 80, 160}) {
    ExperimentConfig cfg;
    cfg.N = N;
    cfg.K = N / 20;  // alpha = 0.05
    cfg.M = 4 * cfg.K;
    cfg.sigma_n_sq = 0.25;
    cfg.mu = 2.0;
    cfg.eps_list = {0.1, 0.2, 0.4, 0.8, 1.6};
    cfg.trials = 1000;
    cfg.seed = 77;
    cfg.enum_budget = 11'000'000;  // C(32,8) = 10,518,300
    const auto report = run_mse(cfg);
    double best = std::numeric_limits<double>::infinity();
    for (double eps : cfg.eps_list) {
      const auto* row = report.find("mse_typical_over_crb_s", eps);
      if (row) best = std::min(best, row->value);
    }
    ratios.push_back(best);
    std::printf("    N=%3d best-over-eps MSE/CRB = %s\n", N, fmt(best).c_str());
  }
  c.expect(ratios[1] < ratios[0], "ratio at N=80 (" + fmt(ratios[1]) + ") not below N=40 (" +
                                      fmt(ratios[0]) + ")");
  c.expect(ratios[2] < ratios[1], "ratio at N=160 (" + fmt(ratios[2]) + ") not below N=80 (" +
                                      fmt(ratios[1]) + ")");
}

void criterion_8_appendix_identities() {
  Criterion c(8, "nu* sign, admissibility, grid-minimality, and reciprocal identities");
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const BoundInputs b = random_inputs(seed);
    const TiltClosedForms forms = tilt_closed_forms(b);
    const NuStarResult star = nu_star(b);
    c.expect(star.nu < 0.0, "nu* not negative at seed " + std::to_string(seed));
    c.expect(1.0 - 2.0 * b.sigma_n_sq * star.nu > 0.0,
             "1 - 2 sigma^2 nu* not positive at seed " + std::to_string(seed));
    c.expect(std::abs(forms.one_minus_two_nu_sigma_sq * forms.reciprocal - 1.0) < 1e-8,
             "reciprocal pair off at seed " + std::to_string(seed));

    // Grid minimization of ln g over [2 nu*, 0); comparing logs keeps the
    // check meaningful even where g itself underflows double range.
    const double n = static_cast<double>(b.N);
    const auto log_g = [&](double nu) {
      const double x = 1.0 - 2.0 * nu * b.sigma_n_sq;
      return -0.5 * b.nk() * std::log(x) + nu * n * b.gamma_sq / x -
             nu * (b.nk() * b.sigma_n_sq + n * b.gamma_sq - n * b.eps_bar);
    };
    double grid_min = std::numeric_limits<double>::infinity();
    const int points = 100000;
    for (int i = 0; i < points; ++i) {
      const double nu = 2.0 * star.nu * (1.0 - static_cast<double>(i) / points);
      if (nu >= 0.0) continue;
      grid_min = std::min(grid_min, log_g(nu));
    }
    const double log_star = log_g(star.nu);
    c.expect(std::abs(grid_min - log_star) < 1e-6,
             "grid minimum differs from g(nu*) by " + fmt(std::abs(log_star - grid_min)) +
                 " in log at seed " + std::to_string(seed));
  }
}

void criterion_9_bound_chain() {
  Criterion c(9, "bound chain ordering and the elementary sqrt/log inequalities");
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const BoundInputs b = random_inputs(seed);
    const ChernoffChain chain = chernoff_chain(b);
    const double slack = 1e-9;
    c.expect(chain.tightest <= chain.sqrt_relaxed * (1.0 + slack),
             "tightest > sqrt-relaxed at seed " + std::to_string(seed));
    c.expect(chain.sqrt_relaxed <= chain.log_form * (1.0 + slack),
             "sqrt-relaxed > log form at seed " + std::to_string(seed));
    c.expect(chain.log_form <= chain.squared_form * (1.0 + slack),
             "log form > squared form at seed " + std::to_string(seed));
  }
  for (int i = 0; i <= 10000; ++i) {
    const double x = static_cast<double>(i) / 10000.0;
    c.expect(std::sqrt(1.0 - x) <= 1.0 - 0.5 * x, "sqrt inequality fails at x=" + fmt(x));
    if (x < 1.0)
      c.expect(std::log(1.0 - x) <= -x - 0.5 * x * x, "log inequality fails at x=" + fmt(x));
  }
}

void criterion_10_threshold_value() {
  Criterion c(10, "alpha_threshold(2) equals 1/9 to 1e-12 relative");
  const double value = alpha_threshold(2.0);
  c.expect(std::abs(value - 1.0 / 9.0) <= 1e-12 / 9.0, "got " + fmt(value));
}

void criterion_11_cli_determinism(const char* cli_path) {
  Criterion c(11, "repeated CLI invocations produce byte-identical files");
  if (cli_path == nullptr) {
    c.expect(false, "CLI binary path not supplied (pass it as argv[1])");
    return;
  }
  const fs::path dir = fs::temp_directory_path() / "jtcs_acceptance";
  fs::create_directories(dir);

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
  };

  const std::vector<std::pair<std::string, std::string>> invocations = {
      {"miss", "miss-prob --N 64 --M 16 --K 4 --sigma2 1 --eps 0.1,0.3 --mu 2 --trials 400 --seed 5"},
      {"fa", "false-alarm --N 64 --M 16 --K 4 --sigma2 1 --eps 0.2 --mu 2 --trials 400 --seed 6"},
      {"mse", "mse --N 24 --M 12 --K 2 --sigma2 0.25 --eps 0.2 --mu 2 --trials 300 --seed 7"},
      {"conc", "concentration --N-list 16,64 --M 4 --eps 0.4 --trials 400 --gram-seeds 5 --seed 8"},
      {"bounds", "bounds --N 128 --M 32 --K 4 --sigma2 1 --eps 0.1,0.2 --gamma2 1.5 --mu 2"},
  };
  for (const auto& [tag, base] : invocations) {
    for (const char* format : {"csv", "json"}) {
      const fs::path out1 = dir / (tag + "_1." + format);
      const fs::path out2 = dir / (tag + "_2." + format);
      bool ok = true;
      for (const fs::path& out : {out1, out2}) {
        const std::string cmd = std::string(cli_path) + " " + base + " --out " + out.string() +
                                " 2>/dev/null";
        if (std::system(cmd.c_str()) != 0) ok = false;
      }
      c.expect(ok, tag + " (" + format + "): CLI exited nonzero");
      if (ok) {
        c.expect(slurp(out1) == slurp(out2), tag + " (" + format + "): outputs differ");
      }
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  criterion_1_slse_efficiency();
  criterion_2_chi_square_moments();
  criterion_3_miss_bound_grid();
  criterion_4_false_typicality_grid();
  criterion_5_projected_energy_convergence();
  criterion_6_crb_asymptote();
  criterion_7_mse_trend();
  criterion_8_appendix_identities();
  criterion_9_bound_chain();
  criterion_10_threshold_value();
  criterion_11_cli_determinism(argc > 1 ? argv[1] : nullptr);

  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
