#pragma once

// Experiment harness: sparse signal and noise generation, trial loops,
// empirical probabilities and MSE, and comparison against the closed-form
// bounds. Every run_* is a pure function of its config: per-trial RNG
// substreams derive from (seed, trial index), per-trial results land in
// preallocated slots, and reduction is sequential, so reports are
// bit-identical regardless of thread count or scheduling.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "jtcs/bounds.hpp"
#include "jtcs/estimators.hpp"
#include "jtcs/typicality.hpp"

namespace jtcs {

enum class SignalMode { ConstantMagnitude, UniformMagnitude };
enum class SupportMode { FixedFirstK, UniformRandom };
enum class MatrixMode { FixedAcrossTrials, ResampledPerTrial };

inline const char* to_string(SignalMode m) {
  return m == SignalMode::ConstantMagnitude ? "constant" : "uniform";
}
inline const char* to_string(SupportMode m) {
  return m == SupportMode::FixedFirstK ? "first-k" : "random";
}
inline const char* to_string(MatrixMode m) {
  return m == MatrixMode::FixedAcrossTrials ? "fixed" : "resampled";
}

struct ExperimentConfig {
  int N = 0;
  int M = 0;
  int K = 0;
  EnsembleKind ensemble = EnsembleKind::GaussianUnit;
  double sigma_n_sq = 1.0;
  std::vector<double> eps_list = {0.1};  // evaluated on shared draws
  double mu = 1.0;
  SignalMode signal_mode = SignalMode::ConstantMagnitude;
  double signal_mag_max = 0.0;  // upper magnitude for UniformMagnitude
  SupportMode support_mode = SupportMode::FixedFirstK;
  MatrixMode matrix_mode = MatrixMode::FixedAcrossTrials;
  long long trials = 1000;
  std::uint64_t seed = 1;
  std::uint64_t enum_budget = 2'000'000;

  double alpha() const { return static_cast<double>(K) / static_cast<double>(N); }
  double beta() const { return static_cast<double>(M) / static_cast<double>(K); }

  // True when alpha sits at or above the threshold (or the threshold is
  // undefined because beta is too small); such runs are legal but outside
  // the regime the MSE guarantee covers.
  bool alpha_warning() const {
    const double b = beta();
    if (!(b > 1.0) || !(9.0 + 4.0 * std::log(b - 1.0) > 0.0)) return true;
    return alpha() >= alpha_threshold(b);
  }

  void validate() const {
    if (N < 1 || M < 1 || K < 1) throw std::invalid_argument("config: N, M, K must be >= 1");
    if (K >= N) throw std::invalid_argument("config: need K < N");
    if (K > M) throw std::invalid_argument("config: need K <= M");
    if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    if (!(mu > 0.0)) throw std::invalid_argument("config: mu must be > 0");
    if (sigma_n_sq < 0.0) throw std::invalid_argument("config: sigma2 must be >= 0");
    if (eps_list.empty()) throw std::invalid_argument("config: at least one eps required");
    for (double e : eps_list)
      if (!(e > 0.0)) throw std::invalid_argument("config: every eps must be > 0");
    if (signal_mode == SignalMode::UniformMagnitude && !(signal_mag_max >= mu))
      throw std::invalid_argument("config: signal-max must be >= mu for uniform magnitudes");
  }
};

struct MetricRow {
  std::string metric;
  double value = 0.0;
  std::optional<double> std_err;
  std::optional<double> bound;
  std::string bound_name;
  std::optional<double> eps;
  // Per-row overrides for grid runs; the report context fills the rest.
  std::optional<int> n_override, m_override, k_override;
};

struct ReportContext {
  std::optional<int> N, M, K;
  std::optional<double> sigma2;
  long long trials = 0;
  std::uint64_t seed = 0;
  std::optional<double> alpha, beta;
};

struct ExperimentReport {
  ReportContext ctx;
  std::vector<std::pair<std::string, double>> config_rows;  // resolved config echo
  std::vector<MetricRow> rows;
  double wall_seconds = 0.0;  // diagnostic only; never serialized

  const MetricRow* find(const std::string& metric, double eps) const {
    for (const auto& row : rows) {
      if (row.metric == metric && row.eps && *row.eps == eps) return &row;
    }
    return nullptr;
  }
  const MetricRow* find(const std::string& metric) const {
    for (const auto& row : rows) {
      if (row.metric == metric) return &row;
    }
    return nullptr;
  }
};

inline double std_error_of_proportion(double p, long long trials) {
  return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

namespace detail {

inline unsigned worker_count(long long trials) {
  unsigned n = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("JTCS_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = static_cast<unsigned>(v);
  }
  if (n < 1) n = 1;
  if (static_cast<long long>(n) > trials) n = static_cast<unsigned>(trials);
  return n;
}

// Runs fn(t) for every t in [0, trials). fn must only write to slots it
// owns (indexed by t); reductions happen after the join.
template <typename Fn>
void parallel_for_trials(long long trials, Fn&& fn) {
  const unsigned workers = worker_count(trials);
  if (workers <= 1) {
    for (long long t = 0; t < trials; ++t) fn(t);
    return;
  }
  std::atomic<long long> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  const long long chunk = std::max<long long>(1, trials / (8 * workers));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (!failed.load(std::memory_order_relaxed)) {
        const long long begin = next.fetch_add(chunk);
        if (begin >= trials) return;
        const long long end = std::min(trials, begin + chunk);
        try {
          for (long long t = begin; t < end; ++t) fn(t);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true);
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Stream labels for deriving independent substreams.
inline constexpr std::uint64_t kTagFixedMatrix = 0x4D46;  // shared across trials
inline constexpr std::uint64_t kTagTrial = 0x5452;
inline constexpr std::uint64_t kTagMatrix = 0x4D41;
inline constexpr std::uint64_t kTagSignal = 0x5349;
inline constexpr std::uint64_t kTagNoise = 0x4E4F;

inline std::uint64_t trial_key(std::uint64_t seed, long long t) {
  return rng::substream(rng::substream(seed, kTagTrial), static_cast<std::uint64_t>(t));
}

inline Vector gaussian_vector(std::uint64_t key, int n, double sigma) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = sigma * rng::gaussian_at(key, static_cast<std::uint64_t>(i));
  return v;
}

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;  // population variance (divide by n)
};

inline SampleMoments moments(const std::vector<double>& xs) {
  SampleMoments m;
  if (xs.empty()) return m;
  double sum = 0.0;
  for (double x : xs) sum += x;
  m.mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.variance = ss / static_cast<double>(xs.size());
  return m;
}

inline void echo_common_config(const ExperimentConfig& cfg, ExperimentReport& report) {
  report.ctx.N = cfg.N;
  report.ctx.M = cfg.M;
  report.ctx.K = cfg.K;
  report.ctx.sigma2 = cfg.sigma_n_sq;
  report.ctx.trials = cfg.trials;
  report.ctx.seed = cfg.seed;
  report.ctx.alpha = cfg.alpha();
  report.ctx.beta = cfg.beta();
  auto& rows = report.config_rows;
  rows.emplace_back("config.ensemble", static_cast<double>(static_cast<int>(cfg.ensemble)));
  rows.emplace_back("config.mu", cfg.mu);
  rows.emplace_back("config.signal_mode", static_cast<double>(static_cast<int>(cfg.signal_mode)));
  rows.emplace_back("config.signal_mag_max", cfg.signal_mag_max);
  rows.emplace_back("config.support_mode", static_cast<double>(static_cast<int>(cfg.support_mode)));
  rows.emplace_back("config.matrix_mode", static_cast<double>(static_cast<int>(cfg.matrix_mode)));
  rows.emplace_back("config.enum_budget", static_cast<double>(cfg.enum_budget));
  rows.emplace_back("config.alpha_warning", cfg.alpha_warning() ? 1.0 : 0.0);
  rows.emplace_back("config.eps_count", static_cast<double>(cfg.eps_list.size()));
  for (std::size_t i = 0; i < cfg.eps_list.size(); ++i)
    rows.emplace_back("config.eps_" + std::to_string(i), cfg.eps_list[i]);
}

class WallClock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace detail

// Draws a K-sparse length-M signal. Support per support_mode; magnitudes
// are mu exactly (ConstantMagnitude) or uniform on [mu, mag_max]
// (UniformMagnitude); signs are independent fair coin flips.
inline SparseSignal sample_sparse_signal(int M, int K, double mu, SignalMode mode,
                                         double mag_max, SupportMode support_mode,
                                         std::uint64_t seed) {
  if (K < 1 || M < 1 || K > M) throw std::invalid_argument("sample_sparse_signal: need 1 <= K <= M");
  if (!(mu > 0.0)) throw std::invalid_argument("sample_sparse_signal: mu must be > 0");
  if (mode == SignalMode::UniformMagnitude && !(mag_max >= mu))
    throw std::invalid_argument("sample_sparse_signal: mag_max must be >= mu");

  std::vector<int> support;
  if (support_mode == SupportMode::FixedFirstK) {
    support.resize(static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) support[static_cast<std::size_t>(i)] = i + 1;
  } else {
    // Partial Fisher-Yates over 1..M.
    const std::uint64_t key = rng::substream(seed, 0);
    std::vector<int> pool(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) pool[static_cast<std::size_t>(i)] = i + 1;
    for (int i = 0; i < K; ++i) {
      const double u = rng::uniform_at(key, static_cast<std::uint64_t>(i));
      const int j = i + static_cast<int>(u * static_cast<double>(M - i));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    support.assign(pool.begin(), pool.begin() + K);
    std::sort(support.begin(), support.end());
  }

  const std::uint64_t mag_key = rng::substream(seed, 1);
  const std::uint64_t sign_key = rng::substream(seed, 2);
  Vector values = Vector::Zero(M);
  for (int i = 0; i < K; ++i) {
    double mag = mu;
    if (mode == SignalMode::UniformMagnitude) {
      mag = mu + rng::uniform_at(mag_key, static_cast<std::uint64_t>(i)) * (mag_max - mu);
    }
    const double sign = rng::uniform_at(sign_key, static_cast<std::uint64_t>(i)) < 0.5 ? -1.0 : 1.0;
    values[support[static_cast<std::size_t>(i)] - 1] = sign * mag;
  }
  return SparseSignal::from_values(std::move(values));
}

namespace detail {

inline SparseSignal trial_signal(const ExperimentConfig& cfg, std::uint64_t trial) {
  return sample_sparse_signal(cfg.M, cfg.K, cfg.mu, cfg.signal_mode, cfg.signal_mag_max,
                              cfg.support_mode, rng::substream(trial, kTagSignal));
}

inline MeasurementMatrix sample_fixed_matrix(const ExperimentConfig& cfg) {
  return sample_matrix(cfg.ensemble, cfg.N, cfg.M, rng::substream(cfg.seed, kTagFixedMatrix));
}

inline MeasurementMatrix sample_trial_matrix(const ExperimentConfig& cfg, std::uint64_t trial) {
  return sample_matrix(cfg.ensemble, cfg.N, cfg.M, rng::substream(trial, kTagMatrix));
}

}  // namespace detail

// Empirical P{tau not typical} against the Chernoff miss bound, plus the
// phi_1 = ||P_perp_tau y||^2 sample moments.
inline ExperimentReport run_miss_probability(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::WallClock clock;

  const bool fixed_matrix = cfg.matrix_mode == MatrixMode::FixedAcrossTrials;
  const bool fixed_support = cfg.support_mode == SupportMode::FixedFirstK;
  std::optional<MeasurementMatrix> A_fixed;
  std::optional<SubsetFactor> factor_fixed;
  if (fixed_matrix) {
    A_fixed = detail::sample_fixed_matrix(cfg);
    if (fixed_support) factor_fixed.emplace(*A_fixed, SupportSet::first_k(cfg.K));
  }

  std::vector<double> phi1(static_cast<std::size_t>(cfg.trials));
  detail::parallel_for_trials(cfg.trials, [&](long long t) {
    const std::uint64_t trial = detail::trial_key(cfg.seed, t);
    const SparseSignal s = detail::trial_signal(cfg, trial);
    MeasurementMatrix A_local;
    if (!fixed_matrix) A_local = detail::sample_trial_matrix(cfg, trial);
    const MeasurementMatrix& A = fixed_matrix ? *A_fixed : A_local;
    const Vector noise = detail::gaussian_vector(rng::substream(trial, detail::kTagNoise),
                                                 cfg.N, std::sqrt(cfg.sigma_n_sq));
    const Vector y = submatrix(A, s.support) * s.on_support() + noise;
    if (factor_fixed && fixed_support) {
      phi1[static_cast<std::size_t>(t)] = factor_fixed->residual_sq_norm(y);
    } else {
      phi1[static_cast<std::size_t>(t)] = SubsetFactor(A, s.support).residual_sq_norm(y);
    }
  });

  ExperimentReport report;
  detail::echo_common_config(cfg, report);
  const double nk = static_cast<double>(cfg.N - cfg.K);

  for (double eps : cfg.eps_list) {
    long long misses = 0;
    for (double p : phi1) {
      if (typicality_statistic_from_residual(p, cfg.N, cfg.K, cfg.sigma_n_sq) >= eps) ++misses;
    }
    const double p = static_cast<double>(misses) / static_cast<double>(cfg.trials);
    MetricRow row;
    row.metric = "p_miss";
    row.value = p;
    row.std_err = std_error_of_proportion(p, cfg.trials);
    row.eps = eps;
    if (cfg.sigma_n_sq > 0.0) {
      const BoundInputs b(cfg.N, cfg.K, cfg.M, cfg.sigma_n_sq, eps);
      const MissBoundTerms terms = chernoff_miss_bound_terms(b);
      row.bound = terms.total();
      row.bound_name = "chernoff_miss_bound";
      report.rows.push_back(row);
      if (terms.lower_tail_degenerate) {
        MetricRow flag;
        flag.metric = "miss_bound_lower_tail_degenerate";
        flag.value = 1.0;
        flag.eps = eps;
        report.rows.push_back(flag);
      }
    } else {
      report.rows.push_back(row);
    }
  }

  const auto m = detail::moments(phi1);
  MetricRow mean_row;
  mean_row.metric = "phi1_mean";
  mean_row.value = m.mean;
  mean_row.bound = nk * cfg.sigma_n_sq;
  mean_row.bound_name = "chi2_mean_expected";
  report.rows.push_back(mean_row);
  MetricRow var_row;
  var_row.metric = "phi1_var";
  var_row.value = m.variance;
  var_row.bound = 2.0 * nk * cfg.sigma_n_sq * cfg.sigma_n_sq;
  var_row.bound_name = "chi2_var_expected";
  report.rows.push_back(var_row);

  report.wall_seconds = clock.seconds();
  return report;
}

// Empirical P{xi typical} for a fixed wrong support xi, against the exact
// false-typicality bound and the two asymptotic variants, plus the
// phi_2 = ||P_perp_xi y||^2 sample moments and the instance gamma^2.
inline ExperimentReport run_false_typicality(const ExperimentConfig& cfg,
                                             const SupportSet& xi) {
  cfg.validate();
  if (cfg.support_mode != SupportMode::FixedFirstK)
    throw std::invalid_argument(
        "run_false_typicality: requires support-mode first-k so tau is fixed");
  if (xi.k() != cfg.K)
    throw std::invalid_argument("run_false_typicality: |xi| must equal K");
  if (xi.max_index() > cfg.M)
    throw std::invalid_argument("run_false_typicality: xi index out of range");
  const SupportSet tau = SupportSet::first_k(cfg.K);
  if (xi == tau) throw std::invalid_argument("run_false_typicality: xi must differ from tau");

  detail::WallClock clock;
  const bool fixed_matrix = cfg.matrix_mode == MatrixMode::FixedAcrossTrials;
  std::optional<MeasurementMatrix> A_fixed;
  std::optional<SubsetFactor> factor_fixed;
  if (fixed_matrix) {
    A_fixed = detail::sample_fixed_matrix(cfg);
    factor_fixed.emplace(*A_fixed, xi);
  }

  const std::size_t trials = static_cast<std::size_t>(cfg.trials);
  std::vector<double> phi2(trials), gamma2(trials), tail_energy(trials);
  detail::parallel_for_trials(cfg.trials, [&](long long t) {
    const std::uint64_t trial = detail::trial_key(cfg.seed, t);
    const SparseSignal s = detail::trial_signal(cfg, trial);
    MeasurementMatrix A_local;
    if (!fixed_matrix) A_local = detail::sample_trial_matrix(cfg, trial);
    const MeasurementMatrix& A = fixed_matrix ? *A_fixed : A_local;
    const Vector noise = detail::gaussian_vector(rng::substream(trial, detail::kTagNoise),
                                                 cfg.N, std::sqrt(cfg.sigma_n_sq));
    const Vector y = submatrix(A, s.support) * s.on_support() + noise;
    if (factor_fixed) {
      phi2[static_cast<std::size_t>(t)] = factor_fixed->residual_sq_norm(y);
    } else {
      phi2[static_cast<std::size_t>(t)] = SubsetFactor(A, xi).residual_sq_norm(y);
    }
    gamma2[static_cast<std::size_t>(t)] = gamma_sq(A, xi, s);
    const SupportSet missed = s.support.difference(xi);
    double energy = 0.0;
    for (int idx : missed.indices()) energy += s.values[idx - 1] * s.values[idx - 1];
    tail_energy[static_cast<std::size_t>(t)] = energy;
  });

  ExperimentReport report;
  detail::echo_common_config(cfg, report);
  const double nk = static_cast<double>(cfg.N - cfg.K);
  const auto gamma_moments = detail::moments(gamma2);
  const double gamma_mean = gamma_moments.mean;
  const double tail_mean = detail::moments(tail_energy).mean;

  for (double eps : cfg.eps_list) {
    long long typical = 0;
    for (double p : phi2) {
      if (typicality_statistic_from_residual(p, cfg.N, cfg.K, cfg.sigma_n_sq) < eps) ++typical;
    }
    const double p = static_cast<double>(typical) / static_cast<double>(cfg.trials);

    // Mean exact bound across instances; instances with gamma^2 <= eps get
    // the vacuous bound 1 and are counted separately.
    double bound_sum = 0.0;
    long long violations = 0;
    for (double g : gamma2) {
      if (g > eps) {
        const BoundInputs b(cfg.N, cfg.K, cfg.M, cfg.sigma_n_sq, eps, g);
        bound_sum += false_typicality_bound(b, FalseTypicalityVariant::Exact);
      } else {
        bound_sum += 1.0;
        ++violations;
      }
    }

    MetricRow row;
    row.metric = "p_false_typical";
    row.value = p;
    row.std_err = std_error_of_proportion(p, cfg.trials);
    row.eps = eps;
    row.bound = bound_sum / static_cast<double>(cfg.trials);
    row.bound_name = "false_typicality_exact";
    report.rows.push_back(row);
    if (violations > 0) {
      MetricRow flag;
      flag.metric = "count_gamma_sq_le_eps";
      flag.value = static_cast<double>(violations);
      flag.eps = eps;
      report.rows.push_back(flag);
    }

    const BoundInputs b_asym(cfg.N, cfg.K, cfg.M, cfg.sigma_n_sq, eps, gamma_mean, 0.0,
                             tail_mean);
    if (tail_mean > b_asym.eps_prime) {
      MetricRow asym;
      asym.metric = "false_typ_bound_asymptotic";
      asym.value = false_typicality_bound(b_asym, FalseTypicalityVariant::Asymptotic);
      asym.eps = eps;
      report.rows.push_back(asym);
      MetricRow prior;
      prior.metric = "false_typ_bound_prior";
      prior.value = false_typicality_bound(b_asym, FalseTypicalityVariant::PriorWork);
      prior.eps = eps;
      report.rows.push_back(prior);
    }
  }

  MetricRow gamma_row;
  gamma_row.metric = "gamma_sq";
  gamma_row.value = gamma_mean;
  report.rows.push_back(gamma_row);

  const auto m = detail::moments(phi2);
  MetricRow mean_row;
  mean_row.metric = "phi2_mean";
  mean_row.value = m.mean;
  mean_row.bound = nk * cfg.sigma_n_sq + static_cast<double>(cfg.N) * gamma_mean;
  mean_row.bound_name = "noncentral_chi2_mean_expected";
  report.rows.push_back(mean_row);
  MetricRow var_row;
  var_row.metric = "phi2_var";
  var_row.value = m.variance;
  // Law of total variance: the conditional non-central chi-square variance
  // plus the spread phi_2's mean inherits from per-trial gamma^2.
  var_row.bound = 2.0 * nk * cfg.sigma_n_sq * cfg.sigma_n_sq +
                  4.0 * cfg.sigma_n_sq * static_cast<double>(cfg.N) * gamma_mean +
                  static_cast<double>(cfg.N) * static_cast<double>(cfg.N) * gamma_moments.variance;
  var_row.bound_name = "noncentral_chi2_var_expected";
  report.rows.push_back(var_row);

  report.wall_seconds = clock.seconds();
  return report;
}

// Full estimator comparison: the joint-typicality estimator (at every eps
// in the sweep, on shared draws), the genie-aided SLSE, CRB-S, and the
// exhaustive maximum-likelihood oracle, in a single subset scan per trial.
inline ExperimentReport run_mse(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::WallClock clock;
  const std::uint64_t total_subsets = binomial_count(cfg.M, cfg.K);
  if (total_subsets > cfg.enum_budget)
    throw EnumerationBudgetError("C(M,K) = " + std::to_string(total_subsets) +
                                 " exceeds the enumeration budget of " +
                                 std::to_string(cfg.enum_budget));

  const bool fixed_matrix = cfg.matrix_mode == MatrixMode::FixedAcrossTrials;
  std::optional<MeasurementMatrix> A_fixed;
  std::optional<Eigen::MatrixXd> G_fixed;
  std::optional<SubsetFactor> tau_factor_fixed;
  double crb_fixed = 0.0;
  const bool fixed_support = cfg.support_mode == SupportMode::FixedFirstK;
  if (fixed_matrix) {
    A_fixed = detail::sample_fixed_matrix(cfg);
    G_fixed = A_fixed->entries.transpose() * A_fixed->entries;
    if (fixed_support) {
      tau_factor_fixed.emplace(*A_fixed, SupportSet::first_k(cfg.K));
      crb_fixed = cfg.sigma_n_sq * tau_factor_fixed->trace_gram_inverse();
    }
  }

  const std::size_t ne = cfg.eps_list.size();
  const std::size_t trials = static_cast<std::size_t>(cfg.trials);
  // Per-trial, per-eps records (struct-of-arrays, slot per trial).
  std::vector<double> mse(ne * trials, 0.0);
  std::vector<std::uint8_t> outcome(ne * trials, 0);  // 0 none, 1 unique, 2 ambiguous
  std::vector<std::uint8_t> correct(ne * trials, 0);
  std::vector<std::uint8_t> ml_agree(ne * trials, 0);
  std::vector<double> slse_err(trials, 0.0);
  std::vector<double> crb(trials, 0.0);
  std::vector<double> s_norm(trials, 0.0);
  std::vector<std::uint64_t> rank_skipped(trials, 0);

  detail::parallel_for_trials(cfg.trials, [&](long long t) {
    const std::uint64_t trial = detail::trial_key(cfg.seed, t);
    const SparseSignal s = detail::trial_signal(cfg, trial);
    MeasurementMatrix A_local;
    Eigen::MatrixXd G_local;
    if (!fixed_matrix) {
      A_local = detail::sample_trial_matrix(cfg, trial);
      G_local = A_local.entries.transpose() * A_local.entries;
    }
    const MeasurementMatrix& A = fixed_matrix ? *A_fixed : A_local;
    const Eigen::MatrixXd& G = fixed_matrix ? *G_fixed : G_local;
    const Vector noise = detail::gaussian_vector(rng::substream(trial, detail::kTagNoise),
                                                 cfg.N, std::sqrt(cfg.sigma_n_sq));
    const Vector y = submatrix(A, s.support) * s.on_support() + noise;
    const Eigen::VectorXd b = A.entries.transpose() * y;
    const double y_sq = y.squaredNorm();
    const double pivot_tol = detail::scan_pivot_tolerance_sq(G, cfg.N);

    const double n = static_cast<double>(cfg.N);
    const double center = (n - cfg.K) * cfg.sigma_n_sq;
    std::vector<double> lo(ne), hi(ne);
    for (std::size_t e = 0; e < ne; ++e) {
      lo[e] = center - n * cfg.eps_list[e];
      hi[e] = center + n * cfg.eps_list[e];
    }

    std::vector<std::uint8_t> counts(ne, 0);
    std::vector<int> first_idx(ne * static_cast<std::size_t>(cfg.K), -1);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> ml_idx;
    std::uint64_t skipped = 0;
    detail::scan_subsets_gram(
        G, b, y_sq, cfg.K, pivot_tol,
        [&](const int* idx, double residual) {
          for (std::size_t e = 0; e < ne; ++e) {
            if (counts[e] < 2 && residual > lo[e] && residual < hi[e]) {
              if (counts[e] == 0)
                std::copy(idx, idx + cfg.K, first_idx.begin() + static_cast<std::ptrdiff_t>(e * cfg.K));
              ++counts[e];
            }
          }
          if (residual < best) {
            best = residual;
            ml_idx.assign(idx, idx + cfg.K);
          }
          return true;
        },
        [&](std::uint64_t n_skipped) { skipped += n_skipped; });
    rank_skipped[static_cast<std::size_t>(t)] = skipped;

    // Genie-aided reference on the true support.
    Vector shat_tau;
    double crb_t;
    if (tau_factor_fixed && fixed_support) {
      shat_tau = tau_factor_fixed->solve(y);
      crb_t = crb_fixed;
    } else {
      SubsetFactor tau_factor(A, s.support);
      shat_tau = tau_factor.solve(y);
      crb_t = cfg.sigma_n_sq * tau_factor.trace_gram_inverse();
    }
    crb[static_cast<std::size_t>(t)] = crb_t;
    slse_err[static_cast<std::size_t>(t)] = (s.on_support() - shat_tau).squaredNorm();
    s_norm[static_cast<std::size_t>(t)] = s.values.squaredNorm();

    for (std::size_t e = 0; e < ne; ++e) {
      const std::size_t slot = e * trials + static_cast<std::size_t>(t);
      if (counts[e] == 1) {
        outcome[slot] = 1;
        const int* idx = first_idx.data() + e * static_cast<std::size_t>(cfg.K);
        const SupportSet zeta = support_from_zero_based(idx, cfg.K);
        const Vector coeffs = slse(A, zeta, y);
        Vector estimate = Vector::Zero(cfg.M);
        const auto& zi = zeta.indices();
        for (std::size_t i = 0; i < zi.size(); ++i)
          estimate[zi[i] - 1] = coeffs[static_cast<Eigen::Index>(i)];
        mse[slot] = (s.values - estimate).squaredNorm();
        correct[slot] = (zeta == s.support) ? 1 : 0;
        ml_agree[slot] = (!ml_idx.empty() && std::equal(ml_idx.begin(), ml_idx.end(), idx)) ? 1 : 0;
      } else {
        outcome[slot] = counts[e] == 0 ? 0 : 2;
        mse[slot] = s.values.squaredNorm();  // estimator outputs the zero vector
      }
    }
  });

  ExperimentReport report;
  detail::echo_common_config(cfg, report);
  const double crb_mean = detail::moments(crb).mean;
  const double s_norm_mean = detail::moments(s_norm).mean;

  for (std::size_t e = 0; e < ne; ++e) {
    const double eps = cfg.eps_list[e];
    double mse_sum = 0.0, mse_sq_sum = 0.0;
    long long n_unique = 0, n_none = 0, n_ambiguous = 0, n_correct = 0, n_ml_agree = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t slot = e * trials + t;
      mse_sum += mse[slot];
      mse_sq_sum += mse[slot] * mse[slot];
      if (outcome[slot] == 1) {
        ++n_unique;
        n_correct += correct[slot];
        n_ml_agree += ml_agree[slot];
      } else if (outcome[slot] == 0) {
        ++n_none;
      } else {
        ++n_ambiguous;
      }
    }
    const double tn = static_cast<double>(cfg.trials);
    const double mse_mean = mse_sum / tn;
    const double mse_var = std::max(mse_sq_sum / tn - mse_mean * mse_mean, 0.0);

    MetricRow row;
    row.metric = "mse_typical";
    row.value = mse_mean;
    row.std_err = std::sqrt(mse_var / tn);
    row.eps = eps;
    report.rows.push_back(row);

    if (crb_mean > 0.0) {
      MetricRow ratio;
      ratio.metric = "mse_typical_over_crb_s";
      ratio.value = mse_mean / crb_mean;
      ratio.eps = eps;
      report.rows.push_back(ratio);
    }

    auto count_row = [&](const char* name, long long v) {
      MetricRow r;
      r.metric = name;
      r.value = static_cast<double>(v);
      r.eps = eps;
      report.rows.push_back(r);
    };
    count_row("count_unique", n_unique);
    count_row("count_none_typical", n_none);
    count_row("count_ambiguous", n_ambiguous);
    count_row("count_correct_support", n_correct);

    if (n_unique > 0) {
      MetricRow agree;
      agree.metric = "ml_agreement_rate";
      agree.value = static_cast<double>(n_ml_agree) / static_cast<double>(n_unique);
      agree.std_err = std_error_of_proportion(agree.value, n_unique);
      agree.eps = eps;
      report.rows.push_back(agree);
    }

    // Closed-form MSE assembly; only defined when mu^2 > eps'.
    const BoundInputs b(cfg.N, cfg.K, cfg.M, cfg.sigma_n_sq, eps, 0.0, cfg.mu * cfg.mu,
                        s_norm_mean);
    if (b.mu_sq > b.eps_prime) {
      MetricRow ub;
      ub.metric = "mse_upper_bound_asymptotic";
      ub.value = mse_upper_bound(b);
      ub.eps = eps;
      report.rows.push_back(ub);
    }
  }

  const auto slse_m = detail::moments(slse_err);
  MetricRow slse_row;
  slse_row.metric = "mse_slse";
  slse_row.value = slse_m.mean;
  slse_row.std_err = std::sqrt(slse_m.variance / static_cast<double>(cfg.trials));
  slse_row.bound = crb_mean;
  slse_row.bound_name = "crb_s";
  report.rows.push_back(slse_row);

  MetricRow crb_row;
  crb_row.metric = "crb_s";
  crb_row.value = crb_mean;
  report.rows.push_back(crb_row);
  MetricRow crb_asym_row;
  crb_asym_row.metric = "crb_s_asymptotic";
  crb_asym_row.value = crb_s_asymptotic(cfg.alpha(), cfg.sigma_n_sq);
  report.rows.push_back(crb_asym_row);

  std::uint64_t skipped_total = 0;
  for (std::uint64_t v : rank_skipped) skipped_total += v;
  MetricRow skip_row;
  skip_row.metric = "count_rank_deficient_skipped";
  skip_row.value = static_cast<double>(skipped_total);
  report.rows.push_back(skip_row);

  report.wall_seconds = clock.seconds();
  return report;
}

struct ConcentrationConfig {
  std::vector<int> n_list = {64, 256, 1024};
  int M = 8;
  double eps = 0.5;
  long long trials = 1000;
  int gram_seeds = 20;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_list.empty()) throw std::invalid_argument("concentration: at least one N required");
    for (int n : n_list)
      if (n < 1) throw std::invalid_argument("concentration: every N must be >= 1");
    if (M < 2) throw std::invalid_argument("concentration: M must be >= 2");
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("concentration: eps must lie in (0,1)");
    if (trials < 1) throw std::invalid_argument("concentration: trials must be >= 1");
    if (gram_seeds < 1) throw std::invalid_argument("concentration: gram_seeds must be >= 1");
  }
};

// Tabulates the concentration violation rate (x = all-ones) and column
// Gram statistics across the N grid, for all three ensembles.
inline ExperimentReport run_concentration(const ConcentrationConfig& cfg) {
  cfg.validate();
  detail::WallClock clock;
  ExperimentReport report;
  report.ctx.M = cfg.M;
  report.ctx.trials = cfg.trials;
  report.ctx.seed = cfg.seed;
  report.config_rows.emplace_back("config.eps", cfg.eps);
  report.config_rows.emplace_back("config.gram_seeds", static_cast<double>(cfg.gram_seeds));
  for (std::size_t i = 0; i < cfg.n_list.size(); ++i)
    report.config_rows.emplace_back("config.N_" + std::to_string(i),
                                    static_cast<double>(cfg.n_list[i]));

  const Vector x = Vector::Ones(cfg.M);
  const EnsembleKind kinds[] = {EnsembleKind::GaussianUnit, EnsembleKind::Rademacher,
                                EnsembleKind::SparseTernary};
  for (EnsembleKind kind : kinds) {
    const std::uint64_t kind_key =
        rng::substream(cfg.seed, static_cast<std::uint64_t>(static_cast<int>(kind)));
    for (int n : cfg.n_list) {
      const std::uint64_t point_key = rng::substream(kind_key, static_cast<std::uint64_t>(n));
      const double rate = concentration_violation_rate(kind, n, cfg.M, x, cfg.eps,
                                                       cfg.trials, rng::substream(point_key, 0));
      MetricRow row;
      row.metric = std::string("p_violation_") + to_string(kind);
      row.value = rate;
      row.std_err = std_error_of_proportion(rate, cfg.trials);
      row.eps = cfg.eps;
      row.n_override = n;
      report.rows.push_back(row);

      std::vector<double> offdiag(static_cast<std::size_t>(cfg.gram_seeds));
      double diag_min = std::numeric_limits<double>::infinity();
      double diag_max = -std::numeric_limits<double>::infinity();
      const std::uint64_t gram_key = rng::substream(point_key, 1);
      for (int g = 0; g < cfg.gram_seeds; ++g) {
        const MeasurementMatrix A =
            sample_matrix(kind, n, cfg.M, rng::substream(gram_key, static_cast<std::uint64_t>(g)));
        const GramStats stats = column_gram_stats(A);
        offdiag[static_cast<std::size_t>(g)] = stats.max_offdiag;
        diag_min = std::min(diag_min, stats.diag_min);
        diag_max = std::max(diag_max, stats.diag_max);
      }
      std::sort(offdiag.begin(), offdiag.end());
      const double median = cfg.gram_seeds % 2 == 1
                                ? offdiag[static_cast<std::size_t>(cfg.gram_seeds / 2)]
                                : 0.5 * (offdiag[static_cast<std::size_t>(cfg.gram_seeds / 2 - 1)] +
                                         offdiag[static_cast<std::size_t>(cfg.gram_seeds / 2)]);
      auto push = [&](const std::string& name, double value) {
        MetricRow r;
        r.metric = name + "_" + to_string(kind);
        r.value = value;
        r.n_override = n;
        report.rows.push_back(r);
      };
      push("gram_max_offdiag_median", median);
      push("gram_diag_min", diag_min);
      push("gram_diag_max", diag_max);
    }
  }
  report.wall_seconds = clock.seconds();
  return report;
}

}  // namespace jtcs
