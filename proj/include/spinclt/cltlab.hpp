#pragma once

// Experiment orchestration: run a sampling plan over an increasing window
// grid, collect per-replicate score totals, and check the limit behaviour —
// variance scaling with window volume, a direct covariance-sum estimate of
// the limiting variance, univariate normality with a Monte-Carlo calibrated
// null table, the multivariate covariance matrix, clustering decay fits, and
// a cumulant scaling probe.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spinclt/cayley.hpp"
#include "spinclt/moments.hpp"
#include "spinclt/rng.hpp"
#include "spinclt/scores.hpp"
#include "spinclt/spin.hpp"
#include "spinclt/stats.hpp"
#include "spinclt/version.hpp"

namespace spinclt {

class ZeroVarianceError : public std::runtime_error {
 public:
  explicit ZeroVarianceError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Plans and raw results.

struct PlanThresholds {
  double ks_alpha = 0.01;       // normality rejection level
  double min_r_squared = 0.98;  // variance-fit quality gate
};

struct ExperimentPlan {
  ModelSpec model = ModelSpec::iid(0.5);
  GroupKind graph = GroupKind::integer_lattice(2);
  std::vector<int> n_grid;        // strictly increasing window radii
  std::size_t replicates = 50;    // R per grid point
  std::vector<ScoreFunction> scores;
  std::uint64_t master_seed = kDefaultMasterSeed;
  PlanThresholds thresholds;
};

inline void validate(const ExperimentPlan& plan) {
  if (plan.n_grid.empty())
    throw std::invalid_argument("plan.n_grid: empty");
  for (std::size_t i = 0; i < plan.n_grid.size(); ++i) {
    if (plan.n_grid[i] < 0)
      throw std::invalid_argument("plan.n_grid: negative radius");
    if (i > 0 && plan.n_grid[i] <= plan.n_grid[i - 1])
      throw std::invalid_argument("plan.n_grid: must be strictly increasing");
  }
  if (plan.replicates < 50)
    throw std::invalid_argument("plan.replicates: need R >= 50");
  if (plan.scores.empty())
    throw std::invalid_argument("plan.scores: empty");
  for (const auto& s : plan.scores)
    if (!s.value || s.name.empty())
      throw std::invalid_argument("plan.scores: score missing value or name");
}

struct CellSummary {
  int n = 0;
  std::size_t w = 0;
  std::string score;
  std::vector<double> h;  // replicate totals, replicate order
  double mean_h = 0.0;
  double var_h = 0.0;
  // Share of occupied sites whose stabilization ball spilled the window.
  double spill_fraction = 0.0;
};

struct ExperimentResult {
  ExperimentPlan plan;
  // n-major, score-minor: cells[ni * scores + si].
  std::vector<CellSummary> cells;

  const CellSummary& cell(std::size_t ni, std::size_t si) const {
    return cells.at(ni * plan.scores.size() + si);
  }
};

// Deterministic given the master seed: every replicate draws from the stream
// (kSample, n index, replicate), so the worker count only changes scheduling,
// never values; the reduction is ordered by (n, replicate, score).
inline ExperimentResult run(const ExperimentPlan& plan, std::size_t workers = 1) {
  validate(plan);
  if (workers == 0) throw std::invalid_argument("run: need >= 1 worker");

  ExperimentResult result;
  result.plan = plan;
  const std::size_t n_scores = plan.scores.size();
  const std::size_t reps = plan.replicates;
  SeedPolicy seeds{plan.master_seed};

  for (std::size_t ni = 0; ni < plan.n_grid.size(); ++ni) {
    WindowPtr window;
    std::optional<ModelSampler> sampler_slot;
    try {
      window = Window::make(plan.graph, plan.n_grid[ni]);
      sampler_slot.emplace(plan.model, window);
    } catch (const std::exception& e) {
      throw std::runtime_error("run: n=" + std::to_string(plan.n_grid[ni]) +
                               ": " + e.what());
    }
    const ModelSampler& sampler = *sampler_slot;

    // h_store[si][rep]; spills/occupied accumulated per replicate slot.
    std::vector<std::vector<double>> h_store(n_scores, std::vector<double>(reps, 0.0));
    std::vector<std::size_t> spilled(reps, 0), occupied(reps, 0);

    std::vector<std::thread> pool;
    std::mutex err_mutex;
    std::string first_error;
    const std::size_t team = std::min(workers, reps);
    auto work = [&](std::size_t worker) {
      for (std::size_t rep = worker; rep < reps; rep += team) {
        try {
          auto rng = seeds.stream(stream_tag::kSample, ni, rep);
          const auto cfg = sampler.sample(rng);
          occupied[rep] = cfg.count_occupied();
          for (std::size_t si = 0; si < n_scores; ++si) {
            const auto tm = total_mass(plan.scores[si], cfg);
            h_store[si][rep] = tm.value;
            if (si == 0) spilled[rep] = tm.radius_exceeds_window;
          }
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (first_error.empty())
            first_error = "run: n=" + std::to_string(plan.n_grid[ni]) +
                          " replicate=" + std::to_string(rep) + ": " + e.what();
        }
      }
    };
    if (team == 1) {
      work(0);
    } else {
      for (std::size_t t = 0; t < team; ++t) pool.emplace_back(work, t);
      for (auto& th : pool) th.join();
    }
    if (!first_error.empty()) throw std::runtime_error(first_error);

    double total_spill = 0.0, total_occ = 0.0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      total_spill += static_cast<double>(spilled[rep]);
      total_occ += static_cast<double>(occupied[rep]);
    }
    for (std::size_t si = 0; si < n_scores; ++si) {
      CellSummary cell;
      cell.n = plan.n_grid[ni];
      cell.w = window->w();
      cell.score = plan.scores[si].name;
      cell.h = std::move(h_store[si]);
      cell.mean_h = mean(cell.h);
      cell.var_h = reps >= 2 ? sample_variance(cell.h) : 0.0;
      cell.spill_fraction = total_occ > 0.0 ? total_spill / total_occ : 0.0;
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Variance scaling: Var(H_n) against w_n through the origin.

struct VarianceScalingFit {
  double slope = 0.0;
  double slope_se = 0.0;
  double r_squared = 0.0;
  std::vector<double> w;              // per-n window sizes
  std::vector<double> normalized;     // w_n^{-1} Var(H_n)
  std::vector<double> normalized_se;  // delta-method SE of each entry
};

namespace detail {

// SE of the sample variance: Var(s^2) ~ (m4 - m2^2) / R.
inline double variance_se(const std::vector<double>& xs) {
  const double m = mean(xs);
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = (x - m) * (x - m);
    m2 += d;
    m4 += d * d;
  }
  const double r = static_cast<double>(xs.size());
  m2 /= r;
  m4 /= r;
  return std::sqrt(std::max(m4 - m2 * m2, 0.0) / r);
}

}  // namespace detail

inline VarianceScalingFit variance_scaling_fit(const ExperimentResult& result,
                                               std::size_t score_index) {
  if (score_index >= result.plan.scores.size())
    throw std::invalid_argument("variance_scaling_fit: score index out of range");
  if (result.plan.n_grid.size() < 4)
    throw std::invalid_argument("variance_scaling_fit: need >= 4 grid points");

  VarianceScalingFit fit;
  std::vector<double> var;
  std::vector<double> var_se;
  for (std::size_t ni = 0; ni < result.plan.n_grid.size(); ++ni) {
    const auto& cell = result.cell(ni, score_index);
    const double wn = static_cast<double>(cell.w);
    fit.w.push_back(wn);
    var.push_back(cell.var_h);
    var_se.push_back(detail::variance_se(cell.h));
    fit.normalized.push_back(cell.var_h / wn);
    fit.normalized_se.push_back(var_se.back() / wn);
  }
  const auto line = origin_fit(fit.w, var);
  fit.slope = line.slope;
  fit.r_squared = line.r_squared;
  // slope = sum w_i y_i / sum w_i^2, so SE^2 = sum w_i^2 SE_i^2 / (sum w_i^2)^2.
  double sxx = 0.0, sse = 0.0;
  for (std::size_t i = 0; i < fit.w.size(); ++i) {
    sxx += fit.w[i] * fit.w[i];
    sse += fit.w[i] * fit.w[i] * var_se[i] * var_se[i];
  }
  fit.slope_se = std::sqrt(sse) / sxx;
  return fit;
}

// ---------------------------------------------------------------------------
// Direct estimate of the limiting variance: the covariance sum
// sigma^2 = sum_z Cov(xi(O,P), xi(z,P)) truncated at |z| <= rho_max, computed
// on a window where every z keeps rho_max of margin to the boundary.

struct SigmaSquaredReport {
  double value = 0.0;
  double se = 0.0;
  int rho_max = 0;
  int window_n = 0;
  std::size_t replicates = 0;
  // Partial covariance sums by shell |z| = d, d = 0..rho_max.
  std::vector<double> per_distance;
  // Geometric tail bound from a fitted decay of the gap profile (NaN when no
  // fit is supplied or the fitted slope is not negative).
  double tail_bound = std::numeric_limits<double>::quiet_NaN();
};

inline SigmaSquaredReport sigma_squared_direct(
    const ModelSpec& spec, GroupKind kind, const ScoreFunction& score,
    int rho_max, int window_n, std::size_t replicates,
    std::uint64_t master_seed, std::size_t bootstrap_resamples = 200,
    std::optional<LineFit> decay = std::nullopt) {
  if (rho_max < 0) throw std::invalid_argument("sigma_squared_direct: rho_max < 0");
  if (window_n < 2 * rho_max)
    throw std::invalid_argument(
        "sigma_squared_direct: window margin violated (need n >= 2 rho_max)");
  if (replicates < 4)
    throw std::invalid_argument("sigma_squared_direct: need >= 4 replicates");

  const auto window = Window::make(kind, window_n);
  const ModelSampler sampler(spec, window);
  SeedPolicy seeds{master_seed};

  std::vector<int> zs;  // all sites with |z| <= rho_max (origin included)
  for (int i = 0; i < static_cast<int>(window->w()); ++i)
    if (window->center_distance(i) <= rho_max) zs.push_back(i);

  const int origin = window->index_of(identity(kind));
  std::vector<double> a(replicates, 0.0);  // xi(O, P)
  std::vector<std::vector<double>> shell_sum(
      static_cast<std::size_t>(rho_max) + 1, std::vector<double>(replicates, 0.0));
  for (std::size_t rep = 0; rep < replicates; ++rep) {
    auto rng = seeds.stream(stream_tag::kSample, 0, rep);
    const auto cfg = sampler.sample(rng);
    for (int z : zs) {
      if (!cfg.bit(z)) continue;  // scores vanish off the support
      const double v = score.value(window->site(z), cfg);
      shell_sum[static_cast<std::size_t>(window->center_distance(z))][rep] += v;
      if (z == origin) a[rep] = v;
    }
  }

  SigmaSquaredReport rep;
  rep.rho_max = rho_max;
  rep.window_n = window_n;
  rep.replicates = replicates;
  std::vector<double> s(replicates, 0.0);  // sum over all z
  for (int d = 0; d <= rho_max; ++d) {
    rep.per_distance.push_back(sample_covariance(a, shell_sum[static_cast<std::size_t>(d)]));
    for (std::size_t r = 0; r < replicates; ++r)
      s[r] += shell_sum[static_cast<std::size_t>(d)][r];
  }
  rep.value = sample_covariance(a, s);

  // Paired bootstrap over replicate indices.
  auto boot_rng = seeds.stream(stream_tag::kBootstrap, 0, 0);
  std::vector<double> boot(bootstrap_resamples, 0.0);
  std::vector<double> ra(replicates), rs(replicates);
  for (std::size_t b = 0; b < bootstrap_resamples; ++b) {
    for (std::size_t r = 0; r < replicates; ++r) {
      const std::size_t j = static_cast<std::size_t>(boot_rng.uniform_below(replicates));
      ra[r] = a[j];
      rs[r] = s[j];
    }
    boot[b] = sample_covariance(ra, rs);
  }
  rep.se = bootstrap_resamples >= 2 ? std::sqrt(sample_variance(boot)) : 0.0;

  // Tail bound: sum over shells s > rho_max of |shell| * exp(fit at s),
  // only meaningful for a genuinely decaying fit on a lattice graph.
  if (decay && decay->slope < 0.0 && kind.tag != GroupKind::Tag::Heisenberg3) {
    double tail = 0.0;
    const int dim = kind.dim;
    for (int d = rho_max + 1; d <= rho_max + 200; ++d) {
      const double shell =
          static_cast<double>(lattice_ball_size(dim, d) - lattice_ball_size(dim, d - 1));
      tail += shell * std::exp(decay->intercept + decay->slope * d);
    }
    rep.tail_bound = tail;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Normality of standardized values.  The sample is standardized by its own
// mean and SD, so the Kolmogorov-Smirnov null is of Lilliefors type: the
// p-value is calibrated by Monte Carlo against exact-normal samples of the
// same size (table cached per size), and the asymptotic Kolmogorov p-value
// is reported for reference only.

struct NormalityReport {
  double ks = 0.0;
  double p_value = 0.0;       // Monte-Carlo calibrated (Lilliefors-style)
  double p_asymptotic = 0.0;  // reference only: valid for a fixed null
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  std::size_t sample_size = 0;
  std::size_t null_table_size = 0;
};

namespace detail {

inline double standardized_ks(std::vector<double> xs) {
  const double m = mean(xs);
  const double sd = std::sqrt(sample_variance(xs));
  if (!(sd > 0.0)) throw ZeroVarianceError("normality_test: zero variance");
  for (auto& x : xs) x = (x - m) / sd;
  return ks_statistic_standard_normal(xs);
}

inline const std::vector<double>& null_ks_table(std::size_t size,
                                                std::size_t null_samples,
                                                std::uint64_t table_seed) {
  static std::mutex mutex;
  static std::map<std::tuple<std::size_t, std::size_t, std::uint64_t>,
                  std::vector<double>>
      cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto key = std::make_tuple(size, null_samples, table_seed);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  SeedPolicy seeds{table_seed};
  std::vector<double> table;
  table.reserve(null_samples);
  std::vector<double> draw(size);
  for (std::size_t t = 0; t < null_samples; ++t) {
    auto rng = seeds.stream(stream_tag::kNullTable, size, t);
    for (auto& x : draw) x = rng.normal();
    table.push_back(standardized_ks(draw));
  }
  std::sort(table.begin(), table.end());
  return cache.emplace(std::move(key), std::move(table)).first->second;
}

}  // namespace detail

inline NormalityReport normality_test(const std::vector<double>& values,
                                      std::size_t null_samples = 2000,
                                      std::uint64_t table_seed = kDefaultMasterSeed) {
  if (values.size() < 100)
    throw std::invalid_argument("normality_test: need >= 100 values");
  if (null_samples < 100)
    throw std::invalid_argument("normality_test: need >= 100 null samples");

  NormalityReport rep;
  rep.sample_size = values.size();
  rep.ks = detail::standardized_ks(values);
  rep.skewness = skewness(values);
  rep.excess_kurtosis = excess_kurtosis(values);
  rep.p_asymptotic = kolmogorov_asymptotic_p(rep.ks, values.size());

  const auto& table = detail::null_ks_table(values.size(), null_samples, table_seed);
  rep.null_table_size = table.size();
  const auto ge = std::lower_bound(table.begin(), table.end(), rep.ks);
  const std::size_t exceed = static_cast<std::size_t>(table.end() - ge);
  rep.p_value = static_cast<double>(exceed + 1) / static_cast<double>(table.size() + 1);
  return rep;
}

// ---------------------------------------------------------------------------
// Multivariate covariance at the largest grid radius: w_n^{-1} times the
// sample covariance matrix of the score totals, with per-entry SEs and the
// minimum eigenvalue.

struct CovarianceReport {
  int n = 0;
  std::size_t w = 0;
  std::vector<std::vector<double>> sigma;  // k x k, symmetric
  std::vector<std::vector<double>> se;
  double min_eigenvalue = 0.0;
};

inline CovarianceReport multivariate_covariance(const ExperimentResult& result) {
  const std::size_t k = result.plan.scores.size();
  if (k < 2)
    throw std::invalid_argument("multivariate_covariance: need >= 2 scores");
  const std::size_t ni = result.plan.n_grid.size() - 1;
  const std::size_t reps = result.plan.replicates;

  CovarianceReport rep;
  rep.n = result.cell(ni, 0).n;
  rep.w = result.cell(ni, 0).w;
  rep.sigma.assign(k, std::vector<double>(k, 0.0));
  rep.se.assign(k, std::vector<double>(k, 0.0));

  const double wn = static_cast<double>(rep.w);
  const double r = static_cast<double>(reps);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& xi = result.cell(ni, i).h;
    const double mi = result.cell(ni, i).mean_h;
    for (std::size_t j = i; j < k; ++j) {
      const auto& xj = result.cell(ni, j).h;
      const double mj = result.cell(ni, j).mean_h;
      const double cov = sample_covariance(xi, xj);
      // Delta-method SE: Var(cov_hat) ~ (m22 - cov^2) / R.
      double m22 = 0.0;
      for (std::size_t t = 0; t < reps; ++t)
        m22 += (xi[t] - mi) * (xi[t] - mi) * (xj[t] - mj) * (xj[t] - mj);
      m22 /= r;
      const double se = std::sqrt(std::max(m22 - cov * cov, 0.0) / r);
      rep.sigma[i][j] = rep.sigma[j][i] = cov / wn;
      rep.se[i][j] = rep.se[j][i] = se / wn;
    }
  }

  Eigen::MatrixXd m(static_cast<int>(k), static_cast<int>(k));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      m(static_cast<int>(i), static_cast<int>(j)) = rep.sigma[i][j];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  rep.min_eigenvalue = eig.eigenvalues().minCoeff();
  return rep;
}

// ---------------------------------------------------------------------------
// Clustering decay fit.  Bins whose |gap| fails to clear twice its SE sit at
// the noise floor and are excluded; with fewer than four usable bins the
// outcome is kInsufficientSignal (reported, not fatal) while the fit values
// are still computed whenever at least two usable bins remain.  The log of
// |gap| is fitted against s and against s^b over a small exponent grid.

enum class DecayFitStatus { kOk, kInsufficientSignal };

struct DecayFit {
  DecayFitStatus status = DecayFitStatus::kInsufficientSignal;
  double slope = 0.0;      // d log|gap| / ds
  double intercept = 0.0;
  double r_squared = 0.0;
  double b_hat = 1.0;      // best stretched exponent on the grid
  double b_r_squared = 0.0;
  std::size_t usable_bins = 0;
};

inline DecayFit clustering_decay_fit(const std::vector<double>& distances,
                                     const std::vector<double>& gaps,
                                     const std::vector<double>& ses) {
  if (distances.size() != gaps.size() || gaps.size() != ses.size())
    throw std::invalid_argument("clustering_decay_fit: length mismatch");
  if (distances.empty())
    throw std::invalid_argument("clustering_decay_fit: empty input");
  for (double d : distances)
    if (!(d > 0.0))
      throw std::invalid_argument("clustering_decay_fit: distances must be > 0");

  std::vector<double> x, y, wgt;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    const double g = std::abs(gaps[i]);
    if (!(g > 2.0 * ses[i]) || g <= 0.0) continue;  // noise floor
    x.push_back(distances[i]);
    y.push_back(std::log(g));
    // Weight by inverse variance of log|gap|: Var(log g) ~ (se/g)^2.
    const double rel = ses[i] > 0.0 ? ses[i] / g : 0.0;
    wgt.push_back(1.0 / std::max(rel * rel, 1e-6));
  }

  DecayFit fit;
  fit.usable_bins = x.size();
  fit.status = x.size() >= 4 ? DecayFitStatus::kOk : DecayFitStatus::kInsufficientSignal;
  if (x.size() < 2) return fit;  // nothing to fit

  const auto line = linear_fit(x, y, wgt);
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.r_squared = line.r_squared;

  const double b_grid[] = {0.5, 0.75, 1.0, 1.25, 1.5, 2.0};
  std::vector<double> xb(x.size());
  // Start from b = 1 so ties keep the plain exponential.
  fit.b_hat = 1.0;
  fit.b_r_squared = line.r_squared;
  for (double b : b_grid) {
    if (b == 1.0) continue;
    for (std::size_t i = 0; i < x.size(); ++i) xb[i] = std::pow(x[i], b);
    const auto lb = linear_fit(xb, y, wgt);
    if (lb.r_squared > fit.b_r_squared + 1e-12) {
      fit.b_hat = b;
      fit.b_r_squared = lb.r_squared;
    }
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Cumulant scaling probe: the k-statistics of the replicate totals divided by
// w_n should stay of the same order across the grid.

struct CumulantScalingProbe {
  std::vector<double> s3_over_w;
  std::vector<double> s4_over_w;
  double ratio3 = 0.0;  // max/min of |S_3|/w over the grid
  double ratio4 = 0.0;
};

inline CumulantScalingProbe cumulant_scaling_probe(const ExperimentResult& result,
                                                   std::size_t score_index) {
  if (score_index >= result.plan.scores.size())
    throw std::invalid_argument("cumulant_scaling_probe: score index out of range");
  CumulantScalingProbe probe;
  for (std::size_t ni = 0; ni < result.plan.n_grid.size(); ++ni) {
    const auto& cell = result.cell(ni, score_index);
    const double wn = static_cast<double>(cell.w);
    probe.s3_over_w.push_back(k_statistic(cell.h, 3) / wn);
    probe.s4_over_w.push_back(k_statistic(cell.h, 4) / wn);
  }
  auto ratio = [](const std::vector<double>& v) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double s : v) {
      lo = std::min(lo, std::abs(s));
      hi = std::max(hi, std::abs(s));
    }
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  };
  probe.ratio3 = ratio(probe.s3_over_w);
  probe.ratio4 = ratio(probe.s4_over_w);
  return probe;
}

}  // namespace spinclt
