#pragma once
// Moment and cumulant machinery for finite spin fields: set partitions,
// moment <-> cumulant transforms, unbiased sample cumulants, Monte-Carlo
// mixed moments, joint cumulants of indicator tuples, occupancy-moment
// identities, an exact finite-difference expansion check, void-probability
// probes, pairwise clustering gaps, and metric splitting of site tuples.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spinclt/cayley.hpp"
#include "spinclt/rng.hpp"
#include "spinclt/spin.hpp"
#include "spinclt/stats.hpp"

namespace spinclt {

// ---------------------------------------------------------------------------
// Set partitions of {0..k-1} as restricted growth strings: rgs[i] is the
// block of element i, rgs[0] = 0 and rgs[i] <= 1 + max(rgs[0..i-1]).
// Enumeration order is lexicographic in the growth string.

inline constexpr int kMaxPartitionOrder = 10;

inline std::vector<std::vector<int>> set_partitions(int k) {
  if (k < 1 || k > kMaxPartitionOrder)
    throw std::invalid_argument("set_partitions: order must be 1.." +
                                std::to_string(kMaxPartitionOrder));
  std::vector<std::vector<int>> out;
  std::vector<int> rgs(static_cast<std::size_t>(k), 0);
  for (;;) {
    out.push_back(rgs);
    int i = k - 1;
    for (; i > 0; --i) {
      int mx = 0;
      for (int j = 0; j < i; ++j) mx = std::max(mx, rgs[static_cast<std::size_t>(j)]);
      if (rgs[static_cast<std::size_t>(i)] <= mx) break;  // can still grow here
    }
    if (i == 0) break;
    ++rgs[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) rgs[static_cast<std::size_t>(j)] = 0;
  }
  return out;
}

// Bell numbers by the Bell triangle; exact in 64 bits through k = 25.
inline std::uint64_t bell_number(int k) {
  if (k < 0 || k > 25)
    throw std::invalid_argument("bell_number: order must be 0..25");
  if (k == 0) return 1;
  std::vector<std::uint64_t> row = {1};
  for (int i = 2; i <= k; ++i) {
    std::vector<std::uint64_t> next;
    next.reserve(row.size() + 1);
    next.push_back(row.back());
    for (std::size_t j = 0; j < row.size(); ++j) next.push_back(next[j] + row[j]);
    row = std::move(next);
  }
  return row.back();
}

// ---------------------------------------------------------------------------
// Moment <-> cumulant transforms.  moments[j-1] = E X^j (raw, about zero),
// cumulants[j-1] = S_j.  The defining closed form sums over set partitions,
//   S_k = sum_gamma (-1)^{|gamma|-1} (|gamma|-1)! prod_{B in gamma} M_{|B|},
// but both directions are computed by the equivalent triangular recursion
//   M_k = sum_{j=1}^{k} C(k-1, j-1) S_j M_{k-j},  M_0 = 1,
// which is exact and O(k^2).

inline constexpr int kMaxTransformOrder = 16;

namespace detail {

inline std::vector<std::vector<double>> binomial_table(int n) {
  std::vector<std::vector<double>> c(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    c[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(i) + 1, 1.0);
    for (int j = 1; j < i; ++j)
      c[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          c[static_cast<std::size_t>(i) - 1][static_cast<std::size_t>(j) - 1] +
          c[static_cast<std::size_t>(i) - 1][static_cast<std::size_t>(j)];
  }
  return c;
}

inline void check_transform_order(std::size_t k, const char* who) {
  if (k == 0 || k > static_cast<std::size_t>(kMaxTransformOrder))
    throw std::invalid_argument(std::string(who) + ": need 1.." +
                                std::to_string(kMaxTransformOrder) + " orders");
}

}  // namespace detail

inline std::vector<double> moments_to_cumulants(const std::vector<double>& moments) {
  detail::check_transform_order(moments.size(), "moments_to_cumulants");
  const int k = static_cast<int>(moments.size());
  const auto c = detail::binomial_table(k);
  std::vector<double> s(moments.size(), 0.0);
  for (int m = 1; m <= k; ++m) {
    double rest = 0.0;
    for (int j = 1; j < m; ++j)
      rest += c[static_cast<std::size_t>(m) - 1][static_cast<std::size_t>(j) - 1] *
              s[static_cast<std::size_t>(j) - 1] *
              moments[static_cast<std::size_t>(m - j) - 1];
    s[static_cast<std::size_t>(m) - 1] = moments[static_cast<std::size_t>(m) - 1] - rest;
  }
  return s;
}

inline std::vector<double> cumulants_to_moments(const std::vector<double>& cumulants) {
  detail::check_transform_order(cumulants.size(), "cumulants_to_moments");
  const int k = static_cast<int>(cumulants.size());
  const auto c = detail::binomial_table(k);
  std::vector<double> m(cumulants.size(), 0.0);
  for (int ord = 1; ord <= k; ++ord) {
    double acc = cumulants[static_cast<std::size_t>(ord) - 1];  // j = ord term (M_0 = 1)
    for (int j = 1; j < ord; ++j)
      acc += c[static_cast<std::size_t>(ord) - 1][static_cast<std::size_t>(j) - 1] *
             cumulants[static_cast<std::size_t>(j) - 1] *
             m[static_cast<std::size_t>(ord - j) - 1];
    m[static_cast<std::size_t>(ord) - 1] = acc;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Unbiased sample cumulants (k-statistics), orders 1..4.

inline double k_statistic(const std::vector<double>& xs, int order) {
  if (order < 1 || order > 4)
    throw std::invalid_argument("k_statistic: order must be 1..4");
  const double n = static_cast<double>(xs.size());
  // k_r needs n >= r: the smallest denominator factor is then n - r + 1 >= 1.
  if (xs.size() < static_cast<std::size_t>(order))
    throw std::invalid_argument("k_statistic: sample too short for the order");
  const double mu = mean(xs);
  if (order == 1) return mu;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = x - mu;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  switch (order) {
    case 2:
      return n / (n - 1.0) * m2;
    case 3:
      return n * n / ((n - 1.0) * (n - 2.0)) * m3;
    default:
      return n * n * ((n + 1.0) * m4 - 3.0 * (n - 1.0) * m2 * m2) /
             ((n - 1.0) * (n - 2.0) * (n - 3.0));
  }
}

struct CumulantEstimate {
  double value = 0.0;
  double se = 0.0;
};

inline std::vector<CumulantEstimate> sample_cumulants(const std::vector<double>& xs,
                                                      int k_max,
                                                      std::size_t bootstrap_resamples,
                                                      RandomStream& rng) {
  if (k_max < 1 || k_max > 4)
    throw std::invalid_argument("sample_cumulants: k_max must be 1..4");
  std::vector<CumulantEstimate> out;
  for (int ord = 1; ord <= k_max; ++ord) {
    CumulantEstimate e;
    e.value = k_statistic(xs, ord);
    e.se = bootstrap_se(
        xs, [ord](const std::vector<double>& s) { return k_statistic(s, ord); },
        bootstrap_resamples, rng);
    out.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte-Carlo mixed moments m(x_1..x_l) = E prod_i sigma_{x_i}.

struct MomentEstimate {
  double value = 0.0;
  double se = 0.0;
  std::size_t replicates = 0;
};

namespace detail {

inline void check_site_tuple(const WindowPtr& window, const std::vector<int>& sites,
                             const char* who) {
  if (sites.empty()) throw std::invalid_argument(std::string(who) + ": empty tuple");
  auto sorted = sites;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument(std::string(who) + ": duplicate site");
  if (sorted.front() < 0 || sorted.back() >= static_cast<int>(window->w()))
    throw std::invalid_argument(std::string(who) + ": site index out of range");
}

}  // namespace detail

inline MomentEstimate estimate_correlation(const ModelSpec& spec,
                                           const WindowPtr& window,
                                           const std::vector<int>& sites,
                                           std::size_t replicates,
                                           std::uint64_t master_seed) {
  detail::check_site_tuple(window, sites, "estimate_correlation");
  if (replicates < 2)
    throw std::invalid_argument("estimate_correlation: need >= 2 replicates");
  ModelSampler sampler(spec, window);
  SeedPolicy seeds{master_seed};
  std::size_t hits = 0;
  for (std::size_t rep = 0; rep < replicates; ++rep) {
    auto rng = seeds.stream(stream_tag::kSample, 0, rep);
    const auto cfg = sampler.sample(rng);
    bool all = true;
    for (int i : sites) all &= cfg.bit(i);
    hits += all ? 1 : 0;
  }
  MomentEstimate e;
  e.replicates = replicates;
  e.value = static_cast<double>(hits) / static_cast<double>(replicates);
  e.se = binomial_se(e.value, replicates);
  return e;
}

// ---------------------------------------------------------------------------
// Joint cumulants of k indicator variables from a mixed-moment oracle over
// nonempty subset bitmasks of {0..k-1}.  Closed form sums over partitions;
// the recursion solves m(S) = sum_{B ni min(S)} u(B) m(S \ B) for u.

inline double ursell_from_moments(const std::function<double(std::uint32_t)>& moment,
                                  int k) {
  const auto parts = set_partitions(k);  // validates k
  double u = 0.0;
  std::vector<std::uint32_t> block_mask;
  for (const auto& rgs : parts) {
    const int blocks = 1 + *std::max_element(rgs.begin(), rgs.end());
    block_mask.assign(static_cast<std::size_t>(blocks), 0u);
    for (int i = 0; i < k; ++i)
      block_mask[static_cast<std::size_t>(rgs[static_cast<std::size_t>(i)])] |=
          (1u << i);
    double prod = 1.0;
    for (std::uint32_t bm : block_mask) prod *= moment(bm);
    double sign_fact = (blocks % 2 == 1) ? 1.0 : -1.0;  // (-1)^{blocks-1}
    for (int b = 2; b < blocks; ++b) sign_fact *= static_cast<double>(b);
    u += sign_fact * prod;
  }
  return u;
}

inline double ursell_recursive(const std::function<double(std::uint32_t)>& moment,
                               int k) {
  if (k < 1 || k > 20)
    throw std::invalid_argument("ursell_recursive: order must be 1..20");
  const std::uint32_t full = (1u << k) - 1u;
  std::vector<double> u(static_cast<std::size_t>(full) + 1,
                        std::numeric_limits<double>::quiet_NaN());
  // Masks in increasing order have their submasks already solved.
  for (std::uint32_t s = 1; s <= full; ++s) {
    const std::uint32_t low = s & (~s + 1u);
    double rest = 0.0;
    // Proper blocks B with low in B, B != s: B = low | t for t a proper
    // submask of s \ low (t = s \ low itself would give B = s).
    const std::uint32_t others = s ^ low;
    if (others != 0) {
      std::uint32_t t = (others - 1) & others;
      for (;;) {
        rest += u[t | low] * moment(s ^ (t | low));
        if (t == 0) break;
        t = (t - 1) & others;
      }
    }
    u[s] = moment(s) - rest;
  }
  return u[full];
}

// ---------------------------------------------------------------------------
// Occupancy moments.  With H = sum_x sigma_x over w sites and sigma_x an
// indicator, grouping the k-fold site sum by the partition of positions into
// equal-value classes gives
//   E H^k = sum_{p=1}^{k} S2(k,p) * sum over ordered p-tuples of distinct
//           sites of m(tuple)
//         = sum_p S2(k,p) * p! * sum over p-subsets of m(subset),
// with S2 the Stirling partition numbers.  (Joint cumulants do NOT satisfy
// the same display with u in place of m: repeated-argument cumulants are not
// determined by the distinct-site block alone.)

inline std::vector<std::vector<std::uint64_t>> stirling_second_table(int k_max) {
  if (k_max < 1 || k_max > 20)
    throw std::invalid_argument("stirling_second_table: k_max must be 1..20");
  std::vector<std::vector<std::uint64_t>> s2(static_cast<std::size_t>(k_max) + 1);
  for (int n = 0; n <= k_max; ++n) {
    s2[static_cast<std::size_t>(n)].assign(static_cast<std::size_t>(n) + 1, 0);
    s2[static_cast<std::size_t>(n)][0] = (n == 0) ? 1 : 0;
    for (int p = 1; p <= n; ++p) {
      const std::uint64_t same =
          (p < n) ? s2[static_cast<std::size_t>(n) - 1][static_cast<std::size_t>(p)]
                  : 0;
      s2[static_cast<std::size_t>(n)][static_cast<std::size_t>(p)] =
          static_cast<std::uint64_t>(p) * same +
          s2[static_cast<std::size_t>(n) - 1][static_cast<std::size_t>(p) - 1];
    }
  }
  return s2;
}

// moment() receives a strictly increasing site-index vector and must be
// symmetric in its arguments.  Exact given an exact oracle.
inline double occupancy_moment_from_correlations(
    const std::function<double(const std::vector<int>&)>& moment,
    std::size_t site_count, int k) {
  if (k < 1 || k > 12)
    throw std::invalid_argument("occupancy_moment_from_correlations: k must be 1..12");
  if (site_count == 0)
    throw std::invalid_argument("occupancy_moment_from_correlations: no sites");
  const auto s2 = stirling_second_table(k);
  const int w = static_cast<int>(site_count);
  // Resource guard: sum over p of C(w,p) subset visits.
  double budget = 0.0;
  for (int p = 1; p <= std::min(k, w); ++p) {
    double c = 1.0;
    for (int i = 0; i < p; ++i) c = c * static_cast<double>(w - i) / (i + 1.0);
    budget += c;
  }
  if (budget > 5e6)
    throw ResourceLimitError(
        "occupancy_moment_from_correlations: too many subsets; shrink the window");

  double total = 0.0;
  std::vector<int> subset;
  for (int p = 1; p <= std::min(k, w); ++p) {
    double fact = 1.0;
    for (int i = 2; i <= p; ++i) fact *= static_cast<double>(i);
    double tier = 0.0;
    subset.assign(static_cast<std::size_t>(p), 0);
    for (int i = 0; i < p; ++i) subset[static_cast<std::size_t>(i)] = i;
    for (;;) {
      tier += moment(subset);
      // Next p-combination of {0..w-1} in lexicographic order.
      int i = p - 1;
      while (i >= 0 && subset[static_cast<std::size_t>(i)] == w - p + i) --i;
      if (i < 0) break;
      ++subset[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < p; ++j)
        subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j) - 1] + 1;
    }
    total += static_cast<double>(s2[static_cast<std::size_t>(k)]
                                   [static_cast<std::size_t>(p)]) *
             fact * tier;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Finite difference expansion over a window.  The l-fold difference of a
// functional psi at the void configuration along a tuple T is
//   D psi(T) = sum_{J subseteq T} (-1)^{|T \ J|} psi(mu_J),
// mu_J the configuration supported exactly on J.  For any law of the spin
// field on a finite window,
//   E psi(P) = sum_{T subseteq W} D psi(T) * m(T),     m(emptyset) = 1,
// with m the mixed moment of the tuple: expanding psi around the void
// configuration and swapping the (finite) sums.  For product Bernoulli(p)
// with dyadic p both sides are exactly representable, so the check below is
// a machine-precision identity rather than a statistical test.

inline double fme_difference(
    const std::function<double(const SpinConfiguration&)>& psi,
    const WindowPtr& window, const std::vector<int>& tuple) {
  if (!tuple.empty()) detail::check_site_tuple(window, tuple, "fme_difference");
  if (tuple.size() > 20)
    throw std::invalid_argument("fme_difference: tuple too long");
  const std::uint32_t full = (1u << tuple.size()) - 1u;
  double acc = 0.0;
  SpinConfiguration cfg(window);
  for (std::uint32_t j = 0;; ++j) {
    for (std::size_t i = 0; i < tuple.size(); ++i)
      cfg.set_bit(tuple[i], (j >> i) & 1u);
    const int missing =
        static_cast<int>(tuple.size()) - std::popcount(j);
    acc += ((missing % 2) ? -1.0 : 1.0) * psi(cfg);
    if (j == full) break;
  }
  return acc;
}

struct FmeCheckResult {
  double lhs = 0.0;       // E psi by full enumeration of the product law
  double rhs = 0.0;       // sum_T D psi(T) p^{|T|}
  double abs_error = 0.0;
  std::vector<double> order_contributions;  // rhs restricted to |T| = l
};

inline FmeCheckResult fme_expansion_check(
    const std::function<double(const SpinConfiguration&)>& psi, double p,
    const WindowPtr& window) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("fme_expansion_check: p must be in [0,1]");
  const std::size_t w = window->w();
  if (w > 20)
    throw ResourceLimitError(
        "fme_expansion_check: window has more than 20 sites");

  const std::size_t count = std::size_t{1} << w;
  std::vector<double> f(count);
  SpinConfiguration cfg(window);
  for (std::size_t mask = 0; mask < count; ++mask) {
    for (std::size_t i = 0; i < w; ++i)
      cfg.set_bit(static_cast<int>(i), (mask >> i) & 1u);
    f[mask] = psi(cfg);
  }

  // Exact expectation under the product law.
  std::vector<double> pow_p(w + 1, 1.0), pow_q(w + 1, 1.0);
  for (std::size_t i = 1; i <= w; ++i) {
    pow_p[i] = pow_p[i - 1] * p;
    pow_q[i] = pow_q[i - 1] * (1.0 - p);
  }
  FmeCheckResult res;
  for (std::size_t mask = 0; mask < count; ++mask) {
    const std::size_t pop = static_cast<std::size_t>(std::popcount(mask));
    res.lhs += f[mask] * pow_p[pop] * pow_q[w - pop];
  }

  // In-place subset difference (Moebius) transform: f[T] becomes D psi(T).
  for (std::size_t b = 0; b < w; ++b) {
    const std::size_t bit = std::size_t{1} << b;
    for (std::size_t mask = 0; mask < count; ++mask)
      if (mask & bit) f[mask] -= f[mask ^ bit];
  }

  res.order_contributions.assign(w + 1, 0.0);
  for (std::size_t mask = 0; mask < count; ++mask) {
    const std::size_t pop = static_cast<std::size_t>(std::popcount(mask));
    res.order_contributions[pop] += f[mask] * pow_p[pop];
  }
  for (double c : res.order_contributions) res.rhs += c;
  res.abs_error = std::abs(res.lhs - res.rhs);
  return res;
}

// ---------------------------------------------------------------------------
// Void probabilities P(no occupied site within W_t of the center).

inline double void_probability_exact_iid(double p, const WindowPtr& window, int t) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("void_probability_exact_iid: p must be in [0,1]");
  if (t < 0 || t > window->n())
    throw std::invalid_argument("void_probability_exact_iid: t out of range");
  std::size_t w_t = 0;
  for (int i = 0; i < static_cast<int>(window->w()); ++i)
    if (window->center_distance(i) <= t) ++w_t;
  return std::pow(1.0 - p, static_cast<double>(w_t));
}

struct VoidProbeRow {
  int t = 0;
  double p_hat = 0.0;
  double se = 0.0;
};

struct VoidProbeReport {
  std::vector<VoidProbeRow> rows;
  std::size_t replicates = 0;
};

inline VoidProbeReport void_probability_probe(const ModelSpec& spec,
                                              const WindowPtr& window,
                                              const std::vector<int>& t_grid,
                                              std::size_t replicates,
                                              std::uint64_t master_seed) {
  if (t_grid.empty())
    throw std::invalid_argument("void_probability_probe: empty t grid");
  for (int t : t_grid)
    if (t < 0 || t > window->n())
      throw std::invalid_argument("void_probability_probe: t out of range");
  if (replicates < 1)
    throw std::invalid_argument("void_probability_probe: need replicates");

  ModelSampler sampler(spec, window);
  SeedPolicy seeds{master_seed};
  std::vector<std::size_t> hits(t_grid.size(), 0);
  for (std::size_t rep = 0; rep < replicates; ++rep) {
    auto rng = seeds.stream(stream_tag::kSample, 0, rep);
    const auto cfg = sampler.sample(rng);
    int min_cd = window->n() + 1;  // = infinity for this grid
    for (std::size_t i = 0; i < cfg.occ.size(); ++i)
      if (cfg.occ[i]) min_cd = std::min(min_cd, window->center_distance(static_cast<int>(i)));
    for (std::size_t ti = 0; ti < t_grid.size(); ++ti)
      if (min_cd > t_grid[ti]) ++hits[ti];
  }

  VoidProbeReport rep;
  rep.replicates = replicates;
  for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
    VoidProbeRow row;
    row.t = t_grid[ti];
    row.p_hat = static_cast<double>(hits[ti]) / static_cast<double>(replicates);
    row.se = binomial_se(row.p_hat, replicates);
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Clustering gap for two disjoint site tuples: m(A u B) - m(A) m(B), with a
// paired bootstrap SE and the minimum cross word distance.

struct ClusteringGapResult {
  double gap = 0.0;  // signed estimate; clustering bounds concern |gap|
  double se = 0.0;
  int separation = 0;
  MomentEstimate joint, first, second;
};

inline ClusteringGapResult clustering_gap(const ModelSpec& spec,
                                          const WindowPtr& window,
                                          const std::vector<int>& sites_a,
                                          const std::vector<int>& sites_b,
                                          std::size_t replicates,
                                          std::size_t bootstrap_resamples,
                                          std::uint64_t master_seed) {
  detail::check_site_tuple(window, sites_a, "clustering_gap");
  detail::check_site_tuple(window, sites_b, "clustering_gap");
  for (int a : sites_a)
    for (int b : sites_b)
      if (a == b) throw std::invalid_argument("clustering_gap: tuples overlap");
  if (replicates < 4)
    throw std::invalid_argument("clustering_gap: need >= 4 replicates");
  if (bootstrap_resamples < 2)
    throw std::invalid_argument("clustering_gap: need >= 2 bootstrap resamples");

  ModelSampler sampler(spec, window);
  SeedPolicy seeds{master_seed};
  std::vector<unsigned char> ind_a(replicates), ind_b(replicates);
  for (std::size_t rep = 0; rep < replicates; ++rep) {
    auto rng = seeds.stream(stream_tag::kSample, 0, rep);
    const auto cfg = sampler.sample(rng);
    bool a = true, b = true;
    for (int i : sites_a) a &= cfg.bit(i);
    for (int i : sites_b) b &= cfg.bit(i);
    ind_a[rep] = a ? 1 : 0;
    ind_b[rep] = b ? 1 : 0;
  }

  const auto gap_of = [&](const std::vector<std::size_t>& idx) {
    std::size_t na = 0, nb = 0, nab = 0;
    for (std::size_t r : idx) {
      na += ind_a[r];
      nb += ind_b[r];
      nab += static_cast<std::size_t>(ind_a[r] & ind_b[r]);
    }
    const double inv = 1.0 / static_cast<double>(idx.size());
    return static_cast<double>(nab) * inv -
           (static_cast<double>(na) * inv) * (static_cast<double>(nb) * inv);
  };

  std::vector<std::size_t> all(replicates);
  for (std::size_t r = 0; r < replicates; ++r) all[r] = r;

  ClusteringGapResult res;
  res.gap = gap_of(all);
  auto boot_rng = seeds.stream(stream_tag::kBootstrap, 0, 0);
  std::vector<double> boot(bootstrap_resamples);
  std::vector<std::size_t> idx(replicates);
  for (std::size_t b = 0; b < bootstrap_resamples; ++b) {
    for (std::size_t r = 0; r < replicates; ++r)
      idx[r] = static_cast<std::size_t>(boot_rng.uniform_below(replicates));
    boot[b] = gap_of(idx);
  }
  res.se = std::sqrt(sample_variance(boot));

  res.separation = std::numeric_limits<int>::max();
  for (int a : sites_a)
    for (int b : sites_b)
      res.separation = std::min(
          res.separation,
          distance(window->site(a), window->site(b), window->kind()));

  const auto fill = [&](const std::vector<unsigned char>& ind) {
    MomentEstimate e;
    e.replicates = replicates;
    std::size_t hits = 0;
    for (unsigned char v : ind) hits += v;
    e.value = static_cast<double>(hits) / static_cast<double>(replicates);
    e.se = binomial_se(e.value, replicates);
    return e;
  };
  res.first = fill(ind_a);
  res.second = fill(ind_b);
  std::vector<unsigned char> both(replicates);
  for (std::size_t r = 0; r < replicates; ++r) both[r] = ind_a[r] & ind_b[r];
  res.joint = fill(both);
  return res;
}

// ---------------------------------------------------------------------------
// Pair-averaged correlation gap by distance.  Replicates are consumed in
// independent (even, odd) couples: per couple and distance d,
//   g = pairmean_{d(x,y)=d} sigma_x sigma_y            (even replicate)
//     - pairmean (sigma_x^even sigma_y^odd + sigma_x^odd sigma_y^even) / 2,
// whose expectation is exactly mean_{pairs}[ m(x,y) - m(x) m(y) ]; the SE is
// the plain standard error over couples.

struct GapProfileRow {
  int distance = 0;
  double gap = 0.0;
  double se = 0.0;
  std::size_t pair_count = 0;
};

struct GapProfile {
  std::vector<GapProfileRow> rows;
  std::size_t replicates = 0;
};

inline GapProfile correlation_gap_profile(const ModelSpec& spec,
                                          const WindowPtr& window,
                                          const std::vector<int>& distances,
                                          std::size_t replicates, int margin,
                                          std::size_t max_pairs_per_distance,
                                          std::uint64_t master_seed) {
  if (distances.empty())
    throw std::invalid_argument("correlation_gap_profile: empty distance grid");
  if (replicates < 4 || replicates % 2 != 0)
    throw std::invalid_argument(
        "correlation_gap_profile: need an even replicate count >= 4");
  if (margin < 0 || margin > window->n())
    throw std::invalid_argument("correlation_gap_profile: bad margin");
  if (max_pairs_per_distance == 0)
    throw std::invalid_argument("correlation_gap_profile: max_pairs must be >= 1");

  // Interior sites and same-distance pair lists.
  std::vector<int> interior;
  for (int i = 0; i < static_cast<int>(window->w()); ++i)
    if (window->center_distance(i) <= window->n() - margin) interior.push_back(i);

  SeedPolicy seeds{master_seed};
  std::vector<std::vector<std::pair<int, int>>> pairs(distances.size());
  for (std::size_t di = 0; di < distances.size(); ++di) {
    const int d = distances[di];
    if (d < 1)
      throw std::invalid_argument("correlation_gap_profile: distances must be >= 1");
    for (std::size_t a = 0; a < interior.size(); ++a)
      for (std::size_t b = a + 1; b < interior.size(); ++b)
        if (distance(window->site(interior[a]), window->site(interior[b]),
                     window->kind()) == d)
          pairs[di].emplace_back(interior[a], interior[b]);
    if (pairs[di].empty())
      throw std::invalid_argument("correlation_gap_profile: no pairs at distance " +
                                  std::to_string(d));
    if (pairs[di].size() > max_pairs_per_distance) {
      // Deterministic subsample: Fisher-Yates prefix with a derived stream.
      auto pick = seeds.stream(stream_tag::kSiteSample, 0, di);
      for (std::size_t i = 0; i < max_pairs_per_distance; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(pick.uniform_below(pairs[di].size() - i));
        std::swap(pairs[di][i], pairs[di][j]);
      }
      pairs[di].resize(max_pairs_per_distance);
    }
  }

  ModelSampler sampler(spec, window);
  const std::size_t couples = replicates / 2;
  std::vector<std::vector<double>> g(distances.size(),
                                     std::vector<double>(couples, 0.0));
  for (std::size_t c = 0; c < couples; ++c) {
    auto rng_even = seeds.stream(stream_tag::kSample, 0, 2 * c);
    auto rng_odd = seeds.stream(stream_tag::kSample, 0, 2 * c + 1);
    const auto even = sampler.sample(rng_even);
    const auto odd = sampler.sample(rng_odd);
    for (std::size_t di = 0; di < distances.size(); ++di) {
      double same = 0.0, cross = 0.0;
      for (const auto& [x, y] : pairs[di]) {
        same += static_cast<double>(even.bit(x) & even.bit(y));
        cross += 0.5 * (static_cast<double>(even.bit(x) & odd.bit(y)) +
                        static_cast<double>(odd.bit(x) & even.bit(y)));
      }
      const double inv = 1.0 / static_cast<double>(pairs[di].size());
      g[di][c] = (same - cross) * inv;
    }
  }

  GapProfile out;
  out.replicates = replicates;
  for (std::size_t di = 0; di < distances.size(); ++di) {
    GapProfileRow row;
    row.distance = distances[di];
    row.pair_count = pairs[di].size();
    row.gap = mean(g[di]);
    row.se = std::sqrt(sample_variance(g[di]) / static_cast<double>(couples));
    out.rows.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diameter split: order the tuple by distance from a diametral endpoint and
// cut at the largest consecutive jump.  The cut gap is at least
// diameter / (|tuple| - 1), and by the triangle inequality every cross pair
// is at least the gap apart.

struct DiameterSplit {
  std::vector<int> near, far;  // window site indices, input order preserved
  int gap = 0;
  int diameter = 0;
};

inline DiameterSplit diameter_split(const WindowPtr& window,
                                    const std::vector<int>& sites) {
  detail::check_site_tuple(window, sites, "diameter_split");
  if (sites.size() < 2)
    throw std::invalid_argument("diameter_split: need >= 2 sites");

  const std::size_t k = sites.size();
  std::vector<std::vector<int>> dist(k, std::vector<int>(k, 0));
  int diam = 0;
  std::size_t pole = 0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      dist[i][j] = dist[j][i] = distance(window->site(sites[i]),
                                         window->site(sites[j]), window->kind());
      if (dist[i][j] > diam) {
        diam = dist[i][j];
        pole = i;
      }
    }

  std::vector<std::size_t> order(k);
  for (std::size_t i = 0; i < k; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dist[pole][a] != dist[pole][b]) return dist[pole][a] < dist[pole][b];
    return sites[a] < sites[b];
  });

  std::size_t cut = 0;
  int best_gap = -1;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    const int jump = dist[pole][order[i + 1]] - dist[pole][order[i]];
    if (jump > best_gap) {
      best_gap = jump;
      cut = i;
    }
  }

  DiameterSplit out;
  out.diameter = diam;
  out.gap = best_gap;
  std::vector<bool> is_near(k, false);
  for (std::size_t i = 0; i <= cut; ++i) is_near[order[i]] = true;
  for (std::size_t i = 0; i < k; ++i)
    (is_near[i] ? out.near : out.far).push_back(sites[i]);
  return out;
}

}  // namespace spinclt
