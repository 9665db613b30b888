// Distributional tests for the spin-model samplers.  Exact finite-window laws
// are checked against independent oracles: product Bernoulli cell counts via
// chi-square, Gaussian level sets via the bivariate orthant identity
// Cov(1[X>=0], 1[Y>=0]) = asin(rho) / (2 pi), and determinantal samples via
// inclusion-exclusion over principal minors computed from scratch in-test.
#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "spinclt/cayley.hpp"
#include "spinclt/rng.hpp"
#include "spinclt/spin.hpp"
#include "spinclt/stats.hpp"
#include "spinclt/version.hpp"

using namespace spinclt;

namespace {

GroupPoint gp(std::initializer_list<std::int64_t> cs) {
  return GroupPoint(cs.begin(), cs.end());
}

std::uint32_t config_mask(const SpinConfiguration& c) {
  std::uint32_t m = 0;
  for (std::size_t i = 0; i < c.occ.size(); ++i)
    if (c.occ[i]) m |= (1u << i);
  return m;
}

// Pearson chi-square of observed cell counts against exact cell
// probabilities.  Degrees of freedom = cells - 1.
double chi_square_statistic(const std::vector<std::uint64_t>& counts,
                            const std::vector<double>& probs,
                            double n_samples) {
  double stat = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double expected = n_samples * probs[c];
    const double diff = static_cast<double>(counts[c]) - expected;
    stat += diff * diff / expected;
  }
  return stat;
}

// P(P = S) for a determinantal process with kernel K, by inclusion-exclusion
// over supersets: P(S) = sum_{T >= S} (-1)^{|T \ S|} det(K_T).  Brute force,
// independent of the sampler's spectral machinery.
double dpp_config_probability(const Eigen::MatrixXd& kernel,
                              std::uint32_t s_mask) {
  const int w = static_cast<int>(kernel.rows());
  double prob = 0.0;
  for (std::uint32_t t_mask = 0; t_mask < (1u << w); ++t_mask) {
    if ((t_mask & s_mask) != s_mask) continue;
    std::vector<int> idx;
    for (int i = 0; i < w; ++i)
      if (t_mask & (1u << i)) idx.push_back(i);
    double det = 1.0;
    if (!idx.empty()) {
      Eigen::MatrixXd sub(idx.size(), idx.size());
      for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = 0; b < idx.size(); ++b)
          sub(static_cast<int>(a), static_cast<int>(b)) =
              kernel(idx[a], idx[b]);
      det = sub.determinant();
    }
    const int extra = __builtin_popcount(t_mask ^ s_mask);
    prob += (extra % 2 ? -1.0 : 1.0) * det;
  }
  return prob;
}

}  // namespace

TEST_CASE("iid sampler follows the exact product Bernoulli law", "[spin]") {
  SeedPolicy seeds{2024};

  SECTION("degenerate probabilities give empty / full configurations") {
    auto win = Window::make(GroupKind::integer_lattice(2), 2);
    for (int rep = 0; rep < 5; ++rep) {
      auto rng = seeds.stream(stream_tag::kSample, 0, static_cast<std::uint64_t>(rep));
      REQUIRE(ModelSampler(ModelSpec::iid(0.0), win).sample(rng).count_occupied() == 0);
    }
    for (int rep = 0; rep < 5; ++rep) {
      auto rng = seeds.stream(stream_tag::kSample, 1, static_cast<std::uint64_t>(rep));
      REQUIRE(ModelSampler(ModelSpec::iid(1.0), win).sample(rng).count_occupied() == win->w());
    }
    REQUIRE_THROWS_AS(ModelSpec::iid(-0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(ModelSpec::iid(1.1), std::invalid_argument);
  }

  SECTION("chi-square over all 2^15 configurations, symmetric p") {
    auto win = Window::make(GroupKind::integer_lattice(1), 7);
    REQUIRE(win->w() == 15);
    ModelSampler sampler(ModelSpec::iid(0.5), win);
    const std::size_t reps = 1'000'000;
    std::vector<std::uint64_t> counts(1u << 15, 0);
    for (std::size_t rep = 0; rep < reps; ++rep) {
      auto rng = seeds.stream(stream_tag::kSample, 2, rep);
      ++counts[config_mask(sampler.sample(rng))];
    }
    std::vector<double> probs(counts.size(), 1.0 / static_cast<double>(counts.size()));
    const double stat = chi_square_statistic(counts, probs, static_cast<double>(reps));
    const double df = static_cast<double>(counts.size()) - 1.0;
    REQUIRE(stat < chi_square_quantile(df, 1.0 - 1e-3));
    REQUIRE(stat > chi_square_quantile(df, 1e-3));  // not suspiciously uniform
  }

  SECTION("chi-square over all 32 configurations, asymmetric p") {
    auto win = Window::make(GroupKind::integer_lattice(2), 1);
    REQUIRE(win->w() == 5);
    const double p = 0.3;
    ModelSampler sampler(ModelSpec::iid(p), win);
    const std::size_t reps = 200'000;
    std::vector<std::uint64_t> counts(32, 0);
    for (std::size_t rep = 0; rep < reps; ++rep) {
      auto rng = seeds.stream(stream_tag::kSample, 3, rep);
      ++counts[config_mask(sampler.sample(rng))];
    }
    std::vector<double> probs(32, 0.0);
    for (std::uint32_t m = 0; m < 32; ++m) {
      const int k = __builtin_popcount(m);
      probs[m] = std::pow(p, k) * std::pow(1.0 - p, 5 - k);
    }
    const double stat = chi_square_statistic(counts, probs, static_cast<double>(reps));
    REQUIRE(stat < chi_square_quantile(31.0, 1.0 - 1e-3));
  }
}

TEST_CASE("samplers are reproducible and thread-stable", "[spin]") {
  auto win = Window::make(GroupKind::integer_lattice(2), 4);
  const std::vector<ModelSpec> specs = {
      ModelSpec::iid(0.4),
      ModelSpec::gaussian_levelset(1.0, 0.3),
      ModelSpec::ising(0.2, 0.1, 5, 10),
      ModelSpec::determinantal(0.4, 2.0),
  };
  SeedPolicy seeds{kDefaultMasterSeed};

  for (std::size_t m = 0; m < specs.size(); ++m) {
    ModelSampler sampler(specs[m], win);

    // Same (master seed, stream coordinates) twice: bit-identical.
    auto r1 = seeds.stream(stream_tag::kSample, m, 7);
    auto r2 = seeds.stream(stream_tag::kSample, m, 7);
    const auto c1 = sampler.sample(r1);
    const auto c2 = sampler.sample(r2);
    REQUIRE(c1 == c2);

    // Different replicate coordinates: configurations actually vary.
    bool any_different = false;
    for (std::uint64_t rep = 0; rep < 10 && !any_different; ++rep) {
      auto rr = seeds.stream(stream_tag::kSample, m, 100 + rep);
      any_different = !(sampler.sample(rr) == c1);
    }
    REQUIRE(any_different);

    // Reconstructing sampler and stream on separate threads reproduces the
    // same bits: nothing in the pipeline depends on ambient state.
    std::vector<SpinConfiguration> thread_out(2);
    std::vector<std::thread> pool;
    for (int t = 0; t < 2; ++t)
      pool.emplace_back([&, t] {
        ModelSampler local(specs[m], win);
        auto rng = SeedPolicy{kDefaultMasterSeed}.stream(stream_tag::kSample, m, 7);
        thread_out[static_cast<std::size_t>(t)] = local.sample(rng);
      });
    for (auto& th : pool) th.join();
    REQUIRE(thread_out[0] == c1);
    REQUIRE(thread_out[1] == c1);
  }
}

TEST_CASE("gaussian level set matches its exact finite-dimensional law", "[spin]") {
  SeedPolicy seeds{31337};

  SECTION("extreme levels empty or fill the window") {
    auto win = Window::make(GroupKind::integer_lattice(2), 3);
    for (int rep = 0; rep < 50; ++rep) {
      auto hi = seeds.stream(stream_tag::kSample, 0, static_cast<std::uint64_t>(rep));
      REQUIRE(ModelSampler(ModelSpec::gaussian_levelset(1.0, 10.0), win)
                  .sample(hi)
                  .count_occupied() == 0);
      auto lo = seeds.stream(stream_tag::kSample, 1, static_cast<std::uint64_t>(rep));
      REQUIRE(ModelSampler(ModelSpec::gaussian_levelset(1.0, -10.0), win)
                  .sample(lo)
                  .count_occupied() == win->w());
    }
  }

  SECTION("marginal occupancy is the standard normal upper tail at every site") {
    auto win = Window::make(GroupKind::integer_lattice(2), 5);
    const double u = 0.5;
    ModelSampler sampler(ModelSpec::gaussian_levelset(1.0, u), win);
    const std::size_t reps = 20'000;
    std::vector<std::uint64_t> hits(win->w(), 0);
    for (std::size_t rep = 0; rep < reps; ++rep) {
      auto rng = seeds.stream(stream_tag::kSample, 2, rep);
      const auto c = sampler.sample(rng);
      for (std::size_t i = 0; i < c.occ.size(); ++i) hits[i] += c.occ[i];
    }
    const double target = normal_cdf(-u);  // P(X >= u), X standard normal
    const double se = std::sqrt(target * (1.0 - target) / static_cast<double>(reps));
    for (std::size_t i = 0; i < hits.size(); ++i) {
      const double p_hat = static_cast<double>(hits[i]) / static_cast<double>(reps);
      REQUIRE(std::abs(p_hat - target) <= 4.0 * se);
    }
  }

  SECTION("pair covariance equals asin(exp(-a d)) / 2 pi and decays in d") {
    // Level u = 0 so that Cov(Z_x, Z_y) = asin(rho) / (2 pi) exactly, with
    // rho = exp(-a d).  Pair-averaged estimator over every same-distance pair
    // in the window; empirical SE across replicates.
    auto win = Window::make(GroupKind::integer_lattice(1), 12);
    const double a = 0.5;
    ModelSampler sampler(ModelSpec::gaussian_levelset(a, 0.0), win);

    const int d_max = 6;
    std::vector<std::vector<std::pair<int, int>>> pairs(static_cast<std::size_t>(d_max) + 1);
    for (int d = 1; d <= d_max; ++d)
      for (int x = -12; x + d <= 12; ++x)
        pairs[static_cast<std::size_t>(d)].push_back(
            {win->index_of(gp({x})), win->index_of(gp({x + d}))});

    const std::size_t reps = 20'000;
    std::vector<std::vector<double>> pair_means(
        static_cast<std::size_t>(d_max) + 1, std::vector<double>());
    for (std::size_t rep = 0; rep < reps; ++rep) {
      auto rng = seeds.stream(stream_tag::kSample, 3, rep);
      const auto c = sampler.sample(rng);
      for (int d = 1; d <= d_max; ++d) {
        double s = 0.0;
        for (const auto& [i, j] : pairs[static_cast<std::size_t>(d)])
          s += (c.bit(i) && c.bit(j)) ? 1.0 : 0.0;
        pair_means[static_cast<std::size_t>(d)].push_back(
            s / static_cast<double>(pairs[static_cast<std::size_t>(d)].size()));
      }
    }

    std::vector<double> cov_hat(static_cast<std::size_t>(d_max) + 1, 0.0);
    for (int d = 1; d <= d_max; ++d) {
      const auto& am = pair_means[static_cast<std::size_t>(d)];
      // Marginal mean is exactly 1/2 at level 0, so subtract 1/4 directly.
      cov_hat[static_cast<std::size_t>(d)] = mean(am) - 0.25;
      const double se =
          std::sqrt(sample_variance(am) / static_cast<double>(reps));
      const double exact =
          std::asin(std::exp(-a * d)) / (2.0 * std::acos(-1.0));
      INFO("d=" << d << " cov_hat=" << cov_hat[static_cast<std::size_t>(d)]
                << " exact=" << exact << " se=" << se);
      REQUIRE(std::abs(cov_hat[static_cast<std::size_t>(d)] - exact) <=
              4.0 * se + 1e-12);
    }
    for (int d = 1; d < d_max; ++d)  // resolvable range: gaps >> SE here
      REQUIRE(cov_hat[static_cast<std::size_t>(d) + 1] <
              cov_hat[static_cast<std::size_t>(d)]);
  }

  SECTION("nearly-independent regime passes a uniform chi-square") {
    // a = 50 makes off-diagonal covariance ~ 1e-22: indistinguishable from
    // iid(1/2), so the exact product-law chi-square must accept.
    auto win = Window::make(GroupKind::integer_lattice(2), 1);
    ModelSampler sampler(ModelSpec::gaussian_levelset(50.0, 0.0), win);
    const std::size_t reps = 200'000;
    std::vector<std::uint64_t> counts(32, 0);
    for (std::size_t rep = 0; rep < reps; ++rep) {
      auto rng = seeds.stream(stream_tag::kSample, 4, rep);
      ++counts[config_mask(sampler.sample(rng))];
    }
    std::vector<double> probs(32, 1.0 / 32.0);
    const double stat = chi_square_statistic(counts, probs, static_cast<double>(reps));
    REQUIRE(stat < chi_square_quantile(31.0, 1.0 - 1e-3));
  }

  SECTION("indefinite covariance on word-metric balls fails loudly") {
    // exp(-a d) in the Heisenberg word metric is NOT a covariance for small
    // a: frozen probes give smallest eigenvalues ~ -0.32 (n=3, a=0.2) and
    // ~ -0.03 (n=4, a=0.5).
    auto h3 = Window::make(GroupKind::heisenberg3(), 3);
    try {
      ModelSampler sampler(ModelSpec::gaussian_levelset(0.2, 0.0), h3);
      FAIL("expected NotPositiveDefiniteError for a=0.2 on the n=3 ball");
    } catch (const NotPositiveDefiniteError& e) {
      REQUIRE(e.smallest_eigenvalue < -0.1);
    }
    auto h4 = Window::make(GroupKind::heisenberg3(), 4);
    try {
      ModelSampler sampler(ModelSpec::gaussian_levelset(0.5, 0.0), h4);
      FAIL("expected NotPositiveDefiniteError for a=0.5 on the n=4 ball");
    } catch (const NotPositiveDefiniteError& e) {
      REQUIRE(e.smallest_eigenvalue < -1e-3);
    }
    // Faster decay restores positive definiteness on the same windows.
    auto rng = seeds.stream(stream_tag::kSample, 5, 0);
    const auto c = ModelSampler(ModelSpec::gaussian_levelset(0.5, 0.0), h3).sample(rng);
    REQUIRE(c.count_occupied() <= h3->w());
    auto rng2 = seeds.stream(stream_tag::kSample, 5, 1);
    const auto c2 = ModelSampler(ModelSpec::gaussian_levelset(1.0, 0.0), h4).sample(rng2);
    REQUIRE(c2.count_occupied() <= h4->w());
  }

  SECTION("always positive definite on integer lattices, even slow decay") {
    auto win = Window::make(GroupKind::integer_lattice(2), 4);
    auto rng = seeds.stream(stream_tag::kSample, 6, 0);
    REQUIRE_NOTHROW(ModelSampler(ModelSpec::gaussian_levelset(0.1, 0.0), win).sample(rng));
  }

  SECTION("declared clustering constants") {
    auto win = Window::make(GroupKind::integer_lattice(1), 2);
    ModelSampler sampler(ModelSpec::gaussian_levelset(1.5, 0.0), win);
    const auto cc = sampler.gaussian_clustering_constants();
    REQUIRE(cc.a == 1.5);
    REQUIRE(cc.c(3) == 1.0);
    REQUIRE(cc.C(1) == Catch::Approx(std::pow(2.0, 14.0 / 5.0)));
    REQUIRE(cc.C(2) == Catch::Approx(std::pow(2.0, 14.0 / 5.0) * std::pow(2.0, 8.0 / 5.0)));
    REQUIRE(cc.phi(2.0) == Catch::Approx(std::exp(-3.0)));
  }
}

TEST_CASE("ising heat-bath dynamics", "[spin]") {
  SeedPolicy seeds{777};

  SECTION("zero field requires an explicit subcriticality assertion") {
    REQUIRE_THROWS_AS(ModelSpec::ising(0.2, 0.0), std::invalid_argument);
    REQUIRE_NOTHROW(ModelSpec::ising(0.2, 0.0, 10, 10, true));
    REQUIRE_THROWS_AS(ModelSpec::ising(-0.1, 0.5), std::invalid_argument);
    REQUIRE_THROWS_AS(ModelSpec::ising(0.2, 0.5, 0, 10), std::invalid_argument);
    auto h3 = Window::make(GroupKind::heisenberg3(), 2);
    REQUIRE_THROWS_AS(ModelSampler(ModelSpec::ising(0.1, 0.5, 5, 5), h3),
                      std::invalid_argument);
  }

  SECTION("beta = 0 is exactly iid(1/2): full chi-square") {
    // At beta = 0, h = 0 every heat-bath update draws Bernoulli(1/2)
    // independently of the neighbors, so one sweep already equilibrates.
    auto win = Window::make(GroupKind::integer_lattice(1), 7);
    ModelSampler sampler(ModelSpec::ising(0.0, 0.0, 1, 1, true), win);
    const std::size_t reps = 400'000;
    std::vector<std::uint64_t> counts(1u << 15, 0);
    for (std::size_t rep = 0; rep < reps; ++rep) {
      auto rng = seeds.stream(stream_tag::kSample, 0, rep);
      ++counts[config_mask(sampler.sample(rng))];
    }
    std::vector<double> probs(counts.size(), 1.0 / static_cast<double>(counts.size()));
    const double stat = chi_square_statistic(counts, probs, static_cast<double>(reps));
    REQUIRE(stat < chi_square_quantile(static_cast<double>(counts.size()) - 1.0, 1.0 - 1e-3));
  }

  SECTION("strong positive field saturates occupancy") {
    auto win = Window::make(GroupKind::integer_lattice(2), 8);
    ModelSampler s2(ModelSpec::ising(0.2, 10.0, 5, 50), win);
    double occ = 0.0;
    const int reps = 20;
    for (int rep = 0; rep < reps; ++rep) {
      auto rng = seeds.stream(stream_tag::kSample, 1, static_cast<std::uint64_t>(rep));
      occ += static_cast<double>(s2.sample(rng).count_occupied()) /
             static_cast<double>(win->w());
    }
    REQUIRE(occ / reps > 0.99);
  }

  SECTION("subcritical pair correlation decays with distance") {
    // beta = 0.3 (well under the 2d critical point ~0.44), h = 0.  Estimate
    // u_2(t) = P(Z_x Z_y = 1) - 1/4 over interior pairs at distance t,
    // averaging all pairs per replicate and replicates per chain snapshot.
    const int n = 12, margin = 6;
    auto win = Window::make(GroupKind::integer_lattice(2), n);
    ModelSampler sampler(ModelSpec::ising(0.3, 0.0, 1, 250, true), win);

    const int w = static_cast<int>(win->w());
    std::vector<int> interior;
    for (int i = 0; i < w; ++i)
      if (win->center_distance(i) <= n - margin) interior.push_back(i);
    const int t_max = 5;
    std::vector<std::vector<std::pair<int, int>>> pairs(static_cast<std::size_t>(t_max) + 1);
    for (std::size_t ii = 0; ii < interior.size(); ++ii)
      for (std::size_t jj = ii + 1; jj < interior.size(); ++jj) {
        const auto& p = win->site(interior[ii]);
        const auto& q = win->site(interior[jj]);
        const std::int64_t t = std::llabs(p[0] - q[0]) + std::llabs(p[1] - q[1]);
        if (t >= 1 && t <= t_max)
          pairs[static_cast<std::size_t>(t)].push_back({interior[ii], interior[jj]});
      }
    for (int t = 1; t <= t_max; ++t)
      REQUIRE(pairs[static_cast<std::size_t>(t)].size() >= 100);

    const std::size_t chains = 3000;
    std::vector<std::vector<double>> per_rep(static_cast<std::size_t>(t_max) + 1);
    for (std::size_t rep = 0; rep < chains; ++rep) {
      auto rng = seeds.stream(stream_tag::kSample, 2, rep);
      const auto c = sampler.sample(rng);
      for (int t = 1; t <= t_max; ++t) {
        double s = 0.0;
        for (const auto& [i, j] : pairs[static_cast<std::size_t>(t)])
          s += (c.bit(i) && c.bit(j)) ? 1.0 : 0.0;
        per_rep[static_cast<std::size_t>(t)].push_back(
            s / static_cast<double>(pairs[static_cast<std::size_t>(t)].size()));
      }
    }
    std::vector<double> u2(static_cast<std::size_t>(t_max) + 1, 0.0);
    std::vector<double> se(static_cast<std::size_t>(t_max) + 1, 0.0);
    for (int t = 1; t <= t_max; ++t) {
      u2[static_cast<std::size_t>(t)] = mean(per_rep[static_cast<std::size_t>(t)]) - 0.25;
      se[static_cast<std::size_t>(t)] = std::sqrt(
          sample_variance(per_rep[static_cast<std::size_t>(t)]) / static_cast<double>(chains));
      INFO("t=" << t << " u2=" << u2[static_cast<std::size_t>(t)]
                << " se=" << se[static_cast<std::size_t>(t)]);
    }
    // Ferromagnet: positive correlation, decaying in distance.  Strict
    // decrease where gaps clear the Monte Carlo noise; a consistency bound
    // closes the tail (u2(5) is ~1e-4, within noise of u2(4)).
    REQUIRE(u2[1] > 0.03);
    REQUIRE(u2[1] < 0.20);
    for (int t = 1; t <= 4; ++t) REQUIRE(u2[static_cast<std::size_t>(t)] > 0.0);
    REQUIRE(u2[2] < u2[1]);
    REQUIRE(u2[3] < u2[2]);
    REQUIRE(u2[4] < u2[3]);
    REQUIRE(u2[5] < u2[3]);
  }
}

TEST_CASE("determinantal sampler is exact", "[spin]") {
  SeedPolicy seeds{90210};

  SECTION("parameter and contraction validation") {
    REQUIRE_THROWS_AS(ModelSpec::determinantal(0.0, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(ModelSpec::determinantal(1.2, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(ModelSpec::determinantal(0.5, 0.0), std::invalid_argument);

    // A nearly-flat kernel has top eigenvalue ~ w >> 1: not a contraction.
    auto win = Window::make(GroupKind::integer_lattice(2), 3);
    try {
      ModelSampler sampler(ModelSpec::determinantal(1.0, 0.05), win);
      FAIL("expected KernelNotContractionError");
    } catch (const KernelNotContractionError& e) {
      REQUIRE(e.max_eigenvalue > 1.5);
      REQUIRE(e.min_eigenvalue > -1e-6);  // kernel is still PSD
    }
  }

  SECTION("single-site inclusion probabilities equal kappa") {
    auto win = Window::make(GroupKind::integer_lattice(2), 1);
    const double kappa = 0.35;
    ModelSampler sampler(ModelSpec::determinantal(kappa, 2.0), win);
    const std::size_t reps = 50'000;
    std::vector<std::uint64_t> hits(win->w(), 0);
    for (std::size_t rep = 0; rep < reps; ++rep) {
      auto rng = seeds.stream(stream_tag::kSample, 0, rep);
      const auto c = sampler.sample(rng);
      for (std::size_t i = 0; i < c.occ.size(); ++i) hits[i] += c.occ[i];
    }
    const double se = std::sqrt(kappa * (1.0 - kappa) / static_cast<double>(reps));
    for (auto h : hits) {
      const double p_hat = static_cast<double>(h) / static_cast<double>(reps);
      REQUIRE(std::abs(p_hat - kappa) <= 4.0 * se);
    }
  }

  SECTION("all 32 configuration probabilities on a 5-site window") {
    auto win = Window::make(GroupKind::integer_lattice(2), 1);
    const double kappa = 0.45, alpha = 1.5;
    ModelSampler sampler(ModelSpec::determinantal(kappa, alpha), win);

    // Independent kernel: entries from raw coordinates, minors from Eigen.
    const int w = static_cast<int>(win->w());
    Eigen::MatrixXd kmat(w, w);
    for (int i = 0; i < w; ++i)
      for (int j = 0; j < w; ++j) {
        const auto& p = win->site(i);
        const auto& q = win->site(j);
        const double d = static_cast<double>(std::llabs(p[0] - q[0]) +
                                             std::llabs(p[1] - q[1]));
        kmat(i, j) = kappa * std::exp(-alpha * d);
      }

    std::vector<double> probs(32, 0.0);
    double total = 0.0;
    for (std::uint32_t s = 0; s < 32; ++s) {
      probs[s] = dpp_config_probability(kmat, s);
      REQUIRE(probs[s] > -1e-12);
      total += probs[s];
    }
    REQUIRE(total == Catch::Approx(1.0).margin(1e-10));

    // Library-side principal minors must agree with the scratch kernel.
    REQUIRE(sampler.dpp_correlation({0}) == Catch::Approx(kappa).margin(1e-12));
    Eigen::MatrixXd top3 = kmat.topLeftCorner(3, 3);
    REQUIRE(sampler.dpp_correlation({0, 1, 2}) ==
            Catch::Approx(top3.determinant()).margin(1e-12));

    const std::size_t reps = 200'000;
    std::vector<std::uint64_t> counts(32, 0);
    for (std::size_t rep = 0; rep < reps; ++rep) {
      auto rng = seeds.stream(stream_tag::kSample, 1, rep);
      ++counts[config_mask(sampler.sample(rng))];
    }
    for (std::uint32_t s = 0; s < 32; ++s) {
      const double p_hat = static_cast<double>(counts[s]) / static_cast<double>(reps);
      const double se = std::sqrt(std::max(probs[s], 1e-12) * (1.0 - probs[s]) /
                                  static_cast<double>(reps));
      INFO("mask=" << s << " p_hat=" << p_hat << " exact=" << probs[s]);
      REQUIRE(std::abs(p_hat - probs[s]) <=
              std::max(4.0 * se, 3.0 / static_cast<double>(reps)));
    }

    // And the full chi-square accepts at the 1e-3 level.
    const double stat = chi_square_statistic(counts, probs, static_cast<double>(reps));
    REQUIRE(stat < chi_square_quantile(31.0, 1.0 - 1e-3));
  }

  SECTION("pair correlations match 2x2 principal minors on a larger window") {
    auto win = Window::make(GroupKind::integer_lattice(2), 5);
    const double kappa = 0.4, alpha = 2.0;
    ModelSampler sampler(ModelSpec::determinantal(kappa, alpha), win);
    const int w = static_cast<int>(win->w());

    // Deterministically seeded pair selection, plus forced short-range pairs
    // where the repulsion is strongest.
    auto pick = seeds.stream(stream_tag::kSiteSample, 0, 0);
    std::vector<std::pair<int, int>> test_pairs = {
        {win->index_of(gp({0, 0})), win->index_of(gp({1, 0}))},
        {win->index_of(gp({0, 0})), win->index_of(gp({0, -1}))},
        {win->index_of(gp({0, 0})), win->index_of(gp({1, 1}))},
        {win->index_of(gp({-1, 0})), win->index_of(gp({1, 0}))},
    };
    while (test_pairs.size() < 20) {
      const int i = static_cast<int>(pick.uniform_below(static_cast<std::uint64_t>(w)));
      const int j = static_cast<int>(pick.uniform_below(static_cast<std::uint64_t>(w)));
      if (i != j) test_pairs.push_back({std::min(i, j), std::max(i, j)});
    }

    const std::size_t reps = 20'000;
    std::vector<std::uint64_t> both(test_pairs.size(), 0);
    std::vector<double> count_occ;
    count_occ.reserve(reps);
    for (std::size_t rep = 0; rep < reps; ++rep) {
      auto rng = seeds.stream(stream_tag::kSample, 2, rep);
      const auto c = sampler.sample(rng);
      count_occ.push_back(static_cast<double>(c.count_occupied()));
      for (std::size_t t = 0; t < test_pairs.size(); ++t)
        if (c.bit(test_pairs[t].first) && c.bit(test_pairs[t].second)) ++both[t];
    }

    for (std::size_t t = 0; t < test_pairs.size(); ++t) {
      const double minor =
          sampler.dpp_correlation({test_pairs[t].first, test_pairs[t].second});
      const double p_hat = static_cast<double>(both[t]) / static_cast<double>(reps);
      const double se =
          std::sqrt(minor * (1.0 - minor) / static_cast<double>(reps));
      INFO("pair " << t << ": p_hat=" << p_hat << " minor=" << minor);
      REQUIRE(std::abs(p_hat - minor) <= 4.0 * se);
    }

    // Expected point count is the kernel trace kappa * w.
    const double se_count =
        std::sqrt(sample_variance(count_occ) / static_cast<double>(reps));
    REQUIRE(std::abs(mean(count_occ) - kappa * w) <= 4.0 * se_count);
  }
}

TEST_CASE("complement and explicit construction", "[spin]") {
  auto win = Window::make(GroupKind::integer_lattice(2), 2);
  auto cfg = make_config(win, {gp({0, 0}), gp({1, -1}), gp({0, 2})});
  REQUIRE(cfg.count_occupied() == 3);
  REQUIRE(cfg.occupied(gp({1, -1})));
  REQUIRE_FALSE(cfg.occupied(gp({1, 1})));
  REQUIRE_FALSE(cfg.occupied(gp({9, 9})));  // outside the window: unoccupied

  const auto comp = complement(cfg);
  REQUIRE(comp.count_occupied() == win->w() - 3);
  REQUIRE_FALSE(comp.occupied(gp({0, 0})));
  REQUIRE(comp.occupied(gp({1, 1})));
  REQUIRE(complement(comp) == cfg);

  const SpinConfiguration empty(win);
  REQUIRE(complement(empty).count_occupied() == win->w());
}

TEST_CASE("configuration text round-trips bit-exactly", "[spin]") {
  SECTION("lattice with metadata") {
    auto win = Window::make(GroupKind::integer_lattice(2), 3);
    auto rng = SeedPolicy{5}.stream(stream_tag::kSample, 0, 0);
    const auto cfg = ModelSampler(ModelSpec::iid(0.5), win).sample(rng);
    const std::string text = serialize_config(
        cfg, {{"graph", "z2"}, {"n", "3"}, {"model", "iid(p=0.5)"}, {"seed", "5"}});
    const auto parsed = parse_config_text(text);
    REQUIRE(parsed.config.window->kind().name() == "z2");
    REQUIRE(parsed.config.window->n() == 3);
    REQUIRE(parsed.config.occ == cfg.occ);
    REQUIRE(parsed.config.support() == cfg.support());
    bool saw_model = false;
    for (const auto& [k, v] : parsed.metadata) {
      if (k == "model") {
        saw_model = true;
        REQUIRE(v == "iid(p=0.5)");
      }
    }
    REQUIRE(saw_model);
  }

  SECTION("window identity is auto-recorded when omitted") {
    auto win = Window::make(GroupKind::heisenberg3(), 2);
    // (1,1,1) is the two-step product ab; the central element (0,0,1) would
    // NOT fit here, its word length is 4.
    const auto cfg = make_config(win, {gp({0, 0, 0}), gp({1, 1, 1}), gp({-1, 0, 0})});
    const std::string text = serialize_config(cfg, {});
    const auto parsed = parse_config_text(text);
    REQUIRE(parsed.config.window->kind().name() == "heisenberg3");
    REQUIRE(parsed.config.window->n() == 2);
    REQUIRE(parsed.config.occ == cfg.occ);
  }

  SECTION("serialized site lines appear in index order") {
    auto win = Window::make(GroupKind::integer_lattice(1), 2);
    const auto cfg = make_config(win, {gp({2}), gp({0}), gp({-1})});
    const std::string text = serialize_config(cfg, {});
    // Total order: norm first, then lex, so 0 < -1 < 2.
    const auto p0 = text.find("\n0\n");
    const auto p1 = text.find("\n-1\n");
    const auto p2 = text.find("\n2\n");
    REQUIRE(p0 != std::string::npos);
    REQUIRE(p1 != std::string::npos);
    REQUIRE(p2 != std::string::npos);
    REQUIRE(p0 < p1);
    REQUIRE(p1 < p2);
  }

  SECTION("malformed inputs are rejected") {
    REQUIRE_THROWS_AS(parse_config_text("# graph=z2\n0 0\n"),
                      std::invalid_argument);  // missing n
    REQUIRE_THROWS_AS(parse_config_text("# n=2\n0 0\n"),
                      std::invalid_argument);  // missing graph
    REQUIRE_THROWS_AS(parse_config_text("# graph=z2\n# n=2\n0 x\n"),
                      std::invalid_argument);  // non-numeric coordinate
    REQUIRE_THROWS_AS(parse_config_text("# graph=z2\n# n=2\n5 5\n"),
                      std::invalid_argument);  // site outside the window
    REQUIRE_THROWS_AS(parse_config_text("# graph z2\n# n=2\n0 0\n"),
                      std::invalid_argument);  // metadata without '='
    REQUIRE_THROWS_AS(parse_config_text("# graph=q8\n# n=2\n"),
                      std::invalid_argument);  // unknown group
  }
}
