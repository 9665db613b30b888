// Tests for cubical complexes, GF(2) Betti numbers, component extraction,
// planar duality, and the subcriticality probe.  Golden values come from
// hand-checkable shapes; random configurations are cross-checked through the
// independent complement flood fill and the Euler characteristic identity.
#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "spinclt/cayley.hpp"
#include "spinclt/rng.hpp"
#include "spinclt/spin.hpp"
#include "spinclt/topology.hpp"

using namespace spinclt;

namespace {

GroupPoint gp(std::initializer_list<std::int64_t> cs) {
  return GroupPoint(cs.begin(), cs.end());
}

SpinConfiguration config2(std::initializer_list<std::pair<int, int>> pts, int n = 6) {
  auto win = Window::make(GroupKind::integer_lattice(2), n);
  SpinConfiguration c(win);
  for (const auto& [x, y] : pts) c.set_bit(win->index_of(gp({x, y})), true);
  return c;
}

// The 8 cubes of the 3x3 ring around (0,0).
std::initializer_list<std::pair<int, int>> kAnnulus = {
    {-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}};

}  // namespace

TEST_CASE("complex construction counts cells with shared faces deduplicated",
          "[topology]") {
  SECTION("single cube: 4 vertices, 4 edges, 1 square") {
    const auto cx = build_complex(config2({{0, 0}}));
    REQUIRE(cx.cell_count(0) == 4);
    REQUIRE(cx.cell_count(1) == 4);
    REQUIRE(cx.cell_count(2) == 1);
  }
  SECTION("two face-adjacent cubes share an edge and two vertices") {
    const auto cx = build_complex(config2({{0, 0}, {1, 0}}));
    REQUIRE(cx.cell_count(0) == 6);
    REQUIRE(cx.cell_count(1) == 7);
    REQUIRE(cx.cell_count(2) == 2);
  }
  SECTION("two diagonal cubes share exactly one vertex") {
    const auto cx = build_complex(config2({{0, 0}, {1, 1}}));
    REQUIRE(cx.cell_count(0) == 7);
    REQUIRE(cx.cell_count(1) == 8);
    REQUIRE(cx.cell_count(2) == 2);
  }
  SECTION("empty configuration gives the empty complex") {
    const auto cx = build_complex(config2({}));
    REQUIRE(cx.total_cells() == 0);
  }
  SECTION("a 1d configuration builds segments") {
    auto win = Window::make(GroupKind::integer_lattice(1), 4);
    SpinConfiguration c(win);
    c.set_bit(win->index_of(gp({0})), true);
    c.set_bit(win->index_of(gp({1})), true);
    const auto cx = build_complex(c);
    REQUIRE(cx.cell_count(0) == 3);
    REQUIRE(cx.cell_count(1) == 2);
  }
  SECTION("word-metric windows without cubes are rejected") {
    auto win = Window::make(GroupKind::heisenberg3(), 1);
    REQUIRE_THROWS_AS(build_complex(SpinConfiguration(win)), std::invalid_argument);
  }
  SECTION("cell cap triggers the resource error") {
    REQUIRE_THROWS_AS(build_complex(config2({{0, 0}, {1, 0}, {2, 0}}), 10),
                      ResourceLimitError);
  }
}

TEST_CASE("betti numbers of golden shapes", "[topology]") {
  SECTION("single cube is contractible") {
    const auto b = betti_numbers(build_complex(config2({{0, 0}})));
    REQUIRE(b == std::vector<std::int64_t>{1, 0});
  }
  SECTION("solid 3x3 block is contractible") {
    const auto b = betti_numbers(build_complex(config2({{-1, -1},
                                                        {0, -1},
                                                        {1, -1},
                                                        {-1, 0},
                                                        {0, 0},
                                                        {1, 0},
                                                        {-1, 1},
                                                        {0, 1},
                                                        {1, 1}})));
    REQUIRE(b == std::vector<std::int64_t>{1, 0});
  }
  SECTION("3x3 annulus carries one loop") {
    const auto b = betti_numbers(build_complex(config2(kAnnulus)));
    REQUIRE(b == std::vector<std::int64_t>{1, 1});
  }
  SECTION("two nested annuli: two loops, two components") {
    auto win = Window::make(GroupKind::integer_lattice(2), 10);
    SpinConfiguration c(win);
    for (const auto& [x, y] : kAnnulus) c.set_bit(win->index_of(gp({x, y})), true);
    // Outer ring at l-infinity radius 3: 24 cubes, separated from the inner
    // ring by the free l-infinity shell at radius 2.
    for (int x = -3; x <= 3; ++x)
      for (int y = -3; y <= 3; ++y)
        if (std::max(std::abs(x), std::abs(y)) == 3)
          c.set_bit(win->index_of(gp({x, y})), true);
    const auto b = betti_numbers(build_complex(c));
    REQUIRE(b == std::vector<std::int64_t>{2, 2});
  }
  SECTION("empty complex has zero betti numbers") {
    const auto b = betti_numbers(build_complex(config2({})));
    REQUIRE(b == std::vector<std::int64_t>{0, 0});
  }
  SECTION("1d pair of intervals: two components") {
    auto win = Window::make(GroupKind::integer_lattice(1), 5);
    SpinConfiguration c(win);
    c.set_bit(win->index_of(gp({-2})), true);
    c.set_bit(win->index_of(gp({2})), true);
    c.set_bit(win->index_of(gp({3})), true);
    REQUIRE(betti_numbers(build_complex(c)) == std::vector<std::int64_t>{2});
  }
}

TEST_CASE("component decomposition under closed-cube contact", "[topology]") {
  SECTION("diagonal pair connects through the shared corner") {
    const auto comps = components(config2({{0, 0}, {1, 1}}));
    REQUIRE(comps.count() == 1);
    REQUIRE(comps.members[0].size() == 2);
    // Both sites see a max l1 distance of 2, so d(x, mu) = 3.
    REQUIRE(comps.reach[0] == 2);
    REQUIRE(comps.d_x_mu(0) == 3);
  }
  SECTION("far single cube splits off") {
    const auto comps = components(config2({{0, 0}, {0, 1}, {5, 5}}, 10));
    REQUIRE(comps.count() == 2);
  }
  SECTION("empty has no components") {
    REQUIRE(components(config2({})).count() == 0);
  }
  SECTION("l1-distance-2 straight gap does NOT connect") {
    const auto comps = components(config2({{0, 0}, {2, 0}}));
    REQUIRE(comps.count() == 2);
    REQUIRE(comps.reach[0] == 0);
    REQUIRE(comps.d_x_mu(0) == 1);  // singleton component: C within W_0
  }
  SECTION("annulus is one component of size 8 with reach 4") {
    const auto comps = components(config2(kAnnulus));
    REQUIRE(comps.count() == 1);
    REQUIRE(comps.members[0].size() == 8);
    // Corner (-1,-1) to opposite corner (1,1): l1 distance 4.
    for (std::size_t pos = 0; pos < comps.support_sites.size(); ++pos)
      REQUIRE((comps.reach[pos] == 3 || comps.reach[pos] == 4));
  }
}

TEST_CASE("euler characteristic equals the alternating betti sum", "[topology]") {
  // chi from cell counts must equal beta_0 - beta_1 (+ beta_2 = 0) on random
  // configurations: exact identity of GF(2) ranks.
  SeedPolicy seeds{424242};
  auto win = Window::make(GroupKind::integer_lattice(2), 8);
  for (std::uint64_t rep = 0; rep < 60; ++rep) {
    const double p = (rep % 3 == 0) ? 0.25 : (rep % 3 == 1 ? 0.5 : 0.75);
    auto rng = seeds.stream(stream_tag::kSample, 0, rep);
    const auto cfg = ModelSampler(ModelSpec::iid(p), win).sample(rng);
    const auto cx = build_complex(cfg);
    const auto b = betti_numbers(cx);
    REQUIRE(euler_characteristic(cx) == b[0] - b[1]);
  }
}

TEST_CASE("betti additivity over disjoint unions", "[topology]") {
  // An annulus and a far solid square: betti adds componentwise.
  auto win = Window::make(GroupKind::integer_lattice(2), 10);
  SpinConfiguration c(win);
  for (const auto& [x, y] : kAnnulus) c.set_bit(win->index_of(gp({x, y})), true);
  for (int x = 4; x <= 5; ++x)
    for (int y = 4; y <= 5; ++y) c.set_bit(win->index_of(gp({x, y})), true);
  const auto b = betti_numbers(build_complex(c));
  REQUIRE(b == std::vector<std::int64_t>{2, 1});

  // Component-restricted betti agrees.
  const auto comps = components(c);
  REQUIRE(comps.count() == 2);
  std::int64_t b0 = 0, b1 = 0;
  for (std::size_t k = 0; k < comps.count(); ++k) {
    const auto bk = component_betti(c, comps, static_cast<int>(k));
    b0 += bk[0];
    b1 += bk[1];
  }
  REQUIRE(b0 == b[0]);
  REQUIRE(b1 == b[1]);
}

TEST_CASE("planar duality: loops equal bounded complement components",
          "[topology]") {
  SECTION("golden shapes") {
    const auto annulus = duality_check_2d(config2(kAnnulus));
    REQUIRE(annulus.beta1 == 1);
    REQUIRE(annulus.bounded_free_components == 1);
    REQUIRE(annulus.consistent());

    const auto solid = duality_check_2d(config2({{0, 0}, {1, 0}, {0, 1}, {1, 1}}));
    REQUIRE(solid.beta1 == 0);
    REQUIRE(solid.bounded_free_components == 0);
    REQUIRE(solid.consistent());
  }
  SECTION("two nested annuli have two bounded holes") {
    auto win = Window::make(GroupKind::integer_lattice(2), 10);
    SpinConfiguration c(win);
    for (const auto& [x, y] : kAnnulus) c.set_bit(win->index_of(gp({x, y})), true);
    for (int x = -3; x <= 3; ++x)
      for (int y = -3; y <= 3; ++y)
        if (std::max(std::abs(x), std::abs(y)) == 3)
          c.set_bit(win->index_of(gp({x, y})), true);
    const auto rep = duality_check_2d(c);
    REQUIRE(rep.beta1 == 2);
    REQUIRE(rep.bounded_free_components == 2);
    REQUIRE(rep.consistent());
  }
  SECTION("diagonal free pixels do not tunnel through closed-cube corners") {
    // Occupied diagonal pair: the two free diagonal pixels touch only at the
    // corner owned by the closed cubes, so no bounded hole exists and the
    // occupied pair is one component.
    const auto rep = duality_check_2d(config2({{0, 0}, {1, 1}}));
    REQUIRE(rep.beta0 == 1);
    REQUIRE(rep.beta1 == 0);
    REQUIRE(rep.bounded_free_components == 0);
    REQUIRE(rep.consistent());
  }
  SECTION("500 random configurations stay consistent") {
    SeedPolicy seeds{987654321};
    auto win = Window::make(GroupKind::integer_lattice(2), 10);
    const double ps[3] = {0.2, 0.5, 0.8};
    std::size_t checked = 0;
    for (std::uint64_t rep = 0; rep < 500; ++rep) {
      auto rng = seeds.stream(stream_tag::kSample, 1, rep);
      const auto cfg = ModelSampler(ModelSpec::iid(ps[rep % 3]), win).sample(rng);
      const auto dual = duality_check_2d(cfg);
      INFO("rep=" << rep << " beta0=" << dual.beta0 << " beta1=" << dual.beta1
                  << " occ_comps=" << dual.occupied_components
                  << " holes=" << dual.bounded_free_components);
      REQUIRE(dual.consistent());
      ++checked;
    }
    REQUIRE(checked == 500);
  }
}

TEST_CASE("subcriticality probe decay", "[topology]") {
  auto win = Window::make(GroupKind::integer_lattice(2), 8);

  SECTION("sparse iid percolation decays log-linearly") {
    const auto rep = subcriticality_probe(ModelSpec::iid(0.1), win, 30'000, 5, 1234);
    REQUIRE(rep.rows.size() == 5);
    for (const auto& row : rep.rows) REQUIRE(row.p_hat > 0.0);
    // Connection probabilities drop roughly a decade per step.
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
      REQUIRE(rep.rows[i].p_hat < rep.rows[i - 1].p_hat);
    REQUIRE(rep.slope < 0.0);
    REQUIRE(rep.r_squared > 0.9);
  }
  SECTION("full occupancy connects everything") {
    const auto rep = subcriticality_probe(ModelSpec::iid(1.0), win, 10, 4, 1);
    for (const auto& row : rep.rows) {
      REQUIRE(row.p_hat == 1.0);
      REQUIRE(row.se == 0.0);
    }
  }
  SECTION("empty model never connects") {
    const auto rep = subcriticality_probe(ModelSpec::iid(0.0), win, 10, 4, 1);
    for (const auto& row : rep.rows) REQUIRE(row.p_hat == 0.0);
  }
  SECTION("t grid validation") {
    REQUIRE_THROWS_AS(subcriticality_probe(ModelSpec::iid(0.5), win, 5, 0, 1),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(subcriticality_probe(ModelSpec::iid(0.5), win, 5, 99, 1),
                      std::invalid_argument);
  }
}
