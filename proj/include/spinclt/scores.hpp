// Score functions xi(x, mu): per-site local statistics with declared
// locality, reported stabilization radii, and optional growth metadata.
// Implements subgraph counts, component counts, planar intrinsic volumes,
// nearest-neighbour distances, component Betti scores, and truncation.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spinclt/cayley.hpp"
#include "spinclt/spin.hpp"
#include "spinclt/topology.hpp"

namespace spinclt {

// |xi(x, omega)| <= c_star * R(x, omega)^kappa (declared polynomial growth).
struct GrowthBound {
  double c_star = 1.0;
  double kappa = 0.0;
};

struct ScoreSample {
  double value = 0.0;
  std::optional<int> radius;  // nullopt = unbounded (never stabilizes)
};

struct ScoreFunction {
  std::string name;
  // Engaged: depends only on mu within W_r(x).  Disengaged: quasi-local.
  std::optional<int> local_radius;
  std::optional<GrowthBound> growth;

  // xi(x, mu); must be 0 whenever x is not occupied.
  std::function<double(const GroupPoint&, const SpinConfiguration&)> value;
  // Radius of stabilization at x; nullopt = unbounded.
  std::function<std::optional<int>(const GroupPoint&, const SpinConfiguration&)>
      radius;
  // Optional bulk path: values and radii for every window site at once.
  std::function<std::vector<ScoreSample>(const SpinConfiguration&)> evaluate_all;
};

// ---------------------------------------------------------------------------
// Pattern templates: k distinct offsets including the origin whose closed
// cubes form a connected union.

struct PatternTemplate {
  std::vector<GroupPoint> offsets;
  int k() const { return static_cast<int>(offsets.size()); }
};

namespace detail {

inline bool linf_adjacent(const GroupPoint& a, const GroupPoint& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::llabs(a[i] - b[i]) > 1) return false;
  return true;
}

inline bool cubes_connected(const std::vector<GroupPoint>& pts) {
  if (pts.empty()) return false;
  std::vector<char> seen(pts.size(), 0);
  std::vector<std::size_t> stack = {0};
  seen[0] = 1;
  std::size_t visited = 1;
  while (!stack.empty()) {
    const std::size_t cur = stack.back();
    stack.pop_back();
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (!seen[j] && linf_adjacent(pts[cur], pts[j])) {
        seen[j] = 1;
        ++visited;
        stack.push_back(j);
      }
  }
  return visited == pts.size();
}

// Intersection pattern of the union of closed unit cubes at k points: for
// every subset the cubes meet iff per-axis (max - min) <= 1.  Stored as a
// bitmask-indexed table; isomorphism = a cell bijection preserving it.
inline std::vector<char> nerve_table(const std::vector<GroupPoint>& pts) {
  const int k = static_cast<int>(pts.size());
  const std::size_t dim = pts.empty() ? 0 : pts[0].size();
  std::vector<char> table(std::size_t{1} << k, 0);
  for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
    bool meet = true;
    for (std::size_t a = 0; a < dim && meet; ++a) {
      std::int64_t lo = INT64_MAX, hi = INT64_MIN;
      for (int i = 0; i < k; ++i)
        if (mask & (1u << i)) {
          lo = std::min(lo, pts[static_cast<std::size_t>(i)][a]);
          hi = std::max(hi, pts[static_cast<std::size_t>(i)][a]);
        }
      meet = (hi - lo) <= 1;
    }
    table[mask] = meet ? 1 : 0;
  }
  return table;
}

// Brute-force bijection search (k <= 6) with a pairwise-degree prefilter.
inline bool nerve_isomorphic(const std::vector<char>& ta,
                             const std::vector<char>& tb, int k) {
  auto degree = [&](const std::vector<char>& t, int i) {
    int deg = 0;
    for (int j = 0; j < k; ++j)
      if (j != i && t[(std::size_t{1} << i) | (std::size_t{1} << j)]) ++deg;
    return deg;
  };
  std::vector<int> da(static_cast<std::size_t>(k)), db(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    da[static_cast<std::size_t>(i)] = degree(ta, i);
    db[static_cast<std::size_t>(i)] = degree(tb, i);
  }
  {
    auto sa = da, sb = db;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) return false;
  }
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  do {
    bool degrees_ok = true;
    for (int i = 0; i < k && degrees_ok; ++i)
      degrees_ok = (da[static_cast<std::size_t>(i)] ==
                    db[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
    if (!degrees_ok) continue;
    bool match = true;
    for (std::uint32_t mask = 1; mask < (1u << k) && match; ++mask) {
      std::uint32_t mapped = 0;
      for (int i = 0; i < k; ++i)
        if (mask & (1u << i)) mapped |= (1u << perm[static_cast<std::size_t>(i)]);
      match = (ta[mask] == tb[mapped]);
    }
    if (match) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

// Occupied l-infinity neighbors of a site, window-restricted.
inline void occupied_linf_neighbors(const SpinConfiguration& cfg, int site,
                                    std::vector<int>* out) {
  out->clear();
  const auto& win = *cfg.window;
  const int d = win.kind().dim;
  const GroupPoint& x = win.site(site);
  GroupPoint y = x;
  std::vector<int> digit(static_cast<std::size_t>(d), -1);
  for (;;) {
    bool all_zero = true;
    for (auto v : digit) all_zero &= (v == 0);
    if (!all_zero) {
      for (int a = 0; a < d; ++a)
        y[static_cast<std::size_t>(a)] = x[static_cast<std::size_t>(a)] +
                                         digit[static_cast<std::size_t>(a)];
      if (win.contains(y)) {
        const int ni = win.index_of(y);
        if (cfg.bit(ni)) out->push_back(ni);
      }
    }
    int a = 0;
    while (a < d && digit[static_cast<std::size_t>(a)] == 1) {
      digit[static_cast<std::size_t>(a)] = -1;
      ++a;
    }
    if (a == d) break;
    ++digit[static_cast<std::size_t>(a)];
  }
}

// Every connected k-subset of occupied sites containing `root`, visited once
// (ban-list recursion: extensions only from non-banned frontier sites).
template <typename Visit>
inline void enumerate_connected_ksets(const SpinConfiguration& cfg, int root,
                                      int k, Visit&& visit) {
  std::vector<int> current = {root};
  std::set<int> in_current = {root};
  std::set<int> banned = {root};
  std::vector<int> scratch;

  // Frontier: occupied neighbors of `current` that are not banned.
  std::function<void(std::set<int>)> grow = [&](std::set<int> local_ban) {
    if (static_cast<int>(current.size()) == k) {
      visit(current);
      return;
    }
    std::vector<int> frontier;
    for (int s : current) {
      occupied_linf_neighbors(cfg, s, &scratch);
      for (int nb : scratch)
        if (!local_ban.count(nb) && !in_current.count(nb)) frontier.push_back(nb);
    }
    std::sort(frontier.begin(), frontier.end());
    frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
    for (int nb : frontier) {
      current.push_back(nb);
      in_current.insert(nb);
      local_ban.insert(nb);
      grow(local_ban);
      current.pop_back();
      in_current.erase(nb);
      // nb stays banned for later branches at this level.
    }
  };
  grow(banned);
}

inline std::vector<GroupPoint> sites_of(const SpinConfiguration& cfg,
                                        const std::vector<int>& idx) {
  std::vector<GroupPoint> pts;
  pts.reserve(idx.size());
  for (int i : idx) pts.push_back(cfg.window->site(i));
  return pts;
}

}  // namespace detail

inline PatternTemplate pattern_template(std::vector<GroupPoint> offsets) {
  if (offsets.empty() || offsets.size() > 6)
    throw std::invalid_argument("pattern_template: need 1..6 offsets");
  const std::size_t dim = offsets[0].size();
  bool has_origin = false;
  for (const auto& p : offsets) {
    if (p.size() != dim)
      throw std::invalid_argument("pattern_template: mixed dimensions");
    bool zero = true;
    for (auto c : p) zero &= (c == 0);
    has_origin |= zero;
  }
  if (!has_origin)
    throw std::invalid_argument("pattern_template: offsets must include the origin");
  std::vector<GroupPoint> sorted = offsets;
  std::sort(sorted.begin(), sorted.end(),
            [](const GroupPoint& a, const GroupPoint& b) {
              return std::lexicographical_compare(a.begin(), a.end(), b.begin(),
                                                  b.end());
            });
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("pattern_template: offsets must be distinct");
  if (!detail::cubes_connected(offsets))
    throw std::invalid_argument("pattern_template: cube union must be connected");
  return PatternTemplate{std::move(offsets)};
}

// ---------------------------------------------------------------------------
// Subgraph count score: xi(x, mu) = (1/k) #{connected k-subsets S with
// x in S, K(S) isomorphic to the template}, so the total mass counts the
// unordered copies of the template in mu.

inline ScoreFunction subgraph_count_score(const PatternTemplate& tmpl) {
  const int k = tmpl.k();
  const int dim = static_cast<int>(tmpl.offsets[0].size());
  auto tmpl_nerve = detail::nerve_table(tmpl.offsets);

  // Any connected k-cube union containing x stays within l-infinity distance
  // k-1 of x, hence within word (l1) distance d*(k-1).
  const int r = dim * (k - 1);

  auto count_copies = [k, tmpl_nerve](const SpinConfiguration& cfg, int site) {
    double copies = 0.0;
    detail::enumerate_connected_ksets(
        cfg, site, k, [&](const std::vector<int>& subset) {
          const auto pts = detail::sites_of(cfg, subset);
          if (detail::nerve_isomorphic(detail::nerve_table(pts), tmpl_nerve, k))
            copies += 1.0;
        });
    return copies;
  };

  ScoreFunction s;
  s.name = "subgraph_count(k=" + std::to_string(k) + ")";
  s.local_radius = r;
  s.value = [count_copies, k](const GroupPoint& x, const SpinConfiguration& cfg) {
    if (!cfg.occupied(x)) return 0.0;
    return count_copies(cfg, cfg.window->index_of(x)) / static_cast<double>(k);
  };
  s.radius = [r](const GroupPoint& x,
                 const SpinConfiguration& cfg) -> std::optional<int> {
    (void)x;
    (void)cfg;
    return r;
  };
  return s;
}

// ---------------------------------------------------------------------------
// Component count score: xi(x, mu) = (1/k) 1[|C(x)| = k and K(C(x))
// isomorphic to the template], so the total mass counts whole components.
// The isolation indicator is the l-infinity one: C(x) is a maximal component
// exactly when no occupied site outside it touches it.

inline ScoreFunction component_count_score(const PatternTemplate& tmpl) {
  const int k = tmpl.k();
  const int dim = static_cast<int>(tmpl.offsets[0].size());
  auto tmpl_nerve = detail::nerve_table(tmpl.offsets);
  // BFS to depth k reaches every candidate member plus any spoiler, so the
  // evaluation depends on mu within word distance d*k.
  const int r = dim * k;

  ScoreFunction s;
  s.name = "component_count(k=" + std::to_string(k) + ")";
  s.local_radius = r;
  s.value = [k, tmpl_nerve](const GroupPoint& x, const SpinConfiguration& cfg) {
    if (!cfg.occupied(x)) return 0.0;
    // Grow the component of x, early-exiting past k members.
    std::vector<int> comp = {cfg.window->index_of(x)};
    std::set<int> seen(comp.begin(), comp.end());
    std::vector<int> scratch;
    for (std::size_t head = 0; head < comp.size(); ++head) {
      detail::occupied_linf_neighbors(cfg, comp[head], &scratch);
      for (int nb : scratch)
        if (seen.insert(nb).second) {
          comp.push_back(nb);
          if (static_cast<int>(comp.size()) > k) return 0.0;
        }
    }
    if (static_cast<int>(comp.size()) != k) return 0.0;
    const auto pts = detail::sites_of(cfg, comp);
    if (!detail::nerve_isomorphic(detail::nerve_table(pts), tmpl_nerve, k))
      return 0.0;
    return 1.0 / static_cast<double>(k);
  };
  s.radius = [r](const GroupPoint& x,
                 const SpinConfiguration& cfg) -> std::optional<int> {
    (void)x;
    (void)cfg;
    return r;
  };
  return s;
}

// ---------------------------------------------------------------------------
// Planar intrinsic volumes as additive per-site scores: V_2 = area (cube
// count), V_1 = half boundary length, V_0 = Euler characteristic distributed
// over owning sites (each cell weighted 1/#owners: integer twelfths).

inline std::array<ScoreFunction, 3> intrinsic_volume_scores(int d = 2) {
  if (d != 2)
    throw std::invalid_argument("intrinsic_volume_scores: only d = 2 supported");

  ScoreFunction v2;
  v2.name = "intrinsic_volume_2";
  v2.local_radius = 0;
  v2.value = [](const GroupPoint& x, const SpinConfiguration& cfg) {
    return cfg.occupied(x) ? 1.0 : 0.0;
  };
  v2.radius = [](const GroupPoint&, const SpinConfiguration&) -> std::optional<int> {
    return 0;
  };

  ScoreFunction v1;
  v1.name = "intrinsic_volume_1";
  v1.local_radius = 1;
  v1.value = [](const GroupPoint& x, const SpinConfiguration& cfg) {
    if (!cfg.occupied(x)) return 0.0;
    int free_faces = 0;
    GroupPoint y = x;
    for (std::size_t a = 0; a < x.size(); ++a)
      for (int delta : {-1, +1}) {
        y[a] = x[a] + delta;
        if (!cfg.occupied(y)) ++free_faces;
        y[a] = x[a];
      }
    return 0.5 * static_cast<double>(free_faces);
  };
  v1.radius = [](const GroupPoint&, const SpinConfiguration&) -> std::optional<int> {
    return 1;
  };

  ScoreFunction v0;
  v0.name = "intrinsic_volume_0";
  v0.local_radius = 2;
  v0.value = [](const GroupPoint& x, const SpinConfiguration& cfg) {
    if (!cfg.occupied(x)) return 0.0;
    // Sum (-1)^dim / n(c) over the 9 cells of Q_x, n(c) = occupied owners
    // of the cell; owners live in {site, site +/- e_i, diagonal} so the
    // denominators divide 12.  Accumulate exact twelfths.
    std::int64_t twelfths = 0;
    const std::int64_t x0 = x[0], x1 = x[1];
    GroupPoint y = x;
    for (int c0 = 0; c0 <= 2; ++c0)
      for (int c1 = 0; c1 <= 2; ++c1) {
        const std::int64_t cell0 = 2 * x0 + c0, cell1 = 2 * x1 + c1;
        int owners = 0;
        // Sites owning the cell: per axis, even coords have two candidate
        // owners, odd coords exactly one.
        const std::int64_t lo0 = (cell0 % 2 == 0) ? cell0 / 2 - 1 : (cell0 - 1) / 2;
        const std::int64_t hi0 = (cell0 % 2 == 0) ? cell0 / 2 : (cell0 - 1) / 2;
        const std::int64_t lo1 = (cell1 % 2 == 0) ? cell1 / 2 - 1 : (cell1 - 1) / 2;
        const std::int64_t hi1 = (cell1 % 2 == 0) ? cell1 / 2 : (cell1 - 1) / 2;
        for (std::int64_t o0 = lo0; o0 <= hi0; ++o0)
          for (std::int64_t o1 = lo1; o1 <= hi1; ++o1) {
            y[0] = o0;
            y[1] = o1;
            if (cfg.occupied(y)) ++owners;
          }
        const int dim = static_cast<int>(c0 % 2) + static_cast<int>(c1 % 2);
        twelfths += (dim % 2 ? -12 : 12) / owners;
      }
    return static_cast<double>(twelfths) / 12.0;
  };
  v0.radius = [](const GroupPoint&, const SpinConfiguration&) -> std::optional<int> {
    return 2;
  };

  return {v0, v1, v2};
}

// ---------------------------------------------------------------------------
// Nearest-neighbour distance score: with m = min distance to another point
// of mu, xi(x, mu) = m * #{points of mu at distance m}; each mutual edge is
// counted from both ends.  Radius of stabilization is m itself; a singleton
// never stabilizes (unbounded) and scores 0.

inline ScoreFunction nn_distance_score() {
  auto nearest = [](const GroupPoint& x, const SpinConfiguration& cfg)
      -> std::pair<int, int> {  // (min distance, tie count); (-1,0) if none
    const auto& win = *cfg.window;
    int best = -1, ties = 0;
    for (std::size_t i = 0; i < cfg.occ.size(); ++i) {
      if (!cfg.occ[i]) continue;
      const GroupPoint& y = win.site(static_cast<int>(i));
      std::int64_t dist = 0;
      for (std::size_t a = 0; a < x.size(); ++a) dist += std::llabs(x[a] - y[a]);
      if (dist == 0) continue;  // x itself (punctured configuration)
      const int di = static_cast<int>(dist);
      if (best < 0 || di < best) {
        best = di;
        ties = 1;
      } else if (di == best) {
        ++ties;
      }
    }
    return {best, ties};
  };

  ScoreFunction s;
  s.name = "nn_distance";
  s.local_radius = std::nullopt;  // quasi-local
  // |xi| = m * (shell count at m) <= 2d * (2m+1)^{d-1} * m; the declared
  // polynomial envelope c_* R^kappa with kappa = d covers d <= 3 windows.
  s.growth = GrowthBound{36.0, 3.0};
  s.value = [nearest](const GroupPoint& x, const SpinConfiguration& cfg) {
    if (!cfg.occupied(x)) return 0.0;
    const auto [m, ties] = nearest(x, cfg);
    if (m < 0) return 0.0;
    return static_cast<double>(m) * static_cast<double>(ties);
  };
  s.radius = [nearest](const GroupPoint& x,
                       const SpinConfiguration& cfg) -> std::optional<int> {
    if (!cfg.occupied(x)) return 0;
    const auto [m, ties] = nearest(x, cfg);
    (void)ties;
    if (m < 0) return std::nullopt;
    return m;
  };
  return s;
}

// ---------------------------------------------------------------------------
// Betti score xi_j(x, mu) = beta_j(C(x, mu)) / |C(x, mu)| with stabilization
// radius d(x, mu) + 1.  beta_0 of a component is identically 1, so j = 0 is
// served without homology; j >= 1 restricts the complex to the component.

inline ScoreFunction betti_score(int j, int lattice_dim) {
  if (lattice_dim < 1 || lattice_dim > 3)
    throw std::invalid_argument("betti_score: lattice dimension must be 1..3");
  if (j < 0 || j >= lattice_dim)
    throw std::invalid_argument("betti_score: need 0 <= j < d");

  ScoreFunction s;
  s.name = "betti_" + std::to_string(j);
  s.local_radius = std::nullopt;  // quasi-local
  s.growth = GrowthBound{1.0, 0.0};  // |xi_j| <= 1 (beta_j <= component size)

  s.evaluate_all = [j](const SpinConfiguration& cfg) {
    const auto comps = components(cfg);
    std::vector<double> comp_value(comps.count());
    for (std::size_t c = 0; c < comps.count(); ++c) {
      const double size = static_cast<double>(comps.members[c].size());
      if (j == 0) {
        comp_value[c] = 1.0 / size;
      } else {
        comp_value[c] =
            static_cast<double>(component_betti(cfg, comps, static_cast<int>(c))
                                    [static_cast<std::size_t>(j)]) /
            size;
      }
    }
    std::vector<ScoreSample> out(cfg.window->w());
    for (std::size_t pos = 0; pos < comps.support_sites.size(); ++pos) {
      auto& sample =
          out[static_cast<std::size_t>(comps.support_sites[pos])];
      sample.value = comp_value[static_cast<std::size_t>(comps.component_id[pos])];
      sample.radius = comps.d_x_mu(pos) + 1;
    }
    return out;
  };
  s.value = [j](const GroupPoint& x, const SpinConfiguration& cfg) {
    if (!cfg.occupied(x)) return 0.0;
    const auto comps = components(cfg);
    // Locate x's support position.
    const int wi = cfg.window->index_of(x);
    for (std::size_t pos = 0; pos < comps.support_sites.size(); ++pos)
      if (comps.support_sites[pos] == wi) {
        const int c = comps.component_id[pos];
        const double size =
            static_cast<double>(comps.members[static_cast<std::size_t>(c)].size());
        if (j == 0) return 1.0 / size;
        return static_cast<double>(
                   component_betti(cfg, comps, c)[static_cast<std::size_t>(j)]) /
               size;
      }
    return 0.0;
  };
  s.radius = [](const GroupPoint& x,
                const SpinConfiguration& cfg) -> std::optional<int> {
    if (!cfg.occupied(x)) return 0;
    const auto comps = components(cfg);
    const int wi = cfg.window->index_of(x);
    for (std::size_t pos = 0; pos < comps.support_sites.size(); ++pos)
      if (comps.support_sites[pos] == wi) return comps.d_x_mu(pos) + 1;
    return 0;
  };
  return s;
}

// ---------------------------------------------------------------------------
// Truncation: xi~(x, mu) = xi(x, mu) 1[R(x, mu) <= t], local of radius t.

inline ScoreFunction truncate_to_local(const ScoreFunction& base, int t) {
  if (t < 0) throw std::invalid_argument("truncate_to_local: t must be >= 0");
  ScoreFunction s;
  s.name = base.name + "|trunc" + std::to_string(t);
  s.local_radius = t;
  s.growth = base.growth;
  s.value = [base, t](const GroupPoint& x, const SpinConfiguration& cfg) {
    const auto r = base.radius(x, cfg);
    if (!r || *r > t) return 0.0;
    return base.value(x, cfg);
  };
  s.radius = [base, t](const GroupPoint& x,
                       const SpinConfiguration& cfg) -> std::optional<int> {
    const auto r = base.radius(x, cfg);
    if (!r || *r > t) return t;
    return *r;
  };
  return s;
}

// ---------------------------------------------------------------------------
// Total mass H(mu) = sum over occupied sites of xi, window-truncated, with
// per-site contributions and truncation diagnostics.

struct TotalMassResult {
  double value = 0.0;
  std::vector<ScoreSample> per_site;  // aligned with window site indices
  // Occupied sites whose reported stabilization ball spills out of the
  // window (or never stabilizes): their xi saw the truncated pattern.
  std::size_t radius_exceeds_window = 0;
};

inline TotalMassResult total_mass(const ScoreFunction& score,
                                  const SpinConfiguration& config) {
  const auto& win = *config.window;
  TotalMassResult out;
  if (score.evaluate_all) {
    out.per_site = score.evaluate_all(config);
  } else {
    out.per_site.resize(win.w());
    for (std::size_t i = 0; i < win.w(); ++i) {
      if (!config.occ[i]) continue;
      const GroupPoint& x = win.site(static_cast<int>(i));
      out.per_site[i].value = score.value(x, config);
      out.per_site[i].radius = score.radius(x, config);
    }
  }
  for (std::size_t i = 0; i < win.w(); ++i) {
    if (!config.occ[i]) continue;
    out.value += out.per_site[i].value;
    const auto& r = out.per_site[i].radius;
    if (!r || win.center_distance(static_cast<int>(i)) + *r > win.n())
      ++out.radius_exceeds_window;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Empirical tail of the stabilization radius: per t, the maximum over a
// site sample of P(R(x, P) >= t | x occupied), with binomial SEs.

struct RadiusTailRow {
  int t = 0;
  double p_max = 0.0;
  double se_at_max = 0.0;
  int argmax_site = -1;
};

struct RadiusTailReport {
  std::vector<RadiusTailRow> rows;
  std::size_t replicates = 0;
};

inline RadiusTailReport empirical_radius_tail(const ScoreFunction& score,
                                              const ModelSpec& spec,
                                              const WindowPtr& window,
                                              const std::vector<int>& t_grid,
                                              std::size_t replicates,
                                              std::uint64_t master_seed) {
  if (t_grid.empty())
    throw std::invalid_argument("empirical_radius_tail: empty t grid");
  const int t_max = *std::max_element(t_grid.begin(), t_grid.end());
  ModelSampler sampler(spec, window);
  SeedPolicy seeds{master_seed};

  // Interior site sample: full stabilization balls stay inside the window.
  std::vector<int> sites;
  for (int i = 0; i < static_cast<int>(window->w()); ++i)
    if (window->center_distance(i) + t_max <= window->n()) sites.push_back(i);
  if (sites.empty())
    throw std::invalid_argument("empirical_radius_tail: window too small for t grid");

  std::vector<std::size_t> occupied_count(sites.size(), 0);
  // tail_count[site][t index]
  std::vector<std::vector<std::size_t>> tail_count(
      sites.size(), std::vector<std::size_t>(t_grid.size(), 0));

  for (std::size_t rep = 0; rep < replicates; ++rep) {
    auto rng = seeds.stream(stream_tag::kSample, 0, rep);
    const auto cfg = sampler.sample(rng);
    for (std::size_t si = 0; si < sites.size(); ++si) {
      const int i = sites[si];
      if (!cfg.bit(i)) continue;
      ++occupied_count[si];
      const auto r = score.radius(window->site(i), cfg);
      for (std::size_t ti = 0; ti < t_grid.size(); ++ti)
        if (!r || *r >= t_grid[ti]) ++tail_count[si][ti];
    }
  }

  RadiusTailReport rep;
  rep.replicates = replicates;
  for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
    RadiusTailRow row;
    row.t = t_grid[ti];
    for (std::size_t si = 0; si < sites.size(); ++si) {
      if (occupied_count[si] == 0) continue;
      const double p = static_cast<double>(tail_count[si][ti]) /
                       static_cast<double>(occupied_count[si]);
      if (p >= row.p_max) {
        row.p_max = p;
        row.se_at_max = binomial_se(p, occupied_count[si]);
        row.argmax_site = sites[si];
      }
    }
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace spinclt
