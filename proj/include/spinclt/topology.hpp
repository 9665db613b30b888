// Cubical complexes over occupied lattice sites, Betti numbers over GF(2),
// connected-component extraction under closed-cube (l-infinity) contact, and
// the planar duality / subcriticality diagnostics built on top of them.
//
// Cells are encoded in doubled coordinates: the closed unit cube of a site x
// spans [2*x_i, 2*x_i + 2] per axis, and an elementary cube is any lattice
// point of that box; a coordinate is even for a degenerate (point) interval
// and odd for a unit interval, so the cell dimension is the number of odd
// coordinates.
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "spinclt/cayley.hpp"
#include "spinclt/rng.hpp"
#include "spinclt/spin.hpp"
#include "spinclt/stats.hpp"

namespace spinclt {

struct CubicalComplex {
  int lattice_dim = 0;
  // cells[j] = sorted doubled-coordinate keys of the j-dimensional cells.
  std::vector<std::vector<GroupPoint>> cells;

  std::size_t cell_count(int j) const {
    if (j < 0 || j > lattice_dim) return 0;
    return cells[static_cast<std::size_t>(j)].size();
  }
  std::size_t total_cells() const {
    std::size_t t = 0;
    for (const auto& layer : cells) t += layer.size();
    return t;
  }
};

inline int cell_dimension(const GroupPoint& doubled) {
  int d = 0;
  for (auto c : doubled) d += static_cast<int>(c & 1);
  return d;
}

// All elementary cubes of the union of closed unit cubes at occupied sites.
inline CubicalComplex build_complex(const SpinConfiguration& config,
                                    std::size_t max_cells = 4'000'000) {
  const auto& win = *config.window;
  if (win.kind().tag != GroupKind::Tag::IntegerLattice)
    throw std::invalid_argument(
        "build_complex: cubical complexes require an integer lattice window");
  const int d = win.kind().dim;

  std::size_t pow3 = 1;
  for (int i = 0; i < d; ++i) pow3 *= 3;
  if (config.count_occupied() * pow3 > max_cells)
    throw ResourceLimitError("build_complex: cell count would exceed cap");

  CubicalComplex cx;
  cx.lattice_dim = d;
  cx.cells.resize(static_cast<std::size_t>(d) + 1);
  std::unordered_map<GroupPoint, char, GroupPointHash> seen;
  seen.reserve(config.count_occupied() * pow3);

  GroupPoint cell(static_cast<std::size_t>(d), 0);
  for (std::size_t i = 0; i < config.occ.size(); ++i) {
    if (!config.occ[i]) continue;
    const GroupPoint& x = win.site(static_cast<int>(i));
    // Odometer over the 3^d choices {2x_i, 2x_i+1, 2x_i+2} per axis.
    std::vector<int> digit(static_cast<std::size_t>(d), 0);
    for (;;) {
      for (int a = 0; a < d; ++a)
        cell[static_cast<std::size_t>(a)] =
            2 * x[static_cast<std::size_t>(a)] + digit[static_cast<std::size_t>(a)];
      if (seen.emplace(cell, 1).second)
        cx.cells[static_cast<std::size_t>(cell_dimension(cell))].push_back(cell);
      int a = 0;
      while (a < d && digit[static_cast<std::size_t>(a)] == 2) {
        digit[static_cast<std::size_t>(a)] = 0;
        ++a;
      }
      if (a == d) break;
      ++digit[static_cast<std::size_t>(a)];
    }
  }
  for (auto& layer : cx.cells)
    std::sort(layer.begin(), layer.end(),
              [](const GroupPoint& a, const GroupPoint& b) {
                return std::lexicographical_compare(a.begin(), a.end(),
                                                    b.begin(), b.end());
              });
  return cx;
}

inline std::int64_t euler_characteristic(const CubicalComplex& cx) {
  std::int64_t chi = 0;
  for (int j = 0; j <= cx.lattice_dim; ++j)
    chi += (j % 2 ? -1 : 1) * static_cast<std::int64_t>(cx.cell_count(j));
  return chi;
}

namespace detail {

// Rank over GF(2) of the boundary map from j-cells to (j-1)-cells, by
// column elimination on bit-packed columns.
inline std::size_t boundary_rank(const CubicalComplex& cx, int j) {
  const auto& hi = cx.cells[static_cast<std::size_t>(j)];
  const auto& lo = cx.cells[static_cast<std::size_t>(j) - 1];
  if (hi.empty() || lo.empty()) return 0;

  std::unordered_map<GroupPoint, int, GroupPointHash> lo_index;
  lo_index.reserve(lo.size());
  for (std::size_t r = 0; r < lo.size(); ++r)
    lo_index.emplace(lo[r], static_cast<int>(r));

  const std::size_t blocks = (lo.size() + 63) / 64;
  std::vector<std::vector<std::uint64_t>> pivots;  // reduced columns
  std::vector<int> pivot_row;                      // lowest set row per pivot
  pivots.reserve(std::min(hi.size(), lo.size()));

  std::vector<std::uint64_t> col(blocks);
  for (const auto& cell : hi) {
    std::fill(col.begin(), col.end(), 0);
    // Codimension-1 faces: each odd coordinate split to its two endpoints.
    GroupPoint face = cell;
    for (std::size_t a = 0; a < cell.size(); ++a) {
      if (!(cell[a] & 1)) continue;
      for (int delta : {-1, +1}) {
        face[a] = cell[a] + delta;
        const auto it = lo_index.find(face);
        if (it == lo_index.end())
          throw std::logic_error("boundary_rank: complex not closed under faces");
        col[static_cast<std::size_t>(it->second) / 64] ^=
            (std::uint64_t{1} << (static_cast<std::size_t>(it->second) % 64));
      }
      face[a] = cell[a];
    }
    // Reduce against existing pivots.
    for (std::size_t p = 0; p < pivots.size(); ++p) {
      const int r = pivot_row[p];
      if (col[static_cast<std::size_t>(r) / 64] &
          (std::uint64_t{1} << (static_cast<std::size_t>(r) % 64))) {
        for (std::size_t b = 0; b < blocks; ++b) col[b] ^= pivots[p][b];
      }
    }
    int lowest = -1;
    for (std::size_t b = 0; b < blocks && lowest < 0; ++b)
      if (col[b]) lowest = static_cast<int>(b * 64 + static_cast<std::size_t>(
                                                         __builtin_ctzll(col[b])));
    if (lowest >= 0) {
      pivots.push_back(col);
      pivot_row.push_back(lowest);
    }
  }
  return pivots.size();
}

}  // namespace detail

// (beta_0, ..., beta_{d-1}) over GF(2): beta_j = |F_j| - rank d_j - rank d_{j+1}.
inline std::vector<std::int64_t> betti_numbers(const CubicalComplex& cx) {
  const int d = cx.lattice_dim;
  std::vector<std::size_t> rank(static_cast<std::size_t>(d) + 2, 0);
  for (int j = 1; j <= d; ++j)
    rank[static_cast<std::size_t>(j)] = detail::boundary_rank(cx, j);
  std::vector<std::int64_t> beta(static_cast<std::size_t>(d), 0);
  for (int j = 0; j < d; ++j)
    beta[static_cast<std::size_t>(j)] =
        static_cast<std::int64_t>(cx.cell_count(j)) -
        static_cast<std::int64_t>(rank[static_cast<std::size_t>(j)]) -
        static_cast<std::int64_t>(rank[static_cast<std::size_t>(j) + 1]);
  // The top dimension never carries homology for a union of closed cubes;
  // fold it into a consistency check rather than the returned vector.
  const std::int64_t beta_top =
      static_cast<std::int64_t>(cx.cell_count(d)) -
      static_cast<std::int64_t>(rank[static_cast<std::size_t>(d)]);
  if (d >= 1 && beta_top != 0)
    throw std::logic_error("betti_numbers: nonzero top homology");
  return beta;
}

// Connected components of the occupied set under l-infinity adjacency (two
// closed cubes touch iff every coordinate differs by at most 1).
struct ComponentDecomposition {
  // Window indices of occupied sites, in site-index order.
  std::vector<int> support_sites;
  // For each entry of support_sites: component id (0-based, by first visit).
  std::vector<int> component_id;
  // Per component: positions into support_sites.
  std::vector<std::vector<int>> members;
  // Per support position: max l1 distance to any site of its component.
  std::vector<int> reach;

  std::size_t count() const { return members.size(); }
  // The proof-side d(x, mu) = inf{ s : C(x, mu) inside W_{s-1}(x) }.
  int d_x_mu(std::size_t support_pos) const { return reach[support_pos] + 1; }
};

inline ComponentDecomposition components(const SpinConfiguration& config) {
  const auto& win = *config.window;
  if (win.kind().tag != GroupKind::Tag::IntegerLattice)
    throw std::invalid_argument("components: requires an integer lattice window");
  const int d = win.kind().dim;

  ComponentDecomposition out;
  std::vector<int> support_pos_of_window(win.w(), -1);
  for (std::size_t i = 0; i < config.occ.size(); ++i)
    if (config.occ[i]) {
      support_pos_of_window[i] = static_cast<int>(out.support_sites.size());
      out.support_sites.push_back(static_cast<int>(i));
    }
  const std::size_t m = out.support_sites.size();
  out.component_id.assign(m, -1);
  out.reach.assign(m, 0);

  // Offsets over {-1,0,1}^d minus the origin.
  std::vector<GroupPoint> offsets;
  {
    GroupPoint off(static_cast<std::size_t>(d), -1);
    for (;;) {
      bool all_zero = true;
      for (auto c : off) all_zero &= (c == 0);
      if (!all_zero) offsets.push_back(off);
      int a = 0;
      while (a < d && off[static_cast<std::size_t>(a)] == 1) {
        off[static_cast<std::size_t>(a)] = -1;
        ++a;
      }
      if (a == d) break;
      ++off[static_cast<std::size_t>(a)];
    }
  }

  for (std::size_t s = 0; s < m; ++s) {
    if (out.component_id[s] >= 0) continue;
    const int comp = static_cast<int>(out.members.size());
    out.members.emplace_back();
    std::queue<int> queue;
    queue.push(static_cast<int>(s));
    out.component_id[s] = comp;
    while (!queue.empty()) {
      const int pos = queue.front();
      queue.pop();
      out.members.back().push_back(pos);
      const GroupPoint& x = win.site(out.support_sites[static_cast<std::size_t>(pos)]);
      GroupPoint y = x;
      for (const auto& off : offsets) {
        for (std::size_t a = 0; a < y.size(); ++a) y[a] = x[a] + off[a];
        if (!win.contains(y)) continue;
        const int wi = win.index_of(y);
        const int npos = support_pos_of_window[static_cast<std::size_t>(wi)];
        if (npos < 0 || out.component_id[static_cast<std::size_t>(npos)] >= 0) continue;
        out.component_id[static_cast<std::size_t>(npos)] = comp;
        queue.push(npos);
      }
    }
  }

  // Per-site reach: max l1 distance within the component.
  for (const auto& comp : out.members) {
    for (int p : comp) {
      const GroupPoint& x =
          win.site(out.support_sites[static_cast<std::size_t>(p)]);
      std::int64_t best = 0;
      for (int q : comp) {
        const GroupPoint& y =
            win.site(out.support_sites[static_cast<std::size_t>(q)]);
        std::int64_t dist = 0;
        for (std::size_t a = 0; a < x.size(); ++a)
          dist += std::llabs(x[a] - y[a]);
        best = std::max(best, dist);
      }
      out.reach[static_cast<std::size_t>(p)] = static_cast<int>(best);
    }
  }
  return out;
}

// Betti numbers of one component's cube union, by restricting the complex.
inline std::vector<std::int64_t> component_betti(
    const SpinConfiguration& config, const ComponentDecomposition& comps,
    int comp_id) {
  SpinConfiguration sub(config.window);
  for (int pos : comps.members[static_cast<std::size_t>(comp_id)])
    sub.set_bit(comps.support_sites[static_cast<std::size_t>(pos)], true);
  return betti_numbers(build_complex(sub));
}

// ---------------------------------------------------------------------------
// Planar duality: beta_1 equals the number of bounded complement components.
// The complement of a union of CLOSED squares is open, so two free pixels
// that touch only at a corner blocked by occupied squares are NOT connected:
// 4-connected flood fill on free pixels is the exact dual connectivity.

struct DualityReport {
  std::int64_t beta0 = 0;
  std::int64_t beta1 = 0;
  std::int64_t occupied_components = 0;
  std::int64_t bounded_free_components = 0;
  bool consistent() const {
    return beta1 == bounded_free_components && beta0 == occupied_components;
  }
};

inline DualityReport duality_check_2d(const SpinConfiguration& config) {
  const auto& win = *config.window;
  if (win.kind().tag != GroupKind::Tag::IntegerLattice || win.kind().dim != 2)
    throw std::invalid_argument("duality_check_2d: requires a Z^2 window");

  DualityReport rep;
  const auto betti = betti_numbers(build_complex(config));
  rep.beta0 = betti[0];
  rep.beta1 = betti[1];
  rep.occupied_components = static_cast<std::int64_t>(components(config).count());

  // Pixel grid: window bounding box extended by one margin row/column, so
  // the unbounded outside is a single 4-connected frame component.
  const std::int64_t n = win.n();
  const std::int64_t lo = -n - 1, hi = n + 1;
  const std::int64_t side = hi - lo + 1;
  std::vector<char> free_pixel(static_cast<std::size_t>(side * side), 1);
  for (std::size_t i = 0; i < config.occ.size(); ++i)
    if (config.occ[i]) {
      const auto& p = win.site(static_cast<int>(i));
      free_pixel[static_cast<std::size_t>((p[1] - lo) * side + (p[0] - lo))] = 0;
    }
  std::vector<int> label(static_cast<std::size_t>(side * side), -1);
  int next_label = 0;
  std::vector<bool> touches_frame;
  for (std::int64_t y = 0; y < side; ++y)
    for (std::int64_t x = 0; x < side; ++x) {
      const std::size_t start = static_cast<std::size_t>(y * side + x);
      if (!free_pixel[start] || label[start] >= 0) continue;
      const int lab = next_label++;
      touches_frame.push_back(false);
      std::queue<std::int64_t> queue;
      queue.push(static_cast<std::int64_t>(start));
      label[start] = lab;
      while (!queue.empty()) {
        const std::int64_t cur = queue.front();
        queue.pop();
        const std::int64_t cy = cur / side, cx = cur % side;
        if (cy == 0 || cy == side - 1 || cx == 0 || cx == side - 1)
          touches_frame[static_cast<std::size_t>(lab)] = true;
        const std::int64_t moves[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (const auto& mv : moves) {
          const std::int64_t ny = cy + mv[1], nx = cx + mv[0];
          if (ny < 0 || ny >= side || nx < 0 || nx >= side) continue;
          const std::size_t nidx = static_cast<std::size_t>(ny * side + nx);
          if (!free_pixel[nidx] || label[nidx] >= 0) continue;
          label[nidx] = lab;
          queue.push(ny * side + nx);
        }
      }
    }
  for (bool t : touches_frame)
    if (!t) ++rep.bounded_free_components;
  return rep;
}

// ---------------------------------------------------------------------------
// Subcriticality probe: decay of P(y in C(O, P)) with |y|.

struct SubcriticalityRow {
  int t = 0;
  double p_hat = 0.0;
  double se = 0.0;
};

struct SubcriticalityReport {
  std::vector<SubcriticalityRow> rows;
  double slope = 0.0;      // log-linear fit over rows with p_hat > 0
  double r_squared = 0.0;
  std::size_t replicates = 0;
};

inline SubcriticalityReport subcriticality_probe(const ModelSpec& spec,
                                                 const WindowPtr& window,
                                                 std::size_t replicates,
                                                 int t_max,
                                                 std::uint64_t master_seed) {
  if (t_max < 1 || t_max > window->n())
    throw std::invalid_argument("subcriticality_probe: need 1 <= t_max <= n");
  ModelSampler sampler(spec, window);
  SeedPolicy seeds{master_seed};
  const int w = static_cast<int>(window->w());

  std::vector<std::size_t> sites_at(static_cast<std::size_t>(t_max) + 1, 0);
  for (int i = 0; i < w; ++i) {
    const int t = window->center_distance(i);
    if (t >= 1 && t <= t_max) ++sites_at[static_cast<std::size_t>(t)];
  }

  // Per replicate: fraction of distance-t sites lying in the center's
  // component (BFS from the center over occupied l-infinity neighbors).
  std::vector<std::vector<double>> frac(static_cast<std::size_t>(t_max) + 1);
  const int origin = window->index_of(identity(window->kind()));
  const int d = window->kind().dim;
  std::vector<GroupPoint> offsets;
  {
    GroupPoint off(static_cast<std::size_t>(d), -1);
    for (;;) {
      bool all_zero = true;
      for (auto c : off) all_zero &= (c == 0);
      if (!all_zero) offsets.push_back(off);
      int a = 0;
      while (a < d && off[static_cast<std::size_t>(a)] == 1) {
        off[static_cast<std::size_t>(a)] = -1;
        ++a;
      }
      if (a == d) break;
      ++off[static_cast<std::size_t>(a)];
    }
  }

  std::vector<char> in_comp(static_cast<std::size_t>(w));
  for (std::size_t rep = 0; rep < replicates; ++rep) {
    auto rng = seeds.stream(stream_tag::kSample, 0, rep);
    const auto cfg = sampler.sample(rng);
    std::fill(in_comp.begin(), in_comp.end(), 0);
    if (cfg.bit(origin)) {
      std::queue<int> queue;
      queue.push(origin);
      in_comp[static_cast<std::size_t>(origin)] = 1;
      while (!queue.empty()) {
        const int cur = queue.front();
        queue.pop();
        const GroupPoint& x = window->site(cur);
        GroupPoint y = x;
        for (const auto& off : offsets) {
          for (std::size_t a = 0; a < y.size(); ++a) y[a] = x[a] + off[a];
          if (!window->contains(y)) continue;
          const int ni = window->index_of(y);
          if (in_comp[static_cast<std::size_t>(ni)] || !cfg.bit(ni)) continue;
          in_comp[static_cast<std::size_t>(ni)] = 1;
          queue.push(ni);
        }
      }
    }
    std::vector<std::size_t> hits(static_cast<std::size_t>(t_max) + 1, 0);
    for (int i = 0; i < w; ++i) {
      const int t = window->center_distance(i);
      if (t >= 1 && t <= t_max && in_comp[static_cast<std::size_t>(i)])
        ++hits[static_cast<std::size_t>(t)];
    }
    for (int t = 1; t <= t_max; ++t)
      frac[static_cast<std::size_t>(t)].push_back(
          static_cast<double>(hits[static_cast<std::size_t>(t)]) /
          static_cast<double>(sites_at[static_cast<std::size_t>(t)]));
  }

  SubcriticalityReport rep;
  rep.replicates = replicates;
  std::vector<double> xs, ys;
  for (int t = 1; t <= t_max; ++t) {
    SubcriticalityRow row;
    row.t = t;
    row.p_hat = mean(frac[static_cast<std::size_t>(t)]);
    row.se = std::sqrt(sample_variance(frac[static_cast<std::size_t>(t)]) /
                       static_cast<double>(replicates));
    rep.rows.push_back(row);
    if (row.p_hat > 0.0) {
      xs.push_back(static_cast<double>(t));
      ys.push_back(std::log(row.p_hat));
    }
  }
  if (xs.size() >= 2) {
    const auto fit = linear_fit(xs, ys);
    rep.slope = fit.slope;
    rep.r_squared = fit.r_squared;
  }
  return rep;
}

}  // namespace spinclt
