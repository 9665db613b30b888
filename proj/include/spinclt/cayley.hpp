#pragma once

// Group and graph geometry for the supported vertex-transitive graphs:
// integer lattices Z^d and the discrete Heisenberg group H_3(Z), both with
// their standard symmetric generator sets.  Provides the word metric, balls
// W_n(y), inner vertex boundaries, growth sequences, and the norm-then-lex
// total order used by the factorial moment expansion.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/container/small_vector.hpp>

namespace spinclt {

// Raised when a computation would exceed a configured resource cap.
class ResourceLimitError : public std::runtime_error {
 public:
  explicit ResourceLimitError(const std::string& what) : std::runtime_error(what) {}
};

using GroupPoint = boost::container::small_vector<std::int64_t, 4>;

struct GroupPointHash {
  std::size_t operator()(const GroupPoint& p) const {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (std::int64_t c : p) {
      std::uint64_t u = static_cast<std::uint64_t>(c);
      for (int i = 0; i < 8; ++i) {
        h ^= (u >> (8 * i)) & 0xFF;
        h *= 1099511628211ULL;
      }
    }
    return static_cast<std::size_t>(h);
  }
};

struct GroupKind {
  enum class Tag { IntegerLattice, Heisenberg3 };
  Tag tag = Tag::IntegerLattice;
  int dim = 1;  // coordinate length: d for lattices, 3 for Heisenberg

  static GroupKind integer_lattice(int d) {
    if (d < 1) throw std::invalid_argument("integer_lattice: d must be >= 1");
    return GroupKind{Tag::IntegerLattice, d};
  }
  static GroupKind heisenberg3() { return GroupKind{Tag::Heisenberg3, 3}; }

  bool operator==(const GroupKind& o) const { return tag == o.tag && dim == o.dim; }

  std::string name() const {
    if (tag == Tag::Heisenberg3) return "heisenberg3";
    return "z" + std::to_string(dim);
  }
};

inline void check_point(const GroupPoint& p, const GroupKind& kind,
                        const char* where) {
  if (static_cast<int>(p.size()) != kind.dim)
    throw std::invalid_argument(std::string(where) + ": dimension mismatch");
}

inline GroupPoint identity(const GroupKind& kind) {
  return GroupPoint(static_cast<std::size_t>(kind.dim), 0);
}

// Symmetric generator set S: {±e_i} for Z^d, {a^{±1}, b^{±1}} for H_3(Z)
// in upper-triangular normal form (a, b, c).
inline std::vector<GroupPoint> generators(const GroupKind& kind) {
  std::vector<GroupPoint> gens;
  if (kind.tag == GroupKind::Tag::IntegerLattice) {
    for (int i = 0; i < kind.dim; ++i) {
      GroupPoint plus = identity(kind), minus = identity(kind);
      plus[i] = 1;
      minus[i] = -1;
      gens.push_back(plus);
      gens.push_back(minus);
    }
  } else {
    gens.push_back(GroupPoint{1, 0, 0});
    gens.push_back(GroupPoint{-1, 0, 0});
    gens.push_back(GroupPoint{0, 1, 0});
    gens.push_back(GroupPoint{0, -1, 0});
  }
  return gens;
}

// Group law.  H_3(Z) in normal form: (a,b,c)(a',b',c') = (a+a', b+b', c+c'+a b').
inline GroupPoint compose(const GroupPoint& g, const GroupPoint& h,
                          const GroupKind& kind) {
  check_point(g, kind, "compose");
  check_point(h, kind, "compose");
  GroupPoint out(g);
  if (kind.tag == GroupKind::Tag::IntegerLattice) {
    for (int i = 0; i < kind.dim; ++i) out[i] = g[i] + h[i];
  } else {
    out[0] = g[0] + h[0];
    out[1] = g[1] + h[1];
    out[2] = g[2] + h[2] + g[0] * h[1];
  }
  return out;
}

inline GroupPoint inverse(const GroupPoint& g, const GroupKind& kind) {
  check_point(g, kind, "inverse");
  GroupPoint out(g);
  if (kind.tag == GroupKind::Tag::IntegerLattice) {
    for (int i = 0; i < kind.dim; ++i) out[i] = -g[i];
  } else {
    out[0] = -g[0];
    out[1] = -g[1];
    out[2] = g[0] * g[1] - g[2];
  }
  return out;
}

inline constexpr std::size_t kDefaultBallCap = 10'000'000;

// Breadth-first word-metric oracle, expanded shell by shell and memoized.
// Needed for H_3(Z); lattices use the closed-form l1 norm instead.
class DistanceOracle {
 public:
  explicit DistanceOracle(GroupKind kind, std::size_t cap = kDefaultBallCap)
      : kind_(kind), cap_(cap), gens_(generators(kind)) {
    dist_[identity(kind_)] = 0;
    frontier_.push_back(identity(kind_));
    radius_ = 0;
  }

  // Word norm |p| = d(O, p); expands the BFS until p is reached.
  int norm(const GroupPoint& p) {
    check_point(p, kind_, "DistanceOracle::norm");
    for (;;) {
      auto it = dist_.find(p);
      if (it != dist_.end()) return it->second;
      if (frontier_.empty())
        throw std::logic_error("DistanceOracle: graph exhausted (impossible)");
      expand_one_shell();
    }
  }

  // Make every point with |p| <= r known.
  void ensure_radius(int r) {
    while (radius_ < r && !frontier_.empty()) expand_one_shell();
  }

  int known_radius() const { return radius_; }
  const std::unordered_map<GroupPoint, int, GroupPointHash>& table() const {
    return dist_;
  }

 private:
  void expand_one_shell() {
    std::vector<GroupPoint> next;
    for (const auto& p : frontier_) {
      for (const auto& s : gens_) {
        GroupPoint q = compose(p, s, kind_);
        if (dist_.emplace(q, radius_ + 1).second) next.push_back(std::move(q));
      }
    }
    if (dist_.size() > cap_)
      throw ResourceLimitError("DistanceOracle: ball exceeds site cap");
    frontier_ = std::move(next);
    ++radius_;
  }

  GroupKind kind_;
  std::size_t cap_;
  std::vector<GroupPoint> gens_;
  std::unordered_map<GroupPoint, int, GroupPointHash> dist_;
  std::vector<GroupPoint> frontier_;
  int radius_;
};

// Word metric d(g, h) = |(-g) + h|.
inline int distance(const GroupPoint& g, const GroupPoint& h,
                    const GroupKind& kind) {
  check_point(g, kind, "distance");
  check_point(h, kind, "distance");
  if (kind.tag == GroupKind::Tag::IntegerLattice) {
    std::int64_t s = 0;
    for (int i = 0; i < kind.dim; ++i) s += std::abs(h[i] - g[i]);
    return static_cast<int>(s);
  }
  thread_local DistanceOracle oracle(GroupKind::heisenberg3());
  return oracle.norm(compose(inverse(g, kind), h, kind));
}

// Norm-first, then lexicographic on coordinate tuples.  The norm callback
// lets lattices use the closed form while H_3(Z) shares a BFS oracle.
class TotalOrder {
 public:
  explicit TotalOrder(GroupKind kind) : kind_(kind) {
    if (kind_.tag == GroupKind::Tag::Heisenberg3)
      oracle_ = std::make_shared<DistanceOracle>(kind_);
  }

  int norm(const GroupPoint& p) const {
    if (kind_.tag == GroupKind::Tag::IntegerLattice) {
      std::int64_t s = 0;
      for (auto c : p) s += std::abs(c);
      return static_cast<int>(s);
    }
    return oracle_->norm(p);
  }

  bool less(const GroupPoint& u, const GroupPoint& v) const {
    const int nu = norm(u), nv = norm(v);
    if (nu != nv) return nu < nv;
    return std::lexicographical_compare(u.begin(), u.end(), v.begin(), v.end());
  }

  bool operator()(const GroupPoint& u, const GroupPoint& v) const {
    return less(u, v);
  }

 private:
  GroupKind kind_;
  std::shared_ptr<DistanceOracle> oracle_;  // shared: memoization accumulates
};

// Ball W_n(center), members sorted by the total order.
struct Ball {
  GroupKind kind;
  GroupPoint center;
  int radius = 0;
  std::vector<GroupPoint> members;             // sorted by TotalOrder
  std::vector<int> dist;                       // distance from center, aligned
  std::unordered_map<GroupPoint, int, GroupPointHash> index;  // member -> position

  std::size_t w() const { return members.size(); }

  bool contains(const GroupPoint& p) const { return index.count(p) > 0; }

  int index_of(const GroupPoint& p) const {
    auto it = index.find(p);
    if (it == index.end()) throw std::invalid_argument("Ball: point not a member");
    return it->second;
  }

  int distance_of(const GroupPoint& p) const { return dist[index_of(p)]; }
};

inline Ball ball(const GroupPoint& center, int n, const GroupKind& kind,
                 std::size_t cap = kDefaultBallCap) {
  check_point(center, kind, "ball");
  if (n < 0) throw std::invalid_argument("ball: radius must be >= 0");

  // BFS around the identity, then left-translate: d(y, y+m) = d(O, m).
  DistanceOracle oracle(kind, cap);
  oracle.ensure_radius(n);

  Ball b;
  b.kind = kind;
  b.center = center;
  b.radius = n;

  std::vector<std::pair<GroupPoint, int>> offsets;
  for (const auto& [p, d] : oracle.table())
    if (d <= n) offsets.emplace_back(p, d);

  const bool centered = std::all_of(center.begin(), center.end(),
                                    [](std::int64_t c) { return c == 0; });
  TotalOrder order(kind);
  std::vector<std::pair<GroupPoint, int>> placed;
  placed.reserve(offsets.size());
  for (auto& [offset, d] : offsets) {
    GroupPoint p = centered ? offset : compose(center, offset, kind);
    placed.emplace_back(std::move(p), d);
  }
  std::sort(placed.begin(), placed.end(),
            [&order](const auto& a, const auto& b) {
              return order.less(a.first, b.first);
            });

  b.members.reserve(placed.size());
  b.dist.reserve(placed.size());
  for (auto& [p, d] : placed) {
    b.index.emplace(p, static_cast<int>(b.members.size()));
    b.members.push_back(std::move(p));
    b.dist.push_back(d);
  }
  return b;
}

// Inner vertex boundary: members of A with at least one neighbor outside A.
inline std::vector<GroupPoint> inner_boundary(const std::vector<GroupPoint>& a,
                                              const GroupKind& kind) {
  std::unordered_map<GroupPoint, char, GroupPointHash> in_a;
  for (const auto& p : a) {
    check_point(p, kind, "inner_boundary");
    in_a.emplace(p, 1);
  }
  const auto gens = generators(kind);
  std::vector<GroupPoint> out;
  for (const auto& p : a) {
    for (const auto& s : gens) {
      if (!in_a.count(compose(p, s, kind))) {
        out.push_back(p);
        break;
      }
    }
  }
  TotalOrder order(kind);
  std::sort(out.begin(), out.end(), order);
  return out;
}

// Closed-form lattice ball sizes: w_n = sum_k 2^k C(d,k) C(n,k).
inline std::uint64_t lattice_ball_size(int d, int n) {
  std::uint64_t total = 0;
  for (int k = 0; k <= d; ++k) {
    // 2^k * C(d,k) * C(n,k)
    std::uint64_t term = 1;
    for (int i = 0; i < k; ++i) term = term * 2 * (d - i) / (i + 1);
    std::uint64_t binom = 1;
    for (int i = 0; i < k; ++i) binom = binom * static_cast<std::uint64_t>(n - i) / (i + 1);
    if (n >= k) total += term * binom;
  }
  return total;
}

// Ball count of the degree-q regular tree: 1 + q * sum_{j<n} (q-1)^j.
// This is the comparison bound behind the trivial growth upper estimate;
// for q = 2 it degenerates to the path graph count 2n + 1.
inline double tree_ball_bound(int degree, int n) {
  if (n == 0) return 1.0;
  double sum = 0.0, pow = 1.0;
  for (int j = 0; j < n; ++j) {
    sum += pow;
    pow *= (degree - 1);
    if (sum > 1e18) return 1e18;  // saturate; callers only compare upward
  }
  return 1.0 + degree * sum;
}

struct GrowthRow {
  int n = 0;
  std::uint64_t w = 0;         // ball size w_n
  std::uint64_t boundary = 0;  // |inner boundary of W_n|
  double ratio = 0.0;          // boundary / w
};

// Exact growth sequence with the trivial two-sided bounds asserted:
// n <= w_n (strictly increasing from w_0 = 1) and w_n <= tree ball count.
inline std::vector<GrowthRow> growth_report(const GroupKind& kind, int n_max,
                                            std::size_t cap = kDefaultBallCap) {
  if (n_max < 0) throw std::invalid_argument("growth_report: n_max must be >= 0");
  DistanceOracle oracle(kind, cap);
  oracle.ensure_radius(n_max + 1);  // +1 so boundary membership is decidable

  std::vector<std::uint64_t> shell(static_cast<std::size_t>(n_max) + 2, 0);
  std::vector<std::uint64_t> bshell(static_cast<std::size_t>(n_max) + 1, 0);
  const auto gens = generators(kind);
  for (const auto& [p, d] : oracle.table()) {
    if (d <= n_max + 1) ++shell[static_cast<std::size_t>(d)];
    if (d <= n_max) {
      // p lies on shell d; it is in the inner boundary of W_d iff some
      // neighbor has distance d+1 (neighbors of shell-d points are at
      // distance >= d-1, so only the d+1 case can leave the ball).
      for (const auto& s : gens) {
        auto it = oracle.table().find(compose(p, s, kind));
        if (it == oracle.table().end() || it->second == d + 1) {
          ++bshell[static_cast<std::size_t>(d)];
          break;
        }
      }
    }
  }

  const int degree = static_cast<int>(gens.size());
  std::vector<GrowthRow> rows;
  std::uint64_t w = 0;
  for (int n = 0; n <= n_max; ++n) {
    w += shell[static_cast<std::size_t>(n)];
    GrowthRow row;
    row.n = n;
    row.w = w;
    row.boundary = bshell[static_cast<std::size_t>(n)];
    row.ratio = static_cast<double>(row.boundary) / static_cast<double>(row.w);
    if (n >= 1) {
      if (w < static_cast<std::uint64_t>(n))
        throw std::logic_error("growth_report: lower growth bound violated");
      if (static_cast<double>(w) > tree_ball_bound(degree, n))
        throw std::logic_error("growth_report: tree comparison bound violated");
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace spinclt
