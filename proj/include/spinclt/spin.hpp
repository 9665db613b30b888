#pragma once

// Spin-model samplers on finite windows W_n.  A configuration is a {0,1}
// assignment over the window's sites (occupancy convention: 1 = site in P).
// Models: i.i.d. Bernoulli, Gaussian level sets with exponential covariance,
// ferromagnetic Ising via Glauber heat-bath dynamics (MCMC approximation,
// flagged), and determinantal processes via exact spectral sampling.

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spinclt/cayley.hpp"
#include "spinclt/rng.hpp"

namespace spinclt {

// Immutable finite window W_n(O) with a site index ordered by TotalOrder.
class Window {
 public:
  static std::shared_ptr<const Window> make(GroupKind kind, int n,
                                            std::size_t cap = kDefaultBallCap) {
    return std::shared_ptr<const Window>(
        new Window(ball(identity(kind), n, kind, cap)));
  }

  const GroupKind& kind() const { return ball_.kind; }
  int n() const { return ball_.radius; }
  std::size_t w() const { return ball_.w(); }
  const std::vector<GroupPoint>& sites() const { return ball_.members; }
  const GroupPoint& site(int i) const { return ball_.members[static_cast<std::size_t>(i)]; }
  bool contains(const GroupPoint& p) const { return ball_.contains(p); }
  int index_of(const GroupPoint& p) const { return ball_.index_of(p); }
  // Graph distance from the window center (the identity).
  int center_distance(int i) const { return ball_.dist[static_cast<std::size_t>(i)]; }

 private:
  explicit Window(Ball b) : ball_(std::move(b)) {}
  Ball ball_;
};

using WindowPtr = std::shared_ptr<const Window>;

// Spin configuration: occupancy bits over a window, identified with its
// support.  Sites outside the window read as unoccupied (the P_n convention).
struct SpinConfiguration {
  WindowPtr window;
  std::vector<std::uint8_t> occ;

  SpinConfiguration() = default;
  explicit SpinConfiguration(WindowPtr win)
      : window(std::move(win)), occ(window->w(), 0) {}

  bool bit(int i) const { return occ[static_cast<std::size_t>(i)] != 0; }
  void set_bit(int i, bool v) { occ[static_cast<std::size_t>(i)] = v ? 1 : 0; }

  bool occupied(const GroupPoint& p) const {
    if (!window->contains(p)) return false;
    return bit(window->index_of(p));
  }

  std::size_t count_occupied() const {
    std::size_t c = 0;
    for (auto b : occ) c += b;
    return c;
  }

  std::vector<GroupPoint> support() const {
    std::vector<GroupPoint> s;
    for (std::size_t i = 0; i < occ.size(); ++i)
      if (occ[i]) s.push_back(window->site(static_cast<int>(i)));
    return s;
  }

  bool operator==(const SpinConfiguration& o) const {
    return window == o.window && occ == o.occ;
  }
};

inline SpinConfiguration make_config(const WindowPtr& window,
                                     const std::vector<GroupPoint>& support) {
  SpinConfiguration c(window);
  for (const auto& p : support) c.set_bit(window->index_of(p), true);
  return c;
}

inline SpinConfiguration complement(const SpinConfiguration& config) {
  SpinConfiguration out = config;
  for (auto& b : out.occ) b = b ? 0 : 1;
  return out;
}

// ---------------------------------------------------------------------------
// Model specifications.

class NotPositiveDefiniteError : public std::invalid_argument {
 public:
  NotPositiveDefiniteError(const std::string& what, double smallest_eigenvalue)
      : std::invalid_argument(what), smallest_eigenvalue(smallest_eigenvalue) {}
  double smallest_eigenvalue;
};

class KernelNotContractionError : public std::invalid_argument {
 public:
  KernelNotContractionError(const std::string& what, double min_eig, double max_eig)
      : std::invalid_argument(what), min_eigenvalue(min_eig), max_eigenvalue(max_eig) {}
  double min_eigenvalue;
  double max_eigenvalue;
};

struct ModelSpec {
  enum class Kind { IID, GaussianLevelSet, Ising, Determinantal };
  Kind kind = Kind::IID;

  // IID
  double p = 0.5;
  // GaussianLevelSet: covariance exp(-a d(x,y)), occupancy 1[X >= u]
  double a = 1.0;
  double u = 0.0;
  // Ising (ferromagnetic heat bath): P(sigma) proportional to
  // exp{ beta sum_{|i-j|=1} sigma_i sigma_j + h sum_i sigma_i }
  double beta = 0.0;
  double h = 0.0;
  int sweeps = 200;
  int burn_in = 2000;
  bool subcritical_asserted = false;
  // Determinantal: kernel kappa exp(-alpha d(x,y))
  double kappa = 0.5;
  double alpha = 1.0;

  static ModelSpec iid(double p) {
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("iid: p must lie in [0,1]");
    ModelSpec m;
    m.kind = Kind::IID;
    m.p = p;
    return m;
  }

  static ModelSpec gaussian_levelset(double a, double u) {
    if (!(a > 0.0)) throw std::invalid_argument("gaussian_levelset: a must be > 0");
    ModelSpec m;
    m.kind = Kind::GaussianLevelSet;
    m.a = a;
    m.u = u;
    return m;
  }

  static ModelSpec ising(double beta, double h, int sweeps = 200,
                         int burn_in = 2000, bool subcritical_asserted = false) {
    if (!(beta >= 0.0)) throw std::invalid_argument("ising: beta must be >= 0");
    if (sweeps < 1) throw std::invalid_argument("ising: sweeps must be >= 1");
    if (burn_in < 1) throw std::invalid_argument("ising: burn_in must be >= 1");
    if (h == 0.0 && !subcritical_asserted)
      throw std::invalid_argument(
          "ising: h = 0 requires an explicit subcritical-beta assertion");
    ModelSpec m;
    m.kind = Kind::Ising;
    m.beta = beta;
    m.h = h;
    m.sweeps = sweeps;
    m.burn_in = burn_in;
    m.subcritical_asserted = subcritical_asserted;
    return m;
  }

  static ModelSpec determinantal(double kappa, double alpha) {
    if (!(kappa > 0.0 && kappa <= 1.0))
      throw std::invalid_argument("determinantal: kappa must lie in (0,1]");
    if (!(alpha > 0.0))
      throw std::invalid_argument("determinantal: alpha must be > 0");
    ModelSpec m;
    m.kind = Kind::Determinantal;
    m.kappa = kappa;
    m.alpha = alpha;
    return m;
  }

  // True when the sampler is an MCMC approximation rather than exact.
  bool approximate() const { return kind == Kind::Ising; }

  std::string name() const {
    std::ostringstream os;
    switch (kind) {
      case Kind::IID:
        os << "iid(p=" << p << ")";
        break;
      case Kind::GaussianLevelSet:
        os << "gaussian_levelset(a=" << a << ",u=" << u << ")";
        break;
      case Kind::Ising:
        os << "ising(beta=" << beta << ",h=" << h << ",sweeps=" << sweeps
           << ",burn_in=" << burn_in << ")";
        break;
      case Kind::Determinantal:
        os << "determinantal(kappa=" << kappa << ",alpha=" << alpha << ")";
        break;
    }
    return os.str();
  }
};

// Clustering constants the Gaussian level-set model guarantees downstream:
// |P(x_1..x_{p+q} in P) - P(x_1..x_p in P) P(x_{p+1}..x_{p+q} in P)|
//   <= C_k phi(c_k s) with C_k = 2^{14/5} k^{8/5}, c_k = 1, phi(t) = e^{-a t}.
struct ClusteringConstants {
  double a = 0.0;  // decay rate in phi(t) = exp(-a t)
  double C(int k) const { return std::pow(2.0, 14.0 / 5.0) * std::pow(k, 8.0 / 5.0); }
  double c(int) const { return 1.0; }
  double phi(double t) const { return std::exp(-a * t); }
};

// ---------------------------------------------------------------------------
// Sampler with per-(spec, window) precomputation, pure given an RNG stream.

class ModelSampler {
 public:
  ModelSampler(ModelSpec spec, WindowPtr window)
      : spec_(spec), window_(std::move(window)) {
    switch (spec_.kind) {
      case ModelSpec::Kind::GaussianLevelSet:
        init_gaussian();
        break;
      case ModelSpec::Kind::Determinantal:
        init_determinantal();
        break;
      case ModelSpec::Kind::Ising:
        init_ising();
        break;
      case ModelSpec::Kind::IID:
        break;
    }
  }

  const ModelSpec& spec() const { return spec_; }
  const WindowPtr& window() const { return window_; }

  SpinConfiguration sample(RandomStream& rng) const {
    switch (spec_.kind) {
      case ModelSpec::Kind::IID:
        return sample_iid_impl(rng);
      case ModelSpec::Kind::GaussianLevelSet:
        return sample_gaussian_impl(rng);
      case ModelSpec::Kind::Ising:
        return sample_ising_impl(rng);
      case ModelSpec::Kind::Determinantal:
        return sample_determinantal_impl(rng);
    }
    throw std::logic_error("ModelSampler: unreachable");
  }

  // Determinantal k-correlations are the principal minors of the kernel.
  double dpp_correlation(const std::vector<int>& site_indices) const {
    if (spec_.kind != ModelSpec::Kind::Determinantal)
      throw std::invalid_argument("dpp_correlation: not a determinantal model");
    const int k = static_cast<int>(site_indices.size());
    Eigen::MatrixXd sub(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        sub(i, j) = kernel_(site_indices[static_cast<std::size_t>(i)],
                            site_indices[static_cast<std::size_t>(j)]);
    return sub.determinant();
  }

  ClusteringConstants gaussian_clustering_constants() const {
    if (spec_.kind != ModelSpec::Kind::GaussianLevelSet)
      throw std::invalid_argument("clustering constants: not a Gaussian model");
    return ClusteringConstants{spec_.a};
  }

 private:
  void init_gaussian() {
    const int w = static_cast<int>(window_->w());
    Eigen::MatrixXd cov(w, w);
    for (int i = 0; i < w; ++i)
      for (int j = i; j < w; ++j) {
        const double d = distance(window_->site(i), window_->site(j), window_->kind());
        cov(i, j) = cov(j, i) = std::exp(-spec_.a * d);
      }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
      throw NotPositiveDefiniteError(
          "gaussian_levelset: covariance exp(-a d) is not positive definite on "
          "this window (smallest eigenvalue " +
              std::to_string(es.eigenvalues().minCoeff()) + ")",
          es.eigenvalues().minCoeff());
    }
    chol_ = llt.matrixL();
  }

  void init_determinantal() {
    const int w = static_cast<int>(window_->w());
    kernel_.resize(w, w);
    for (int i = 0; i < w; ++i)
      for (int j = i; j < w; ++j) {
        const double d = distance(window_->site(i), window_->site(j), window_->kind());
        kernel_(i, j) = kernel_(j, i) = spec_.kappa * std::exp(-spec_.alpha * d);
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kernel_);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("determinantal: eigendecomposition failed");
    evals_ = es.eigenvalues();
    evecs_ = es.eigenvectors();
    constexpr double tol = 1e-10;
    const double lo = evals_.minCoeff(), hi = evals_.maxCoeff();
    if (lo < -tol || hi > 1.0 + tol)
      throw KernelNotContractionError(
          "determinantal: kernel eigenvalues outside [0,1] (range [" +
              std::to_string(lo) + ", " + std::to_string(hi) + "])",
          lo, hi);
    for (int i = 0; i < w; ++i)
      evals_(i) = std::min(1.0, std::max(0.0, evals_(i)));
  }

  void init_ising() {
    if (window_->kind().tag != GroupKind::Tag::IntegerLattice)
      throw std::invalid_argument("ising: window must live on an integer lattice");
    const int w = static_cast<int>(window_->w());
    const auto gens = generators(window_->kind());
    neighbors_.assign(static_cast<std::size_t>(w), {});
    for (int i = 0; i < w; ++i)
      for (const auto& g : gens) {
        const GroupPoint q = compose(window_->site(i), g, window_->kind());
        if (window_->contains(q))
          neighbors_[static_cast<std::size_t>(i)].push_back(window_->index_of(q));
      }
    // Heat-bath acceptance table: P(sigma_x = +1 | rest) as a function of the
    // neighbor spin sum in {-2d..2d} (free boundary: absent neighbors are 0).
    const int max_deg = static_cast<int>(gens.size());
    heat_bath_.assign(static_cast<std::size_t>(2 * max_deg + 1), 0.0);
    for (int s = -max_deg; s <= max_deg; ++s)
      heat_bath_[static_cast<std::size_t>(s + max_deg)] =
          1.0 / (1.0 + std::exp(-2.0 * (spec_.beta * s + spec_.h)));
    max_degree_ = max_deg;
  }

  SpinConfiguration sample_iid_impl(RandomStream& rng) const {
    SpinConfiguration c(window_);
    for (auto& b : c.occ) b = rng.bernoulli(spec_.p) ? 1 : 0;
    return c;
  }

  SpinConfiguration sample_gaussian_impl(RandomStream& rng) const {
    const int w = static_cast<int>(window_->w());
    Eigen::VectorXd z(w);
    for (int i = 0; i < w; ++i) z(i) = rng.normal();
    Eigen::VectorXd x = chol_.triangularView<Eigen::Lower>() * z;
    SpinConfiguration c(window_);
    for (int i = 0; i < w; ++i) c.set_bit(i, x(i) >= spec_.u);
    return c;
  }

  SpinConfiguration sample_ising_impl(RandomStream& rng) const {
    const int w = static_cast<int>(window_->w());
    std::vector<std::int8_t> s(static_cast<std::size_t>(w));
    for (auto& v : s) v = rng.bernoulli(0.5) ? 1 : -1;
    const int total_sweeps = spec_.burn_in + spec_.sweeps;
    for (int sweep = 0; sweep < total_sweeps; ++sweep) {
      for (int i = 0; i < w; ++i) {
        int nbr_sum = 0;
        for (int j : neighbors_[static_cast<std::size_t>(i)])
          nbr_sum += s[static_cast<std::size_t>(j)];
        const double p_up = heat_bath_[static_cast<std::size_t>(nbr_sum + max_degree_)];
        s[static_cast<std::size_t>(i)] = rng.bernoulli(p_up) ? 1 : -1;
      }
    }
    // Map sigma -> (sigma + 1) / 2.
    SpinConfiguration c(window_);
    for (int i = 0; i < w; ++i) c.set_bit(i, s[static_cast<std::size_t>(i)] > 0);
    return c;
  }

  // Spectral sampling: Bernoulli-thin the eigenvectors, which leaves a rank-k
  // projection kernel P = V V^T, then draw its k points by the determinant
  // chain rule: pick x with probability diag(P')/(points left) and replace P'
  // by its Schur complement P' - (P'e_x)(P'e_x)^T / P'_xx.  Only the diagonal
  // and the elimination vectors f_s are kept, so a replicate costs O(w k^2).
  SpinConfiguration sample_determinantal_impl(RandomStream& rng) const {
    const int w = static_cast<int>(window_->w());
    std::vector<int> chosen_eigs;
    for (int i = 0; i < w; ++i)
      if (rng.bernoulli(evals_(i))) chosen_eigs.push_back(i);
    SpinConfiguration c(window_);
    const int k = static_cast<int>(chosen_eigs.size());
    if (k == 0) return c;

    Eigen::MatrixXd v(w, k);
    for (int j = 0; j < k; ++j)
      v.col(j) = evecs_.col(chosen_eigs[static_cast<std::size_t>(j)]);

    Eigen::VectorXd diag = v.rowwise().squaredNorm();  // diag of P
    Eigen::MatrixXd f(w, k);                           // elimination vectors
    for (int t = 0; t < k; ++t) {
      double total = 0.0;
      for (int i = 0; i < w; ++i) total += std::max(diag(i), 0.0);
      double target = rng.uniform01() * total;
      int x = w - 1;
      for (int i = 0; i < w; ++i) {
        target -= std::max(diag(i), 0.0);
        if (target <= 0.0) {
          x = i;
          break;
        }
      }
      c.set_bit(x, true);
      if (t == k - 1) break;

      // g = P' e_x = V (V^T e_x) - sum_{s<t} f_s(x) f_s.
      Eigen::VectorXd g = v * v.row(x).transpose();
      if (t > 0) g.noalias() -= f.leftCols(t) * f.row(x).head(t).transpose();
      const double pivot = std::max(g(x), 1e-300);
      f.col(t) = g / std::sqrt(pivot);
      diag -= f.col(t).cwiseAbs2();
      diag(x) = 0.0;
    }
    return c;
  }

  ModelSpec spec_;
  WindowPtr window_;
  Eigen::MatrixXd chol_;    // Gaussian
  Eigen::MatrixXd kernel_;  // DPP
  Eigen::MatrixXd evecs_;
  Eigen::VectorXd evals_;
  std::vector<std::vector<int>> neighbors_;  // Ising
  std::vector<double> heat_bath_;
  int max_degree_ = 0;
};

// One-shot convenience wrappers matching the operation signatures.
inline SpinConfiguration sample_iid(const WindowPtr& window, double p,
                                    std::uint64_t seed) {
  RandomStream rng(seed);
  return ModelSampler(ModelSpec::iid(p), window).sample(rng);
}

inline SpinConfiguration sample_gaussian_levelset(const WindowPtr& window,
                                                  double a, double u,
                                                  std::uint64_t seed) {
  RandomStream rng(seed);
  return ModelSampler(ModelSpec::gaussian_levelset(a, u), window).sample(rng);
}

inline SpinConfiguration sample_ising(const WindowPtr& window, double beta,
                                      double h, int sweeps, int burn_in,
                                      std::uint64_t seed,
                                      bool subcritical_asserted = false) {
  RandomStream rng(seed);
  return ModelSampler(
             ModelSpec::ising(beta, h, sweeps, burn_in, subcritical_asserted),
             window)
      .sample(rng);
}

inline SpinConfiguration sample_determinantal(const WindowPtr& window,
                                              double kappa, double alpha,
                                              std::uint64_t seed) {
  RandomStream rng(seed);
  return ModelSampler(ModelSpec::determinantal(kappa, alpha), window).sample(rng);
}

// ---------------------------------------------------------------------------
// Text serialization.  Metadata lines start with '#' as `# key=value`; every
// following non-empty line is the space-separated coordinates of one occupied
// site, in site-index (total) order.  Round-trips bit-exactly.

inline std::string serialize_config(
    const SpinConfiguration& config,
    const std::vector<std::pair<std::string, std::string>>& metadata) {
  std::ostringstream os;
  bool have_graph = false, have_n = false;
  for (const auto& [k, v] : metadata) {
    os << "# " << k << "=" << v << "\n";
    have_graph |= (k == "graph");
    have_n |= (k == "n");
  }
  if (!have_graph) os << "# graph=" << config.window->kind().name() << "\n";
  if (!have_n) os << "# n=" << config.window->n() << "\n";
  for (std::size_t i = 0; i < config.occ.size(); ++i) {
    if (!config.occ[i]) continue;
    const auto& p = config.window->site(static_cast<int>(i));
    for (std::size_t c = 0; c < p.size(); ++c) os << (c ? " " : "") << p[c];
    os << "\n";
  }
  return os.str();
}

inline GroupKind parse_group_kind(const std::string& name) {
  if (name == "heisenberg3") return GroupKind::heisenberg3();
  if (name.size() >= 2 && name[0] == 'z') {
    const int d = std::stoi(name.substr(1));
    return GroupKind::integer_lattice(d);
  }
  throw std::invalid_argument("unknown graph kind: " + name);
}

struct ParsedConfig {
  std::vector<std::pair<std::string, std::string>> metadata;
  SpinConfiguration config;
};

inline ParsedConfig parse_config_text(const std::string& text,
                                      std::size_t cap = kDefaultBallCap) {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<GroupPoint> support;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      const std::size_t start = body.find_first_not_of(' ');
      if (start == std::string::npos) continue;
      body = body.substr(start);
      const std::size_t eq = body.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config metadata line missing '=': " + line);
      metadata.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      continue;
    }
    std::istringstream ls(line);
    GroupPoint p;
    std::int64_t c;
    while (ls >> c) p.push_back(c);
    if (p.empty() || !ls.eof())
      throw std::invalid_argument("config site line malformed: " + line);
    support.push_back(std::move(p));
  }
  std::string graph_name;
  std::optional<int> n;
  for (const auto& [k, v] : metadata) {
    if (k == "graph") graph_name = v;
    if (k == "n") n = std::stoi(v);
  }
  if (graph_name.empty() || !n)
    throw std::invalid_argument("config text missing graph=/n= metadata");
  auto window = Window::make(parse_group_kind(graph_name), *n, cap);
  ParsedConfig out{std::move(metadata), SpinConfiguration(window)};
  for (const auto& p : support) {
    if (!window->contains(p))
      throw std::invalid_argument("config lists a site outside the window");
    out.config.set_bit(window->index_of(p), true);
  }
  return out;
}

}  // namespace spinclt
