// spinclt: command-line front end for the spin-model simulation and
// verification library.
//
// One binary, nine subcommands.  Every randomized command takes an explicit
// --seed (default 49568) and derives all streams from it through the shared
// seed policy, so identical invocations produce identical output.  Every
// CSV output starts with '#' metadata lines carrying the library version,
// the master seed, and a hash of the effective parameters.
//
// Exit codes: 0 success, 1 invalid input (bad flags, bad config, range
// errors), 2 runtime or resource failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "spinclt/cayley.hpp"
#include "spinclt/cltlab.hpp"
#include "spinclt/config.hpp"
#include "spinclt/moments.hpp"
#include "spinclt/scores.hpp"
#include "spinclt/spin.hpp"
#include "spinclt/topology.hpp"
#include "spinclt/version.hpp"

namespace {

using namespace spinclt;

int g_exit_code = 0;

// Writes either to stdout or to --out FILE.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_)
        throw std::invalid_argument("out: cannot open output file " + path);
    }
    os().precision(17);
  }
  std::ostream& os() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

void write_metadata(std::ostream& os, std::uint64_t seed,
                    const ordered_json& params) {
  os << "# version=" << kVersion << "\n";
  os << "# master_seed=" << seed << "\n";
  os << "# config_hash=" << fnv1a_hex(params.dump(2) + "\n") << "\n";
}

std::string join_ints(const std::vector<int>& xs, char sep) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << sep;
    os << xs[i];
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// growth: exact ball sizes and inner-boundary counts of the word-metric
// balls, n = 0..nmax.

struct GrowthArgs {
  std::string graph;
  int nmax = 0;
  std::uint64_t seed = kDefaultMasterSeed;
  std::string out;
};

void run_growth(const GrowthArgs& a) {
  const auto kind = parse_group_kind(a.graph);
  const auto rows = growth_report(kind, a.nmax);
  ordered_json params{{"command", "growth"}, {"graph", kind.name()},
                      {"nmax", a.nmax}};
  Output out(a.out);
  write_metadata(out.os(), a.seed, params);
  out.os() << "n,w,boundary,boundary_ratio\n";
  for (const auto& r : rows)
    out.os() << r.n << ',' << r.w << ',' << r.boundary << ',' << r.ratio
             << "\n";
}

// ---------------------------------------------------------------------------
// sample: draw configurations and print them in the '#'-metadata + occupied
// coordinate format understood by the serialization helpers.

struct SampleArgs {
  std::string model, graph;
  int n = 4;
  std::size_t replicates = 1;
  std::uint64_t seed = kDefaultMasterSeed;
  std::string out;
};

void run_sample(const SampleArgs& a) {
  const auto spec = parse_model_string(a.model);
  const auto kind = parse_group_kind(a.graph);
  const auto window = Window::make(kind, a.n);
  ModelSampler sampler(spec, window);
  SeedPolicy seeds{a.seed};
  ordered_json params{{"command", "sample"},
                      {"model", spec.name()},
                      {"graph", kind.name()},
                      {"n", a.n},
                      {"replicates", a.replicates}};
  const std::string hash = fnv1a_hex(params.dump(2) + "\n");
  Output out(a.out);
  for (std::size_t rep = 0; rep < a.replicates; ++rep) {
    auto rng = seeds.stream(stream_tag::kSample, 0, rep);
    const auto cfg = sampler.sample(rng);
    if (rep) out.os() << "\n";
    out.os() << serialize_config(
        cfg, {{"version", kVersion},
              {"master_seed", std::to_string(a.seed)},
              {"config_hash", hash},
              {"model", spec.name()},
              {"replicate", std::to_string(rep)}});
  }
}

// ---------------------------------------------------------------------------
// stats: replicate totals H = sum of the score over occupied sites, with
// summary moments, for one model/window/score combination.

struct StatsArgs {
  std::string model, graph, score;
  int n = 4;
  std::size_t replicates = 200;
  std::uint64_t seed = kDefaultMasterSeed;
  std::string out;
};

void run_stats(const StatsArgs& a) {
  ExperimentPlan plan;
  plan.model = parse_model_string(a.model);
  plan.graph = parse_group_kind(a.graph);
  plan.n_grid = {a.n};
  plan.replicates = a.replicates;
  plan.scores = {parse_score_string(a.score, plan.graph)};
  plan.master_seed = a.seed;
  const auto result = run(plan, 1);
  const auto& cell = result.cell(0, 0);
  ordered_json params{{"command", "stats"},
                      {"model", plan.model.name()},
                      {"graph", plan.graph.name()},
                      {"n", a.n},
                      {"score", cell.score},
                      {"replicates", a.replicates}};
  Output out(a.out);
  write_metadata(out.os(), a.seed, params);
  out.os() << "# score=" << cell.score << "\n";
  out.os() << "# n=" << cell.n << "\n";
  out.os() << "# w=" << cell.w << "\n";
  out.os() << "# mean=" << cell.mean_h << "\n";
  out.os() << "# variance=" << cell.var_h << "\n";
  out.os() << "# spill_fraction=" << cell.spill_fraction << "\n";
  out.os() << "replicate,H\n";
  for (std::size_t r = 0; r < cell.h.size(); ++r)
    out.os() << r << ',' << cell.h[r] << "\n";
}

// ---------------------------------------------------------------------------
// correlate: either the mixed moment E[prod sigma_x] for one site tuple
// (--sites, window indices) or the factorization-gap profile
// m(x,y) - m(x) m(y) by word distance (--distances).

struct CorrelateArgs {
  std::string model, graph;
  int n = 6;
  std::vector<int> sites;
  std::vector<int> distances;
  std::size_t replicates = 20000;
  int margin = 2;
  std::size_t max_pairs = 200;
  std::uint64_t seed = kDefaultMasterSeed;
  std::string out;
};

void run_correlate(const CorrelateArgs& a) {
  if (a.sites.empty() == a.distances.empty())
    throw std::invalid_argument(
        "correlate: pass exactly one of --sites or --distances");
  const auto spec = parse_model_string(a.model);
  const auto kind = parse_group_kind(a.graph);
  const auto window = Window::make(kind, a.n);
  Output out(a.out);
  if (!a.sites.empty()) {
    const auto est =
        estimate_correlation(spec, window, a.sites, a.replicates, a.seed);
    ordered_json params{{"command", "correlate"},
                        {"model", spec.name()},
                        {"graph", kind.name()},
                        {"n", a.n},
                        {"sites", a.sites},
                        {"replicates", a.replicates}};
    write_metadata(out.os(), a.seed, params);
    out.os() << "sites,value,se,replicates\n";
    out.os() << join_ints(a.sites, ';') << ',' << est.value << ',' << est.se
             << ',' << est.replicates << "\n";
  } else {
    const auto profile =
        correlation_gap_profile(spec, window, a.distances, a.replicates,
                                a.margin, a.max_pairs, a.seed);
    ordered_json params{{"command", "correlate"},
                        {"model", spec.name()},
                        {"graph", kind.name()},
                        {"n", a.n},
                        {"distances", a.distances},
                        {"replicates", a.replicates},
                        {"margin", a.margin},
                        {"max_pairs", a.max_pairs}};
    write_metadata(out.os(), a.seed, params);
    out.os() << "distance,gap,se,pair_count\n";
    for (const auto& row : profile.rows)
      out.os() << row.distance << ',' << row.gap << ',' << row.se << ','
               << row.pair_count << "\n";
  }
}

// ---------------------------------------------------------------------------
// cumulants: k-statistics of the replicate totals with bootstrap errors.

struct CumulantsArgs {
  std::string model, graph, score = "occupancy";
  int n = 4;
  int kmax = 4;
  std::size_t replicates = 2000;
  std::size_t bootstrap = 200;
  std::uint64_t seed = kDefaultMasterSeed;
  std::string out;
};

void run_cumulants(const CumulantsArgs& a) {
  ExperimentPlan plan;
  plan.model = parse_model_string(a.model);
  plan.graph = parse_group_kind(a.graph);
  plan.n_grid = {a.n};
  plan.replicates = a.replicates;
  plan.scores = {parse_score_string(a.score, plan.graph)};
  plan.master_seed = a.seed;
  const auto result = run(plan, 1);
  const auto& cell = result.cell(0, 0);
  SeedPolicy seeds{a.seed};
  auto rng = seeds.stream(stream_tag::kBootstrap, 1, 0);
  const auto cumulants = sample_cumulants(cell.h, a.kmax, a.bootstrap, rng);
  ordered_json params{{"command", "cumulants"},
                      {"model", plan.model.name()},
                      {"graph", plan.graph.name()},
                      {"n", a.n},
                      {"score", cell.score},
                      {"kmax", a.kmax},
                      {"replicates", a.replicates},
                      {"bootstrap", a.bootstrap}};
  Output out(a.out);
  write_metadata(out.os(), a.seed, params);
  out.os() << "order,value,se\n";
  for (std::size_t i = 0; i < cumulants.size(); ++i)
    out.os() << (i + 1) << ',' << cumulants[i].value << ',' << cumulants[i].se
             << "\n";
}

// ---------------------------------------------------------------------------
// fme-verify: exact factorial-moment expansion identity under the product
// measure — full enumeration (lhs) vs the subset-difference expansion (rhs)
// for a small catalog of functionals.  Exits 0 iff every |lhs-rhs| <= tol.

struct FmeArgs {
  double p = 0.5;
  int n = 1;
  std::string graph = "z2";
  double tol = 1e-9;
  std::uint64_t seed = kDefaultMasterSeed;
  std::string out;
};

void run_fme_verify(const FmeArgs& a) {
  const auto kind = parse_group_kind(a.graph);
  const auto window = Window::make(kind, a.n);

  std::vector<std::pair<std::string, std::function<double(const SpinConfiguration&)>>>
      functionals;
  functionals.emplace_back("void_indicator", [](const SpinConfiguration& cfg) {
    for (const auto b : cfg.occ)
      if (b) return 0.0;
    return 1.0;
  });
  functionals.emplace_back("occupancy_count", [](const SpinConfiguration& cfg) {
    double s = 0.0;
    for (const auto b : cfg.occ) s += b ? 1.0 : 0.0;
    return s;
  });
  if (kind.tag == GroupKind::Tag::IntegerLattice) {
    GroupPoint origin = identity(kind), step = identity(kind);
    step[0] = 1;
    const auto pair_score =
        subgraph_count_score(pattern_template({origin, step}));
    functionals.emplace_back("pair_count",
                             [pair_score](const SpinConfiguration& cfg) {
                               return total_mass(pair_score, cfg).value;
                             });
    functionals.emplace_back("component_count",
                             [](const SpinConfiguration& cfg) {
                               return static_cast<double>(components(cfg).count());
                             });
  }

  // Evaluate everything before emitting, so resource errors leave no
  // partial output behind.
  std::vector<std::pair<std::string, FmeCheckResult>> results;
  for (const auto& [name, psi] : functionals)
    results.emplace_back(name, fme_expansion_check(psi, a.p, window));

  ordered_json params{{"command", "fme-verify"},
                      {"p", a.p},
                      {"graph", kind.name()},
                      {"n", a.n},
                      {"tol", a.tol}};
  Output out(a.out);
  write_metadata(out.os(), a.seed, params);
  out.os() << "functional,lhs,rhs,abs_error\n";
  bool ok = true;
  for (const auto& [name, res] : results) {
    out.os() << name << ',' << res.lhs << ',' << res.rhs << ','
             << res.abs_error << "\n";
    if (!(res.abs_error <= a.tol)) {
      ok = false;
      std::cerr << "fme-verify: " << name << " abs_error " << res.abs_error
                << " exceeds tolerance " << a.tol << "\n";
    }
  }
  if (!ok) g_exit_code = 2;
}

// ---------------------------------------------------------------------------
// void: empirical void probabilities P(no occupied site within distance t of
// the center), with the closed-form product-measure column for comparison.

struct VoidArgs {
  std::string model, graph;
  int n = 6;
  int tmax = 4;
  std::size_t replicates = 20000;
  std::uint64_t seed = kDefaultMasterSeed;
  std::string out;
};

void run_void(const VoidArgs& a) {
  const auto spec = parse_model_string(a.model);
  const auto kind = parse_group_kind(a.graph);
  const auto window = Window::make(kind, a.n);
  std::vector<int> t_grid;
  for (int t = 0; t <= a.tmax; ++t) t_grid.push_back(t);
  const auto probe =
      void_probability_probe(spec, window, t_grid, a.replicates, a.seed);
  ordered_json params{{"command", "void"},
                      {"model", spec.name()},
                      {"graph", kind.name()},
                      {"n", a.n},
                      {"tmax", a.tmax},
                      {"replicates", a.replicates}};
  Output out(a.out);
  write_metadata(out.os(), a.seed, params);
  out.os() << "t,p_hat,se,exact_iid\n";
  for (const auto& row : probe.rows) {
    out.os() << row.t << ',' << row.p_hat << ',' << row.se << ',';
    if (spec.kind == ModelSpec::Kind::IID)
      out.os() << void_probability_exact_iid(spec.p, window, row.t);
    else
      out.os() << "nan";
    out.os() << "\n";
  }
}

// ---------------------------------------------------------------------------
// clt: full experiment from a JSON plan file — run, analyze, and emit the
// result directory (plan.json, raw.csv, summary.json, report.md).

struct CltArgs {
  std::string config;
  std::string out = "clt_out";
  unsigned workers = 1;
};

void run_clt(const CltArgs& a) {
  std::ifstream is(a.config, std::ios::binary);
  if (!is)
    throw std::invalid_argument("clt: cannot open config file " + a.config);
  std::ostringstream buffer;
  buffer << is.rdbuf();
  const auto pc = parse_plan_json(buffer.str());
  const auto result = run(pc.plan, a.workers);
  const auto bundle = analyze(result, pc.sigma_direct);
  emit_result_directory(result, bundle, pc, a.out);
  std::cout << "wrote " << a.out
            << "/{plan.json,raw.csv,summary.json,report.md} config_hash="
            << pc.config_hash << "\n";
}

// ---------------------------------------------------------------------------
// betti: per-replicate homology of the occupied cube union — Betti numbers,
// Euler characteristic, and component count.  Lattice windows only.

struct BettiArgs {
  std::string model, graph;
  int n = 6;
  std::size_t replicates = 100;
  std::uint64_t seed = kDefaultMasterSeed;
  std::string out;
};

void run_betti(const BettiArgs& a) {
  const auto spec = parse_model_string(a.model);
  const auto kind = parse_group_kind(a.graph);
  const auto window = Window::make(kind, a.n);
  ModelSampler sampler(spec, window);
  SeedPolicy seeds{a.seed};
  ordered_json params{{"command", "betti"},
                      {"model", spec.name()},
                      {"graph", kind.name()},
                      {"n", a.n},
                      {"replicates", a.replicates}};
  Output out(a.out);
  write_metadata(out.os(), a.seed, params);
  const int dim = kind.dim;
  out.os() << "replicate";
  for (int j = 0; j < dim; ++j) out.os() << ",beta_" << j;
  out.os() << ",euler,components\n";
  for (std::size_t rep = 0; rep < a.replicates; ++rep) {
    auto rng = seeds.stream(stream_tag::kSample, 0, rep);
    const auto cfg = sampler.sample(rng);
    const auto cx = build_complex(cfg);
    const auto betti = betti_numbers(cx);
    out.os() << rep;
    for (const auto b : betti) out.os() << ',' << b;
    out.os() << ',' << euler_characteristic(cx) << ','
             << components(cfg).count() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "spinclt: sampling, limit-theorem experiments, and exact-identity "
      "checks for spin models on discrete Cayley graphs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", spinclt::kVersion);

  GrowthArgs growth_args;
  auto* growth = app.add_subcommand(
      "growth", "Exact word-metric ball sizes and boundary counts");
  growth->add_option("--graph", growth_args.graph, "z1|z2|z3|heisenberg3")
      ->required();
  growth->add_option("--nmax", growth_args.nmax, "largest radius")
      ->required()
      ->check(CLI::NonNegativeNumber);
  growth->add_option("--seed", growth_args.seed, "master seed")
      ->capture_default_str();
  growth->add_option("--out", growth_args.out, "output file (default stdout)");
  growth->callback([&] { run_growth(growth_args); });

  SampleArgs sample_args;
  auto* sample =
      app.add_subcommand("sample", "Draw configurations from a model");
  sample
      ->add_option("--model", sample_args.model,
                   "iid(p) | gaussian(a,u) | ising(beta,h[,sweeps,burn]) | "
                   "dpp(kappa,alpha)")
      ->required();
  sample->add_option("--graph", sample_args.graph, "z1|z2|z3|heisenberg3")
      ->required();
  sample->add_option("--n", sample_args.n, "window radius")
      ->required()
      ->check(CLI::NonNegativeNumber);
  sample->add_option("--replicates", sample_args.replicates, "configurations")
      ->capture_default_str();
  sample->add_option("--seed", sample_args.seed, "master seed")
      ->capture_default_str();
  sample->add_option("--out", sample_args.out, "output file (default stdout)");
  sample->callback([&] { run_sample(sample_args); });

  StatsArgs stats_args;
  auto* stats = app.add_subcommand(
      "stats", "Replicate totals and summary moments for one score");
  stats->add_option("--model", stats_args.model, "model string")->required();
  stats->add_option("--graph", stats_args.graph, "z1|z2|z3|heisenberg3")
      ->required();
  stats->add_option("--n", stats_args.n, "window radius")
      ->required()
      ->check(CLI::NonNegativeNumber);
  stats
      ->add_option("--score", stats_args.score,
                   "occupancy | pair | betti<j> | v<k> | nn")
      ->required();
  stats->add_option("--replicates", stats_args.replicates, "replicates")
      ->capture_default_str();
  stats->add_option("--seed", stats_args.seed, "master seed")
      ->capture_default_str();
  stats->add_option("--out", stats_args.out, "output file (default stdout)");
  stats->callback([&] { run_stats(stats_args); });

  CorrelateArgs corr_args;
  auto* correlate = app.add_subcommand(
      "correlate",
      "Mixed moments for a site tuple, or the factorization-gap profile");
  correlate->add_option("--model", corr_args.model, "model string")->required();
  correlate->add_option("--graph", corr_args.graph, "z1|z2|z3|heisenberg3")
      ->required();
  correlate->add_option("--n", corr_args.n, "window radius")
      ->required()
      ->check(CLI::NonNegativeNumber);
  auto* sites_opt =
      correlate
          ->add_option("--sites", corr_args.sites,
                       "window site indices, comma separated")
          ->delimiter(',');
  auto* dist_opt =
      correlate
          ->add_option("--distances", corr_args.distances,
                       "word distances, comma separated")
          ->delimiter(',');
  sites_opt->excludes(dist_opt);
  dist_opt->excludes(sites_opt);
  correlate->add_option("--replicates", corr_args.replicates, "replicates")
      ->capture_default_str();
  correlate
      ->add_option("--margin", corr_args.margin,
                   "interior margin for the distance profile")
      ->capture_default_str();
  correlate
      ->add_option("--max-pairs", corr_args.max_pairs,
                   "site-pair budget per distance")
      ->capture_default_str();
  correlate->add_option("--seed", corr_args.seed, "master seed")
      ->capture_default_str();
  correlate->add_option("--out", corr_args.out,
                        "output file (default stdout)");
  correlate->callback([&] { run_correlate(corr_args); });

  CumulantsArgs cum_args;
  auto* cumulants = app.add_subcommand(
      "cumulants", "k-statistics of replicate totals with bootstrap errors");
  cumulants->add_option("--model", cum_args.model, "model string")->required();
  cumulants->add_option("--graph", cum_args.graph, "z1|z2|z3|heisenberg3")
      ->required();
  cumulants->add_option("--n", cum_args.n, "window radius")
      ->required()
      ->check(CLI::NonNegativeNumber);
  cumulants->add_option("--score", cum_args.score, "score string")
      ->capture_default_str();
  cumulants->add_option("--kmax", cum_args.kmax, "highest cumulant order (1..4)")
      ->capture_default_str();
  cumulants->add_option("--replicates", cum_args.replicates, "replicates")
      ->capture_default_str();
  cumulants
      ->add_option("--bootstrap", cum_args.bootstrap, "bootstrap resamples")
      ->capture_default_str();
  cumulants->add_option("--seed", cum_args.seed, "master seed")
      ->capture_default_str();
  cumulants->add_option("--out", cum_args.out, "output file (default stdout)");
  cumulants->callback([&] { run_cumulants(cum_args); });

  FmeArgs fme_args;
  auto* fme = app.add_subcommand(
      "fme-verify",
      "Exact expansion identity for functionals under the product measure");
  fme->add_option("--p", fme_args.p, "occupation probability")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  fme->add_option("--n", fme_args.n, "window radius")
      ->required()
      ->check(CLI::NonNegativeNumber);
  fme->add_option("--graph", fme_args.graph, "z1|z2|z3|heisenberg3")
      ->capture_default_str();
  fme->add_option("--tol", fme_args.tol, "absolute tolerance")
      ->capture_default_str();
  fme->add_option("--seed", fme_args.seed, "master seed (metadata only)")
      ->capture_default_str();
  fme->add_option("--out", fme_args.out, "output file (default stdout)");
  fme->callback([&] { run_fme_verify(fme_args); });

  VoidArgs void_args;
  auto* void_cmd = app.add_subcommand(
      "void", "Empirical void probabilities around the window center");
  void_cmd->add_option("--model", void_args.model, "model string")->required();
  void_cmd->add_option("--graph", void_args.graph, "z1|z2|z3|heisenberg3")
      ->required();
  void_cmd->add_option("--n", void_args.n, "window radius")
      ->required()
      ->check(CLI::NonNegativeNumber);
  void_cmd->add_option("--tmax", void_args.tmax, "largest void radius")
      ->required()
      ->check(CLI::NonNegativeNumber);
  void_cmd->add_option("--replicates", void_args.replicates, "replicates")
      ->capture_default_str();
  void_cmd->add_option("--seed", void_args.seed, "master seed")
      ->capture_default_str();
  void_cmd->add_option("--out", void_args.out, "output file (default stdout)");
  void_cmd->callback([&] { run_void(void_args); });

  CltArgs clt_args;
  auto* clt = app.add_subcommand(
      "clt", "Run a JSON experiment plan and emit the result directory");
  clt->add_option("--config", clt_args.config, "plan JSON file")->required();
  clt->add_option("--out", clt_args.out, "output directory")
      ->capture_default_str();
  clt->add_option("--workers", clt_args.workers, "worker threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  clt->callback([&] { run_clt(clt_args); });

  BettiArgs betti_args;
  auto* betti = app.add_subcommand(
      "betti", "Per-replicate homology of the occupied cube union");
  betti->add_option("--model", betti_args.model, "model string")->required();
  betti->add_option("--graph", betti_args.graph, "z1|z2|z3")->required();
  betti->add_option("--n", betti_args.n, "window radius")
      ->required()
      ->check(CLI::NonNegativeNumber);
  betti->add_option("--replicates", betti_args.replicates, "replicates")
      ->capture_default_str();
  betti->add_option("--seed", betti_args.seed, "master seed")
      ->capture_default_str();
  betti->add_option("--out", betti_args.out, "output file (default stdout)");
  betti->callback([&] { run_betti(betti_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const spinclt::ResourceLimitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return g_exit_code;
}
