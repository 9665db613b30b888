#pragma once

// JSON plan configuration and result emission.
//
// The plan format is one JSON object (schema committed under docs/):
//
//   {
//     "model":      {"kind": "iid", "p": 0.5},
//     "graph":      "z2",
//     "n_grid":     [8, 12, 16],
//     "replicates": 200,
//     "scores":     [{"type": "occupancy_count"}, {"type": "betti", "j": 0}],
//     "master_seed": 49568,                                  // optional
//     "thresholds": {"ks_alpha": 0.01, "min_r_squared": 0.98},  // optional
//     "sigma_direct": {"rho_max": 3, "window_n": 8, "replicates": 2000}
//   }
//
// Parsing is strict: unknown keys are rejected, and every error names the
// offending key path (e.g. "model.p").  parse_plan_json materializes all
// defaults, so serialize -> parse -> serialize is a fixed point and the
// canonical text has a stable FNV-1a hash.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "spinclt/cayley.hpp"
#include "spinclt/cltlab.hpp"
#include "spinclt/scores.hpp"
#include "spinclt/spin.hpp"
#include "spinclt/version.hpp"

namespace spinclt {

using ordered_json = nlohmann::ordered_json;

namespace detail {

[[noreturn]] inline void config_fail(const std::string& path,
                                     const std::string& message) {
  throw std::invalid_argument(path + ": " + message);
}

inline void reject_unknown_keys(const ordered_json& obj, const std::string& path,
                                const std::vector<std::string>& allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const auto& k : allowed) known = known || (item.key() == k);
    if (!known) config_fail(path + "." + item.key(), "unknown key");
  }
}

inline const ordered_json& require_key(const ordered_json& obj,
                                       const std::string& path,
                                       const std::string& key) {
  const auto it = obj.find(key);
  if (it == obj.end()) config_fail(path + "." + key, "missing required key");
  return *it;
}

inline double get_double(const ordered_json& j, const std::string& path) {
  if (!j.is_number()) config_fail(path, "expected a number");
  return j.get<double>();
}

inline std::int64_t get_integer(const ordered_json& j, const std::string& path) {
  if (!j.is_number_integer()) config_fail(path, "expected an integer");
  return j.get<std::int64_t>();
}

inline std::string get_string(const ordered_json& j, const std::string& path) {
  if (!j.is_string()) config_fail(path, "expected a string");
  return j.get<std::string>();
}

inline bool get_bool(const ordered_json& j, const std::string& path) {
  if (!j.is_boolean()) config_fail(path, "expected a boolean");
  return j.get<bool>();
}

// Exact shortest decimal for doubles in CSV output (%.17g round-trips).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Model <-> JSON.

inline ModelSpec parse_model_json(const ordered_json& j,
                                  const std::string& path = "model") {
  if (!j.is_object()) detail::config_fail(path, "expected an object");
  const std::string kind =
      detail::get_string(detail::require_key(j, path, "kind"), path + ".kind");
  if (kind == "iid") {
    detail::reject_unknown_keys(j, path, {"kind", "p"});
    const double p =
        detail::get_double(detail::require_key(j, path, "p"), path + ".p");
    if (!(p >= 0.0 && p <= 1.0))
      detail::config_fail(path + ".p", "out of range: must lie in [0,1]");
    return ModelSpec::iid(p);
  }
  if (kind == "gaussian_levelset") {
    detail::reject_unknown_keys(j, path, {"kind", "a", "u"});
    const double a =
        detail::get_double(detail::require_key(j, path, "a"), path + ".a");
    const double u =
        detail::get_double(detail::require_key(j, path, "u"), path + ".u");
    if (!(a > 0.0)) detail::config_fail(path + ".a", "out of range: must be > 0");
    return ModelSpec::gaussian_levelset(a, u);
  }
  if (kind == "ising") {
    detail::reject_unknown_keys(
        j, path, {"kind", "beta", "h", "sweeps", "burn_in", "subcritical_asserted"});
    const double beta =
        detail::get_double(detail::require_key(j, path, "beta"), path + ".beta");
    const double h =
        detail::get_double(detail::require_key(j, path, "h"), path + ".h");
    if (!(beta >= 0.0))
      detail::config_fail(path + ".beta", "out of range: must be >= 0");
    std::int64_t sweeps = 200, burn_in = 2000;
    bool subcritical = false;
    if (j.contains("sweeps"))
      sweeps = detail::get_integer(j["sweeps"], path + ".sweeps");
    if (j.contains("burn_in"))
      burn_in = detail::get_integer(j["burn_in"], path + ".burn_in");
    if (j.contains("subcritical_asserted"))
      subcritical = detail::get_bool(j["subcritical_asserted"],
                                     path + ".subcritical_asserted");
    if (sweeps < 1) detail::config_fail(path + ".sweeps", "must be >= 1");
    if (burn_in < 1) detail::config_fail(path + ".burn_in", "must be >= 1");
    if (h == 0.0 && !subcritical)
      detail::config_fail(path,
                          "h = 0 requires \"subcritical_asserted\": true");
    return ModelSpec::ising(beta, h, static_cast<int>(sweeps),
                            static_cast<int>(burn_in), subcritical);
  }
  if (kind == "determinantal") {
    detail::reject_unknown_keys(j, path, {"kind", "kappa", "alpha"});
    const double kappa =
        detail::get_double(detail::require_key(j, path, "kappa"), path + ".kappa");
    const double alpha =
        detail::get_double(detail::require_key(j, path, "alpha"), path + ".alpha");
    if (!(kappa > 0.0 && kappa <= 1.0))
      detail::config_fail(path + ".kappa", "out of range: must lie in (0,1]");
    if (!(alpha > 0.0))
      detail::config_fail(path + ".alpha", "out of range: must be > 0");
    return ModelSpec::determinantal(kappa, alpha);
  }
  detail::config_fail(path + ".kind",
                      "unknown model kind \"" + kind +
                          "\" (expected iid, gaussian_levelset, ising, or "
                          "determinantal)");
}

inline ordered_json model_to_json(const ModelSpec& m) {
  ordered_json j;
  switch (m.kind) {
    case ModelSpec::Kind::IID:
      j["kind"] = "iid";
      j["p"] = m.p;
      break;
    case ModelSpec::Kind::GaussianLevelSet:
      j["kind"] = "gaussian_levelset";
      j["a"] = m.a;
      j["u"] = m.u;
      break;
    case ModelSpec::Kind::Ising:
      j["kind"] = "ising";
      j["beta"] = m.beta;
      j["h"] = m.h;
      j["sweeps"] = m.sweeps;
      j["burn_in"] = m.burn_in;
      j["subcritical_asserted"] = m.subcritical_asserted;
      break;
    case ModelSpec::Kind::Determinantal:
      j["kind"] = "determinantal";
      j["kappa"] = m.kappa;
      j["alpha"] = m.alpha;
      break;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Scores <-> JSON.  Construction needs the graph so offsets and topology
// scores can be validated against its dimension; only occupancy_count is
// meaningful on the Heisenberg graph (the others read lattice coordinates).

namespace detail {

inline std::vector<GroupPoint> parse_offsets(const ordered_json& j,
                                             const std::string& path, int dim) {
  if (!j.is_array() || j.empty()) config_fail(path, "expected a nonempty array");
  std::vector<GroupPoint> offsets;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& row = j[i];
    const std::string rp = path + "[" + std::to_string(i) + "]";
    if (!row.is_array() || row.size() != static_cast<std::size_t>(dim))
      config_fail(rp, "expected an array of " + std::to_string(dim) +
                          " integer coordinates");
    GroupPoint p;
    for (std::size_t c = 0; c < row.size(); ++c)
      p.push_back(get_integer(row[c], rp + "[" + std::to_string(c) + "]"));
    offsets.push_back(std::move(p));
  }
  return offsets;
}

}  // namespace detail

inline ScoreFunction parse_score_json(const ordered_json& j, GroupKind graph,
                                      const std::string& path) {
  if (!j.is_object()) detail::config_fail(path, "expected an object");
  const std::string type =
      detail::get_string(detail::require_key(j, path, "type"), path + ".type");
  const bool lattice = graph.tag == GroupKind::Tag::IntegerLattice;
  const int dim = lattice ? graph.dim : 3;

  auto finish = [&](ScoreFunction s,
                    const std::vector<std::string>& allowed) -> ScoreFunction {
    std::vector<std::string> keys = allowed;
    keys.push_back("type");
    keys.push_back("truncate_radius");
    detail::reject_unknown_keys(j, path, keys);
    if (j.contains("truncate_radius")) {
      const auto r =
          detail::get_integer(j["truncate_radius"], path + ".truncate_radius");
      if (r < 0) detail::config_fail(path + ".truncate_radius", "must be >= 0");
      return truncate_to_local(s, static_cast<int>(r));
    }
    return s;
  };

  if (type == "occupancy_count") {
    GroupPoint origin(static_cast<std::size_t>(dim), 0);
    return finish(subgraph_count_score(pattern_template({origin})), {});
  }
  if (!lattice)
    detail::config_fail(path + ".type",
                        "score \"" + type +
                            "\" reads lattice coordinates and is not available "
                            "on graph \"heisenberg3\"");
  if (type == "subgraph_count" || type == "component_count") {
    const auto offsets = detail::parse_offsets(
        detail::require_key(j, path, "offsets"), path + ".offsets", dim);
    auto tmpl = [&] {
      try {
        return pattern_template(offsets);
      } catch (const std::invalid_argument& e) {
        detail::config_fail(path + ".offsets", e.what());
      }
    }();
    return finish(type == "subgraph_count" ? subgraph_count_score(tmpl)
                                           : component_count_score(tmpl),
                  {"offsets"});
  }
  if (type == "betti") {
    const auto jj =
        detail::get_integer(detail::require_key(j, path, "j"), path + ".j");
    if (jj < 0 || jj >= dim)
      detail::config_fail(path + ".j", "out of range: need 0 <= j < " +
                                           std::to_string(dim));
    return finish(betti_score(static_cast<int>(jj), dim), {"j"});
  }
  if (type == "intrinsic_volume") {
    if (dim != 2)
      detail::config_fail(path + ".type",
                          "intrinsic_volume requires graph \"z2\"");
    const auto k =
        detail::get_integer(detail::require_key(j, path, "k"), path + ".k");
    if (k < 0 || k > 2)
      detail::config_fail(path + ".k", "out of range: must be 0, 1, or 2");
    return finish(intrinsic_volume_scores(2)[static_cast<std::size_t>(k)], {"k"});
  }
  if (type == "nn_distance") {
    return finish(nn_distance_score(), {});
  }
  detail::config_fail(path + ".type",
                      "unknown score type \"" + type +
                          "\" (expected occupancy_count, subgraph_count, "
                          "component_count, betti, intrinsic_volume, or "
                          "nn_distance)");
}

// ---------------------------------------------------------------------------
// Plan <-> JSON.

struct SigmaDirectParams {
  int rho_max = 3;
  int window_n = 8;
  std::size_t replicates = 2000;
  std::size_t bootstrap_resamples = 200;
};

struct PlanConfig {
  ExperimentPlan plan;
  std::optional<SigmaDirectParams> sigma_direct;
  ordered_json canonical;     // defaults materialized, fixed key order
  std::string canonical_text; // canonical.dump(2) + "\n"
  std::string config_hash;    // FNV-1a 64 over canonical_text, hex
};

inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline PlanConfig parse_plan_json(const std::string& text) {
  ordered_json root;
  try {
    root = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("plan: invalid JSON: ") + e.what());
  }
  if (!root.is_object())
    detail::config_fail("plan", "top level must be a JSON object");
  detail::reject_unknown_keys(root, "plan",
                              {"model", "graph", "n_grid", "replicates",
                               "scores", "master_seed", "thresholds",
                               "sigma_direct"});

  PlanConfig out;
  ExperimentPlan& plan = out.plan;

  plan.model = parse_model_json(detail::require_key(root, "plan", "model"),
                                "model");

  const std::string graph_name =
      detail::get_string(detail::require_key(root, "plan", "graph"), "graph");
  try {
    plan.graph = parse_group_kind(graph_name);
  } catch (const std::invalid_argument&) {
    detail::config_fail("graph", "unknown graph \"" + graph_name +
                                     "\" (expected z1, z2, z3, or heisenberg3)");
  }
  if (plan.graph.tag == GroupKind::Tag::IntegerLattice &&
      (plan.graph.dim < 1 || plan.graph.dim > 3))
    detail::config_fail("graph", "lattice dimension must be 1, 2, or 3");

  const auto& grid = detail::require_key(root, "plan", "n_grid");
  if (!grid.is_array()) detail::config_fail("n_grid", "expected an array");
  plan.n_grid.clear();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto n = detail::get_integer(grid[i],
                                       "n_grid[" + std::to_string(i) + "]");
    if (n < 0)
      detail::config_fail("n_grid[" + std::to_string(i) + "]", "must be >= 0");
    plan.n_grid.push_back(static_cast<int>(n));
  }

  const auto reps = detail::get_integer(
      detail::require_key(root, "plan", "replicates"), "replicates");
  if (reps < 0) detail::config_fail("replicates", "must be positive");
  plan.replicates = static_cast<std::size_t>(reps);

  const auto& scores = detail::require_key(root, "plan", "scores");
  if (!scores.is_array()) detail::config_fail("scores", "expected an array");
  plan.scores.clear();
  for (std::size_t i = 0; i < scores.size(); ++i)
    plan.scores.push_back(parse_score_json(
        scores[i], plan.graph, "scores[" + std::to_string(i) + "]"));

  plan.master_seed = kDefaultMasterSeed;
  if (root.contains("master_seed")) {
    const auto& seed = root["master_seed"];
    if (!seed.is_number_unsigned())
      detail::config_fail("master_seed", "expected a non-negative integer");
    plan.master_seed = seed.get<std::uint64_t>();
  }

  if (root.contains("thresholds")) {
    const auto& th = root["thresholds"];
    if (!th.is_object()) detail::config_fail("thresholds", "expected an object");
    detail::reject_unknown_keys(th, "thresholds", {"ks_alpha", "min_r_squared"});
    if (th.contains("ks_alpha")) {
      plan.thresholds.ks_alpha =
          detail::get_double(th["ks_alpha"], "thresholds.ks_alpha");
      if (!(plan.thresholds.ks_alpha > 0.0 && plan.thresholds.ks_alpha < 1.0))
        detail::config_fail("thresholds.ks_alpha",
                            "out of range: must lie in (0,1)");
    }
    if (th.contains("min_r_squared")) {
      plan.thresholds.min_r_squared =
          detail::get_double(th["min_r_squared"], "thresholds.min_r_squared");
      if (!(plan.thresholds.min_r_squared > 0.0 &&
            plan.thresholds.min_r_squared <= 1.0))
        detail::config_fail("thresholds.min_r_squared",
                            "out of range: must lie in (0,1]");
    }
  }

  if (root.contains("sigma_direct")) {
    const auto& sd = root["sigma_direct"];
    if (!sd.is_object()) detail::config_fail("sigma_direct", "expected an object");
    detail::reject_unknown_keys(
        sd, "sigma_direct",
        {"rho_max", "window_n", "replicates", "bootstrap_resamples"});
    SigmaDirectParams params;
    const auto rho = detail::get_integer(
        detail::require_key(sd, "sigma_direct", "rho_max"),
        "sigma_direct.rho_max");
    const auto win = detail::get_integer(
        detail::require_key(sd, "sigma_direct", "window_n"),
        "sigma_direct.window_n");
    if (rho < 0) detail::config_fail("sigma_direct.rho_max", "must be >= 0");
    if (win < 2 * rho)
      detail::config_fail("sigma_direct.window_n",
                          "window margin violated: need window_n >= 2*rho_max");
    params.rho_max = static_cast<int>(rho);
    params.window_n = static_cast<int>(win);
    if (sd.contains("replicates")) {
      const auto r =
          detail::get_integer(sd["replicates"], "sigma_direct.replicates");
      if (r < 4) detail::config_fail("sigma_direct.replicates", "must be >= 4");
      params.replicates = static_cast<std::size_t>(r);
    }
    if (sd.contains("bootstrap_resamples")) {
      const auto b = detail::get_integer(sd["bootstrap_resamples"],
                                         "sigma_direct.bootstrap_resamples");
      if (b < 2)
        detail::config_fail("sigma_direct.bootstrap_resamples", "must be >= 2");
      params.bootstrap_resamples = static_cast<std::size_t>(b);
    }
    out.sigma_direct = params;
  }

  // Shared validation (n_grid monotone, R >= 50, scores nonempty...) with the
  // same key-path style messages.
  validate(plan);

  // Canonical echo: defaults materialized, stable key order.
  ordered_json canon;
  canon["model"] = model_to_json(plan.model);
  canon["graph"] = plan.graph.name();
  canon["n_grid"] = plan.n_grid;
  canon["replicates"] = plan.replicates;
  canon["scores"] = ordered_json::array();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    ordered_json cs;
    cs["type"] = s.at("type");
    if (s.contains("offsets")) cs["offsets"] = s.at("offsets");
    if (s.contains("j")) cs["j"] = s.at("j");
    if (s.contains("k")) cs["k"] = s.at("k");
    if (s.contains("truncate_radius"))
      cs["truncate_radius"] = s.at("truncate_radius");
    canon["scores"].push_back(std::move(cs));
  }
  canon["master_seed"] = plan.master_seed;
  canon["thresholds"] = {{"ks_alpha", plan.thresholds.ks_alpha},
                         {"min_r_squared", plan.thresholds.min_r_squared}};
  if (out.sigma_direct) {
    canon["sigma_direct"] = {
        {"rho_max", out.sigma_direct->rho_max},
        {"window_n", out.sigma_direct->window_n},
        {"replicates", out.sigma_direct->replicates},
        {"bootstrap_resamples", out.sigma_direct->bootstrap_resamples}};
  }
  out.canonical = std::move(canon);
  out.canonical_text = out.canonical.dump(2) + "\n";
  out.config_hash = fnv1a_hex(out.canonical_text);
  return out;
}

inline std::string serialize_plan(const PlanConfig& config) {
  return config.canonical_text;
}

// ---------------------------------------------------------------------------
// Compact model / score strings for command-line flags, e.g. "iid(0.3)",
// "gaussian(2,0)", "ising(0.4,0.1)", "dpp(0.45,1)"; "betti0", "pair", "v1".

inline ModelSpec parse_model_string(const std::string& text) {
  const auto open = text.find('(');
  if (open == std::string::npos || text.back() != ')')
    throw std::invalid_argument(
        "model: expected name(args), e.g. iid(0.3), gaussian(2,0), "
        "ising(0.4,0.1), dpp(0.45,1)");
  const std::string name = text.substr(0, open);
  std::vector<double> args;
  std::string body = text.substr(open + 1, text.size() - open - 2);
  std::istringstream is(body);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    try {
      std::size_t used = 0;
      args.push_back(std::stod(tok, &used));
      while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used])))
        ++used;
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw std::invalid_argument("model: bad numeric argument \"" + tok + "\"");
    }
  }
  auto arity = [&](std::size_t lo, std::size_t hi) {
    if (args.size() < lo || args.size() > hi)
      throw std::invalid_argument("model: " + name + " takes " +
                                  std::to_string(lo) +
                                  (hi > lo ? ".." + std::to_string(hi) : "") +
                                  " arguments");
  };
  if (name == "iid") {
    arity(1, 1);
    return ModelSpec::iid(args[0]);
  }
  if (name == "gaussian" || name == "gaussian_levelset") {
    arity(2, 2);
    return ModelSpec::gaussian_levelset(args[0], args[1]);
  }
  if (name == "ising") {
    arity(2, 4);
    const int sweeps = args.size() > 2 ? static_cast<int>(args[2]) : 200;
    const int burn_in = args.size() > 3 ? static_cast<int>(args[3]) : 2000;
    return ModelSpec::ising(args[0], args[1], sweeps, burn_in);
  }
  if (name == "dpp" || name == "determinantal") {
    arity(2, 2);
    return ModelSpec::determinantal(args[0], args[1]);
  }
  throw std::invalid_argument("model: unknown model \"" + name + "\"");
}

inline ScoreFunction parse_score_string(const std::string& text, GroupKind graph) {
  ordered_json j;
  if (text == "occupancy") {
    j = {{"type", "occupancy_count"}};
  } else if (text == "pair") {
    j = {{"type", "subgraph_count"}};
    ordered_json offsets = ordered_json::array();
    const int dim = graph.tag == GroupKind::Tag::IntegerLattice ? graph.dim : 3;
    ordered_json origin = ordered_json::array(), step = ordered_json::array();
    for (int c = 0; c < dim; ++c) {
      origin.push_back(0);
      step.push_back(c == 0 ? 1 : 0);
    }
    offsets.push_back(origin);
    offsets.push_back(step);
    j["offsets"] = offsets;
  } else if (text.rfind("betti", 0) == 0 && text.size() == 6 &&
             text[5] >= '0' && text[5] <= '9') {
    j = {{"type", "betti"}, {"j", text[5] - '0'}};
  } else if (text.size() == 2 && text[0] == 'v' && text[1] >= '0' &&
             text[1] <= '9') {
    j = {{"type", "intrinsic_volume"}, {"k", text[1] - '0'}};
  } else if (text == "nn") {
    j = {{"type", "nn_distance"}};
  } else {
    throw std::invalid_argument(
        "score: unknown score \"" + text +
        "\" (expected occupancy, pair, betti<j>, v<k>, or nn)");
  }
  return parse_score_json(j, graph, "score");
}

// ---------------------------------------------------------------------------
// Analysis bundle: everything downstream of run() that the result files carry.

struct AnalysisBundle {
  std::vector<std::optional<VarianceScalingFit>> fits;        // per score
  std::vector<std::vector<std::optional<NormalityReport>>> normality;  // [score][n]
  std::optional<CovarianceReport> covariance;
  std::vector<std::optional<SigmaSquaredReport>> sigma;       // per score
};

inline AnalysisBundle analyze(const ExperimentResult& result,
                              const std::optional<SigmaDirectParams>& sigma_params =
                                  std::nullopt) {
  const auto& plan = result.plan;
  AnalysisBundle bundle;
  const std::size_t k = plan.scores.size();
  bundle.fits.resize(k);
  bundle.normality.assign(k, std::vector<std::optional<NormalityReport>>(
                                 plan.n_grid.size()));
  bundle.sigma.resize(k);
  for (std::size_t si = 0; si < k; ++si) {
    if (plan.n_grid.size() >= 4)
      bundle.fits[si] = variance_scaling_fit(result, si);
    if (plan.replicates >= 100) {
      for (std::size_t ni = 0; ni < plan.n_grid.size(); ++ni) {
        try {
          bundle.normality[si][ni] = normality_test(result.cell(ni, si).h);
        } catch (const ZeroVarianceError&) {
          // constant score: leave the entry empty
        }
      }
    }
    if (sigma_params) {
      bundle.sigma[si] = sigma_squared_direct(
          plan.model, plan.graph, plan.scores[si], sigma_params->rho_max,
          sigma_params->window_n, sigma_params->replicates, plan.master_seed,
          sigma_params->bootstrap_resamples);
    }
  }
  if (k >= 2) bundle.covariance = multivariate_covariance(result);
  return bundle;
}

// ---------------------------------------------------------------------------
// Result emission: plan.json (echoed config), raw.csv, summary.json,
// report.md.  No timestamps or machine identifiers anywhere: reruns and
// different worker counts must produce byte-identical files.

namespace detail {

inline ordered_json normality_to_json(const NormalityReport& r) {
  ordered_json j;
  j["ks"] = r.ks;
  j["p_value"] = r.p_value;
  j["p_asymptotic"] = r.p_asymptotic;
  j["skewness"] = r.skewness;
  j["excess_kurtosis"] = r.excess_kurtosis;
  j["sample_size"] = r.sample_size;
  j["null_table_size"] = r.null_table_size;
  return j;
}

inline void write_file(const std::filesystem::path& path,
                       const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("emit: cannot open " + path.string());
  os << content;
  if (!os) throw std::runtime_error("emit: write failed for " + path.string());
}

}  // namespace detail

inline void emit_result_directory(const ExperimentResult& result,
                                  const AnalysisBundle& bundle,
                                  const PlanConfig& config,
                                  const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const auto& plan = result.plan;
  fs::create_directories(dir);

  detail::write_file(dir / "plan.json", config.canonical_text);

  // raw.csv ------------------------------------------------------------
  std::ostringstream csv;
  csv << "# version=" << kVersion << "\n";
  csv << "# master_seed=" << plan.master_seed << "\n";
  csv << "# config_hash=" << config.config_hash << "\n";
  csv << "n,replicate,score,H\n";
  for (std::size_t ni = 0; ni < plan.n_grid.size(); ++ni)
    for (std::size_t si = 0; si < plan.scores.size(); ++si) {
      const auto& cell = result.cell(ni, si);
      for (std::size_t r = 0; r < cell.h.size(); ++r)
        csv << cell.n << ',' << r << ',' << cell.score << ','
            << detail::format_double(cell.h[r]) << "\n";
    }
  detail::write_file(dir / "raw.csv", csv.str());

  // summary.json ---------------------------------------------------------
  ordered_json summary;
  summary["version"] = kVersion;
  summary["master_seed"] = plan.master_seed;
  summary["config_hash"] = config.config_hash;
  summary["cells"] = ordered_json::array();
  for (std::size_t ni = 0; ni < plan.n_grid.size(); ++ni)
    for (std::size_t si = 0; si < plan.scores.size(); ++si) {
      const auto& cell = result.cell(ni, si);
      ordered_json c;
      c["n"] = cell.n;
      c["w"] = cell.w;
      c["score"] = cell.score;
      c["mean"] = cell.mean_h;
      c["variance"] = cell.var_h;
      c["normalized_variance"] = cell.var_h / static_cast<double>(cell.w);
      c["spill_fraction"] = cell.spill_fraction;
      summary["cells"].push_back(std::move(c));
    }
  summary["variance_fits"] = ordered_json::array();
  summary["normality"] = ordered_json::array();
  summary["sigma_squared_direct"] = ordered_json::array();
  for (std::size_t si = 0; si < plan.scores.size(); ++si) {
    const std::string& name = result.cell(0, si).score;
    if (bundle.fits.size() > si && bundle.fits[si]) {
      const auto& f = *bundle.fits[si];
      ordered_json fj;
      fj["score"] = name;
      fj["slope"] = f.slope;
      fj["slope_se"] = f.slope_se;
      fj["r_squared"] = f.r_squared;
      fj["w"] = f.w;
      fj["normalized"] = f.normalized;
      fj["normalized_se"] = f.normalized_se;
      summary["variance_fits"].push_back(std::move(fj));
    }
    if (bundle.normality.size() > si) {
      for (std::size_t ni = 0; ni < plan.n_grid.size(); ++ni) {
        if (!bundle.normality[si][ni]) continue;
        ordered_json nj;
        nj["score"] = name;
        nj["n"] = plan.n_grid[ni];
        const auto rep = detail::normality_to_json(*bundle.normality[si][ni]);
        for (const auto& item : rep.items()) nj[item.key()] = item.value();
        summary["normality"].push_back(std::move(nj));
      }
    }
    if (bundle.sigma.size() > si && bundle.sigma[si]) {
      const auto& s = *bundle.sigma[si];
      ordered_json sj;
      sj["score"] = name;
      sj["value"] = s.value;
      sj["se"] = s.se;
      sj["rho_max"] = s.rho_max;
      sj["window_n"] = s.window_n;
      sj["replicates"] = s.replicates;
      sj["per_distance"] = s.per_distance;
      if (!std::isnan(s.tail_bound)) sj["tail_bound"] = s.tail_bound;
      summary["sigma_squared_direct"].push_back(std::move(sj));
    }
  }
  if (bundle.covariance) {
    const auto& cov = *bundle.covariance;
    ordered_json cj;
    cj["n"] = cov.n;
    cj["w"] = cov.w;
    cj["sigma"] = cov.sigma;
    cj["se"] = cov.se;
    cj["min_eigenvalue"] = cov.min_eigenvalue;
    summary["covariance"] = std::move(cj);
  } else {
    summary["covariance"] = nullptr;
  }
  detail::write_file(dir / "summary.json", summary.dump(2) + "\n");

  // report.md --------------------------------------------------------------
  std::ostringstream md;
  md << "# Experiment report\n\n";
  md << "- version: " << kVersion << "\n";
  md << "- master seed: " << plan.master_seed << "\n";
  md << "- config hash: " << config.config_hash << "\n";
  md << "- model: " << plan.model.name() << "\n";
  md << "- graph: " << plan.graph.name() << "\n";
  md << "- replicates per cell: " << plan.replicates << "\n\n";
  md << "## Cells\n\n";
  md << "| n | w | score | mean H | Var H | Var/w |\n";
  md << "|---|---|-------|--------|-------|-------|\n";
  for (std::size_t ni = 0; ni < plan.n_grid.size(); ++ni)
    for (std::size_t si = 0; si < plan.scores.size(); ++si) {
      const auto& cell = result.cell(ni, si);
      md << "| " << cell.n << " | " << cell.w << " | " << cell.score << " | "
         << detail::format_double(cell.mean_h) << " | "
         << detail::format_double(cell.var_h) << " | "
         << detail::format_double(cell.var_h / static_cast<double>(cell.w))
         << " |\n";
    }
  md << "\n";
  for (std::size_t si = 0; si < plan.scores.size(); ++si) {
    const std::string& name = result.cell(0, si).score;
    if (bundle.fits.size() > si && bundle.fits[si]) {
      const auto& f = *bundle.fits[si];
      md << "## Variance scaling: " << name << "\n\n";
      md << "slope " << detail::format_double(f.slope) << " (se "
         << detail::format_double(f.slope_se) << "), R^2 "
         << detail::format_double(f.r_squared);
      md << (f.r_squared > result.plan.thresholds.min_r_squared
                 ? " — meets threshold "
                 : " — BELOW threshold ");
      md << detail::format_double(result.plan.thresholds.min_r_squared)
         << "\n\n";
    }
    if (bundle.normality.size() > si) {
      bool any = false;
      for (const auto& entry : bundle.normality[si]) any = any || entry.has_value();
      if (any) {
        md << "## Normality: " << name << "\n\n";
        md << "| n | KS | p (MC) | p (asym) | skew | ex. kurtosis | verdict |\n";
        md << "|---|----|--------|----------|------|--------------| ------- |\n";
        for (std::size_t ni = 0; ni < plan.n_grid.size(); ++ni) {
          if (!bundle.normality[si][ni]) continue;
          const auto& r = *bundle.normality[si][ni];
          md << "| " << plan.n_grid[ni] << " | "
             << detail::format_double(r.ks) << " | "
             << detail::format_double(r.p_value) << " | "
             << detail::format_double(r.p_asymptotic) << " | "
             << detail::format_double(r.skewness) << " | "
             << detail::format_double(r.excess_kurtosis) << " | "
             << (r.p_value > plan.thresholds.ks_alpha ? "pass" : "reject")
             << " |\n";
        }
        md << "\n";
      }
    }
    if (bundle.sigma.size() > si && bundle.sigma[si]) {
      const auto& s = *bundle.sigma[si];
      md << "## Direct variance sum: " << name << "\n\n";
      md << "sigma^2 = " << detail::format_double(s.value) << " (se "
         << detail::format_double(s.se) << ") with rho_max = " << s.rho_max
         << ", window n = " << s.window_n << "\n\n";
    }
  }
  if (bundle.covariance) {
    const auto& cov = *bundle.covariance;
    md << "## Covariance matrix (largest window, n = " << cov.n << ")\n\n";
    md << "min eigenvalue " << detail::format_double(cov.min_eigenvalue)
       << "\n\n";
    for (std::size_t i = 0; i < cov.sigma.size(); ++i) {
      md << "|";
      for (std::size_t j = 0; j < cov.sigma[i].size(); ++j)
        md << " " << detail::format_double(cov.sigma[i][j]) << " |";
      md << "\n";
    }
    md << "\n";
  }
  detail::write_file(dir / "report.md", md.str());
}

}  // namespace spinclt
