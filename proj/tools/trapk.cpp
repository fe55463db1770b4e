// trapk: seeded experiments on trap models and the K process.
//
//   trapk run --config exp.json [flags]
//   trapk run --experiment entrance-law --d 12 --J 5 --replicas 100000 --seed 7
//
// Flags override fields of the config file. The JSON report goes to
// <output>.json (or stdout) and the table to <output>.csv.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "trapk/disorder.hpp"
#include "trapk/io.hpp"
#include "trapk/k_process.hpp"
#include "trapk/parallel.hpp"
#include "trapk/skorohod.hpp"
#include "trapk/stats.hpp"
#include "trapk/trap_model.hpp"

using namespace trapk;

namespace {

constexpr int kSchemaVersion = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

/// A problem with one configuration field.
struct ConfigError : std::runtime_error {
  ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error("field '" + field + "': " + what) {}
};

const std::set<std::string> kExperiments{"entrance-law", "converge", "aging", "equilibrium", "skorohod-bound"};

// Every accepted key with its JSON type check.
const std::map<std::string, json::value_t> kFields{
    {"schema_version", json::value_t::number_unsigned},
    {"experiment", json::value_t::string},
    {"graph", json::value_t::string},
    {"model", json::value_t::string},
    {"d", json::value_t::number_unsigned},
    {"M", json::value_t::number_unsigned},
    {"alpha", json::value_t::number_float},
    {"beta", json::value_t::number_float},
    {"ratio", json::value_t::number_float},
    {"gamma", json::value_t::array},
    {"J", json::value_t::number_unsigned},
    {"start", json::value_t::string},
    {"t", json::value_t::number_float},
    {"theta", json::value_t::array},
    {"epsilon", json::value_t::number_float},
    {"time_factor", json::value_t::number_float},
    {"disorder", json::value_t::string},
    {"K", json::value_t::array},
    {"horizon", json::value_t::number_float},
    {"cap", json::value_t::number_unsigned},
    {"replicas", json::value_t::number_unsigned},
    {"seed", json::value_t::number_unsigned},
    {"workers", json::value_t::number_unsigned},
    {"output", json::value_t::string},
    {"top_k", json::value_t::number_unsigned},
    {"env_json", json::value_t::string},
    {"env_binary", json::value_t::string},
};

bool type_matches(const json& v, json::value_t want) {
  switch (want) {
    case json::value_t::number_unsigned:
      return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    case json::value_t::number_float:
      return v.is_number();
    case json::value_t::string:
      return v.is_string() || v.is_number_unsigned();
    case json::value_t::array:
      return v.is_array();
    default:
      return false;
  }
}

void check_fields(const json& cfg) {
  if (!cfg.is_object()) throw ConfigError("(root)", "config must be a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    auto it = kFields.find(key);
    if (it == kFields.end()) throw ConfigError(key, "unknown field");
    if (!type_matches(value, it->second)) throw ConfigError(key, "wrong type");
  }
  if (cfg.contains("schema_version") && cfg["schema_version"].get<int>() != kSchemaVersion)
    throw ConfigError("schema_version", "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
}

/// Typed view of a resolved config. Defaults are written back into `echo`
/// so the echoed config re-runs to the same result.
class Config {
 public:
  explicit Config(json j) : j_(std::move(j)) {}

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!j_.contains(key)) j_[key] = fallback;
    try {
      return j_[key].get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(key, e.what());
    }
  }
  template <class T>
  T require(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(key, "required for this experiment");
    return get<T>(key, T{});
  }
  bool has(const std::string& key) const { return j_.contains(key); }
  const json& echo() const { return j_; }

 private:
  json j_;
};

template <class T>
void positive(const std::string& field, T v) {
  if (!(v > T{})) throw ConfigError(field, "must be positive");
}

std::vector<double> number_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("list", "cannot parse '" + item + "' as a number");
    }
  }
  return out;
}

struct Report {
  json results;
  std::string csv;
};

// ---------------------------------------------------------------------------
// Model construction

struct Setup {
  unsigned workers;
  std::uint64_t seed;
  std::uint64_t replicas;
};

RngSpec disorder_stream(const Setup& s) { return {s.seed, 0, stream_tag::kDisorder}; }
RngSpec dynamics_stream(const Setup& s) { return {s.seed, 0, stream_tag::kDynamics}; }

double floored_power(double ratio, std::size_t x) {
  // Means below 2^-1000 are floored there so every mean stays a positive double.
  return std::max(std::pow(ratio, static_cast<double>(x)), std::ldexp(1.0, -1000));
}

std::vector<double> geometric_means(double ratio, std::size_t n) {
  std::vector<double> m(n);
  for (std::size_t x = 1; x <= n; ++x) m[x - 1] = floored_power(ratio, x);
  return m;
}

GammaMeasure geometric_for_epsilon(double ratio, double epsilon) {
  // enough atoms that the recorded tail sits below epsilon
  std::size_t atoms = 1;
  while (std::pow(ratio, static_cast<double>(atoms + 1)) / (1.0 - ratio) > epsilon / 2) ++atoms;
  return geometric_gamma(ratio, atoms);
}

unsigned read_d(Config& c) {
  const auto d = c.require<unsigned>("d");
  if (d < 1 || d > kMaxHypercubeDimension)
    throw ConfigError("d", "must be in [1, " + std::to_string(kMaxHypercubeDimension) + "]");
  return d;
}

double read_alpha(Config& c) {
  const auto a = c.get<double>("alpha", 0.5);
  if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha", "must lie in (0, 1)");
  return a;
}

double read_ratio(Config& c) {
  const auto r = c.get<double>("ratio", 0.5);
  if (!(r > 0.0 && r < 1.0)) throw ConfigError("ratio", "must lie in (0, 1)");
  return r;
}

std::optional<ScaledEnvironment> make_environment(Config& c, const std::string& model, unsigned d, const Setup& s) {
  if (model == "rem-like") return sample_rem_like(read_alpha(c), d, disorder_stream(s));
  if (model == "rem") {
    const auto beta = c.get<double>("beta", 2.0 * std::sqrt(2.0 * std::numbers::ln2));
    try {
      return sample_rem(beta, d, disorder_stream(s));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("beta", e.what());
    }
  }
  return std::nullopt;
}

void export_environment(Config& c, const ScaledEnvironment& env, json& results) {
  const auto top_k = c.get<std::size_t>("top_k", 10);
  results["environment"] = environment_to_json(env, top_k);
  if (c.has("env_json")) {
    std::ofstream os(c.get<std::string>("env_json", ""));
    if (!os) throw ConfigError("env_json", "cannot open for writing");
    os << environment_to_json(env, top_k).dump(2) << '\n';
  }
  if (c.has("env_binary")) {
    std::ofstream os(c.get<std::string>("env_binary", ""), std::ios::binary);
    if (!os) throw ConfigError("env_binary", "cannot open for writing");
    write_means_binary(os, env.scaled_means);
  }
}

/// Ranked means on a graph: random placement for hypercube models drawn
/// from the disorder stream.
TrapModelSpec ranked_model(Config& c, const std::string& graph, const Setup& s, json& results) {
  const auto model = c.get<std::string>("model", graph == "hypercube" ? "rem-like" : "geometric");
  if (graph == "hypercube") {
    const unsigned d = read_d(c);
    if (auto env = make_environment(c, model, d, s)) {
      export_environment(c, *env, results);
      return env->trap_model();
    }
    if (model != "geometric") throw ConfigError("model", "hypercube models are rem-like, rem or geometric");
    Engine gen = make_engine(disorder_stream(s));
    return place_ranked_means(Hypercube{d}, geometric_means(read_ratio(c), std::size_t{1} << d), gen);
  }
  if (graph != "complete") throw ConfigError("graph", "must be hypercube or complete");
  std::vector<double> means;
  if (model == "explicit") {
    try {
      auto g = gamma_from_json(c.require<json>("gamma"));
      means.assign(g.weights().begin(), g.weights().end());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("gamma", e.what());
    }
  } else {
    const auto M = c.require<std::size_t>("M");
    positive("M", M);
    if (model == "geometric") {
      means = geometric_means(read_ratio(c), M);
    } else if (model == "stable") {
      auto g = sample_stable_gamma(read_alpha(c), M, {s.seed, 0, stream_tag::kGamma});
      means.assign(g.weights().begin(), g.weights().end());
    } else {
      throw ConfigError("model", "complete-graph models are explicit, geometric or stable");
    }
  }
  return build_complete_model(means);
}

std::uint64_t read_replicas(Config& c, std::uint64_t fallback) {
  const auto r = c.get<std::uint64_t>("replicas", fallback);
  positive("replicas", r);
  return r;
}

// ---------------------------------------------------------------------------
// Experiments

Report entrance_law(Config& c, const Setup& s) {
  Report rep;
  const auto graph = c.get<std::string>("graph", "hypercube");
  const auto spec = ranked_model(c, graph, s, rep.results);
  const auto J = c.get<std::size_t>("J", 5);
  if (J < 1 || J >= spec.size()) throw ConfigError("J", "must be in [1, number of states)");
  const auto start = c.get<std::string>("start", "uniform");
  std::vector<Rank> targets(J);
  std::iota(targets.begin(), targets.end(), Rank{1});

  HittingDistribution h;
  if (start == "uniform") {
    h = entrance_hitting_distribution_uniform_start(spec, targets, s.replicas, dynamics_stream(s), s.workers);
  } else {
    Rank r;
    try {
      r = static_cast<Rank>(std::stoul(start));
    } catch (const std::exception&) {
      throw ConfigError("start", "must be 'uniform' or a rank");
    }
    if (r <= J || r > spec.size()) throw ConfigError("start", "rank must lie outside the targets and within range");
    h = entrance_hitting_distribution(spec, targets, r, s.replicas, dynamics_stream(s), s.workers);
  }

  const std::vector<double> uniform(J, 1.0 / static_cast<double>(J));
  std::ostringstream csv;
  csv << "target_rank,count,frequency,expected\n";
  double max_dev = 0.0;
  const auto freq = h.frequencies();
  for (std::size_t i = 0; i < J; ++i) {
    csv << h.targets[i] << ',' << h.counts[i] << ',' << format_double(freq[i]) << ',' << format_double(uniform[i])
        << "\n";
    max_dev = std::max(max_dev, std::abs(freq[i] - uniform[i]));
  }
  rep.csv = csv.str();
  rep.results["counts"] = h.counts;
  rep.results["frequencies"] = freq;
  rep.results["max_deviation"] = max_dev;
  if (J >= 2) {
    const auto t = chi_square_gof(h.counts, uniform);
    rep.results["chi_square"] = {{"statistic", t.statistic}, {"dof", t.dof}, {"pvalue", t.pvalue}};
  }
  return rep;
}

struct ConvergeModels {
  TrapModelSpec trap;
  GammaMeasure gamma;
  std::size_t M;
};

ConvergeModels converge_models(Config& c, const Setup& s, json& results) {
  const auto model = c.get<std::string>("model", "geometric");
  const unsigned d = read_d(c);
  const auto epsilon = c.get<double>("epsilon", 1e-4);
  positive("epsilon", epsilon);
  if (auto env = make_environment(c, model, d, s)) {
    export_environment(c, *env, results);
    auto gamma = env->top_gamma(env->size());
    if (!(epsilon < gamma.total_mass())) throw ConfigError("epsilon", "must be below the total mass");
    const auto M = choose_truncation(gamma, epsilon);
    return {env->trap_model(), std::move(gamma), M};
  }
  if (model != "geometric") throw ConfigError("model", "must be geometric, rem-like or rem");
  const double ratio = read_ratio(c);
  auto gamma = geometric_for_epsilon(ratio, epsilon);
  if (!(epsilon < gamma.total_mass())) throw ConfigError("epsilon", "must be below the total mass");
  const auto M = choose_truncation(gamma, epsilon);
  Engine gen = make_engine(disorder_stream(s));
  auto trap = place_ranked_means(Hypercube{d}, geometric_means(ratio, std::size_t{1} << d), gen);
  return {std::move(trap), std::move(gamma), M};
}

State read_start(Config& c, std::size_t limit) {
  const auto start = c.get<std::string>("start", "uniform");
  if (start == "uniform") return kInfinity;
  try {
    const auto r = std::stoull(start);
    if (r >= 1 && r <= limit) return r;
  } catch (const std::exception&) {
  }
  throw ConfigError("start", "must be 'uniform' or a rank in [1, M]");
}

Report converge(Config& c, const Setup& s) {
  Report rep;
  auto m = converge_models(c, s, rep.results);
  const auto t = c.get<double>("t", 1.0);
  positive("t", t);
  const State start = read_start(c, m.M);
  const auto cap = c.get<std::size_t>("cap", m.M);
  positive("cap", cap);

  const StateSampler trap = is_infinite(start) ? trap_sampler_uniform_start(m.trap)
                                               : trap_sampler(m.trap, static_cast<Rank>(start));
  const StateSampler k = k_process_sampler(m.gamma, m.M, start);
  const auto p = marginal_distribution(trap, t, s.replicas, {s.seed, 0, stream_tag::kDynamics}, cap, s.workers);
  const auto q = marginal_distribution(k, t, s.replicas, {s.seed, 0, stream_tag::kStart}, cap, s.workers);
  const auto cmp = compare_distributions(p, q);

  std::ostringstream csv;
  csv << "state,trap_frequency,k_frequency\n";
  const auto fp = p.frequencies(), fq = q.frequencies();
  for (std::size_t i = 0; i < fp.size(); ++i)
    csv << (i < cap ? std::to_string(i + 1) : std::string("overflow")) << ',' << format_double(fp[i]) << ','
        << format_double(fq[i]) << "\n";
  rep.csv = csv.str();
  rep.results["truncation_M"] = m.M;
  rep.results["tv_distance"] = cmp.tv_distance;
  rep.results["chi_square"] = {
      {"statistic", cmp.chi2_stat}, {"dof", cmp.dof}, {"pvalue", cmp.pvalue}, {"degenerate", cmp.degenerate}};
  return rep;
}

Report aging(Config& c, const Setup& s) {
  Report rep;
  const auto model = c.get<std::string>("model", "stable");
  const double alpha = read_alpha(c);
  std::vector<double> thetas;
  for (const auto& v : c.get<json>("theta", json::array({0.5, 1.0, 2.0}))) {
    if (!v.is_number()) throw ConfigError("theta", "must be numbers");
    thetas.push_back(v.get<double>());
  }
  for (std::size_t i = 0; i < thetas.size(); ++i)
    if (!(thetas[i] > 0.0) || (i > 0 && !(thetas[i] > thetas[i - 1])))
      throw ConfigError("theta", "must be positive and strictly increasing");
  if (thetas.empty()) throw ConfigError("theta", "needs at least one value");

  AgingCurve curve;
  const RngSpec rng = dynamics_stream(s);
  if (model == "stable") {
    // K process started at infinity, at the vanishing time scale t
    const auto M = c.get<std::size_t>("M", 1000);
    positive("M", M);
    const auto t = c.get<double>("t", 1e-3);
    positive("t", t);
    const auto gamma = sample_stable_gamma(alpha, M, {s.seed, 0, stream_tag::kGamma});
    rep.results["gamma_total_mass"] = gamma.total_mass();
    curve = estimate_aging_curve(k_process_sampler(gamma, M, kInfinity), alpha, t, thetas, s.replicas, rng, s.workers);
  } else if (model == "rem-like" || model == "rem") {
    // Hypercube from the uniform law; time measured in units where the
    // ergodic scale is 1. The default t = 2^(-d / (2 alpha)) corresponds
    // to the shorter scale c'_d = c_d 2^(d / (2 alpha)).
    const unsigned d = read_d(c);
    const double model_alpha =
        model == "rem" ? DisorderSpec{RemGaussian{c.get<double>("beta", 2.0 * std::sqrt(2.0 * std::numbers::ln2))}, d}.alpha()
                       : alpha;
    if (model == "rem" && !(model_alpha < 1.0))
      throw ConfigError("beta", "must exceed sqrt(2 log 2) so that alpha < 1");
    const auto t = c.get<double>("t", std::exp2(-static_cast<double>(d) / (2.0 * model_alpha)));
    positive("t", t);
    const auto disorder = c.get<std::string>("disorder", "annealed");
    if (disorder == "quenched") {
      auto env = make_environment(c, model, d, s);
      export_environment(c, *env, rep.results);
      const auto spec = env->trap_model();
      curve = estimate_aging_curve(trap_sampler_uniform_start(spec), model_alpha, t, thetas, s.replicas, rng,
                                   s.workers);
    } else if (disorder == "annealed") {
      const double beta = model == "rem" ? c.get<double>("beta", 0.0) : 0.0;
      // fresh environment per replica, seeded from the replica's own stream
      StateSampler sampler = [=](std::span<const double> times, Engine& gen) {
        const RngSpec env_rng{gen(), 0, stream_tag::kDisorder};
        const auto env = model == "rem" ? sample_rem(beta, d, env_rng) : sample_rem_like(alpha, d, env_rng);
        const auto spec = env.trap_model();
        const auto start = static_cast<Rank>(uniform_index(gen, spec.size()) + 1);
        return trap_states_at(spec, start, times, gen);
      };
      curve = estimate_aging_curve(sampler, model_alpha, t, thetas, s.replicas, rng, s.workers);
    } else {
      throw ConfigError("disorder", "must be quenched or annealed");
    }
  } else {
    throw ConfigError("model", "aging models are stable, rem-like or rem");
  }

  std::ostringstream csv;
  write_aging_csv(csv, curve);
  rep.csv = csv.str();
  json rows = json::array();
  for (std::size_t i = 0; i < curve.theta_values.size(); ++i) {
    auto e = estimate_to_json(curve.estimates[i]);
    e["theta"] = curve.theta_values[i];
    e["theory_R"] = curve.theory[i];
    e["deviation_in_half_widths"] =
        curve.estimates[i].half_width > 0.0
            ? std::abs(curve.estimates[i].point - curve.theory[i]) / curve.estimates[i].half_width
            : 0.0;
    rows.push_back(e);
  }
  rep.results["curve"] = rows;
  rep.results["time_scale"] = curve.scale;
  return rep;
}

Report equilibrium(Config& c, const Setup& s) {
  Report rep;
  if (c.get<std::string>("graph", "complete") != "complete") throw ConfigError("graph", "equilibrium runs on the complete graph");
  const auto spec = ranked_model(c, "complete", s, rep.results);
  const double total = std::accumulate(spec.means().begin(), spec.means().end(), 0.0);
  const auto factor = c.get<double>("time_factor", 100.0);
  positive("time_factor", factor);
  const auto start = read_start(c, spec.size());
  const StateSampler sampler =
      is_infinite(start) ? trap_sampler_uniform_start(spec) : trap_sampler(spec, static_cast<Rank>(start));
  const auto dist = marginal_distribution(sampler, factor * total, s.replicas, dynamics_stream(s), spec.size(),
                                          s.workers);
  const auto gbar = normalized_gamma(spec.means());
  const auto t = chi_square_gof(dist.counts, gbar);
  double tv = 0.0;
  const auto freq = dist.frequencies();
  std::ostringstream csv;
  csv << "state,count,frequency,gamma_bar\n";
  for (std::size_t i = 0; i < gbar.size(); ++i) {
    csv << i + 1 << ',' << dist.counts[i] << ',' << format_double(freq[i]) << ',' << format_double(gbar[i]) << "\n";
    tv += std::abs(freq[i] - gbar[i]);
  }
  rep.csv = csv.str();
  rep.results["time"] = factor * total;
  rep.results["tv_distance"] = tv / 2;
  rep.results["chi_square"] = {{"statistic", t.statistic}, {"dof", t.dof}, {"pvalue", t.pvalue}};
  rep.results["equilibrium_overlap"] = equilibrium_overlap(spec.means());
  return rep;
}

Report skorohod_bound(Config& c, const Setup& s) {
  Report rep;
  auto m = converge_models(c, s, rep.results);
  const auto T = c.get<double>("horizon", 1.0);
  positive("horizon", T);
  std::vector<std::size_t> levels;
  for (const auto& v : c.get<json>("K", json::array({1, 2, 4}))) {
    if (!v.is_number_unsigned() || v.get<std::size_t>() < 1) throw ConfigError("K", "must be positive integers");
    levels.push_back(v.get<std::size_t>());
  }
  const State start = read_start(c, m.M);

  // Candidates: identity and the matched distortion for every K. Beyond the
  // horizon both paths are held at their last state.
  struct Row {
    double bound, identity, phi;
    std::uint32_t best;
  };
  auto rows = run_replicas(s.replicas, s.workers, [&](std::uint64_t i) {
    Engine gen = make_engine(dynamics_stream(s).replica(i));
    const Rank r = is_infinite(start) ? static_cast<Rank>(uniform_index(gen, m.trap.size()) + 1)
                                      : static_cast<Rank>(start);
    const auto f = simulate_trap_trajectory(m.trap, r, T, {s.seed, i, stream_tag::kDynamics});
    const auto g = sample_k_process_truncated(m.gamma, m.M, start, T, {s.seed, i, stream_tag::kStart}).trajectory;
    std::vector<TimeDistortion> candidates{TimeDistortion::identity()};
    for (auto K : levels) {
      const auto src = entrance_exit_times(f, K, T);
      const auto dst = entrance_exit_times_first(g, K, src.pairs.size());
      try {
        candidates.push_back(build_time_distortion(src, dst));
      } catch (const std::domain_error&) {
      }
    }
    const auto b = rho_upper_bound(f, g, candidates);
    const std::vector<TimeDistortion> id{TimeDistortion::identity()};
    return Row{b.value, rho_upper_bound(f, g, id).value, b.phi, static_cast<std::uint32_t>(b.best_candidate)};
  });

  auto summary = [&](auto field) {
    double sum = 0.0, sum2 = 0.0;
    for (const auto& r : rows) {
      const double v = field(r);
      sum += v;
      sum2 += v * v;
    }
    const double n = static_cast<double>(rows.size());
    const double mean = sum / n;
    const double sd = n > 1 ? std::sqrt(std::max(0.0, (sum2 - n * mean * mean) / (n - 1))) : 0.0;
    return json{{"mean", mean}, {"ci_half_width", kZ95 * sd / std::sqrt(n)}, {"n", rows.size()}};
  };
  rep.results["truncation_M"] = m.M;
  rep.results["bound"] = summary([](const Row& r) { return r.bound; });
  rep.results["identity_bound"] = summary([](const Row& r) { return r.identity; });
  std::ostringstream csv;
  csv << "replica,bound,identity_bound,phi,best_candidate\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    csv << i << ',' << format_double(rows[i].bound) << ',' << format_double(rows[i].identity) << ','
        << format_double(rows[i].phi) << ',' << rows[i].best << "\n";
  rep.csv = csv.str();
  return rep;
}

// ---------------------------------------------------------------------------

int run(json cfg, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  check_fields(cfg);
  cfg["schema_version"] = kSchemaVersion;
  if (cfg.contains("start") && cfg["start"].is_number()) cfg["start"] = std::to_string(cfg["start"].get<std::uint64_t>());
  const auto workers = cfg.contains("workers") ? cfg["workers"].get<unsigned>() : default_worker_count();
  cfg.erase("workers");
  const std::string output = cfg.contains("output") ? cfg["output"].get<std::string>() : "";
  cfg.erase("output");
  Config c(cfg);

  const auto experiment = c.require<std::string>("experiment");
  if (!kExperiments.contains(experiment)) throw ConfigError("experiment", "unknown experiment '" + experiment + "'");
  Setup s{std::max(1u, workers), c.get<std::uint64_t>("seed", 1), 0};
  const std::map<std::string, std::uint64_t> default_replicas{
      {"entrance-law", 100000}, {"converge", 100000}, {"aging", 100000}, {"equilibrium", 100000},
      {"skorohod-bound", 1000}};
  s.replicas = read_replicas(c, default_replicas.at(experiment));

  Report rep;
  if (experiment == "entrance-law") rep = entrance_law(c, s);
  if (experiment == "converge") rep = converge(c, s);
  if (experiment == "aging") rep = aging(c, s);
  if (experiment == "equilibrium") rep = equilibrium(c, s);
  if (experiment == "skorohod-bound") rep = skorohod_bound(c, s);

  json report;
  report["schema_version"] = kSchemaVersion;
  report["config"] = c.echo();
  report["results"] = rep.results;
  report["provenance"] = {{"master_seed", s.seed},
                          {"replica_streams", "replica i uses (master_seed, i, stream)"},
                          {"streams", {{"dynamics", stream_tag::kDynamics},
                                       {"disorder", stream_tag::kDisorder},
                                       {"start", stream_tag::kStart},
                                       {"gamma", stream_tag::kGamma}}}};
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  report["runtime"] = {{"workers", s.workers}, {"wall_clock_seconds", seconds}};

  if (output.empty()) {
    out << report.dump(2) << '\n';
  } else {
    std::ofstream js(output + ".json");
    std::ofstream cs(output + ".csv", std::ios::binary);
    if (!js || !cs) throw ConfigError("output", "cannot write '" + output + ".json/.csv'");
    js << report.dump(2) << '\n';
    cs << rep.csv;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trap models on the hypercube and the K process"};
  app.require_subcommand(1);
  auto* run_cmd = app.add_subcommand("run", "run one experiment");

  std::string config_path;
  run_cmd->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);

  // Every flag is kept as text and converted by the same path as file
  // fields, so both sources are validated identically.
  std::map<std::string, std::string> flags;
  const std::vector<std::pair<std::string, std::string>> flag_names{
      {"experiment", "experiment"}, {"graph", "graph"},     {"model", "model"},   {"d", "d"},
      {"M", "M"},                   {"alpha", "alpha"},     {"beta", "beta"},     {"ratio", "ratio"},
      {"gamma", "gamma"},           {"J", "J"},             {"start", "start"},   {"t", "t"},
      {"theta", "theta"},           {"epsilon", "epsilon"}, {"time-factor", "time_factor"},
      {"disorder", "disorder"},     {"K", "K"},             {"horizon", "horizon"},
      {"cap", "cap"},               {"replicas", "replicas"}, {"seed", "seed"}, {"workers", "workers"},
      {"output", "output"},         {"top-k", "top_k"},     {"env-json", "env_json"},
      {"env-binary", "env_binary"}};
  for (const auto& [flag, key] : flag_names) run_cmd->add_option("--" + flag, flags[key]);

  CLI11_PARSE(app, argc, argv);

  try {
    json cfg = json::object();
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      try {
        cfg = json::parse(is);
      } catch (const json::parse_error& e) {
        throw ConfigError("(file)", e.what());
      }
      check_fields(cfg);
      if (!cfg.contains("schema_version")) throw ConfigError("schema_version", "required in config files");
    }
    for (const auto& [flag, key] : flag_names) {
      if (run_cmd->count("--" + flag) == 0) continue;
      const std::string& text = flags[key];
      const auto type = kFields.at(key);
      try {
        if (type == json::value_t::array) {
          const auto values = number_list(text);
          if (key == "K") {
            json arr = json::array();
            for (double v : values) {
              if (v < 1 || v != std::floor(v)) throw ConfigError(key, "must be positive integers");
              arr.push_back(static_cast<std::uint64_t>(v));
            }
            cfg[key] = arr;
          } else {
            cfg[key] = values;
          }
        } else if (type == json::value_t::number_unsigned) {
          std::size_t used = 0;
          if (text.empty() || text[0] == '-') throw std::invalid_argument(text);
          const auto v = std::stoull(text, &used);
          if (used != text.size()) throw std::invalid_argument(text);
          cfg[key] = v;
        } else if (type == json::value_t::number_float) {
          std::size_t used = 0;
          const double v = std::stod(text, &used);
          if (used != text.size()) throw std::invalid_argument(text);
          cfg[key] = v;
        } else {
          cfg[key] = text;
        }
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception&) {
        throw ConfigError(key, "cannot parse '" + text + "'");
      }
    }
    return run(cfg, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ReplicaError& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
