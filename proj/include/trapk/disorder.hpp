#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "trapk/k_process.hpp"
#include "trapk/rng.hpp"
#include "trapk/trap_model.hpp"

namespace trapk {

/// iid Pareto waiting times, P(tau > t) = t^-alpha for t >= 1.
struct RemLikePareto {
  double alpha;
};
/// Random hopping times for the REM: tau_v = exp(beta sqrt(d) H_v), H_v ~ N(0,1).
struct RemGaussian {
  double beta;
};

struct DisorderSpec {
  std::variant<RemLikePareto, RemGaussian> kind;
  unsigned d;

  bool is_pareto() const { return std::holds_alternative<RemLikePareto>(kind); }

  /// Tail index of the ordered waiting times (sqrt(2 log 2)/beta for the REM).
  double alpha() const {
    if (const auto* p = std::get_if<RemLikePareto>(&kind)) return p->alpha;
    return std::sqrt(2.0 * std::numbers::ln2) / std::get<RemGaussian>(kind).beta;
  }
};

/// A disorder realization in rank coordinates together with its scale c_d.
///
/// Invariant: scaled_means[i] == c_d * ordered_means[i] for every i.
struct ScaledEnvironment {
  DisorderSpec spec;
  std::vector<double> ordered_means;
  double c_d = 1.0;
  std::vector<double> scaled_means;
  std::vector<VertexId> vertex_of_rank;
  RngSpec seed;

  std::size_t size() const { return ordered_means.size(); }

  /// Hypercube trap model whose mean waiting times are the scaled means
  /// multiplied by `time_factor` (1 gives the ergodic time scale).
  TrapModelSpec trap_model(double time_factor = 1.0) const {
    std::vector<double> m(scaled_means);
    if (time_factor != 1.0)
      for (double& x : m) x *= time_factor;
    return TrapModelSpec(Hypercube{spec.d}, std::move(m), vertex_of_rank);
  }

  /// The first `atoms` scaled means as a gamma measure.
  GammaMeasure top_gamma(std::size_t atoms) const {
    if (atoms < 1 || atoms > scaled_means.size()) throw std::out_of_range("atom count out of range");
    double tail = 0.0;
    for (std::size_t i = scaled_means.size(); i-- > atoms;) tail += scaled_means[i];
    return GammaMeasure({scaled_means.begin(), scaled_means.begin() + static_cast<std::ptrdiff_t>(atoms)}, tail);
  }
};

/// (inf{t >= 0 : survival(t) <= 2^-d})^-1 for a non-increasing survival function.
inline double scale_from_survival(const std::function<double(double)>& survival, unsigned d) {
  const double level = std::ldexp(1.0, -static_cast<int>(d));
  if (survival(0.0) <= level) throw std::domain_error("survival already below 2^-d at t = 0");
  double lo = 0.0, hi = 1.0;
  while (survival(hi) > level) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw std::domain_error("survival never reaches 2^-d");
  }
  for (int i = 0; i < 2000 && hi - lo > 0.0; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    (survival(mid) <= level ? hi : lo) = mid;
  }
  return 1.0 / hi;
}

/// Closed form of scale_from_survival for the Pareto tail t^-alpha.
inline double pareto_scale(double alpha, unsigned d) { return std::exp2(-static_cast<double>(d) / alpha); }

/// The REM scale exp(-(2 log 2 / alpha) d + log(d) / (2 alpha)).
inline double rem_scale(double alpha, unsigned d) {
  const double dd = static_cast<double>(d);
  return std::exp(-2.0 * std::numbers::ln2 / alpha * dd + std::log(dd) / (2.0 * alpha));
}

namespace detail {

inline void check_dimension(unsigned d) {
  if (d < 1 || d > kMaxHypercubeDimension)
    throw std::invalid_argument("d must be in [1, " + std::to_string(kMaxHypercubeDimension) + "]");
}

inline std::vector<VertexId> random_placement(std::size_t n, Engine& gen) {
  std::vector<VertexId> perm(n);
  std::iota(perm.begin(), perm.end(), VertexId{0});
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(gen, i)]);
  return perm;
}

}  // namespace detail

/// REM-like trap model environment with exact Pareto(alpha) waiting times.
///
/// The decreasing order statistics are drawn directly: with Gamma_i the
/// partial sums of n+1 rate-1 exponentials, (Gamma_1/Gamma_{n+1}, ...,
/// Gamma_n/Gamma_{n+1}) are the ascending order statistics of n uniforms,
/// and tau~_i = U_(i)^(-1/alpha). Vertices receive ranks through a uniform
/// random permutation. The exponentials are the first draws of the stream,
/// so sample_stable_gamma on the same RngSpec shares Gamma_1, Gamma_2, ...
inline ScaledEnvironment sample_rem_like(double alpha, unsigned d, const RngSpec& rng) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  detail::check_dimension(d);
  const std::size_t n = std::size_t{1} << d;
  Engine gen = make_engine(rng);

  std::vector<double> arrivals(n);
  double acc = 0.0;
  for (auto& a : arrivals) a = (acc += standard_exponential(gen));
  const double total = acc + standard_exponential(gen);

  ScaledEnvironment env;
  env.spec = {RemLikePareto{alpha}, d};
  env.seed = rng;
  env.c_d = pareto_scale(alpha, d);
  env.ordered_means.resize(n);
  env.scaled_means.resize(n);
  const double inv_alpha = 1.0 / alpha;
  for (std::size_t i = 0; i < n; ++i) {
    env.ordered_means[i] = std::pow(arrivals[i] / total, -inv_alpha);
    env.scaled_means[i] = env.c_d * env.ordered_means[i];
  }
  env.vertex_of_rank = detail::random_placement(n, gen);
  return env;
}

/// Random hopping times environment for the REM at inverse temperature beta.
/// Requires beta > sqrt(2 log 2), i.e. alpha < 1.
inline ScaledEnvironment sample_rem(double beta, unsigned d, const RngSpec& rng) {
  const double beta_c = std::sqrt(2.0 * std::numbers::ln2);
  if (!(beta > beta_c))
    throw std::invalid_argument("beta must exceed sqrt(2 log 2) ~ 1.17741 so that alpha = sqrt(2 log 2)/beta < 1; "
                                "smaller beta is outside the heavy-tailed (alpha < 1) regime the K-process scaling "
                                "limit requires");
  detail::check_dimension(d);
  const std::size_t n = std::size_t{1} << d;
  Engine gen = make_engine(rng);

  const double amplitude = beta * std::sqrt(static_cast<double>(d));
  std::vector<double> tau(n);
  for (auto& t : tau) t = std::exp(amplitude * standard_normal(gen));
  auto model = build_rank_map(tau, Hypercube{d});

  ScaledEnvironment env;
  env.spec = {RemGaussian{beta}, d};
  env.seed = rng;
  env.c_d = rem_scale(env.spec.alpha(), d);
  env.ordered_means.assign(model.means().begin(), model.means().end());
  env.scaled_means.resize(n);
  for (std::size_t i = 0; i < n; ++i) env.scaled_means[i] = env.c_d * env.ordered_means[i];
  env.vertex_of_rank.assign(model.vertex_of_rank_map().begin(), model.vertex_of_rank_map().end());
  return env;
}

/// log(scaled_means[x] / gamma_hat[x]) for x = 1..top_k.
inline std::vector<double> ergodic_scale_check(const ScaledEnvironment& env, const GammaMeasure& gamma_hat,
                                               std::size_t top_k) {
  if (top_k > env.size() || top_k > gamma_hat.atoms()) throw std::out_of_range("top_k exceeds available atoms");
  std::vector<double> out(top_k);
  for (std::size_t x = 0; x < top_k; ++x) out[x] = std::log(env.scaled_means[x] / gamma_hat.weights()[x]);
  return out;
}

}  // namespace trapk
