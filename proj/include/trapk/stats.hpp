#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "trapk/k_process.hpp"
#include "trapk/parallel.hpp"
#include "trapk/quadrature.hpp"
#include "trapk/rng.hpp"
#include "trapk/trajectory.hpp"
#include "trapk/trap_model.hpp"

namespace trapk {

// ---------------------------------------------------------------------------
// Arcsine law

namespace detail {

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
}

// Integral of s^-alpha (1-s)^(alpha-1) over [a, c], c <= 1/2, after
// v = s^(1-alpha), which removes the singularity at 0.
inline double arcsine_lower(double alpha, double a, double c) {
  if (!(c > a)) return 0.0;
  const double p = 1.0 / (1.0 - alpha);
  auto f = [&](double v) { return std::pow(1.0 - std::pow(v, p), alpha - 1.0); };
  return integrate_adaptive(f, std::pow(a, 1.0 - alpha), std::pow(c, 1.0 - alpha), 1e-14).value * p;
}

// Same integrand over [1 - m_lo, 1 - m_hi] given the complements
// m_hi <= m_lo <= 1/2, after w = (1-s)^alpha, which removes the singularity at 1.
inline double arcsine_upper(double alpha, double m_lo, double m_hi) {
  if (!(m_lo > m_hi)) return 0.0;
  const double p = 1.0 / alpha;
  auto f = [&](double w) { return std::pow(1.0 - std::pow(w, p), -alpha); };
  return integrate_adaptive(f, std::pow(m_hi, alpha), std::pow(m_lo, alpha), 1e-14).value * p;
}

// Integral over [a, 1] with a given through both a and 1 - a.
inline double arcsine_tail_integral(double alpha, double a, double one_minus_a) {
  if (a >= 0.5) return arcsine_upper(alpha, one_minus_a, 0.0);
  return arcsine_lower(alpha, a, 0.5) + arcsine_upper(alpha, 0.5, 0.0);
}

inline double arcsine_head_integral(double alpha, double a, double one_minus_a) {
  if (a <= 0.5) return arcsine_lower(alpha, 0.0, a);
  return arcsine_lower(alpha, 0.0, 0.5) + arcsine_upper(alpha, 0.5, one_minus_a);
}

}  // namespace detail

/// R(x) = sin(pi alpha)/pi * integral_{x/(1+x)}^1 s^-alpha (1-s)^(alpha-1) ds.
inline double arcsine_R(double alpha, double x) {
  detail::check_alpha(alpha);
  if (!(x >= 0.0)) throw std::invalid_argument("x must be non-negative");
  if (std::isinf(x)) return 0.0;
  const double a = x / (1.0 + x);
  const double one_minus_a = 1.0 / (1.0 + x);
  return std::sin(std::numbers::pi * alpha) / std::numbers::pi *
         detail::arcsine_tail_integral(alpha, a, one_minus_a);
}

/// sin(pi alpha)/pi times the complementary integral over [0, x/(1+x)];
/// arcsine_R(alpha, x) + arcsine_R_complement(alpha, x) == 1.
inline double arcsine_R_complement(double alpha, double x) {
  detail::check_alpha(alpha);
  if (!(x >= 0.0)) throw std::invalid_argument("x must be non-negative");
  if (std::isinf(x)) return 1.0;
  return std::sin(std::numbers::pi * alpha) / std::numbers::pi *
         detail::arcsine_head_integral(alpha, x / (1.0 + x), 1.0 / (1.0 + x));
}

// ---------------------------------------------------------------------------
// Estimates

struct EstimateWithCI {
  double point = 0.0;
  /// Half-width of the 95% confidence interval.
  double half_width = 0.0;
  std::uint64_t n = 0;
  RngSpec seed;
};

inline constexpr double kZ95 = 1.959963984540054;

/// Proportion with a normal-approximation 95% interval; at 0 or n successes
/// the Wilson interval's far end gives the half-width instead.
inline EstimateWithCI proportion_estimate(std::uint64_t successes, std::uint64_t n, const RngSpec& seed) {
  if (n < 1) throw std::invalid_argument("need at least one replica");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  double hw;
  if (successes == 0 || successes == n) {
    const double z2 = kZ95 * kZ95;
    const double center = (p + z2 / (2 * nn)) / (1 + z2 / nn);
    const double spread = kZ95 * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / (1 + z2 / nn);
    hw = std::max(std::abs(center + spread - p), std::abs(center - spread - p));
  } else {
    hw = kZ95 * std::sqrt(p * (1 - p) / nn);
  }
  return {p, hw, n, seed};
}

/// A model sampled at a sorted list of times: (times, engine) -> states.
using StateSampler = std::function<std::vector<State>(std::span<const double>, Engine&)>;

/// Trap model in rank coordinates from a fixed start rank.
inline StateSampler trap_sampler(const TrapModelSpec& spec, Rank start) {
  return [&spec, start](std::span<const double> times, Engine& gen) {
    return trap_states_at(spec, start, times, gen);
  };
}

/// Trap model started uniformly on all ranks (the uniform law on vertices).
inline StateSampler trap_sampler_uniform_start(const TrapModelSpec& spec) {
  return [&spec](std::span<const double> times, Engine& gen) {
    const auto start = static_cast<Rank>(uniform_index(gen, spec.size()) + 1);
    return trap_states_at(spec, start, times, gen);
  };
}

/// Truncated K process; y0 = kInfinity gives uniform entry on {1..M}.
inline StateSampler k_process_sampler(const GammaMeasure& gamma, std::size_t levels, State y0) {
  return [&gamma, levels, y0](std::span<const double> times, Engine& gen) {
    return k_process_states_at(gamma, levels, y0, times, gen);
  };
}

/// Adapts a whole-path sampler (horizon, engine) -> Trajectory.
inline StateSampler from_trajectory_sampler(std::function<Trajectory(double, Engine&)> sample) {
  return [sample = std::move(sample)](std::span<const double> times, Engine& gen) {
    const double horizon = times.empty() ? 1.0 : std::max(times.back(), std::numeric_limits<double>::min());
    const auto traj = sample(horizon, gen);
    std::vector<State> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) out[i] = traj.value_at(times[i]);
    return out;
  };
}

/// Frequency of {state(t) == state(t + s)} over independent replicas;
/// replica i runs on rng.replica(i).
inline EstimateWithCI estimate_two_time(const StateSampler& sampler, double t, double s, std::uint64_t replicas,
                                        const RngSpec& rng, unsigned workers = default_worker_count()) {
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  if (!(t >= 0.0) || !(s >= 0.0)) throw std::invalid_argument("times must be non-negative");
  const std::array<double, 2> times{t, t + s};
  auto same = run_replicas(replicas, workers, [&](std::uint64_t i) -> std::uint8_t {
    Engine gen = make_engine(rng.replica(i));
    const auto st = sampler(times, gen);
    return st[0] == st[1];
  });
  const auto hits = static_cast<std::uint64_t>(std::accumulate(same.begin(), same.end(), std::uint64_t{0}));
  return proportion_estimate(hits, replicas, rng);
}

// ---------------------------------------------------------------------------
// Empirical distributions

/// Counts on {1..cap} plus one overflow bucket for states above cap and infinity.
struct EmpiricalDistribution {
  std::vector<std::uint64_t> counts;  // counts[x-1] for x = 1..cap
  std::uint64_t overflow = 0;

  explicit EmpiricalDistribution(std::size_t cap = 0) : counts(cap, 0) {}

  std::size_t cap() const { return counts.size(); }
  std::uint64_t total() const { return std::accumulate(counts.begin(), counts.end(), overflow); }

  void add(State s, std::uint64_t k = 1) {
    if (!is_infinite(s) && s >= 1 && s <= counts.size())
      counts[s - 1] += k;
    else
      overflow += k;
  }

  /// Buckets 1..cap followed by the overflow bucket.
  std::vector<std::uint64_t> buckets() const {
    std::vector<std::uint64_t> b(counts);
    b.push_back(overflow);
    return b;
  }

  std::vector<double> frequencies() const {
    const double n = static_cast<double>(total());
    std::vector<double> f;
    for (auto c : buckets()) f.push_back(static_cast<double>(c) / n);
    return f;
  }
};

/// Law of the state at time t over independent replicas.
inline EmpiricalDistribution marginal_distribution(const StateSampler& sampler, double t, std::uint64_t replicas,
                                                   const RngSpec& rng, std::size_t cap,
                                                   unsigned workers = default_worker_count()) {
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  const std::array<double, 1> times{t};
  auto states = run_replicas(replicas, workers, [&](std::uint64_t i) {
    Engine gen = make_engine(rng.replica(i));
    return sampler(times, gen)[0];
  });
  EmpiricalDistribution out(cap);
  for (auto s : states) out.add(s);
  return out;
}

struct TestResult {
  double statistic = 0.0;
  double dof = 0.0;
  double pvalue = 1.0;
};

inline double chi_square_survival(double statistic, double dof) {
  if (dof <= 0.0) return 1.0;
  if (statistic <= 0.0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, statistic / 2.0);
}

/// Pearson goodness of fit of counts against probabilities.
inline TestResult chi_square_gof(std::span<const std::uint64_t> counts, std::span<const double> probs) {
  if (counts.size() != probs.size() || counts.size() < 2)
    throw std::invalid_argument("chi-square needs matching counts and probabilities (>= 2 cells)");
  const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
  double stat = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = n * probs[i];
    if (!(e > 0.0)) throw std::invalid_argument("chi-square expected count must be positive");
    const double diff = static_cast<double>(counts[i]) - e;
    stat += diff * diff / e;
  }
  const double dof = static_cast<double>(counts.size() - 1);
  return {stat, dof, chi_square_survival(stat, dof)};
}

struct DistributionComparison {
  double tv_distance = 0.0;
  double chi2_stat = 0.0;
  double dof = 0.0;
  double pvalue = 1.0;
  /// Fewer than two buckets survived pooling; chi-square is meaningless.
  bool degenerate = false;
};

/// Total variation distance and the two-sample chi-square test on bucket
/// counts. Buckets whose pooled expected count is below 5 on either side
/// are merged together before the test.
inline DistributionComparison compare_distributions(std::span<const std::uint64_t> p,
                                                    std::span<const std::uint64_t> q) {
  if (p.size() != q.size() || p.empty()) throw std::invalid_argument("distributions need a common support");
  const double np = static_cast<double>(std::accumulate(p.begin(), p.end(), std::uint64_t{0}));
  const double nq = static_cast<double>(std::accumulate(q.begin(), q.end(), std::uint64_t{0}));
  if (!(np > 0.0) || !(nq > 0.0)) throw std::invalid_argument("empty distribution");

  DistributionComparison out;
  for (std::size_t i = 0; i < p.size(); ++i)
    out.tv_distance += std::abs(static_cast<double>(p[i]) / np - static_cast<double>(q[i]) / nq);
  out.tv_distance *= 0.5;

  const double n = np + nq;
  std::vector<std::pair<double, double>> cells;
  std::pair<double, double> pooled{0.0, 0.0};
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = static_cast<double>(p[i]), qi = static_cast<double>(q[i]);
    const double share = (pi + qi) / n;
    if (share == 0.0) continue;
    if (share * np < 5.0 || share * nq < 5.0) {
      pooled.first += pi;
      pooled.second += qi;
    } else {
      cells.push_back({pi, qi});
    }
  }
  if (pooled.first + pooled.second > 0.0) {
    const double share = (pooled.first + pooled.second) / n;
    if ((share * np < 5.0 || share * nq < 5.0) && !cells.empty()) {
      auto smallest = std::min_element(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
        return a.first + a.second < b.first + b.second;
      });
      smallest->first += pooled.first;
      smallest->second += pooled.second;
    } else {
      cells.push_back(pooled);
    }
  }
  if (cells.size() < 2) {
    out.degenerate = true;
    return out;
  }
  double stat = 0.0;
  for (const auto& [pi, qi] : cells) {
    const double share = (pi + qi) / n;
    const double ep = share * np, eq = share * nq;
    stat += (pi - ep) * (pi - ep) / ep + (qi - eq) * (qi - eq) / eq;
  }
  out.chi2_stat = stat;
  out.dof = static_cast<double>(cells.size() - 1);
  out.pvalue = chi_square_survival(stat, out.dof);
  return out;
}

inline DistributionComparison compare_distributions(const EmpiricalDistribution& p, const EmpiricalDistribution& q) {
  if (p.cap() != q.cap()) throw std::invalid_argument("distributions need the same cap");
  const auto bp = p.buckets(), bq = q.buckets();
  return compare_distributions(bp, bq);
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

/// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
inline double kolmogorov_survival(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

// Stephens' small-sample correction to the asymptotic distribution.
inline double ks_pvalue(double d, double effective_n) {
  const double root = std::sqrt(effective_n);
  return kolmogorov_survival((root + 0.12 + 0.11 / root) * d);
}

/// One-sample KS test against a continuous CDF. Sorts a copy of the data.
inline TestResult ks_one_sample(std::vector<double> xs, const std::function<double(double)>& cdf) {
  if (xs.empty()) throw std::invalid_argument("KS test needs data");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, n, ks_pvalue(d, n)};
}

inline TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("KS test needs data");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  return {d, ne, ks_pvalue(d, ne)};
}

/// Hill estimate of the tail index from the k largest of `xs`.
inline double hill_estimator(std::vector<double> xs, std::size_t k) {
  if (k < 1 || k >= xs.size()) throw std::invalid_argument("need 1 <= k < sample size");
  std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(k), xs.end(), std::greater<>());
  const double threshold = xs[k];
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += std::log(xs[i] / threshold);
  return static_cast<double>(k) / sum;
}

// ---------------------------------------------------------------------------
// Equilibrium and aging

/// gamma_x / sum_{y <= M} gamma_y for x = 1..M.
inline std::vector<double> normalized_gamma(std::span<const double> gamma) {
  const double total = std::accumulate(gamma.begin(), gamma.end(), 0.0);
  std::vector<double> out(gamma.begin(), gamma.end());
  for (double& g : out) g /= total;
  return out;
}

/// sum_x gbar_x^2, the probability that two independent equilibrium draws agree.
inline double equilibrium_overlap(std::span<const double> gamma) {
  double s = 0.0;
  for (double g : normalized_gamma(gamma)) s += g * g;
  return s;
}

struct AgingCurve {
  std::vector<double> theta_values;
  std::vector<EstimateWithCI> estimates;
  std::vector<double> theory;  // arcsine_R(alpha, theta)
  /// Time unit: the two-time probability is taken at (t, t + theta t) * scale.
  double scale = 1.0;
};

/// Two-time correlation at times scale*(1, 1+theta) for each theta, plus the arcsine targets.
inline AgingCurve estimate_aging_curve(const StateSampler& sampler, double alpha, double scale,
                                       std::span<const double> thetas, std::uint64_t replicas, const RngSpec& rng,
                                       unsigned workers = default_worker_count()) {
  for (std::size_t i = 0; i < thetas.size(); ++i)
    if (!(thetas[i] > 0.0) || (i > 0 && !(thetas[i] > thetas[i - 1])))
      throw std::invalid_argument("theta grid must be positive and strictly increasing");
  AgingCurve curve;
  curve.scale = scale;
  for (double th : thetas) {
    curve.theta_values.push_back(th);
    curve.estimates.push_back(estimate_two_time(sampler, scale, scale * th, replicas, rng, workers));
    curve.theory.push_back(arcsine_R(alpha, th));
  }
  return curve;
}

}  // namespace trapk
