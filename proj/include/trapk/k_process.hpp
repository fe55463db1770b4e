#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "trapk/rng.hpp"
#include "trapk/trajectory.hpp"

namespace trapk {

/// Finite measure on N* with non-increasing weights.
///
/// Only the first `weights().size()` atoms are materialized. `tail_mass`
/// is the mass of any atoms beyond those (zero for a finitely supported
/// measure). The weight at infinity is zero.
class GammaMeasure {
 public:
  explicit GammaMeasure(std::vector<double> weights, double tail_mass = 0.0)
      : weights_(std::move(weights)), tail_mass_(tail_mass) {
    if (weights_.empty()) throw std::invalid_argument("gamma measure needs at least one atom");
    if (!(tail_mass_ >= 0.0) || !std::isfinite(tail_mass_))
      throw std::invalid_argument("tail mass must be finite and non-negative");
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i]))
        throw std::invalid_argument("gamma weights must be positive and finite (atom " + std::to_string(i + 1) +
                                    ")");
      if (i > 0 && weights_[i] > weights_[i - 1])
        throw std::invalid_argument("gamma weights must be non-increasing (atom " + std::to_string(i + 1) + ")");
    }
    // Summed smallest-first so exactly representable series stay exact.
    suffix_.assign(weights_.size() + 1, 0.0);
    suffix_.back() = tail_mass_;
    for (std::size_t i = weights_.size(); i-- > 0;) suffix_[i] = suffix_[i + 1] + weights_[i];
  }

  std::span<const double> weights() const { return weights_; }
  std::size_t atoms() const { return weights_.size(); }
  double tail_mass() const { return tail_mass_; }
  double total_mass() const { return suffix_.front(); }

  /// gamma_x for x in N*; zero beyond the materialized atoms and at infinity.
  double operator[](State x) const {
    if (is_infinite(x) || x < 1 || x > weights_.size()) return 0.0;
    return weights_[x - 1];
  }

  /// Mass of the atoms strictly above `level`, tail included.
  double mass_above(std::size_t level) const {
    return level >= weights_.size() ? tail_mass_ : suffix_[level];
  }

  /// The first `m` atoms as a finitely supported measure.
  GammaMeasure truncated(std::size_t m) const {
    if (m < 1 || m > weights_.size()) throw std::out_of_range("truncation level out of range");
    return GammaMeasure(std::vector<double>(weights_.begin(), weights_.begin() + static_cast<std::ptrdiff_t>(m)));
  }

  GammaMeasure scaled(double factor) const {
    std::vector<double> w(weights_);
    for (double& x : w) x *= factor;
    return GammaMeasure(std::move(w), tail_mass_ * factor);
  }

 private:
  std::vector<double> weights_;
  double tail_mass_;
  std::vector<double> suffix_;
};

/// gamma_x = ratio^x for x = 1..atoms, with the remaining geometric tail recorded.
inline GammaMeasure geometric_gamma(double ratio, std::size_t atoms) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("ratio must be in (0, 1)");
  std::vector<double> w(atoms);
  double g = 1.0;
  for (auto& x : w) x = (g *= ratio);
  return GammaMeasure(std::move(w), g * ratio / (1.0 - ratio));
}

/// Smallest M with sum_{x > M} gamma_x <= epsilon.
inline std::size_t choose_truncation(const GammaMeasure& gamma, double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon < gamma.total_mass()))
    throw std::invalid_argument("epsilon must lie in (0, total mass)");
  if (gamma.tail_mass() > epsilon)
    throw std::domain_error("epsilon is below the unmaterialized tail mass of gamma");
  for (std::size_t m = 1; m <= gamma.atoms(); ++m)
    if (gamma.mass_above(m) <= epsilon) return m;
  return gamma.atoms();
}

/// Ordered jumps of a unit-rate alpha-stable subordinator, gamma_i =
/// Gamma_i^(-1/alpha) with Gamma_i the arrivals of a rate-1 Poisson
/// process. Arrival increments are the first draws of the stream, in order.
inline GammaMeasure sample_stable_gamma(double alpha, std::size_t count, const RngSpec& rng) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (count < 1) throw std::invalid_argument("count must be >= 1");
  Engine gen = make_engine(rng);
  std::vector<double> w(count);
  double arrival = 0.0;
  for (auto& x : w) {
    arrival += standard_exponential(gen);
    x = std::pow(arrival, -1.0 / alpha);
  }
  return GammaMeasure(std::move(w));
}

/// One mark of the Poisson clock: the j-th event of N^(site) at
/// `secondary_time`, during which the process sits at `site` for `duration`.
struct KClockEvent {
  State site;
  double secondary_time;
  double duration;
};

/// Merged Poisson clocks on sites 1..M in secondary time.
///
/// Each event draws, in order: the exponential gap (rate M), the uniform
/// site, and the rate-1 exponential scaled by gamma_site.
class KClock {
 public:
  KClock(const GammaMeasure& gamma, std::size_t levels) : gamma_(&gamma), levels_(levels) {
    if (levels < 1 || levels > gamma.atoms()) throw std::out_of_range("truncation level out of range");
  }

  KClockEvent next(Engine& gen) {
    secondary_time_ += standard_exponential(gen) / static_cast<double>(levels_);
    const State site = uniform_index(gen, levels_) + 1;
    const double duration = (*gamma_)[site] * standard_exponential(gen);
    return {site, secondary_time_, duration};
  }

 private:
  const GammaMeasure* gamma_;
  std::size_t levels_;
  double secondary_time_ = 0.0;
};

struct KProcessSample {
  Trajectory trajectory;
  std::size_t truncation_level;
  /// Entry convention; infinity means the path enters uniformly on {1..M}.
  State initial_state;
};

/// The K process with parameter gamma restricted to sites {1..M}.
///
/// From y0 finite the path first holds gamma_y0 * T_0; from y0 = infinity
/// that stage has zero length. Afterwards the process visits the sites of
/// the merged clock in order, each for its drawn duration, until the
/// accumulated time passes `horizon`.
inline KProcessSample sample_k_process_truncated(const GammaMeasure& gamma, std::size_t levels, State y0,
                                                 double horizon, const RngSpec& rng) {
  if (levels < 1) throw std::invalid_argument("truncation level must be >= 1");
  if (levels > gamma.atoms()) throw std::invalid_argument("truncation level exceeds materialized gamma atoms");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (!is_infinite(y0) && (y0 < 1 || y0 > levels)) throw std::invalid_argument("initial state exceeds truncation");
  if (!std::isfinite(gamma.total_mass())) throw std::invalid_argument("gamma must be summable");

  Engine gen = make_engine(rng);
  KClock clock(gamma, levels);
  KProcessSample out{{y0, {}, horizon, false}, levels, y0};
  Trajectory& traj = out.trajectory;

  double elapsed = 0.0;
  if (!is_infinite(y0)) {
    elapsed = gamma[y0] * standard_exponential(gen);
  } else {
    // zero time at infinity: the first clock event fixes the initial state
    const auto first = clock.next(gen);
    traj.initial_state = first.site;
    elapsed = first.duration;
  }
  if (levels == 1) return out;
  while (elapsed <= horizon) {
    const auto ev = clock.next(gen);
    append_jump(traj, elapsed, ev.site);
    elapsed += ev.duration;
  }
  return out;
}

/// States of the truncated K process at sorted query times, without storing
/// the path. Draws match sample_k_process_truncated for equal seeds.
inline std::vector<State> k_process_states_at(const GammaMeasure& gamma, std::size_t levels, State y0,
                                              std::span<const double> times, Engine& gen) {
  KClock clock(gamma, levels);
  std::vector<State> out(times.size());
  State current;
  double end;
  if (!is_infinite(y0)) {
    current = y0;
    end = gamma[y0] * standard_exponential(gen);
  } else {
    const auto first = clock.next(gen);
    current = first.site;
    end = first.duration;
  }
  std::size_t q = 0;
  if (levels == 1) {
    std::fill(out.begin(), out.end(), current);
    return out;
  }
  while (q < times.size()) {
    while (q < times.size() && times[q] < end) out[q++] = current;
    if (q == times.size()) break;
    const auto ev = clock.next(gen);
    current = ev.site;
    end += ev.duration;
  }
  return out;
}

}  // namespace trapk
