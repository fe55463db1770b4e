#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "trapk/trajectory.hpp"

namespace trapk {

inline constexpr double kUnobserved = std::numeric_limits<double>::infinity();

/// Nondecreasing piecewise-linear map of [0, inf) onto [0, inf).
///
/// Knots start at (0, 0), have strictly increasing t and nondecreasing
/// value; past the last knot the map continues with `final_slope` > 0.
class TimeDistortion {
 public:
  struct Knot {
    double t;
    double value;
    friend bool operator==(const Knot&, const Knot&) = default;
  };

  TimeDistortion() : knots_{{0.0, 0.0}}, final_slope_(1.0) {}

  TimeDistortion(std::vector<Knot> knots, double final_slope) : knots_(std::move(knots)), final_slope_(final_slope) {
    if (knots_.empty() || knots_.front().t != 0.0 || knots_.front().value != 0.0)
      throw std::invalid_argument("time distortion must start at (0, 0)");
    for (std::size_t i = 1; i < knots_.size(); ++i) {
      if (!(knots_[i].t > knots_[i - 1].t) || !std::isfinite(knots_[i].t))
        throw std::invalid_argument("time distortion knots need strictly increasing finite t");
      if (!(knots_[i].value >= knots_[i - 1].value) || !std::isfinite(knots_[i].value))
        throw std::invalid_argument("time distortion must be nondecreasing");
    }
    if (!(final_slope_ > 0.0) || !std::isfinite(final_slope_))
      throw std::invalid_argument("final slope must be positive so the map is onto");
  }

  static TimeDistortion identity() { return {}; }

  static TimeDistortion linear(double slope) {
    if (!(slope > 0.0)) throw std::invalid_argument("slope must be positive");
    return TimeDistortion({{0.0, 0.0}}, slope);
  }

  std::span<const Knot> knots() const { return knots_; }
  double final_slope() const { return final_slope_; }

  double operator()(double t) const {
    if (t <= 0.0) return 0.0;
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t, [](double v, const Knot& k) { return v < k.t; });
    const Knot& left = *std::prev(it);
    if (it == knots_.end()) return left.value + final_slope_ * (t - left.t);
    return left.value + (it->value - left.value) / (it->t - left.t) * (t - left.t);
  }

  /// inf{t >= 0 : lambda(t) >= y}.
  double preimage(double y) const {
    if (y <= 0.0) return 0.0;
    auto it = std::lower_bound(knots_.begin(), knots_.end(), y, [](const Knot& k, double v) { return k.value < v; });
    if (it == knots_.end()) {
      const Knot& last = knots_.back();
      return last.t + (y - last.value) / final_slope_;
    }
    if (it->value == y) {
      // leftmost knot attaining y
      return it->t;
    }
    const Knot& left = *std::prev(it);
    return left.t + (y - left.value) * (it->t - left.t) / (it->value - left.value);
  }

  /// Slopes of every linear piece, the final slope included.
  std::vector<double> slopes() const {
    std::vector<double> s;
    for (std::size_t i = 1; i < knots_.size(); ++i)
      s.push_back((knots_[i].value - knots_[i - 1].value) / (knots_[i].t - knots_[i - 1].t));
    s.push_back(final_slope_);
    return s;
  }

  /// The inverse map; requires every slope to be positive.
  TimeDistortion inverse() const {
    std::vector<Knot> inv;
    for (const auto& k : knots_) {
      if (!inv.empty() && !(k.value > inv.back().t))
        throw std::domain_error("time distortion with a flat piece has no inverse");
      inv.push_back({k.value, k.t});
    }
    return TimeDistortion(std::move(inv), 1.0 / final_slope_);
  }

  friend bool operator==(const TimeDistortion&, const TimeDistortion&) = default;

 private:
  std::vector<Knot> knots_;
  double final_slope_;
};

/// sup_{s<t} |log((lambda_t - lambda_s)/(t - s))|, i.e. the largest |log slope|
/// over the linear pieces; +inf if some piece is flat.
inline double phi(const TimeDistortion& lambda) {
  double out = 0.0;
  for (double s : lambda.slopes()) {
    if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
    out = std::max(out, std::abs(std::log(s)));
  }
  return out;
}

/// Successive entrance and exit times of a path in {1..K}.
///
/// `pairs[i]` holds the (i+1)-th entrance and the following exit, for every
/// entrance at or before T. `next_entry` is the first entrance after T
/// (this is tau_N with N = pairs.size() + 1). Times past the path's
/// horizon are not observed and are reported as kUnobserved (+inf).
struct EntranceExitTimes {
  struct Pair {
    double entry;
    double exit;
  };
  std::vector<Pair> pairs;
  double next_entry = kUnobserved;

  std::size_t N() const { return pairs.size() + 1; }
  /// tau_j for j = 1..N.
  double entry(std::size_t j) const { return j <= pairs.size() ? pairs[j - 1].entry : next_entry; }
  /// tau*_j for j = 1..N-1.
  double exit(std::size_t j) const { return pairs[j - 1].exit; }
};

namespace detail {

// Alternating entrance/exit times of {1..K} over the observed path:
// entry, exit, entry, exit, ...
inline std::vector<double> crossing_times(const Trajectory& traj, State K) {
  std::vector<double> times;
  if (traj.empty_time) return times;
  auto inside = [K](State s) { return !is_infinite(s) && s <= K; };
  auto visit = [&](State s, double at) {
    if ((times.size() % 2 == 0) == inside(s)) times.push_back(at);
  };
  visit(traj.initial_state, 0.0);
  for (const auto& j : traj.jumps) visit(j.state, j.time);
  return times;
}

inline EntranceExitTimes assemble(const std::vector<double>& times, std::size_t kept_entries) {
  EntranceExitTimes out;
  for (std::size_t j = 0; j < kept_entries; ++j) {
    const double entry = 2 * j < times.size() ? times[2 * j] : kUnobserved;
    const double exit = 2 * j + 1 < times.size() ? times[2 * j + 1] : kUnobserved;
    out.pairs.push_back({entry, exit});
  }
  out.next_entry = 2 * kept_entries < times.size() ? times[2 * kept_entries] : kUnobserved;
  return out;
}

}  // namespace detail

/// Entrance/exit times of {1..K} for every entrance at or before T, plus the
/// first entrance after T.
inline EntranceExitTimes entrance_exit_times(const Trajectory& traj, State K, double T) {
  if (!traj.empty_time && T > traj.horizon) throw std::invalid_argument("T exceeds the trajectory horizon");
  const auto times = detail::crossing_times(traj, K);
  std::size_t kept = 0;
  while (2 * kept < times.size() && times[2 * kept] <= T) ++kept;
  return detail::assemble(times, kept);
}

/// The first `n_entries` entrance/exit pairs regardless of T (so N = n_entries + 1).
/// Used to read the matched sequence of a second path with the N of the first.
inline EntranceExitTimes entrance_exit_times_first(const Trajectory& traj, State K, std::size_t n_entries) {
  const auto times = detail::crossing_times(traj, K);
  return detail::assemble(times, n_entries);
}

namespace detail {

// Knot list tau_0=0, tau_1, tau*_1, ..., tau_N paired with the xi's, cut at
// the first unobserved time on either side.
inline std::vector<std::pair<double, double>> matched_points(const EntranceExitTimes& source,
                                                             const EntranceExitTimes& target) {
  if (source.N() != target.N()) throw std::invalid_argument("entrance/exit sequences must share N");
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  const std::size_t n = source.N();
  for (std::size_t j = 1; j <= n; ++j) {
    const std::pair<double, double> in{source.entry(j), target.entry(j)};
    if (!std::isfinite(in.first) || !std::isfinite(in.second)) break;
    pts.push_back(in);
    if (j == n) break;
    const std::pair<double, double> out{source.exit(j), target.exit(j)};
    if (!std::isfinite(out.first) || !std::isfinite(out.second)) break;
    pts.push_back(out);
  }
  return pts;
}

// log of a ratio of increments with 0/0 read as 1
inline double log_ratio(double num, double den) {
  if (num == 0.0 && den == 0.0) return 0.0;
  return std::log(num / den);
}

}  // namespace detail

/// The piecewise-linear distortion carrying the source times (tau) onto the
/// target times (xi): linear between matched entrance/exit times, slope 1
/// after tau_N. Matching stops at the first unobserved time on either side,
/// from where the map continues with slope 1. Zero-length source pieces
/// matched with zero-length target pieces (0/0) are dropped.
inline TimeDistortion build_time_distortion(const EntranceExitTimes& source, const EntranceExitTimes& target) {
  const auto pts = detail::matched_points(source, target);
  std::vector<TimeDistortion::Knot> knots{{0.0, 0.0}};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const auto [t, v] = pts[i];
    if (t == knots.back().t) {
      if (v != knots.back().value)
        throw std::domain_error("matched times give a discontinuous distortion (zero source length, positive target length)");
      continue;
    }
    knots.push_back({t, v});
  }
  return TimeDistortion(std::move(knots), 1.0);
}

/// max_j |log((xi_j - xi*_{j-1})/(tau_j - tau*_{j-1}))| v max_j |log((xi*_j - xi_j)/(tau*_j - tau_j))|
/// over the matched (observed) times, with 0/0 read as 1.
inline double phi_bound_from_times(const EntranceExitTimes& source, const EntranceExitTimes& target) {
  const auto pts = detail::matched_points(source, target);
  double out = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    out = std::max(out, std::abs(detail::log_ratio(pts[i].second - pts[i - 1].second, pts[i].first - pts[i - 1].first)));
  return out;
}

/// Path g with g(lambda(t)) = f(t): jumps moved to lambda(t_j), horizon lambda(H).
/// Requires lambda to be strictly increasing.
inline Trajectory time_change(const Trajectory& f, const TimeDistortion& lambda) {
  for (double s : lambda.slopes())
    if (!(s > 0.0)) throw std::domain_error("time change needs a strictly increasing distortion");
  Trajectory g{f.initial_state, {}, lambda(f.horizon), f.empty_time};
  for (const auto& j : f.jumps) g.jumps.push_back({lambda(j.time), j.state});
  return g;
}

namespace detail {

// Value of 1/path on pieces: piece k covers [start[k], start[k+1]).
struct InversePath {
  std::vector<double> start;
  std::vector<double> value;

  explicit InversePath(const Trajectory& p) {
    start.push_back(0.0);
    value.push_back(inverse_state(p.initial_state));
    for (const auto& j : p.jumps) {
      start.push_back(j.time);
      value.push_back(inverse_state(j.state));
    }
  }
  std::size_t piece(double x) const {
    return static_cast<std::size_t>(std::upper_bound(start.begin(), start.end(), x) - start.begin()) - 1;
  }
  double at(double x) const { return value[piece(std::max(x, 0.0))]; }
  /// sup over y in [lo, hi] of |value(y) - c|
  double sup_distance(double lo, double hi, double c) const {
    const std::size_t first = piece(std::max(lo, 0.0));
    double out = 0.0;
    for (std::size_t k = first; k < start.size(); ++k) {
      if (k > first && start[k] > hi) break;
      out = std::max(out, std::abs(value[k] - c));
    }
    return out;
  }
};

}  // namespace detail

/// sup_t |1/f(t ^ u) - 1/g(lambda(t) ^ u)| for one truncation level u.
/// Paths are held at their last state beyond their horizons.
class RhoEvaluator {
 public:
  /// Relative gap below which two jump times count as simultaneous.
  static constexpr double kCoincidence = 1e-12;

  RhoEvaluator(const Trajectory& f, const Trajectory& g, const TimeDistortion& lambda)
      : F_(f), G_(g), lambda_(lambda) {
    // Pieces of H(t) = F(t) - G(lambda(t)) on the curve part. Piece starts
    // closer than kCoincidence (relative) are merged: lambda(preimage(y))
    // can round to either side of y, and a time-changed jump must not open
    // a spurious window of rounding width.
    struct Start {
      double t;
      std::size_t f_piece, g_piece;
      bool operator<(const Start& o) const { return t < o.t; }
    };
    std::vector<Start> starts{{0.0, 0, 0}};
    for (std::size_t k = 1; k < F_.start.size(); ++k) starts.push_back({F_.start[k], k, 0});
    for (std::size_t k = 1; k < G_.start.size(); ++k) starts.push_back({lambda_.preimage(G_.start[k]), 0, k});
    std::sort(starts.begin(), starts.end());
    double running = 0.0;
    for (std::size_t i = 0; i < starts.size();) {
      const double s = starts[i].t;
      std::size_t fp = F_.piece(s), gp = G_.piece(lambda_(s));
      for (; i < starts.size() && starts[i].t - s <= kCoincidence * std::max(1.0, s); ++i) {
        fp = std::max(fp, starts[i].f_piece);
        gp = std::max(gp, starts[i].g_piece);
      }
      running = std::max(running, std::abs(F_.value[fp] - G_.value[gp]));
      h_start_.push_back(s);
      h_prefix_max_.push_back(running);
    }
  }

  double operator()(double u) const {
    const double back = lambda_.preimage(u);  // first t with lambda(t) >= u
    const double curve_end = std::min(u, back);
    // curve part: t in [0, curve_end]
    const auto k = static_cast<std::size_t>(std::upper_bound(h_start_.begin(), h_start_.end(), curve_end) - h_start_.begin());
    double out = h_prefix_max_[k - 1];
    if (back < u) {
      // lambda reaches u first: points (t, u) for t in [back, u]
      out = std::max(out, F_.sup_distance(back, u, G_.at(u)));
    } else {
      // time reaches u first: points (u, y) for y in [lambda(u), u]
      out = std::max(out, G_.sup_distance(lambda_(u), u, F_.at(u)));
    }
    return out;
  }

  /// Every u at which the value can change.
  std::vector<double> breakpoints() const {
    std::vector<double> b{0.0};
    for (std::size_t k = 1; k < F_.start.size(); ++k) {
      b.push_back(F_.start[k]);
      b.push_back(lambda_(F_.start[k]));
    }
    for (std::size_t k = 1; k < G_.start.size(); ++k) {
      b.push_back(G_.start[k]);
      b.push_back(lambda_.preimage(G_.start[k]));
    }
    for (const auto& kn : lambda_.knots()) {
      b.push_back(kn.t);
      b.push_back(kn.value);
    }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
  }

 private:
  detail::InversePath F_, G_;
  const TimeDistortion& lambda_;
  std::vector<double> h_start_;
  std::vector<double> h_prefix_max_;
};

/// integral_0^inf e^-u sup_t |1/f(t ^ u) - 1/g(lambda(t) ^ u)| du, evaluated
/// exactly on the piecewise-constant structure in u. Paths are held at
/// their last state beyond their horizons.
inline double rho_given_lambda(const Trajectory& f, const Trajectory& g, const TimeDistortion& lambda) {
  if (f.empty_time || g.empty_time) throw std::invalid_argument("paths must have positive observed time");
  RhoEvaluator rho(f, g, lambda);
  const auto b = rho.breakpoints();
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < b.size(); ++i) {
    const double mid = 0.5 * (b[i] + b[i + 1]);
    total += rho(mid) * (std::exp(-b[i]) - std::exp(-b[i + 1]));
  }
  total += rho(b.back() + 1.0) * std::exp(-b.back());
  return total;
}

/// Validation mode: midpoint rule with `quad_points` nodes on [0, U] plus the
/// exact tail beyond U, where U is the larger of the two horizons.
inline double rho_given_lambda_quadrature(const Trajectory& f, const Trajectory& g, const TimeDistortion& lambda,
                                          std::size_t quad_points) {
  if (quad_points < 1) throw std::invalid_argument("need at least one quadrature point");
  RhoEvaluator rho(f, g, lambda);
  const auto b = rho.breakpoints();
  const double U = std::max({f.horizon, g.horizon, b.back()});
  const double h = U / static_cast<double>(quad_points);
  double total = 0.0;
  for (std::size_t i = 0; i < quad_points; ++i) {
    const double u = (static_cast<double>(i) + 0.5) * h;
    total += rho(u) * std::exp(-u) * h;
  }
  return total + rho(U + 1.0) * std::exp(-U);
}

struct RhoBound {
  double value = std::numeric_limits<double>::infinity();
  std::size_t best_candidate = 0;
  double phi = 0.0;
  double integral = 0.0;
};

/// min over the candidates of phi(lambda) v integral_0^inf e^-u rho(f, g, lambda, u) du.
///
/// This is an upper bound on the Skorohod distance, which takes the
/// infimum over all time changes; it is not the distance itself.
inline RhoBound rho_upper_bound(const Trajectory& f, const Trajectory& g, std::span<const TimeDistortion> candidates) {
  if (candidates.empty()) throw std::invalid_argument("need at least one candidate time change");
  RhoBound best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double p = phi(candidates[i]);
    if (p >= best.value) continue;
    const double integral = rho_given_lambda(f, g, candidates[i]);
    const double v = std::max(p, integral);
    if (v < best.value) best = {v, i, p, integral};
  }
  return best;
}

}  // namespace trapk
