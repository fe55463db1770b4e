#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace trapk {

/// A point of N* = {1, 2, ...} extended by infinity.
using State = std::uint64_t;
inline constexpr State kInfinity = std::numeric_limits<State>::max();

inline bool is_infinite(State s) { return s == kInfinity; }

/// The 1/x embedding of N* into [0, 1], with 1/infinity = 0.
inline double inverse_state(State s) {
  return is_infinite(s) ? 0.0 : 1.0 / static_cast<double>(s);
}

struct Jump {
  double time;
  State state;
  friend bool operator==(const Jump&, const Jump&) = default;
};

/// Right-continuous step path on N* u {inf} over [0, horizon].
///
/// Stored as jump list: the path equals `initial_state` before the first
/// jump and the state of the last jump at or before t afterwards.
struct Trajectory {
  State initial_state = 1;
  std::vector<Jump> jumps;
  double horizon = 0.0;
  /// Set by restriction when the path never visited the kept subset.
  bool empty_time = false;

  State value_at(double t) const {
    auto it = std::upper_bound(jumps.begin(), jumps.end(), t,
                               [](double v, const Jump& j) { return v < j.time; });
    return it == jumps.begin() ? initial_state : std::prev(it)->state;
  }

  State max_state() const {
    State m = initial_state;
    for (const auto& j : jumps) m = std::max(m, j.state);
    return m;
  }

  /// Checks the structural invariants; throws std::logic_error on violation.
  void validate() const {
    if (empty_time) return;
    if (!(horizon > 0.0)) throw std::logic_error("trajectory horizon must be positive");
    double prev_t = 0.0;
    State prev_s = initial_state;
    for (const auto& j : jumps) {
      if (!(j.time > prev_t) || j.time > horizon)
        throw std::logic_error("trajectory jump times must be strictly increasing within horizon");
      if (j.state == prev_s) throw std::logic_error("trajectory has repeated consecutive state");
      prev_t = j.time;
      prev_s = j.state;
    }
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Appends a jump at `time` (not before the last jump), keeping the
/// invariants: a jump to the current state is dropped, and a sojourn of
/// zero length (the clock did not advance in floating point) is erased.
inline void append_jump(Trajectory& traj, double time, State state) {
  if (!traj.jumps.empty() && time <= traj.jumps.back().time) {
    traj.jumps.pop_back();
  } else if (traj.jumps.empty() && time <= 0.0) {
    traj.initial_state = state;
    return;
  }
  const State current = traj.jumps.empty() ? traj.initial_state : traj.jumps.back().state;
  if (state == current) return;
  traj.jumps.push_back({time, state});
}

inline std::string format_state(State s) {
  return is_infinite(s) ? std::string("inf") : std::to_string(s);
}

/// CSV with header `t,state`, a row at t=0, then one row per jump.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << "t,state\n";
  os << 0.0 << ',' << format_state(traj.initial_state) << '\n';
  for (const auto& j : traj.jumps) os << j.time << ',' << format_state(j.state) << '\n';
  os.precision(old_precision);
}

}  // namespace trapk
