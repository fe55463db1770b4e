#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "trapk/parallel.hpp"
#include "trapk/rng.hpp"
#include "trapk/trajectory.hpp"

#ifndef TRAPK_MAX_HYPERCUBE_DIMENSION
#define TRAPK_MAX_HYPERCUBE_DIMENSION 20
#endif

namespace trapk {

inline constexpr unsigned kMaxHypercubeDimension = TRAPK_MAX_HYPERCUBE_DIMENSION;

/// Rank coordinate: 1 is the deepest trap.
using Rank = std::uint32_t;
/// Vertex index; on the hypercube bit i is coordinate i.
using VertexId = std::uint32_t;

struct Hypercube {
  unsigned dimension;
};
struct CompleteGraph {
  std::uint64_t size;
};
using Graph = std::variant<Hypercube, CompleteGraph>;

inline std::uint64_t graph_size(const Graph& g) {
  return std::visit(
      [](const auto& k) -> std::uint64_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(k)>, Hypercube>)
          return std::uint64_t{1} << k.dimension;
        else
          return k.size;
      },
      g);
}

/// Symmetric trap model in rank coordinates.
///
/// `means` is indexed by rank (non-increasing); the two rank maps are
/// mutually inverse permutations between ranks 1..N and vertices 0..N-1.
/// Immutable after construction, so one spec can be shared by any number
/// of concurrent replicas.
class TrapModelSpec {
 public:
  TrapModelSpec(Graph graph, std::vector<double> means, std::vector<VertexId> vertex_of_rank)
      : graph_(graph), means_(std::move(means)), vertex_of_rank_(std::move(vertex_of_rank)) {
    if (const auto* h = std::get_if<Hypercube>(&graph_)) {
      if (h->dimension < 1 || h->dimension > kMaxHypercubeDimension)
        throw std::invalid_argument("hypercube dimension must be in [1, " +
                                    std::to_string(kMaxHypercubeDimension) + "]");
    } else if (std::get<CompleteGraph>(graph_).size < 1) {
      throw std::invalid_argument("complete graph needs at least one vertex");
    }
    const std::uint64_t n = graph_size(graph_);
    if (means_.size() != n || vertex_of_rank_.size() != n)
      throw std::invalid_argument("means and rank map must have one entry per vertex");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(means_[i] > 0.0) || !std::isfinite(means_[i]))
        throw std::invalid_argument("mean waiting times must be positive and finite");
      if (i > 0 && means_[i] > means_[i - 1])
        throw std::invalid_argument("mean waiting times must be non-increasing in rank");
    }
    rank_of_vertex_.assign(n, 0);
    for (std::size_t r = 0; r < n; ++r) {
      const VertexId v = vertex_of_rank_[r];
      if (v >= n || rank_of_vertex_[v] != 0)
        throw std::invalid_argument("vertex_of_rank must be a permutation");
      rank_of_vertex_[v] = static_cast<Rank>(r + 1);
    }
  }

  const Graph& graph() const { return graph_; }
  bool is_hypercube() const { return std::holds_alternative<Hypercube>(graph_); }
  unsigned dimension() const { return is_hypercube() ? std::get<Hypercube>(graph_).dimension : 0; }
  std::size_t size() const { return means_.size(); }

  double mean(Rank r) const { return means_[r - 1]; }
  std::span<const double> means() const { return means_; }
  VertexId vertex_of_rank(Rank r) const { return vertex_of_rank_[r - 1]; }
  Rank rank_of_vertex(VertexId v) const { return rank_of_vertex_[v]; }
  std::span<const VertexId> vertex_of_rank_map() const { return vertex_of_rank_; }
  std::span<const Rank> rank_of_vertex_map() const { return rank_of_vertex_; }

  /// Same graph and rank maps with every mean multiplied by `factor`.
  TrapModelSpec scaled(double factor) const {
    std::vector<double> m(means_);
    for (double& x : m) x *= factor;
    return TrapModelSpec(graph_, std::move(m), vertex_of_rank_);
  }

 private:
  Graph graph_;
  std::vector<double> means_;
  std::vector<VertexId> vertex_of_rank_;
  std::vector<Rank> rank_of_vertex_;
};

/// Ranks the vertices by decreasing weight; ties go to the smaller vertex index.
inline TrapModelSpec build_rank_map(std::span<const double> gamma_by_vertex, const Graph& graph) {
  if (gamma_by_vertex.empty()) throw std::invalid_argument("weights must be non-empty");
  for (double g : gamma_by_vertex)
    if (!(g > 0.0) || !std::isfinite(g)) throw std::invalid_argument("weights must be positive and finite");
  std::vector<VertexId> order(gamma_by_vertex.size());
  std::iota(order.begin(), order.end(), VertexId{0});
  std::stable_sort(order.begin(), order.end(), [&](VertexId a, VertexId b) {
    return gamma_by_vertex[a] > gamma_by_vertex[b];
  });
  std::vector<double> means(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) means[r] = gamma_by_vertex[order[r]];
  return TrapModelSpec(graph, std::move(means), std::move(order));
}

/// Hypercube model; the dimension is inferred from the weight count (2^d).
inline TrapModelSpec build_hypercube_model(std::span<const double> gamma_by_vertex) {
  const std::size_t n = gamma_by_vertex.size();
  if (n < 2 || !std::has_single_bit(n))
    throw std::invalid_argument("hypercube weights need 2^d entries with d >= 1");
  return build_rank_map(gamma_by_vertex, Hypercube{static_cast<unsigned>(std::countr_zero(n))});
}

inline TrapModelSpec build_complete_model(std::span<const double> gamma_by_vertex) {
  return build_rank_map(gamma_by_vertex, CompleteGraph{gamma_by_vertex.size()});
}

/// Draws a uniformly random assignment of already-ordered means to vertices.
inline TrapModelSpec place_ranked_means(const Graph& graph, std::vector<double> means, Engine& gen) {
  std::vector<VertexId> perm(means.size());
  std::iota(perm.begin(), perm.end(), VertexId{0});
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(gen, i)]);
  return TrapModelSpec(graph, std::move(means), std::move(perm));
}

/// One step at a time through the trap model, in rank coordinates.
///
/// Every step consumes one exponential (the holding time) followed by one
/// uniform index (the move). On the hypercube the move flips one of the d
/// coordinates; on the complete graph the next rank is uniform over all
/// ranks, the current one included.
class TrapWalker {
 public:
  TrapWalker(const TrapModelSpec& spec, Rank start) : spec_(&spec), rank_(start) {
    if (start < 1 || start > spec.size()) throw std::out_of_range("start rank out of range");
  }

  Rank rank() const { return rank_; }
  unsigned last_direction() const { return last_direction_; }

  double holding_time(Engine& gen) const { return spec_->mean(rank_) * standard_exponential(gen); }

  Rank step(Engine& gen) {
    if (spec_->is_hypercube()) {
      last_direction_ = static_cast<unsigned>(uniform_index(gen, spec_->dimension()));
      const VertexId v = spec_->vertex_of_rank(rank_) ^ (VertexId{1} << last_direction_);
      rank_ = spec_->rank_of_vertex(v);
    } else {
      rank_ = static_cast<Rank>(uniform_index(gen, spec_->size()) + 1);
    }
    return rank_;
  }

 private:
  const TrapModelSpec* spec_;
  Rank rank_;
  unsigned last_direction_ = 0;
};

/// Samples the trap model path in rank coordinates on [0, horizon].
inline Trajectory simulate_trap_trajectory(const TrapModelSpec& spec, Rank start_rank, double horizon,
                                           const RngSpec& rng) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  TrapWalker walker(spec, start_rank);
  Trajectory traj{start_rank, {}, horizon, false};
  if (spec.size() == 1) return traj;
  Engine gen = make_engine(rng);
  double t = 0.0;
  for (;;) {
    t += walker.holding_time(gen);
    if (t > horizon) break;
    append_jump(traj, t, walker.step(gen));
  }
  return traj;
}

/// Samples the same dynamics in vertex coordinates: states are vertex + 1.
///
/// Consumes random draws in the same order as the rank-coordinate
/// simulator, so equal seeds give paths related exactly by the rank map.
inline Trajectory simulate_vertex_trajectory(const TrapModelSpec& spec, VertexId start_vertex,
                                             double horizon, const RngSpec& rng) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (start_vertex >= spec.size()) throw std::out_of_range("start vertex out of range");
  Trajectory traj{State{start_vertex} + 1, {}, horizon, false};
  if (spec.size() == 1) return traj;
  Engine gen = make_engine(rng);
  VertexId v = start_vertex;
  double t = 0.0;
  for (;;) {
    t += spec.mean(spec.rank_of_vertex(v)) * standard_exponential(gen);
    if (t > horizon) break;
    if (spec.is_hypercube())
      v ^= VertexId{1} << uniform_index(gen, spec.dimension());
    else
      v = static_cast<VertexId>(uniform_index(gen, spec.size()));
    append_jump(traj, t, State{v} + 1);
  }
  return traj;
}

/// Relabels every state through `map` and merges repeated states.
template <class Map>
Trajectory relabel(const Trajectory& traj, Map&& map) {
  Trajectory out{map(traj.initial_state), {}, traj.horizon, traj.empty_time};
  for (const auto& j : traj.jumps) append_jump(out, j.time, map(j.state));
  return out;
}

/// States at each of the (sorted, non-negative) query times, without
/// storing the path. Draws match simulate_trap_trajectory for equal seeds.
inline std::vector<State> trap_states_at(const TrapModelSpec& spec, Rank start_rank,
                                         std::span<const double> times, Engine& gen) {
  std::vector<State> out(times.size());
  TrapWalker walker(spec, start_rank);
  std::size_t q = 0;
  if (spec.size() == 1) {
    std::fill(out.begin(), out.end(), State{1});
    return out;
  }
  double t = 0.0;
  while (q < times.size()) {
    const double next = t + walker.holding_time(gen);
    while (q < times.size() && times[q] < next) out[q++] = walker.rank();
    if (q == times.size()) break;
    t = next;
    walker.step(gen);
  }
  return out;
}

/// Observes the path only while it is in {1, ..., subset_max}: the clock
/// stops outside the subset and the kept pieces are concatenated.
inline Trajectory restrict_trajectory(const Trajectory& traj, State subset_max) {
  Trajectory out;
  out.horizon = 0.0;
  if (traj.empty_time) {
    out.initial_state = kInfinity;
    out.empty_time = true;
    return out;
  }
  bool started = false;
  double removed = 0.0;
  auto keep = [&](State s, double begin, double end) {
    if (!(end > begin)) return;
    if (is_infinite(s) || s > subset_max) {
      removed += end - begin;
      return;
    }
    if (!started) {
      out.initial_state = s;
      started = true;
    } else {
      append_jump(out, begin - removed, s);
    }
  };
  double begin = 0.0;
  State current = traj.initial_state;
  for (const auto& j : traj.jumps) {
    keep(current, begin, j.time);
    begin = j.time;
    current = j.state;
  }
  keep(current, begin, traj.horizon);
  if (!started) {
    out.initial_state = kInfinity;
    out.empty_time = true;
    return out;
  }
  out.horizon = traj.horizon - removed;
  return out;
}

/// Counts of the first target rank hit by the embedded chain.
struct HittingDistribution {
  std::vector<Rank> targets;
  std::vector<std::uint64_t> counts;
  std::uint64_t replicas = 0;

  std::vector<double> frequencies() const {
    std::vector<double> f(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
      f[i] = static_cast<double>(counts[i]) / static_cast<double>(replicas);
    return f;
  }
};

namespace detail {

/// Index into `targets` of the first target hit by the jump chain.
/// Holding times are never drawn.
inline std::size_t first_entrance(const TrapModelSpec& spec, std::span<const std::int32_t> slot_by_vertex,
                                  Rank start, Engine& gen) {
  if (spec.is_hypercube()) {
    const auto d = spec.dimension();
    VertexId v = spec.vertex_of_rank(start);
    for (;;) {
      v ^= VertexId{1} << uniform_index(gen, d);
      if (slot_by_vertex[v] >= 0) return static_cast<std::size_t>(slot_by_vertex[v]);
    }
  }
  const auto n = spec.size();
  for (;;) {
    const auto v = spec.vertex_of_rank(static_cast<Rank>(uniform_index(gen, n) + 1));
    if (slot_by_vertex[v] >= 0) return static_cast<std::size_t>(slot_by_vertex[v]);
  }
}

inline std::vector<std::int32_t> target_slots(const TrapModelSpec& spec, std::span<const Rank> targets) {
  if (targets.empty()) throw std::invalid_argument("target set must be non-empty");
  std::vector<std::int32_t> slot(spec.size(), -1);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Rank r = targets[i];
    if (r < 1 || r > spec.size()) throw std::out_of_range("target rank out of range");
    auto& s = slot[spec.vertex_of_rank(r)];
    if (s >= 0) throw std::invalid_argument("duplicate target rank");
    s = static_cast<std::int32_t>(i);
  }
  return slot;
}

inline HittingDistribution tally(std::span<const Rank> targets, const std::vector<std::uint32_t>& hits) {
  HittingDistribution out{{targets.begin(), targets.end()}, std::vector<std::uint64_t>(targets.size(), 0),
                          hits.size()};
  for (auto h : hits) ++out.counts[h];
  return out;
}

}  // namespace detail

/// Entrance law of the embedded chain into `targets` from a fixed start.
/// Replica i uses the stream rng.replica(i).
inline HittingDistribution entrance_hitting_distribution(const TrapModelSpec& spec,
                                                         std::span<const Rank> targets, Rank start_rank,
                                                         std::uint64_t replicas, const RngSpec& rng,
                                                         unsigned workers = default_worker_count()) {
  const auto slot = detail::target_slots(spec, targets);
  if (start_rank < 1 || start_rank > spec.size()) throw std::out_of_range("start rank out of range");
  if (slot[spec.vertex_of_rank(start_rank)] >= 0)
    throw std::invalid_argument("start rank lies inside the target set");
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  auto hits = run_replicas(replicas, workers, [&](std::uint64_t i) {
    Engine gen = make_engine(rng.replica(i));
    return static_cast<std::uint32_t>(detail::first_entrance(spec, slot, start_rank, gen));
  });
  return detail::tally(targets, hits);
}

/// Entrance law with the start drawn uniformly from the ranks outside `targets`.
inline HittingDistribution entrance_hitting_distribution_uniform_start(
    const TrapModelSpec& spec, std::span<const Rank> targets, std::uint64_t replicas, const RngSpec& rng,
    unsigned workers = default_worker_count()) {
  const auto slot = detail::target_slots(spec, targets);
  if (targets.size() >= spec.size()) throw std::invalid_argument("no ranks outside the target set");
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  auto hits = run_replicas(replicas, workers, [&](std::uint64_t i) {
    Engine gen = make_engine(rng.replica(i));
    Rank start;
    do {
      start = static_cast<Rank>(uniform_index(gen, spec.size()) + 1);
    } while (slot[spec.vertex_of_rank(start)] >= 0);
    return static_cast<std::uint32_t>(detail::first_entrance(spec, slot, start, gen));
  });
  return detail::tally(targets, hits);
}

}  // namespace trapk
