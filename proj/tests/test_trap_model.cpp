#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <map>
#include <sstream>

#include "trapk/stats.hpp"
#include "trapk/trap_model.hpp"

using namespace trapk;

namespace {

std::vector<VertexId> vertex_order(const TrapModelSpec& spec) {
  return {spec.vertex_of_rank_map().begin(), spec.vertex_of_rank_map().end()};
}

std::vector<double> means_of(const TrapModelSpec& spec) { return {spec.means().begin(), spec.means().end()}; }

Trajectory random_trajectory(Engine& gen, std::size_t jumps, State max_state) {
  Trajectory t{uniform_index(gen, max_state) + 1, {}, 0.0, false};
  double clock = 0.0;
  for (std::size_t i = 0; i < jumps; ++i) {
    clock += 0.1 + uniform_open(gen);
    State s = uniform_index(gen, max_state + 1) + 1;  // max_state + 1 stands for infinity
    if (s == max_state + 1) s = kInfinity;
    append_jump(t, clock, s);
  }
  t.horizon = clock + 0.5;
  return t;
}

}  // namespace

TEST(RankMap, TwoVertexSort) {
  const std::vector<double> g{2, 5};
  auto spec = build_hypercube_model(g);
  EXPECT_EQ(spec.dimension(), 1u);
  EXPECT_EQ(means_of(spec), (std::vector<double>{5, 2}));
  EXPECT_EQ(vertex_order(spec), (std::vector<VertexId>{1, 0}));
}

TEST(RankMap, TiesBrokenByVertexIndex) {
  const std::vector<double> g{3, 3, 3, 3};
  auto spec = build_hypercube_model(g);
  EXPECT_EQ(means_of(spec), (std::vector<double>{3, 3, 3, 3}));
  EXPECT_EQ(vertex_order(spec), (std::vector<VertexId>{0, 1, 2, 3}));
}

TEST(RankMap, FourVertexSort) {
  const std::vector<double> g{1, 4, 2, 8};
  auto spec = build_hypercube_model(g);
  EXPECT_EQ(spec.dimension(), 2u);
  EXPECT_EQ(means_of(spec), (std::vector<double>{8, 4, 2, 1}));
  EXPECT_EQ(vertex_order(spec), (std::vector<VertexId>{3, 1, 2, 0}));
}

TEST(RankMap, MapsAreMutuallyInverse) {
  Engine gen = make_engine({11, 0, 0});
  std::vector<double> g(256);
  for (auto& x : g) x = uniform_open(gen);
  auto spec = build_hypercube_model(g);
  for (Rank r = 1; r <= spec.size(); ++r) EXPECT_EQ(spec.rank_of_vertex(spec.vertex_of_rank(r)), r);
  for (Rank r = 1; r <= spec.size(); ++r) EXPECT_EQ(spec.mean(r), g[spec.vertex_of_rank(r)]);
}

TEST(RankMap, RejectsBadInput) {
  EXPECT_THROW(build_complete_model(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(build_complete_model(std::vector<double>{1.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(build_complete_model(std::vector<double>{1.0, -2.0}), std::invalid_argument);
  EXPECT_THROW(build_hypercube_model(std::vector<double>{1.0, 2.0, 3.0}), std::invalid_argument);
  EXPECT_THROW(TrapModelSpec(CompleteGraph{2}, {1.0, 2.0}, {0, 1}), std::invalid_argument);  // increasing
  EXPECT_THROW(TrapModelSpec(CompleteGraph{2}, {2.0, 1.0}, {0, 0}), std::invalid_argument);  // not a permutation
}

TEST(Simulate, VanishingHorizonHasNoJumps) {
  auto spec = build_hypercube_model(std::vector<double>{1, 2, 3, 4});
  for (std::uint64_t i = 0; i < 100; ++i) {
    auto traj = simulate_trap_trajectory(spec, 2, 1e-12, {1, i, 0});
    EXPECT_EQ(traj.initial_state, 2u);
    EXPECT_TRUE(traj.jumps.empty());
  }
}

TEST(Simulate, SingleStateCompleteGraphIsConstant) {
  auto spec = build_complete_model(std::vector<double>{2.5});
  for (double h : {0.1, 10.0, 1e9}) {
    auto traj = simulate_trap_trajectory(spec, 1, h, {3, 0, 0});
    EXPECT_EQ(traj.initial_state, 1u);
    EXPECT_TRUE(traj.jumps.empty());
  }
}

TEST(Simulate, RejectsStartOutOfRange) {
  auto spec = build_complete_model(std::vector<double>{1, 1, 1});
  EXPECT_THROW(simulate_trap_trajectory(spec, 0, 1.0, {}), std::out_of_range);
  EXPECT_THROW(simulate_trap_trajectory(spec, 4, 1.0, {}), std::out_of_range);
}

TEST(Simulate, FirstHoldingTimeHasMeanOfStartRank) {
  // Hypercube(1), means (a, b) with a = 3: first holding time is Exp(mean a).
  auto spec = build_hypercube_model(std::vector<double>{1.0, 3.0});
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    auto traj = simulate_trap_trajectory(spec, 1, 200.0, {5, static_cast<std::uint64_t>(i), 0});
    ASSERT_FALSE(traj.jumps.empty());
    const double h = traj.jumps.front().time;
    sum += h;
    sum2 += h * h;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  EXPECT_NEAR(mean, 3.0, 3 * se);
}

TEST(Simulate, Deterministic) {
  Engine gen = make_engine({2, 0, 0});
  std::vector<double> g(64);
  for (auto& x : g) x = 1.0 / uniform_open(gen);
  auto spec = build_hypercube_model(g);
  auto a = simulate_trap_trajectory(spec, 5, 50.0, {9, 4, 0});
  auto b = simulate_trap_trajectory(spec, 5, 50.0, {9, 4, 0});
  auto c = simulate_trap_trajectory(spec, 5, 50.0, {9, 5, 0});
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  a.validate();
}

TEST(Simulate, StatesAtMatchTrajectory) {
  Engine gen = make_engine({21, 0, 0});
  std::vector<double> g(32);
  for (auto& x : g) x = uniform_open(gen);
  auto spec = build_hypercube_model(g);
  const std::vector<double> times{0.0, 0.3, 1.0, 2.5, 7.0, 7.0, 19.9};
  for (std::uint64_t i = 0; i < 50; ++i) {
    auto traj = simulate_trap_trajectory(spec, 3, 20.0, {4, i, 0});
    Engine e = make_engine({4, i, 0});
    auto states = trap_states_at(spec, 3, times, e);
    for (std::size_t k = 0; k < times.size(); ++k) EXPECT_EQ(states[k], traj.value_at(times[k]));
  }
}

TEST(Simulate, HoldingTimesAreExponentialPerRank) {
  // Hypercube moves never return in one step, so every sojourn in the path is one holding time.
  auto spec = build_hypercube_model(std::vector<double>{8, 1, 2, 7, 3, 6, 4, 5});
  auto traj = simulate_trap_trajectory(spec, 1, 4e4, {8, 0, 0});
  std::map<State, std::vector<double>> sojourns;
  double begin = 0.0;
  State cur = traj.initial_state;
  for (const auto& j : traj.jumps) {
    sojourns[cur].push_back(j.time - begin);
    begin = j.time;
    cur = j.state;
  }
  for (Rank r = 1; r <= spec.size(); ++r) {
    const auto& xs = sojourns[r];
    ASSERT_GE(xs.size(), 500u) << "rank " << r;
    const double m = spec.mean(r);
    auto ks = ks_one_sample(xs, [m](double x) { return 1.0 - std::exp(-x / m); });
    EXPECT_GT(ks.pvalue, 0.01) << "rank " << r;
  }
}

TEST(Simulate, HypercubeDirectionsAreUniform) {
  std::vector<double> g(1 << 6, 1.0);
  auto spec = build_hypercube_model(g);
  TrapWalker walker(spec, 1);
  Engine gen = make_engine({17, 0, 0});
  const int steps = 120000;
  std::vector<int> counts(6, 0);
  for (int i = 0; i < steps; ++i) {
    const VertexId before = spec.vertex_of_rank(walker.rank());
    walker.step(gen);
    const VertexId after = spec.vertex_of_rank(walker.rank());
    ASSERT_EQ(std::popcount(before ^ after), 1);
    ++counts[walker.last_direction()];
    ASSERT_EQ(before ^ after, VertexId{1} << walker.last_direction());
  }
  const double p = 1.0 / 6.0;
  const double se = std::sqrt(p * (1 - p) / steps);
  for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / steps, p, 3 * se);
}

TEST(Simulate, VertexAndRankCoordinatesAgree) {
  Engine gen = make_engine({23, 0, 0});
  std::vector<double> g(16);
  for (auto& x : g) x = 0.2 + uniform_open(gen);
  auto spec = build_hypercube_model(g);
  const VertexId start_vertex = 6;
  const Rank start_rank = spec.rank_of_vertex(start_vertex);
  auto to_rank = [&](State v) { return State{spec.rank_of_vertex(static_cast<VertexId>(v - 1))}; };

  // Same stream: the paths coincide exactly after relabeling.
  for (std::uint64_t i = 0; i < 20; ++i) {
    auto by_vertex = simulate_vertex_trajectory(spec, start_vertex, 30.0, {31, i, 0});
    auto by_rank = simulate_trap_trajectory(spec, start_rank, 30.0, {31, i, 0});
    EXPECT_EQ(relabel(by_vertex, to_rank), by_rank);
  }

  // Independent streams: same law of the state at t = 2.
  EmpiricalDistribution a(spec.size()), b(spec.size());
  for (std::uint64_t i = 0; i < 20000; ++i) {
    a.add(to_rank(simulate_vertex_trajectory(spec, start_vertex, 2.0, {41, i, 0}).value_at(2.0)));
    b.add(simulate_trap_trajectory(spec, start_rank, 2.0, {43, i, 0}).value_at(2.0));
  }
  EXPECT_GT(compare_distributions(a, b).pvalue, 0.01);
}

TEST(Restrict, InsideSubsetIsUnchanged) {
  Trajectory t{1, {{0.5, 2}, {1.5, 1}, {2.0, 3}}, 3.0, false};
  EXPECT_EQ(restrict_trajectory(t, 3), t);
  EXPECT_EQ(restrict_trajectory(t, 100), t);
}

TEST(Restrict, ExcisesExcursion) {
  Trajectory t{1, {{1.0, 5}, {3.0, 2}}, 4.0, false};
  Trajectory expected{1, {{1.0, 2}}, 2.0, false};
  EXPECT_EQ(restrict_trajectory(t, 2), expected);
}

TEST(Restrict, MergesAcrossExcisedExcursion) {
  Trajectory t{1, {{1.0, kInfinity}, {2.0, 1}, {2.5, 2}}, 3.0, false};
  Trajectory expected{1, {{1.5, 2}}, 2.0, false};
  EXPECT_EQ(restrict_trajectory(t, 2), expected);
}

TEST(Restrict, StartsAtFirstVisit) {
  Trajectory t{4, {{1.0, 2}, {2.0, 4}, {2.5, 1}}, 3.0, false};
  Trajectory expected{2, {{1.0, 1}}, 1.5, false};
  EXPECT_EQ(restrict_trajectory(t, 2), expected);
}

TEST(Restrict, NeverEnteringIsFlagged) {
  Trajectory t{4, {{1.0, 7}}, 3.0, false};
  auto r = restrict_trajectory(t, 2);
  EXPECT_TRUE(r.empty_time);
  EXPECT_TRUE(r.jumps.empty());
  EXPECT_EQ(r.horizon, 0.0);
  EXPECT_EQ(restrict_trajectory(r, 2), r);
}

TEST(Restrict, IsIdempotent) {
  Engine gen = make_engine({51, 0, 0});
  for (int trial = 0; trial < 500; ++trial) {
    auto t = random_trajectory(gen, 1 + uniform_index(gen, 30), 8);
    t.validate();
    const State subset = uniform_index(gen, 9) + 1;
    auto once = restrict_trajectory(t, subset);
    once.validate();
    EXPECT_EQ(restrict_trajectory(once, subset), once);
    if (!once.empty_time) EXPECT_LE(once.max_state(), subset);
  }
}

TEST(Entrance, SingleTargetIsCertain) {
  std::vector<double> g(1 << 5, 1.0);
  auto spec = build_hypercube_model(g);
  const std::vector<Rank> target{7};
  auto h = entrance_hitting_distribution(spec, target, 1, 200, {1, 0, 0}, 1);
  EXPECT_EQ(h.counts[0], 200u);
  EXPECT_EQ(h.frequencies()[0], 1.0);
}

TEST(Entrance, RejectsBadArguments) {
  auto spec = build_complete_model(std::vector<double>{3, 2, 1});
  const std::vector<Rank> target{1, 2};
  EXPECT_THROW(entrance_hitting_distribution(spec, target, 2, 10, {}), std::invalid_argument);
  EXPECT_THROW(entrance_hitting_distribution(spec, std::vector<Rank>{}, 3, 10, {}), std::invalid_argument);
  EXPECT_THROW(entrance_hitting_distribution(spec, target, 3, 0, {}), std::invalid_argument);
}

TEST(Entrance, CompleteGraphIsExactlyUniform) {
  // Brute-force oracle: propagate the jump-chain law step by step on
  // Complete(4) until the mass not yet absorbed is negligible.
  const std::size_t M = 4;
  const std::vector<Rank> target{1, 3};
  const Rank start = 2;
  std::vector<double> alive(M + 1, 0.0), absorbed(M + 1, 0.0);
  alive[start] = 1.0;
  for (int step = 0; step < 200; ++step) {
    std::vector<double> next(M + 1, 0.0);
    for (Rank from = 1; from <= M; ++from)
      for (Rank to = 1; to <= M; ++to) {
        const double p = alive[from] / M;
        if (to == 1 || to == 3)
          absorbed[to] += p;
        else
          next[to] += p;
      }
    alive = next;
  }
  EXPECT_NEAR(absorbed[1], 0.5, 1e-12);
  EXPECT_NEAR(absorbed[3], 0.5, 1e-12);

  auto spec = build_complete_model(std::vector<double>{4, 3, 2, 1});
  auto h = entrance_hitting_distribution(spec, target, start, 40000, {3, 0, 0}, 2);
  auto test = chi_square_gof(h.counts, std::vector<double>{absorbed[1], absorbed[3]});
  EXPECT_GT(test.pvalue, 0.01);
}

TEST(Entrance, WorkerCountDoesNotChangeResult) {
  std::vector<double> g(1 << 8, 1.0);
  auto spec = build_hypercube_model(g);
  const std::vector<Rank> target{1, 2, 3};
  auto a = entrance_hitting_distribution_uniform_start(spec, target, 3000, {5, 0, 0}, 1);
  auto b = entrance_hitting_distribution_uniform_start(spec, target, 3000, {5, 0, 0}, 4);
  EXPECT_EQ(a.counts, b.counts);
}

TEST(TrajectoryCsv, WritesHeaderOriginAndInfinity) {
  Trajectory t{3, {{0.5, kInfinity}, {1.25, 1}}, 2.0, false};
  std::ostringstream os;
  write_trajectory_csv(os, t);
  EXPECT_EQ(os.str(), "t,state\n0,3\n0.5,inf\n1.25,1\n");
}

TEST(TrajectoryInvariants, AppendJumpErasesZeroLengthSojourn) {
  Trajectory t{1, {}, 5.0, false};
  append_jump(t, 1.0, 2);
  append_jump(t, 1.0, 3);  // sojourn at 2 had zero length
  EXPECT_EQ(t.jumps, (std::vector<Jump>{{1.0, 3}}));
  append_jump(t, 1.0, 1);  // back to the state before: the jump disappears
  EXPECT_TRUE(t.jumps.empty());
  append_jump(t, 2.0, 1);
  EXPECT_TRUE(t.jumps.empty());
  t.validate();
}
