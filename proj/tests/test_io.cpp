#include <gtest/gtest.h>

#include <sstream>

#include "trapk/io.hpp"
#include "trapk/parallel.hpp"

using namespace trapk;

TEST(Csv, FieldQuoting) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
}

TEST(Csv, AgingCurve) {
  AgingCurve c;
  c.theta_values = {0.5, 1.0};
  c.estimates = {{0.75, 0.01, 100, {}}, {0.5, 0.02, 100, {}}};
  c.theory = {0.7, 0.5};
  std::ostringstream os;
  write_aging_csv(os, c);
  EXPECT_EQ(os.str(),
            "theta,estimate,ci_half_width,n,theory_R\n"
            "0.5,0.75,0.01,100,0.69999999999999996\n"
            "1,0.5,0.02,100,0.5\n");
}

TEST(Gamma, JsonRoundTrip) {
  GammaMeasure g({4.0, 2.0, 0.1});
  auto back = gamma_from_json(gamma_to_json(g));
  EXPECT_EQ(std::vector<double>(back.weights().begin(), back.weights().end()),
            std::vector<double>(g.weights().begin(), g.weights().end()));
  EXPECT_THROW(gamma_from_json(json::parse("[1, 2]")), std::invalid_argument);
  EXPECT_THROW(gamma_from_json(json::parse("[1, \"x\"]")), std::invalid_argument);
  EXPECT_THROW(gamma_from_json(json::parse("{\"a\": 1}")), std::invalid_argument);
  EXPECT_THROW(gamma_from_json(json::parse("[]")), std::invalid_argument);
}

TEST(Environment, JsonExport) {
  auto env = sample_rem_like(0.5, 6, {3, 0, 1});
  auto j = environment_to_json(env, 4);
  EXPECT_EQ(j["kind"], "rem-like");
  EXPECT_EQ(j["d"], 6);
  EXPECT_EQ(j["alpha"], 0.5);
  EXPECT_EQ(j["c_d"], std::ldexp(1.0, -12));
  ASSERT_EQ(j["top_scaled_means"].size(), 4u);
  EXPECT_EQ(j["top_scaled_means"][0].get<double>(), env.scaled_means[0]);
  EXPECT_EQ(j["seed"]["master_seed"], 3);
  EXPECT_EQ(j["seed"]["stream"], 1);

  auto rem = sample_rem(2.0, 4, {});
  auto jr = environment_to_json(rem, 100);
  EXPECT_EQ(jr["kind"], "rem");
  EXPECT_EQ(jr["beta"], 2.0);
  EXPECT_EQ(jr["top_scaled_means"].size(), 16u);
}

TEST(Environment, BinaryMeansRoundTrip) {
  auto env = sample_rem_like(0.3, 8, {4, 0, 1});
  std::stringstream buf;
  write_means_binary(buf, env.scaled_means);
  EXPECT_EQ(buf.str().size(), 8u * 256u);
  EXPECT_EQ(read_means_binary(buf), env.scaled_means);
  std::ostringstream one;
  write_means_binary(one, std::vector<double>{1.0});
  EXPECT_EQ(one.str(), std::string("\x00\x00\x00\x00\x00\x00\xf0\x3f", 8));
}

TEST(Parallel, ResultsInIndexOrder) {
  for (unsigned workers : {1u, 2u, 5u}) {
    auto out = run_replicas(1000, workers, [](std::uint64_t i) { return i * i; });
    ASSERT_EQ(out.size(), 1000u);
    for (std::uint64_t i = 0; i < 1000; ++i) EXPECT_EQ(out[i], i * i);
  }
}

TEST(Parallel, ReportsFailingReplica) {
  try {
    run_replicas(500, 3, [](std::uint64_t i) -> int {
      if (i == 321 || i == 400) throw std::runtime_error("boom");
      return 0;
    });
    FAIL() << "expected ReplicaError";
  } catch (const ReplicaError& e) {
    EXPECT_EQ(e.index(), 321u);
  }
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Engine a = make_engine({1, 2, 3}), b = make_engine({1, 2, 3}), c = make_engine({1, 3, 3}),
         d = make_engine({1, 2, 4});
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
  Engine e = make_engine({5, 0, 0});
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform_open(e);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(uniform_index(e, 7), 7u);
  }
}
