#include <gtest/gtest.h>

#include "traplab/core.hpp"

using namespace traplab;

TEST(Core, StreamsAreDistinctAndRepeatable) {
  Rng a = make_stream(42, 0), b = make_stream(42, 0), c = make_stream(42, 1);
  auto x = a(), y = b(), z = c();
  EXPECT_EQ(x, y);
  EXPECT_NE(x, z);
  EXPECT_NE(derive_seed(42, 1), derive_seed(42, 2));
}

TEST(Core, Uniform01NeverZero) {
  Rng r = make_stream(1, 0);
  for (int i = 0; i < 100000; ++i) {
    double u = uniform01(r);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Core, NeumaierRecoversCancellation) {
  NeumaierSum s;
  s.add(1e16);
  s.add(1.0);
  s.add(-1e16);
  EXPECT_EQ(s.value(), 1.0);
}

TEST(Core, MeanEstimate) {
  std::vector<double> v{1, 2, 3, 4};
  auto m = mean_estimate(v);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.variance, 5.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.std_err, std::sqrt(5.0 / 12.0), 1e-15);
}

TEST(Core, RunBlocksIndependentOfWorkers) {
  auto fn = [](std::size_t i, Rng& rng) { return static_cast<double>(rng() % 1000) + 0.001 * i; };
  auto one = run_blocks<double>(1000, {7, 1, 16}, fn);
  auto four = run_blocks<double>(1000, {7, 4, 16}, fn);
  EXPECT_EQ(one, four);
}

TEST(Core, ParallelForPropagatesErrors) {
  EXPECT_THROW(parallel_for(100, 3, [](std::size_t i) {
                 if (i == 57) throw Error("core", ErrorCode::Numerical, "boom");
               }),
               Error);
}

TEST(Core, ErrorCarriesModule) {
  try {
    require(false, "paths", ErrorCode::IterationCap, "too many");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.module(), "paths");
    EXPECT_EQ(e.code(), ErrorCode::IterationCap);
  }
}
