#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "scoopsim/parallel.hpp"

using namespace scoopsim;

TEST(Parallel, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(Parallel, ZeroItems) {
  bool called = false;
  parallel_for(0, [&](std::size_t) { called = true; });
  EXPECT_FALSE(called);
}

TEST(Parallel, RethrowsWorkerException) {
  EXPECT_THROW(parallel_for(50,
                            [](std::size_t i) {
                              if (i == 17) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(Parallel, ThreadCapFromEnvironment) {
  ::setenv("SCOOPSIM_THREADS", "1", 1);
  EXPECT_EQ(worker_count(), 1u);
  ::setenv("SCOOPSIM_THREADS", "3", 1);
  EXPECT_LE(worker_count(), 3u);
  EXPECT_GE(worker_count(), 1u);
  ::unsetenv("SCOOPSIM_THREADS");
  EXPECT_GE(worker_count(), 1u);
}
