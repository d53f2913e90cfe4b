#include <doctest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "fgsa/parallel.hpp"

TEST_CASE("parallel_for visits every index exactly once") {
  const int n = 1000;
  std::vector<std::atomic<int>> hits(n);
  fgsa::parallel_for(n, 4, [&](int i) { hits[static_cast<std::size_t>(i)]++; });
  for (int i = 0; i < n; ++i) CHECK(hits[static_cast<std::size_t>(i)].load() == 1);
  fgsa::parallel_for(0, 4, [&](int) { FAIL("body must not run for n == 0"); });
}

TEST_CASE("parallel_for propagates worker exceptions") {
  CHECK_THROWS_WITH_AS(
      fgsa::parallel_for(100, 4,
                         [&](int i) {
                           if (i == 37) throw std::runtime_error("worker failure");
                         }),
      "worker failure", std::runtime_error);
}

TEST_CASE("block_map_reduce uses fixed blocks reduced in order") {
  std::vector<std::pair<int, int>> blocks;
  fgsa::block_map_reduce<std::pair<int, int>>(
      10, 3, 4, [](int begin, int end) { return std::make_pair(begin, end); },
      [&](int b, std::pair<int, int>&& v) {
        CHECK(b == static_cast<int>(blocks.size()));
        blocks.push_back(v);
      });
  REQUIRE(blocks.size() == 3);
  CHECK(blocks[0] == std::make_pair(0, 4));
  CHECK(blocks[1] == std::make_pair(4, 8));
  CHECK(blocks[2] == std::make_pair(8, 10));
}

TEST_CASE("block_map_reduce sums are bitwise identical across worker counts") {
  auto run = [](int jobs) {
    double total = 0.0;
    fgsa::block_map_reduce<double>(
        5000, jobs, 32,
        [](int begin, int end) {
          double s = 0.0;
          for (int i = begin; i < end; ++i) s += std::sin(0.001 * i) / (1.0 + i);
          return s;
        },
        [&](int, double&& v) { total += v; });
    return total;
  };
  const double ref = run(1);
  CHECK(run(2) == ref);
  CHECK(run(4) == ref);
  CHECK(run(7) == ref);
}

TEST_CASE("resolve_jobs maps non-positive requests to the machine width") {
  CHECK(fgsa::resolve_jobs(3) == 3);
  CHECK(fgsa::resolve_jobs(0) >= 1);
  CHECK(fgsa::resolve_jobs(-1) == fgsa::resolve_jobs(0));
}
