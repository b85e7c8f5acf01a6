#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "modalsav/parallel.hpp"

using namespace modalsav;

TEST_CASE("every index runs exactly once") {
  for (std::size_t workers : {1u, 2u, 7u}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(1000, workers, [&](std::size_t i, std::size_t w) {
      CHECK(w < workers);
      hits[i].fetch_add(1);
    });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
  parallel_for(0, 4, [](std::size_t, std::size_t) { FAIL("called"); });
}

TEST_CASE("worker ids are never shared") {
  std::vector<std::atomic<int>> busy(4);
  std::atomic<bool> clash{false};
  parallel_for(400, 4, [&](std::size_t, std::size_t w) {
    if (busy[w].fetch_add(1) != 0) clash = true;
    volatile double sink = 0.0;
    for (int k = 0; k < 1000; ++k) sink = sink + k;
    busy[w].fetch_sub(1);
  });
  CHECK_FALSE(clash.load());
}

TEST_CASE("lowest failing index wins") {
  for (std::size_t workers : {1u, 3u}) {
    try {
      parallel_for(50, workers, [](std::size_t i, std::size_t) {
        if (i == 17 || i == 40) throw std::runtime_error(std::to_string(i));
      });
      FAIL("no exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "17");
    }
  }
}

TEST_CASE("worker count honours the environment") {
  setenv("MODALSAV_WORKERS", "3", 1);
  CHECK(worker_count() == 3);
  setenv("MODALSAV_WORKERS", "zero", 1);
  CHECK(worker_count() >= 1);
  unsetenv("MODALSAV_WORKERS");
  CHECK(worker_count() >= 1);
}
