// Serial-vs-parallel campaign benchmark. The two paths share one fixed
// block/chain decomposition, so besides timing them this also re-verifies
// that they produce identical samples.

#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qlab/simulation.hpp"

namespace {

double seconds(std::chrono::steady_clock::time_point a,
               std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

template <typename Run>
void bench(const char* name, Run&& run) {
  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  auto serial = run(false);
  auto t1 = clock::now();
  auto parallel = run(true);
  auto t2 = clock::now();
  const double ts = seconds(t0, t1), tp = seconds(t1, t2);
  std::printf("%-28s serial %7.3fs   parallel %7.3fs   speedup %5.2fx   identical %s\n",
              name, ts, tp, ts / tp, serial == parallel ? "yes" : "NO");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif
  const qlab::RngStream stream{20260815, 0};

  bench("mm1 busy periods (0.9, 4e6)", [&](bool parallel) {
    auto s = qlab::run_mm1_campaign(stream, qlab::StableRate(0.9), 4'000'000, parallel);
    std::vector<std::uint64_t> packed(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      packed[i] = (static_cast<std::uint64_t>(s[i].n) << 32) | s[i].k;
    }
    return packed;
  });
  bench("stations (0.9, 4e6)", [&](bool parallel) {
    return qlab::run_station_campaign(stream, qlab::StableRate(0.9), 4'000'000, 10'000,
                                      qlab::kDefaultChains, parallel);
  });
  bench("ranked servers (50, 4e6)", [&](bool parallel) {
    return qlab::run_ranked_campaign(stream, qlab::ServerLoad(50.0), 4'000'000, 10'000,
                                     qlab::kDefaultChains, parallel);
  });
  return 0;
}
