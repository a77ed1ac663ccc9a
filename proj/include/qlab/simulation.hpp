#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "qlab/common.hpp"
#include "qlab/rates.hpp"

namespace qlab {

// Runaway guard for a single chain/trace; expected never to trip at the loads
// this tool targets (lambda <= 0.999 on the single-server side).
inline constexpr std::uint64_t kDefaultEventCap = 100'000'000;

// Generator identity recorded in output metadata.
inline constexpr std::string_view kRngId = "mt19937_64/splitmix64-streams";

// A reproducible stream tag: identical (seed, stream_id) and parameters give a
// bit-identical sample sequence on every run of the same build. Campaigns
// consume a contiguous band of stream_ids starting at the base tag, one per
// block or chain.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

inline RngStream substream(RngStream base, std::uint64_t offset) {
  return RngStream{base.seed, base.stream_id + offset};
}

// mt19937_64 engine seeded from the stream tag through two splitmix64 rounds
// (absorb seed, absorb stream_id, squeeze). uniform() uses the top 53 bits.
class Rng {
 public:
  explicit Rng(RngStream stream);

  double uniform();  // [0, 1)
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t below(std::uint64_t n);  // unbiased uniform on [0, n)

 private:
  std::mt19937_64 eng_;
};

enum class Event : std::uint8_t { kArrival, kDeparture };

// One busy period of the embedded M/M/1 jump chain, beginning with the
// initiating arrival. n = customers served, k = max simultaneous presence.
struct EventTrace {
  std::vector<Event> events;
  std::uint64_t n = 0;
  std::uint64_t k = 0;

  // Checks the prefix-excess invariants (first event an arrival, excess >= 1
  // strictly inside the trace, 0 at the end) and that n, k match the events.
  void validate() const;  // throws internal_error
};

struct PeriodSample {
  std::uint32_t n = 0;
  std::uint32_t k = 0;
};

EventTrace sample_busy_period(RngStream stream, StableRate rate,
                              std::uint64_t event_cap = kDefaultEventCap);
EventTrace sample_busy_period(Rng& rng, StableRate rate,
                              std::uint64_t event_cap = kDefaultEventCap);
// Same chain, same draws, no trace storage; for high-volume campaigns.
PeriodSample sample_busy_period_stats(Rng& rng, StableRate rate,
                                      std::uint64_t event_cap = kDefaultEventCap);

// Continuous M/M/1 run with ordered waiting stations. Records, for each of
// `arrivals` post-warmup arrivals, the station index taken (0 when the server
// was idle); the first `warmup` arrivals are simulated but not recorded.
// Maintains and asserts online that #occupied stations == max(J-1, 0).
std::vector<std::uint32_t> run_station_process(RngStream stream, StableRate rate,
                                               std::uint64_t arrivals, std::uint64_t warmup,
                                               std::uint64_t event_cap = kDefaultEventCap);

// Embedded M/M/infinity chain with ranked servers: arrival with probability
// lambda/(lambda+j) from j busy, else a uniformly chosen busy server departs.
// Records L = first idle index for each post-warmup arrival.
std::vector<std::uint32_t> run_ranked_servers(RngStream stream, ServerLoad load,
                                              std::uint64_t arrivals, std::uint64_t warmup,
                                              std::uint64_t event_cap = kDefaultEventCap);

enum class SampleKind {
  kIndependent,  // per-busy-period N, K: plain sample mean and SE
  kEquilibrium,  // I, L streams: batch-means SE over contiguous batches
};

struct MomentEstimate {
  int order = 0;
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t sample_count = 0;
  int batch_count = 0;  // 1 for independent samples
};

// One estimate per requested order m (of sample^m). Batch means truncate the
// stream to a multiple of the batch count so batches are equal-sized; the
// estimate requires at least 100 samples per batch.
std::vector<MomentEstimate> estimate_moments(std::span<const double> samples,
                                             std::span<const int> orders, int batches,
                                             SampleKind kind);
std::vector<MomentEstimate> estimate_moments(std::span<const std::uint32_t> samples,
                                             std::span<const int> orders, int batches,
                                             SampleKind kind);

// Fraction of samples strictly above the threshold.
double empirical_tail(std::span<const std::uint32_t> samples, std::uint32_t threshold);

struct TailCheck {
  double empirical = 0.0;
  double std_error = 0.0;
  double z = 0.0;
};

// z-test of the empirical tail against an exact probability. The SE is
// binomial at the exact p; for equilibrium streams it is the larger of that
// and the batch-means SE of the indicator (guards against autocorrelation).
TailCheck tail_z(std::span<const std::uint32_t> samples, std::uint32_t threshold,
                 double exact_p, int batches, SampleKind kind);

// Empirical probability that the fortune path from v reaches v + w before 0
// when each step is +1 with probability p.
double gamblers_ruin_sim(RngStream stream, double p, std::uint64_t v, std::uint64_t w,
                         std::uint64_t walks);

// Campaigns: fixed decomposition into blocks (busy periods) or chains
// (equilibrium runs), one substream each, merged in block/chain order, so the
// serial and parallel paths produce bitwise-identical sample vectors.
inline constexpr std::uint64_t kPeriodsPerBlock = 8192;
inline constexpr int kDefaultChains = 8;

std::vector<PeriodSample> run_mm1_campaign(RngStream base, StableRate rate,
                                           std::uint64_t periods, bool parallel,
                                           std::uint64_t event_cap = kDefaultEventCap);

// Each chain warms up independently and contributes an equal share of the
// recorded arrivals (the first `arrivals % chains` chains take the remainder).
std::vector<std::uint32_t> run_station_campaign(RngStream base, StableRate rate,
                                                std::uint64_t arrivals, std::uint64_t warmup,
                                                int chains, bool parallel,
                                                std::uint64_t event_cap = kDefaultEventCap);
std::vector<std::uint32_t> run_ranked_campaign(RngStream base, ServerLoad load,
                                               std::uint64_t arrivals, std::uint64_t warmup,
                                               int chains, bool parallel,
                                               std::uint64_t event_cap = kDefaultEventCap);

std::vector<double> extract_n(std::span<const PeriodSample> samples);
std::vector<double> extract_k(std::span<const PeriodSample> samples);

}  // namespace qlab
