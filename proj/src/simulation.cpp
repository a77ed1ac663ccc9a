#include "qlab/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "qlab/series.hpp"

namespace qlab {

namespace {

std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t derive_engine_seed(RngStream stream) {
  std::uint64_t state = stream.seed;
  std::uint64_t h = splitmix64_next(state);
  state ^= stream.stream_id;
  return h ^ splitmix64_next(state);
}

[[noreturn]] void throw_event_cap(const char* where, std::uint64_t cap) {
  throw convergence_error(std::string(where) + ": event cap of " + std::to_string(cap) +
                          " exceeded; raise the cap or lower the load");
}

}  // namespace

Rng::Rng(RngStream stream) : eng_(derive_engine_seed(stream)) {}

double Rng::uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw domain_error("Rng::below: n must be positive");
  // Lemire multiply-shift with rejection: unbiased for every n.
  unsigned __int128 m = static_cast<unsigned __int128>(eng_()) * n;
  auto lo = static_cast<std::uint64_t>(m);
  if (lo < n) {
    std::uint64_t threshold = (0 - n) % n;
    while (lo < threshold) {
      m = static_cast<unsigned __int128>(eng_()) * n;
      lo = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

void EventTrace::validate() const {
  if (events.empty()) throw internal_error("EventTrace: empty");
  std::uint64_t excess = 0, departures = 0, max_excess = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i] == Event::kArrival) {
      ++excess;
      max_excess = std::max(max_excess, excess);
    } else {
      if (excess == 0) throw internal_error("EventTrace: departure from empty system");
      --excess;
      ++departures;
    }
    bool last = (i + 1 == events.size());
    if (!last && excess < 1) throw internal_error("EventTrace: premature emptying");
    if (last && excess != 0) throw internal_error("EventTrace: does not end empty");
  }
  if (departures != n) throw internal_error("EventTrace: n does not match events");
  if (max_excess != k) throw internal_error("EventTrace: k does not match events");
  if (n < 1 || k < 1) throw internal_error("EventTrace: n and k must be >= 1");
}

EventTrace sample_busy_period(Rng& rng, StableRate rate, std::uint64_t event_cap) {
  rate.require_stable("sample_busy_period");
  const double p = rate.p();
  EventTrace trace;
  trace.events.push_back(Event::kArrival);
  std::uint64_t j = 1, max_j = 1;
  while (j >= 1) {
    if (trace.events.size() >= event_cap) throw_event_cap("sample_busy_period", event_cap);
    if (rng.uniform() < p) {
      trace.events.push_back(Event::kArrival);
      ++j;
      max_j = std::max(max_j, j);
    } else {
      trace.events.push_back(Event::kDeparture);
      --j;
      ++trace.n;
    }
  }
  trace.k = max_j;
  return trace;
}

EventTrace sample_busy_period(RngStream stream, StableRate rate, std::uint64_t event_cap) {
  Rng rng(stream);
  return sample_busy_period(rng, rate, event_cap);
}

PeriodSample sample_busy_period_stats(Rng& rng, StableRate rate, std::uint64_t event_cap) {
  rate.require_stable("sample_busy_period_stats");
  const double p = rate.p();
  std::uint64_t j = 1, max_j = 1, n = 0, events = 1;
  while (j >= 1) {
    if (events >= event_cap) throw_event_cap("sample_busy_period_stats", event_cap);
    ++events;
    if (rng.uniform() < p) {
      ++j;
      max_j = std::max(max_j, j);
    } else {
      --j;
      ++n;
    }
  }
  return PeriodSample{static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(max_j)};
}

std::vector<std::uint32_t> run_station_process(RngStream stream, StableRate rate,
                                               std::uint64_t arrivals, std::uint64_t warmup,
                                               std::uint64_t event_cap) {
  rate.require_stable("run_station_process");
  Rng rng(stream);
  const double p = rate.p();
  std::vector<std::uint32_t> samples;
  samples.reserve(arrivals);
  std::vector<char> occupied(16, 0);  // 1-based station flags
  std::uint64_t j = 0, stations = 0, seen_arrivals = 0, events = 0;

  auto record = [&](std::uint32_t i) {
    ++seen_arrivals;
    if (seen_arrivals > warmup) samples.push_back(i);
  };

  while (samples.size() < arrivals) {
    if (++events > event_cap) throw_event_cap("run_station_process", event_cap);
    if (j == 0) {
      // Idle server: the next transition is an arrival with certainty and it
      // goes straight into service.
      j = 1;
      record(0);
    } else if (rng.uniform() < p) {
      std::size_t i = 1;
      while (i < occupied.size() && occupied[i]) ++i;
      if (i == occupied.size()) occupied.resize(2 * occupied.size(), 0);
      occupied[i] = 1;
      ++stations;
      ++j;
      record(static_cast<std::uint32_t>(i));
    } else {
      --j;
      if (j >= 1) {
        // The customer at the first occupied station moves into service.
        std::size_t i = 1;
        while (!occupied[i]) ++i;
        occupied[i] = 0;
        --stations;
      }
    }
    if (stations != (j > 0 ? j - 1 : 0)) {
      throw internal_error("run_station_process: station count desynchronized from J");
    }
  }
  return samples;
}

namespace {

// Busy-server flags under a Fenwick tree: O(log) first-idle and k-th-busy
// queries. Capacity is a power of two and grows by rebuild (rare; state does
// not influence the draw sequence).
class ServerBank {
 public:
  void ensure(std::uint64_t index) {
    if (index <= cap_) return;
    std::uint64_t cap = cap_ ? cap_ : 64;
    while (cap < index) cap *= 2;
    flags_.resize(cap + 1, 0);
    tree_.assign(cap + 1, 0);
    cap_ = cap;
    for (std::uint64_t i = 1; i <= cap; ++i) {
      if (flags_[i]) add(i, 1);
    }
  }

  void set_busy(std::uint64_t i) {
    flags_[i] = 1;
    add(i, 1);
  }

  void set_idle(std::uint64_t i) {
    flags_[i] = 0;
    add(i, -1);
  }

  // Smallest index not busy; caller must ensure(capacity > busy count).
  std::uint64_t first_idle() const {
    std::uint64_t pos = 0;
    for (std::uint64_t step = cap_; step; step >>= 1) {
      std::uint64_t next = pos + step;
      if (next <= cap_ && tree_[next] == static_cast<std::int64_t>(step)) pos = next;
    }
    return pos + 1;
  }

  // Index of the rank-th busy server (1-based rank).
  std::uint64_t kth_busy(std::uint64_t rank) const {
    std::uint64_t pos = 0;
    for (std::uint64_t step = cap_; step; step >>= 1) {
      std::uint64_t next = pos + step;
      if (next <= cap_ && tree_[next] < static_cast<std::int64_t>(rank)) {
        pos = next;
        rank -= static_cast<std::uint64_t>(tree_[next]);
      }
    }
    return pos + 1;
  }

 private:
  void add(std::uint64_t i, std::int64_t delta) {
    for (; i <= cap_; i += i & (0 - i)) tree_[i] += delta;
  }

  std::uint64_t cap_ = 0;
  std::vector<char> flags_;
  std::vector<std::int64_t> tree_;
};

}  // namespace

std::vector<std::uint32_t> run_ranked_servers(RngStream stream, ServerLoad load,
                                              std::uint64_t arrivals, std::uint64_t warmup,
                                              std::uint64_t event_cap) {
  Rng rng(stream);
  const double lam = load.lambda();
  std::vector<std::uint32_t> samples;
  samples.reserve(arrivals);
  ServerBank bank;
  bank.ensure(64);
  std::uint64_t j = 0, seen_arrivals = 0, events = 0;

  while (samples.size() < arrivals) {
    if (++events > event_cap) throw_event_cap("run_ranked_servers", event_cap);
    // From j busy servers the next transition is an arrival with probability
    // lambda/(lambda+j); at j = 0 that is certain and costs no draw.
    if (j == 0 || rng.uniform() < lam / (lam + static_cast<double>(j))) {
      bank.ensure(j + 1);
      std::uint64_t l = bank.first_idle();
      bank.set_busy(l);
      ++j;
      ++seen_arrivals;
      if (seen_arrivals > warmup) samples.push_back(static_cast<std::uint32_t>(l));
    } else {
      std::uint64_t victim = bank.kth_busy(rng.below(j) + 1);
      bank.set_idle(victim);
      --j;
    }
  }
  return samples;
}

namespace {

double int_pow(double base, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

template <typename T>
std::vector<MomentEstimate> estimate_moments_impl(std::span<const T> samples,
                                                  std::span<const int> orders, int batches,
                                                  SampleKind kind) {
  if (batches < 2) throw domain_error("estimate_moments: batches must be >= 2");
  if (samples.empty()) throw domain_error("estimate_moments: no samples");
  for (int m : orders) {
    if (m < 1) throw domain_error("estimate_moments: orders must be >= 1");
  }

  std::vector<MomentEstimate> out;
  out.reserve(orders.size());

  if (kind == SampleKind::kIndependent) {
    for (int m : orders) {
      NeumaierSum sum;
      for (T x : samples) sum.add(int_pow(static_cast<double>(x), m));
      const auto count = static_cast<double>(samples.size());
      const double mean = sum.value() / count;
      double se = 0.0;
      if (samples.size() >= 2) {
        NeumaierSum sq;
        for (T x : samples) {
          double d = int_pow(static_cast<double>(x), m) - mean;
          sq.add(d * d);
        }
        se = std::sqrt(sq.value() / (count - 1.0) / count);
      }
      out.push_back(MomentEstimate{m, mean, se, samples.size(), 1});
    }
    return out;
  }

  const std::uint64_t batch_size = samples.size() / static_cast<std::uint64_t>(batches);
  if (batch_size < 100) {
    throw domain_error("estimate_moments: fewer than 100 samples per batch");
  }
  const std::uint64_t used = batch_size * static_cast<std::uint64_t>(batches);
  for (int m : orders) {
    std::vector<double> batch_means(static_cast<std::size_t>(batches));
    NeumaierSum grand;
    for (int b = 0; b < batches; ++b) {
      NeumaierSum sum;
      const std::uint64_t begin = static_cast<std::uint64_t>(b) * batch_size;
      for (std::uint64_t i = begin; i < begin + batch_size; ++i) {
        sum.add(int_pow(static_cast<double>(samples[i]), m));
      }
      batch_means[static_cast<std::size_t>(b)] = sum.value() / static_cast<double>(batch_size);
      grand.add(sum.value());
    }
    const double mean = grand.value() / static_cast<double>(used);
    NeumaierSum sq;
    for (double bm : batch_means) sq.add((bm - mean) * (bm - mean));
    const auto nb = static_cast<double>(batches);
    const double se = std::sqrt(sq.value() / (nb - 1.0) / nb);
    out.push_back(MomentEstimate{m, mean, se, used, batches});
  }
  return out;
}

}  // namespace

std::vector<MomentEstimate> estimate_moments(std::span<const double> samples,
                                             std::span<const int> orders, int batches,
                                             SampleKind kind) {
  return estimate_moments_impl(samples, orders, batches, kind);
}

std::vector<MomentEstimate> estimate_moments(std::span<const std::uint32_t> samples,
                                             std::span<const int> orders, int batches,
                                             SampleKind kind) {
  return estimate_moments_impl(samples, orders, batches, kind);
}

double empirical_tail(std::span<const std::uint32_t> samples, std::uint32_t threshold) {
  if (samples.empty()) throw domain_error("empirical_tail: no samples");
  std::uint64_t hits = 0;
  for (std::uint32_t x : samples) hits += (x > threshold) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

TailCheck tail_z(std::span<const std::uint32_t> samples, std::uint32_t threshold,
                 double exact_p, int batches, SampleKind kind) {
  if (!(exact_p > 0.0) || !(exact_p < 1.0)) {
    throw domain_error("tail_z: exact_p must be in (0,1)");
  }
  const double phat = empirical_tail(samples, threshold);
  const auto count = static_cast<double>(samples.size());
  const double binom_se = std::sqrt(exact_p * (1.0 - exact_p) / count);
  double se = binom_se;
  if (kind == SampleKind::kEquilibrium) {
    std::vector<double> indicator(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      indicator[i] = samples[i] > threshold ? 1.0 : 0.0;
    }
    const int orders[] = {1};
    auto est = estimate_moments(std::span<const double>(indicator), orders, batches,
                                SampleKind::kEquilibrium);
    se = std::max(binom_se, est[0].std_error);
  }
  return TailCheck{phat, se, (phat - exact_p) / se};
}

double gamblers_ruin_sim(RngStream stream, double p, std::uint64_t v, std::uint64_t w,
                         std::uint64_t walks) {
  if (!(p > 0.0) || !(p < 1.0)) throw domain_error("gamblers_ruin_sim: p must be in (0,1)");
  if (v < 1 || w < 1) throw domain_error("gamblers_ruin_sim: v and w must be >= 1");
  if (walks < 1) throw domain_error("gamblers_ruin_sim: walks must be >= 1");
  Rng rng(stream);
  const std::uint64_t top = v + w;
  std::uint64_t ruined = 0;
  for (std::uint64_t i = 0; i < walks; ++i) {
    std::uint64_t x = v;
    while (x != 0 && x != top) {
      x += (rng.uniform() < p) ? 1 : static_cast<std::uint64_t>(-1);
    }
    ruined += (x == top) ? 1 : 0;
  }
  return static_cast<double>(ruined) / static_cast<double>(walks);
}

namespace {

// Runs `count` jobs with a fixed output decomposition; job b must write only
// its own slot so the serial and parallel paths agree bitwise.
template <typename Job>
void run_jobs(std::uint64_t count, bool parallel, Job&& job) {
  if (!parallel) {
    for (std::uint64_t b = 0; b < count; ++b) job(b);
    return;
  }
  std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t b = 0; b < static_cast<std::int64_t>(count); ++b) {
    try {
      job(static_cast<std::uint64_t>(b));
    } catch (...) {
#pragma omp critical(qlab_job_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<PeriodSample> run_mm1_campaign(RngStream base, StableRate rate,
                                           std::uint64_t periods, bool parallel,
                                           std::uint64_t event_cap) {
  rate.require_stable("run_mm1_campaign");
  if (periods == 0) throw domain_error("run_mm1_campaign: periods must be >= 1");
  const std::uint64_t blocks = (periods + kPeriodsPerBlock - 1) / kPeriodsPerBlock;
  std::vector<PeriodSample> samples(periods);
  run_jobs(blocks, parallel, [&](std::uint64_t b) {
    const std::uint64_t begin = b * kPeriodsPerBlock;
    const std::uint64_t end = std::min(begin + kPeriodsPerBlock, periods);
    Rng rng(substream(base, b));
    for (std::uint64_t i = begin; i < end; ++i) {
      samples[i] = sample_busy_period_stats(rng, rate, event_cap);
    }
  });
  return samples;
}

namespace {

template <typename Runner>
std::vector<std::uint32_t> run_chained(RngStream base, std::uint64_t arrivals,
                                       std::uint64_t warmup, int chains, bool parallel,
                                       Runner&& runner) {
  if (chains < 1) throw domain_error("campaign: chains must be >= 1");
  if (arrivals < static_cast<std::uint64_t>(chains)) {
    throw domain_error("campaign: need at least one arrival per chain");
  }
  const auto nc = static_cast<std::uint64_t>(chains);
  const std::uint64_t share = arrivals / nc, rem = arrivals % nc;
  std::vector<std::uint64_t> offset(nc + 1, 0);
  for (std::uint64_t c = 0; c < nc; ++c) {
    offset[c + 1] = offset[c] + share + (c < rem ? 1 : 0);
  }
  std::vector<std::uint32_t> samples(arrivals);
  run_jobs(nc, parallel, [&](std::uint64_t c) {
    auto chunk = runner(substream(base, c), offset[c + 1] - offset[c], warmup);
    std::copy(chunk.begin(), chunk.end(), samples.begin() + static_cast<std::ptrdiff_t>(offset[c]));
  });
  return samples;
}

}  // namespace

std::vector<std::uint32_t> run_station_campaign(RngStream base, StableRate rate,
                                                std::uint64_t arrivals, std::uint64_t warmup,
                                                int chains, bool parallel,
                                                std::uint64_t event_cap) {
  rate.require_stable("run_station_campaign");
  return run_chained(base, arrivals, warmup, chains, parallel,
                     [&](RngStream s, std::uint64_t n, std::uint64_t w) {
                       return run_station_process(s, rate, n, w, event_cap);
                     });
}

std::vector<std::uint32_t> run_ranked_campaign(RngStream base, ServerLoad load,
                                               std::uint64_t arrivals, std::uint64_t warmup,
                                               int chains, bool parallel,
                                               std::uint64_t event_cap) {
  return run_chained(base, arrivals, warmup, chains, parallel,
                     [&](RngStream s, std::uint64_t n, std::uint64_t w) {
                       return run_ranked_servers(s, load, n, w, event_cap);
                     });
}

std::vector<double> extract_n(std::span<const PeriodSample> samples) {
  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out[i] = samples[i].n;
  return out;
}

std::vector<double> extract_k(std::span<const PeriodSample> samples) {
  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out[i] = samples[i].k;
  return out;
}

}  // namespace qlab
