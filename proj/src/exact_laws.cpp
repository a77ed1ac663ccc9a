#include "qlab/exact_laws.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <vector>

#include "qlab/numbers.hpp"

namespace qlab {

namespace {

// Probabilities are clamped to [0,1]; anything beyond rounding noise means a
// formula bug, not a rounding artifact, and must not be masked.
double clamp_probability(double v, const char* op) {
  if (v < -1e-12 || v > 1.0 + 1e-12) {
    throw internal_error(std::string(op) + ": probability " + std::to_string(v) +
                         " outside [0,1] beyond rounding tolerance");
  }
  return std::min(1.0, std::max(0.0, v));
}

double int_pow(double base, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

}  // namespace

double busy_size_pmf(StableRate rate, std::uint64_t n) {
  if (n == 0) throw domain_error("busy_size_pmf: n must be >= 1");
  const double p = rate.p(), q = rate.q();
  if (n <= 64) {
    return clamp_probability(
        to_double(catalan(static_cast<int>(n))) * int_pow(p, static_cast<int>(n) - 1) *
            int_pow(q, static_cast<int>(n)),
        "busy_size_pmf");
  }
  // log A_n = lgamma(2n-1) - lgamma(n) - lgamma(n+1)
  double dn = static_cast<double>(n);
  double log_pmf = std::lgamma(2.0 * dn - 1.0) - std::lgamma(dn) - std::lgamma(dn + 1.0) +
                   (dn - 1.0) * std::log(p) + dn * std::log(q);
  return clamp_probability(std::exp(log_pmf), "busy_size_pmf");
}

double busy_size_factorial_moment(StableRate rate, int m) {
  rate.require_stable("busy_size_factorial_moment");
  if (m < 1) throw domain_error("busy_size_factorial_moment: m must be >= 1");
  const double lam = rate.lambda();
  return int_pow(2.0, m - 1) * to_double(double_factorial_odd(m)) * int_pow(lam, m - 1) /
         int_pow(1.0 - lam, 2 * m - 1);
}

double busy_size_moment(StableRate rate, int m) {
  rate.require_stable("busy_size_moment");
  if (m < 1) throw domain_error("busy_size_moment: m must be >= 1");
  NeumaierSum acc;
  for (int l = 1; l <= m; ++l) {
    acc.add(to_double(stirling2(m, l)) * busy_size_factorial_moment(rate, l));
  }
  return acc.value();
}

double max_occupancy_tail(StableRate rate, std::uint64_t k) {
  if (k == 0) return 1.0;  // K >= 1 on every busy period
  const double lam = rate.lambda();
  if (lam == 1.0) return 1.0 / static_cast<double>(k + 1);
  const double log_lam = rate.log_lambda();
  // 1 - lambda^{k+1} via expm1 keeps the denominator accurate near lambda = 1.
  double num = (1.0 - lam) * std::pow(lam, static_cast<double>(k));
  double den = -std::expm1(static_cast<double>(k + 1) * log_lam);
  return clamp_probability(num / den, "max_occupancy_tail");
}

double gamblers_ruin(double p, std::uint64_t v, std::uint64_t w, bool allow_symmetric) {
  if (!(p > 0.0) || !(p < 1.0)) throw domain_error("gamblers_ruin: p must be in (0,1)");
  if (v < 1 || w < 1) throw domain_error("gamblers_ruin: v and w must be >= 1");
  if (p == 0.5) {
    if (!allow_symmetric) {
      throw domain_error(
          "gamblers_ruin: p = 1/2 needs the symmetric branch (allow_symmetric)");
    }
    return static_cast<double>(v) / static_cast<double>(v + w);
  }
  // ((q/p)^v - 1)/((q/p)^{v+w} - 1) with q/p = exp(lr); expm1 avoids the
  // cancellation blowup when p is close to 1/2.
  double lr = std::log1p((1.0 - 2.0 * p) / p);
  return clamp_probability(std::expm1(static_cast<double>(v) * lr) /
                               std::expm1(static_cast<double>(v + w) * lr),
                           "gamblers_ruin");
}

namespace {

SeriesValue lambert_direct(int l, double lam, double log_lam, double tol) {
  NeumaierSum acc;
  SeriesValue out;
  double lp = 1.0;
  for (std::uint64_t n = 1; n <= kSeriesTermCap; ++n) {
    // Refresh the incremental power periodically so drift cannot accumulate
    // over the ~1e4-term horizons needed when lambda is close to 1.
    lp = (n % 256 == 0) ? std::exp(static_cast<double>(n) * log_lam) : lp * lam;
    double den = -std::expm1(static_cast<double>(n) * log_lam);
    double term = int_pow(static_cast<double>(n), l) * lp / den;
    acc.add(term);
    out.terms_used = n;
    out.last_term = term;
    // Remainder: sum_{j>n} j^l lambda^j/(1-lambda^j)
    //   <= (n+1)^l lambda^{n+1} / ((1-lambda)(1-rho)), rho = ((n+2)/(n+1))^l lambda.
    double rho = int_pow(static_cast<double>(n + 2) / static_cast<double>(n + 1), l) * lam;
    if (rho < 1.0) {
      double head = int_pow(static_cast<double>(n + 1), l) * lp * lam;
      double bound = head / ((1.0 - lam) * (1.0 - rho));
      double sum = acc.value();
      double gate = tol * std::max(std::abs(sum), kSeriesValueFloor);
      if (bound <= gate && std::abs(term) <= gate) {
        out.value = sum;
        out.converged = true;
        return out;
      }
    }
  }
  throw convergence_error("lambert_T(direct): term cap hit before meeting tolerance");
}

SeriesValue lambert_divisor(int l, double lam, double log_lam, double tol) {
  // The horizon is not known until the sum is, so sieve-and-sum with doubling.
  for (std::uint64_t n_max = 64; n_max <= kSeriesTermCap; n_max *= 2) {
    std::vector<std::uint64_t> sigma = divisor_power_sum_sieve(l, n_max);
    NeumaierSum acc;
    double lp = 1.0;
    double last = 0.0;
    for (std::uint64_t n = 1; n <= n_max; ++n) {
      lp = (n % 256 == 0) ? std::exp(static_cast<double>(n) * log_lam) : lp * lam;
      last = static_cast<double>(sigma[n - 1]) * lp;
      acc.add(last);
    }
    // sigma_l(n) <= n^{l+1}, so the remainder is below the geometric-dominated
    // tail of n^{l+1} lambda^n.
    double rho =
        int_pow(static_cast<double>(n_max + 2) / static_cast<double>(n_max + 1), l + 1) * lam;
    if (rho < 1.0) {
      double head = int_pow(static_cast<double>(n_max + 1), l + 1) *
                    std::exp(static_cast<double>(n_max + 1) * log_lam);
      double bound = head / (1.0 - rho);
      double sum = acc.value();
      double gate = tol * std::max(std::abs(sum), kSeriesValueFloor);
      if (bound <= gate && std::abs(last) <= gate) {
        return SeriesValue{sum, n_max, std::abs(last), true};
      }
    }
  }
  throw convergence_error("lambert_T(divisor): term cap hit before meeting tolerance");
}

}  // namespace

SeriesValue lambert_T(int l, StableRate rate, double tol, LambertMethod method) {
  rate.require_stable("lambert_T");
  if (l < 0) throw domain_error("lambert_T: l must be >= 0");
  if (!(tol > 0)) throw domain_error("lambert_T: tol must be positive");
  const double lam = rate.lambda();
  const double log_lam = rate.log_lambda();
  return method == LambertMethod::kDirect ? lambert_direct(l, lam, log_lam, tol)
                                          : lambert_divisor(l, lam, log_lam, tol);
}

double max_occupancy_moment(StableRate rate, int m, double tol, MomentMethod method) {
  rate.require_stable("max_occupancy_moment");
  if (m < 1) throw domain_error("max_occupancy_moment: m must be >= 1");
  if (!(tol > 0)) throw domain_error("max_occupancy_moment: tol must be positive");
  const double lam = rate.lambda();
  if (method == MomentMethod::kLambert) {
    // Ex[K^m] = ((1-lambda)/lambda) sum_{l<m} C(m,l) (-1)^{m-1-l} T_l(lambda)
    NeumaierSum acc;
    for (int l = 0; l < m; ++l) {
      double sign = ((m - 1 - l) % 2 == 0) ? 1.0 : -1.0;
      acc.add(sign * to_double(binomial(m, l)) * lambert_T(l, rate, tol * 0.25).value);
    }
    return (1.0 - lam) / lam * acc.value();
  }
  // Direct: sum k^m (Pr[K>k-1] - Pr[K>k]) until the j^m lambda^j-dominated
  // remainder falls under tol.
  NeumaierSum acc;
  double prev_tail = 1.0;
  for (std::uint64_t k = 1; k <= kSeriesTermCap; ++k) {
    double tail = max_occupancy_tail(rate, k);
    acc.add(int_pow(static_cast<double>(k), m) * (prev_tail - tail));
    prev_tail = tail;
    double rho = int_pow(static_cast<double>(k + 2) / static_cast<double>(k + 1), m) * lam;
    if (rho < 1.0) {
      double bound =
          int_pow(static_cast<double>(k + 1), m) * tail / (1.0 - rho);
      double sum = acc.value();
      if (bound <= tol * std::max(std::abs(sum), kSeriesValueFloor)) return sum;
    }
  }
  throw convergence_error("max_occupancy_moment(direct): term cap hit");
}

namespace {

// Eulerian-number rows <l, k>, cached; S_l(u) = sum_k <l,k> u^{k+1} / (1-u)^{l+1}
// is (u d/du)^l [u/(1-u)], the term-wise kernel of the q-polygamma series.
const std::vector<double>& eulerian_row(int l) {
  static std::mutex mu;
  static std::vector<std::vector<double>> rows;  // rows[l][k]
  std::lock_guard<std::mutex> lock(mu);
  while (static_cast<int>(rows.size()) <= l) {
    int n = static_cast<int>(rows.size());
    if (n == 0) {
      rows.push_back({1.0});
      continue;
    }
    const std::vector<double>& prev = rows[n - 1];
    std::vector<double> row(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k < n; ++k) {
      double a = (k < static_cast<int>(prev.size())) ? prev[k] : 0.0;
      double b = (k >= 1) ? prev[k - 1] : 0.0;
      row[k] = (k + 1) * a + (n - k) * b;
    }
    rows.push_back(std::move(row));
  }
  return rows[l];
}

double eulerian_kernel(int l, double u) {
  if (l == 0) return u / (1.0 - u);
  const std::vector<double>& row = eulerian_row(l);
  double num = 0.0;
  double up = u;
  for (std::size_t k = 0; k < row.size(); ++k) {
    num += row[k] * up;
    up *= u;
  }
  return num / int_pow(1.0 - u, l + 1);
}

}  // namespace

double q_polygamma(int l, double q, double x, double tol) {
  if (l < 0) throw domain_error("q_polygamma: l must be >= 0");
  if (!(q > 0.0) || q >= 1.0) throw domain_error("q_polygamma: q must be in (0,1)");
  if (!(x > 0.0)) throw domain_error("q_polygamma: x must be positive");
  if (!(tol > 0)) throw domain_error("q_polygamma: tol must be positive");
  const double log_q = std::log(q);
  NeumaierSum acc;
  double u = std::pow(q, x);  // q^{n+x} starting at n = 0
  for (std::uint64_t n = 0; n <= kSeriesTermCap; ++n) {
    double term = eulerian_kernel(l, u);
    acc.add(term);
    // S_l(u)/u is increasing, so S_l(q u) <= q S_l(u): geometric tail.
    double bound = term * q / (1.0 - q);
    double sum = acc.value();
    if (n >= 2 && bound <= tol * std::max(std::abs(sum), kSeriesValueFloor)) {
      double series = sum;
      if (l == 0) return -std::log1p(-q) + log_q * series;
      return int_pow(log_q, l + 1) * series;
    }
    u *= q;
  }
  throw convergence_error("q_polygamma: term cap hit before meeting tolerance");
}

double erlang_denominator(ServerLoad load, std::uint64_t l) {
  const double lam = load.lambda();
  double d = 1.0;
  for (std::uint64_t i = 1; i <= l; ++i) {
    d = 1.0 + static_cast<double>(i) / lam * d;
    if (std::isinf(d)) return d;  // tail underflows to exactly 0 beyond here
  }
  return d;
}

double server_search_tail(ServerLoad load, std::uint64_t l) {
  return clamp_probability(1.0 / erlang_denominator(load, l), "server_search_tail");
}

double server_search_moment(ServerLoad load, int m, double tol) {
  if (m < 1) throw domain_error("server_search_moment: m must be >= 1");
  if (!(tol > 0)) throw domain_error("server_search_moment: tol must be positive");
  const double lam = load.lambda();
  const double horizon = lam + 10.0 * std::sqrt(lam);
  NeumaierSum acc;
  double d = 1.0;  // D_l maintained by the recurrence
  for (std::uint64_t l = 0; l <= kSeriesTermCap; ++l) {
    double dl = static_cast<double>(l);
    double delta = int_pow(dl + 1.0, m) - int_pow(dl, m);  // (l+1)^m - l^m
    double term = delta / d;
    acc.add(term);
    double sum = acc.value();
    if (dl > horizon && term <= tol * std::max(std::abs(sum), kSeriesValueFloor)) {
      return sum;
    }
    d = 1.0 + (dl + 1.0) / lam * d;
  }
  throw convergence_error("server_search_moment: term cap hit before meeting tolerance");
}

double server_search_body_approx(ServerLoad load, std::uint64_t l) {
  const double lam = load.lambda();
  double dl = static_cast<double>(l);
  if (dl > load.l0()) {
    throw domain_error(
        "server_search_body_approx: l beyond lambda - sqrt(lambda) is the tail regime");
  }
  double frac = 1.0 - dl / lam;
  return frac + 1.0 / (lam * frac);
}

double station_search_tail(StableRate rate, std::uint64_t i) {
  rate.require_stable("station_search_tail");
  return clamp_probability(rate.lambda() * max_occupancy_tail(rate, i),
                           "station_search_tail");
}

double station_search_moment(StableRate rate, int m, double tol) {
  rate.require_stable("station_search_moment");
  return rate.lambda() * max_occupancy_moment(rate, m, tol);
}

}  // namespace qlab
