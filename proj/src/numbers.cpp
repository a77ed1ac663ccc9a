#include "qlab/numbers.hpp"

#include <mutex>

namespace qlab {

BigInt binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  BigInt r = 1;
  for (int i = 1; i <= k; ++i) {
    r *= (n - k + i);
    r /= i;  // exact at every step: r is C(n-k+i, i)
  }
  return r;
}

BigInt catalan(int n) {
  if (n < 1) throw domain_error("catalan: n must be >= 1 (1-based indexing)");
  return binomial(2 * n - 2, n - 1) / n;
}

BigInt stirling2(int m, int l) {
  if (m < 0 || l < 0) throw domain_error("stirling2: negative argument");
  if (l > m) throw domain_error("stirling2: l > m");
  if (m == 0) return 1;  // {0 0} = 1
  if (l == 0) return 0;
  // Triangle recurrence {m l} = l*{m-1 l} + {m-1 l-1}, one row at a time.
  std::vector<BigInt> row(static_cast<std::size_t>(m) + 1);
  row[0] = 1;  // row for m=0
  for (int i = 1; i <= m; ++i) {
    for (int j = i; j >= 1; --j) {
      row[j] = j * row[j] + row[j - 1];
    }
    row[0] = 0;
  }
  return row[l];
}

namespace {

std::mutex g_bernoulli_mutex;
std::vector<Rational> g_bernoulli;        // B_0, B_1, ...
std::vector<Rational> g_bernoulli2k;      // C_0, C_1, ...

void extend_bernoulli(int r) {
  // sum_{j=0}^{r} C(r+1, j) B_j = 0  =>  B_r = -(1/C(r+1,r)) sum_{j<r} ...
  while (static_cast<int>(g_bernoulli.size()) <= r) {
    int n = static_cast<int>(g_bernoulli.size());
    if (n == 0) {
      g_bernoulli.emplace_back(1);
      continue;
    }
    Rational acc = 0;
    for (int j = 0; j < n; ++j) acc += Rational(binomial(n + 1, j)) * g_bernoulli[j];
    g_bernoulli.push_back(-acc / Rational(n + 1));
  }
}

void extend_bernoulli2k(int r) {
  // C_r = integral_0^1 x(x-1)...(x-r+1) dx: expand the falling factorial via
  // signed Stirling numbers of the first kind, integrate monomials exactly.
  while (static_cast<int>(g_bernoulli2k.size()) <= r) {
    int n = static_cast<int>(g_bernoulli2k.size());
    if (n == 0) {
      g_bernoulli2k.emplace_back(1);
      continue;
    }
    // coeffs[k] = coefficient of x^k in x(x-1)...(x-n+1)
    std::vector<BigInt> coeffs(static_cast<std::size_t>(n) + 1);
    coeffs[0] = 0;
    coeffs[1] = 1;  // polynomial "x"
    for (int i = 1; i < n; ++i) {
      // multiply by (x - i)
      for (int k = i + 1; k >= 1; --k) coeffs[k] = coeffs[k - 1] - i * coeffs[k];
      coeffs[0] = -i * coeffs[0];
    }
    Rational acc = 0;
    for (int k = 1; k <= n; ++k) acc += Rational(coeffs[k], k + 1);
    g_bernoulli2k.push_back(acc);
  }
}

}  // namespace

Rational bernoulli(int r) {
  if (r < 0) throw domain_error("bernoulli: r must be >= 0");
  std::lock_guard<std::mutex> lock(g_bernoulli_mutex);
  extend_bernoulli(r);
  return g_bernoulli[r];
}

Rational bernoulli_second_kind(int r) {
  if (r < 0) throw domain_error("bernoulli_second_kind: r must be >= 0");
  std::lock_guard<std::mutex> lock(g_bernoulli_mutex);
  extend_bernoulli2k(r);
  return g_bernoulli2k[r];
}

BigInt divisor_power_sum(int l, std::uint64_t n) {
  if (l < 0) throw domain_error("divisor_power_sum: l must be >= 0");
  if (n == 0) throw domain_error("divisor_power_sum: n must be >= 1");
  BigInt total = 0;
  for (std::uint64_t d = 1; d * d <= n; ++d) {
    if (n % d != 0) continue;
    BigInt dp = 1;
    for (int i = 0; i < l; ++i) dp *= d;
    total += dp;
    std::uint64_t e = n / d;
    if (e != d) {
      BigInt ep = 1;
      for (int i = 0; i < l; ++i) ep *= e;
      total += ep;
    }
  }
  return total;
}

std::vector<std::uint64_t> divisor_power_sum_sieve(int l, std::uint64_t n_max) {
  if (l < 0) throw domain_error("divisor_power_sum_sieve: l must be >= 0");
  if (n_max == 0) return {};
  // Overflow guard: sigma_l(n) <= zeta(max(l,2)) * n^l for l >= 2 (<= 1.21 n^3
  // at l=3); for l <= 1 the bound n*(1+ln n) is comfortably below 2^64 for any
  // sieve size that fits in memory. Check n_max^l * 2 against the limit.
  if (l >= 2) {
    long double bound = 1.30L;
    for (int i = 0; i < l; ++i) bound *= static_cast<long double>(n_max);
    if (bound > 1.8e19L) {
      throw domain_error("divisor_power_sum_sieve: sigma values would overflow uint64");
    }
  }
  std::vector<std::uint64_t> sigma(n_max, 0);
  for (std::uint64_t d = 1; d <= n_max; ++d) {
    std::uint64_t dp = 1;
    for (int i = 0; i < l; ++i) dp *= d;
    for (std::uint64_t n = d; n <= n_max; n += d) sigma[n - 1] += dp;
  }
  return sigma;
}

BigInt double_factorial_odd(int m) {
  if (m < 1) throw domain_error("double_factorial_odd: m must be >= 1");
  BigInt r = 1;
  for (int f = 2 * m - 3; f >= 3; f -= 2) r *= f;
  return r;
}

double to_double(const Rational& r) { return r.convert_to<double>(); }
double to_double(const BigInt& i) { return i.convert_to<double>(); }

}  // namespace qlab
