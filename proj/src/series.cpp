#include "qlab/series.hpp"

#include <algorithm>
#include <cmath>

#include "qlab/numbers.hpp"

namespace qlab {

SeriesValue zeta_int(int m, double tol) {
  if (m <= 1) throw domain_error("zeta_int: m must be >= 2 (series diverges)");
  if (!(tol > 0)) throw domain_error("zeta_int: tol must be positive");
  NeumaierSum acc;
  SeriesValue out;
  for (std::uint64_t n = 1; n <= kSeriesTermCap; ++n) {
    double term = std::pow(static_cast<double>(n), -static_cast<double>(m));
    acc.add(term);
    out.terms_used = n;
    out.last_term = term;
    // Remainder past n is below the integral of x^-m from n to infinity.
    double tail_bound = std::pow(static_cast<double>(n), 1.0 - m) / (m - 1);
    double sum = acc.value();
    double gate = tol * std::max(std::abs(sum), kSeriesValueFloor);
    // The bound must clear tol absolutely (values exceed 1, so the relative
    // gate alone would leave an error of tol * zeta(m)).
    if (tail_bound <= std::min(tol, gate) && term <= gate) {
      out.value = sum;
      out.converged = true;
      return out;
    }
  }
  throw convergence_error("zeta_int: term cap hit before meeting tolerance");
}

double zeta_precise(int m) {
  if (m <= 1) throw domain_error("zeta_precise: m must be >= 2");
  if (m >= 55) {
    // 3^-55 < 2^-87: two terms already saturate double precision.
    return 1.0 + std::pow(2.0, -static_cast<double>(m)) +
           std::pow(3.0, -static_cast<double>(m));
  }
  if (m % 2 == 0) {
    // zeta(2k) = (2 pi)^{2k} |B_{2k}| / (2 (2k)!)
    Rational b = bernoulli(m);
    double fact = 1.0;
    for (int i = 2; i <= m; ++i) fact *= i;
    return std::pow(2.0 * M_PI, m) * std::abs(to_double(b)) / (2.0 * fact);
  }
  // Euler-Maclaurin around the partial sum to N:
  // sum_{n<N} n^-m + N^-m/2 + N^{1-m}/(m-1)
  //   + sum_j B_{2j}/(2j)! * m(m+1)...(m+2j-2) * N^{-m-2j+1}
  constexpr int N = 16;
  constexpr int J = 12;
  NeumaierSum acc;
  for (int n = 1; n < N; ++n) acc.add(std::pow(static_cast<double>(n), -static_cast<double>(m)));
  acc.add(0.5 * std::pow(static_cast<double>(N), -static_cast<double>(m)));
  acc.add(std::pow(static_cast<double>(N), 1.0 - m) / (m - 1));
  for (int j = 1; j <= J; ++j) {
    double coeff = to_double(bernoulli(2 * j));
    double fact = 1.0;
    for (int i = 2; i <= 2 * j; ++i) fact *= i;
    double rising = 1.0;
    for (int i = 0; i < 2 * j - 1; ++i) rising *= (m + i);
    acc.add(coeff / fact * rising * std::pow(static_cast<double>(N), -static_cast<double>(m) - 2 * j + 1));
  }
  return acc.value();
}

SeriesValue polylog(int k, double lambda, double tol) {
  if (k < 1) throw domain_error("polylog: k must be >= 1");
  if (!(lambda > 0.0) || lambda >= 1.0) {
    throw domain_error(k == 1 ? "polylog: lambda must be in (0,1); Li_1 diverges at 1"
                              : "polylog: lambda must be in (0,1)");
  }
  if (!(tol > 0)) throw domain_error("polylog: tol must be positive");
  NeumaierSum acc;
  SeriesValue out;
  double lp = 1.0;  // lambda^n maintained incrementally
  for (std::uint64_t n = 1; n <= kSeriesTermCap; ++n) {
    lp *= lambda;
    double term = lp / std::pow(static_cast<double>(n), static_cast<double>(k));
    acc.add(term);
    out.terms_used = n;
    out.last_term = std::abs(term);
    // Successive term ratio is <= lambda, so the tail is below term * lambda/(1-lambda).
    // The last-term condition keeps the SeriesValue contract honest when
    // lambda < 1/2 and the geometric factor shrinks the bound below the term.
    double tail_bound = std::abs(term) * lambda / (1.0 - lambda);
    double sum = acc.value();
    double gate = tol * std::max(std::abs(sum), kSeriesValueFloor);
    if (tail_bound <= std::min(tol, gate) && std::abs(term) <= gate) {
      out.value = sum;
      out.converged = true;
      return out;
    }
  }
  throw convergence_error("polylog: term cap hit before meeting tolerance");
}

}  // namespace qlab
