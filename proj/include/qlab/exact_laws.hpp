#pragma once

#include <cstdint>

#include "qlab/rates.hpp"
#include "qlab/series.hpp"

namespace qlab {

inline constexpr double kDefaultTol = 1e-12;

// Pr[N = n]: Catalan distribution A_n p^{n-1} q^n. Admits lambda = 1.
double busy_size_pmf(StableRate rate, std::uint64_t n);

// Ex[N(N-1)...(N-m+1)] = 2^{m-1} (2m-3)!! lambda^{m-1} / (1-lambda)^{2m-1}.
double busy_size_factorial_moment(StableRate rate, int m);

// Ex[N^m] via the Stirling transform of the factorial moments.
double busy_size_moment(StableRate rate, int m);

// Pr[K > k] = (1-lambda) lambda^k / (1 - lambda^{k+1}); 1/(k+1) at lambda = 1.
double max_occupancy_tail(StableRate rate, std::uint64_t k);

// Probability that the walk (up w.p. p, down w.p. q = 1-p) started at v hits
// v+w before 0. Closed form ((q/p)^v - 1)/((q/p)^{v+w} - 1) requires p != 1/2;
// the symmetric limit v/(v+w) is returned only when allow_symmetric is set.
double gamblers_ruin(double p, std::uint64_t v, std::uint64_t w,
                     bool allow_symmetric = false);

enum class LambertMethod { kDirect, kDivisor };

// T_l(lambda) = sum_{n>=1} n^l lambda^n / (1 - lambda^n)
//             = sum_{n>=1} sigma_l(n) lambda^n.
// kDirect sums the first form with a geometric tail bound; kDivisor sums the
// second with a sieve and the sigma_l(n) <= n^{l+1} bound.
SeriesValue lambert_T(int l, StableRate rate, double tol = kDefaultTol,
                      LambertMethod method = LambertMethod::kDirect);

enum class MomentMethod { kLambert, kDirect };

// Ex[K^m]. kLambert evaluates ((1-lambda)/lambda) *
// sum_{l<m} C(m,l) (-1)^{m-1-l} T_l(lambda); kDirect sums k^m against the pmf
// differences of the tail.
double max_occupancy_moment(StableRate rate, int m, double tol = kDefaultTol,
                            MomentMethod method = MomentMethod::kLambert);

// l = 0: psi_q(x) = -log(1-q) + log q * sum_{n>=0} q^{n+x}/(1-q^{n+x}).
// l >= 1: the l-th x-derivative, via the term-wise closed form
// (log q)^{l+1} * sum_n S_l(q^{n+x}) with S_l the Eulerian-polynomial kernel.
double q_polygamma(int l, double q, double x, double tol = kDefaultTol);

// Erlang loss denominator via D_0 = 1, D_l = 1 + (l/lambda) D_{l-1}.
double erlang_denominator(ServerLoad load, std::uint64_t l);

// Pr[L > l] = 1 / D_l.
double server_search_tail(ServerLoad load, std::uint64_t l);

// Ex[L^m] by partial summation: sum_{l>=0} ((l+1)^m - l^m) Pr[L > l],
// truncated past lambda + 10 sqrt(lambda) once terms fall below tol * sum.
double server_search_moment(ServerLoad load, int m, double tol = kDefaultTol);

// Two-term body approximation of Pr[L > l]: (1 - l/lambda) + 1/(lambda (1 - l/lambda)).
// Valid only in the body regime l <= lambda - sqrt(lambda); diagnostic use.
double server_search_body_approx(ServerLoad load, std::uint64_t l);

// Pr[I > i] = lambda * Pr[K > i] (identity, used verbatim).
double station_search_tail(StableRate rate, std::uint64_t i);

// Ex[I^m] = lambda * Ex[K^m].
double station_search_moment(StableRate rate, int m, double tol = kDefaultTol);

}  // namespace qlab
