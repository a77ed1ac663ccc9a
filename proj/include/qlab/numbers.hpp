#pragma once

#include <cstdint>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "qlab/common.hpp"

namespace qlab {

using BigInt = boost::multiprecision::cpp_int;
// Always stored in lowest terms with positive denominator; value equality.
using Rational = boost::multiprecision::cpp_rational;

// n-th Catalan number under 1-based indexing: A_1 = A_2 = 1, A_3 = 2, ...
// A_n = C(2n-2, n-1)/n. Rejects n = 0.
BigInt catalan(int n);

// Stirling number of the second kind {m l}, 0 <= l <= m.
BigInt stirling2(int m, int l);

// Bernoulli number B_r with the t/(e^t - 1) generating convention, so
// B_1 = -1/2. Exact-rational recurrence sum_{j<=r} C(r+1, j) B_j = 0.
Rational bernoulli(int r);

// Bernoulli number of the second kind (Cauchy number of the first kind):
// C_r = integral over [0,1] of the falling factorial x(x-1)...(x-r+1).
Rational bernoulli_second_kind(int r);

// sigma_l(n): sum of l-th powers of the divisors of n. Exact.
BigInt divisor_power_sum(int l, std::uint64_t n);

// Batch variant: sigma_l(1..n_max) by a divisor sieve, O(N log N) additions.
// Result[i] = sigma_l(i+1). Guards against uint64 overflow of n_max^l terms.
std::vector<std::uint64_t> divisor_power_sum_sieve(int l, std::uint64_t n_max);

// (2m-3)!! with (-1)!! = 1!! = 1.
BigInt double_factorial_odd(int m);

// C(n, k), exact.
BigInt binomial(int n, int k);

double to_double(const Rational& r);
double to_double(const BigInt& i);

}  // namespace qlab
