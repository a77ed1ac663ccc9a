#pragma once

#include <span>
#include <vector>

#include "qlab/numbers.hpp"
#include "qlab/rates.hpp"

namespace qlab {

// Truncated asymptotic-expansion evaluation. first_omitted is the magnitude of
// the next term past the truncation point (the usual error proxy for these
// series; the underlying expansions are asymptotic, not convergent).
struct ExpansionEval {
  double value = 0.0;
  double first_omitted = 0.0;
  int terms_included = 0;
};

// Generic engine: for g(x) = sum_{n>=1} f(n x) with f(x) = sum_r b_r x^r and
// F = integral of f over (0, inf),
//   g(x) ~ F/x + sum_{r>=0} b_r B_{r+1} (-1)^r x^r / (r+1).
// Evaluates order_R series terms. taylor must supply at least order_R
// coefficients; with order_R+1 the error proxy uses the true next term,
// otherwise it falls back to the last included one.
ExpansionEval zagier_expansion(const std::vector<Rational>& taylor, double integral_F,
                               double x, int order_R);

// T_l(lambda) ~ l! zeta(l+1)/h^{l+1}
//             + sum_r (-1)^{r+l-1} B_r B_{r+l} h^{r-1} / (r! (r+l)),  h = -log lambda.
// For odd l only r <= 1 contribute (odd-index Bernoulli zeros) and the full
// finite sum is returned regardless of order_R.
double t_l_expansion(int l, StableRate rate, int order_R);

// T_0(lambda) ~ (1/h) log(1/(1-lambda)) + gamma/h
//             + sum_r (-1)^r B_{r+1} (B_{r+1} - (-1)^{r+1}) h^r / ((r+1) (r+1)!).
// order_R = number of series terms included (r = 0 .. order_R-1).
double t_0_expansion(StableRate rate, int order_R);

// 1/h = (1/(1-lambda)) sum_r (-1)^r C_r (1-lambda)^r / r!   (C_r = Cauchy numbers).
double inv_h_series(StableRate rate, int order_R);

// Retained-terms expansions as lambda -> 1:
//   m=1: log(1/(1-lambda)) + gamma                      + O((1-l) log)
//   m=2: pi^2/(3(1-lambda)) - log(1/(1-lambda)) - (1+gamma) + O((1-l) log)
//   m>=3: leading term m! zeta(m) / (1-lambda)^{m-1}.
double k_moment_expansion(StableRate rate, int m);

// Var[K] ~ pi^2/(3(1-lambda)) - log^2(1/(1-lambda))
//          - (1+2 gamma) log(1/(1-lambda)) - (1 + gamma + gamma^2).
double k_variance_expansion(StableRate rate);

// Leading term of Ex[N^m]: 2^{m-1} (2m-3)!! lambda^{m-1} / (1-lambda)^{2m-1}
// (exact for m = 1).
double n_moment_leading(StableRate rate, int m);

// Two-term large-lambda asymptotic of Ex[L^m]:
// lambda^m/(m+1) + m lambda^{m-1} log(lambda)/2. Requires lambda > 1.
double l_moment_asym(ServerLoad load, int m);

struct Truncation {
  std::size_t index = 0;  // last included term
  double value = 0.0;     // partial sum through that term
};

// Optimal truncation of an asymptotic series: stop just before the terms start
// growing again (first local minimum of the magnitudes). Exact-zero terms are
// transparent: they join the partial sum but never end it, since vanishing
// odd-index Bernoulli coefficients zero out every other term here.
Truncation optimal_truncation(std::span<const double> terms);

}  // namespace qlab
