#include "qlab/asymptotics.hpp"

#include <cmath>

#include "qlab/series.hpp"

namespace qlab {

namespace {

double int_pow(double base, int e) {
  if (e < 0) return 1.0 / int_pow(base, -e);
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

Rational factorial_rational(int n) {
  Rational r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

}  // namespace

ExpansionEval zagier_expansion(const std::vector<Rational>& taylor, double integral_F,
                               double x, int order_R) {
  if (!(x > 0.0)) throw domain_error("zagier_expansion: x must be positive");
  if (order_R < 1) throw domain_error("zagier_expansion: order_R must be >= 1");
  if (static_cast<int>(taylor.size()) < order_R) {
    throw domain_error("zagier_expansion: need at least order_R Taylor coefficients");
  }
  ExpansionEval out;
  NeumaierSum acc;
  acc.add(integral_F / x);
  double xp = 1.0;
  double last = std::abs(integral_F / x);
  for (int r = 0; r < order_R; ++r) {
    // coefficient b_r B_{r+1} (-1)^r / (r+1), assembled exactly
    Rational c = taylor[r] * bernoulli(r + 1) / (r + 1);
    double term = to_double(c) * xp * ((r % 2 == 0) ? 1.0 : -1.0);
    acc.add(term);
    last = std::abs(term);
    xp *= x;
  }
  out.value = acc.value();
  out.terms_included = order_R;
  if (static_cast<int>(taylor.size()) > order_R) {
    Rational c = taylor[order_R] * bernoulli(order_R + 1) / (order_R + 1);
    out.first_omitted = std::abs(to_double(c)) * xp;
  } else {
    out.first_omitted = last;
  }
  return out;
}

double t_l_expansion(int l, StableRate rate, int order_R) {
  rate.require_stable("t_l_expansion");
  if (l < 1) throw domain_error("t_l_expansion: l must be >= 1 (see t_0_expansion)");
  if (order_R < 1) throw domain_error("t_l_expansion: order_R must be >= 1");
  const double h = -rate.log_lambda();
  NeumaierSum acc;
  double lead = 1.0;
  for (int i = 2; i <= l; ++i) lead *= i;
  acc.add(lead * zeta_precise(l + 1) / int_pow(h, l + 1));
  // Correction series; for odd l everything past r = 1 vanishes (odd-index
  // Bernoulli zeros), so the finite closed form is returned whatever order_R is.
  const int r_max = (l % 2 == 1) ? 2 : order_R;
  for (int r = 0; r < r_max; ++r) {
    Rational b = bernoulli(r) * bernoulli(r + l);
    if (b == 0) continue;
    Rational c = b / (factorial_rational(r) * (r + l));
    double sign = ((r + l - 1) % 2 == 0) ? 1.0 : -1.0;
    acc.add(sign * to_double(c) * int_pow(h, r - 1));
  }
  return acc.value();
}

double t_0_expansion(StableRate rate, int order_R) {
  rate.require_stable("t_0_expansion");
  if (order_R < 1) throw domain_error("t_0_expansion: order_R must be >= 1");
  const double lam = rate.lambda();
  const double h = -rate.log_lambda();
  NeumaierSum acc;
  acc.add((-std::log1p(-lam) + kEulerGamma) / h);
  double hp = 1.0;
  for (int r = 0; r < order_R; ++r) {
    Rational b1 = bernoulli(r + 1);
    int parity = ((r + 1) % 2 == 0) ? 1 : -1;  // (-1)^{r+1}
    Rational c = b1 * (b1 - parity) / ((r + 1) * factorial_rational(r + 1));
    double sign = (r % 2 == 0) ? 1.0 : -1.0;
    acc.add(sign * to_double(c) * hp);
    hp *= h;
  }
  return acc.value();
}

double inv_h_series(StableRate rate, int order_R) {
  rate.require_stable("inv_h_series");
  if (order_R < 1) throw domain_error("inv_h_series: order_R must be >= 1");
  const double one_minus = 1.0 - rate.lambda();
  NeumaierSum acc;
  double xp = 1.0;
  for (int r = 0; r < order_R; ++r) {
    Rational c = bernoulli_second_kind(r) / factorial_rational(r);
    double sign = (r % 2 == 0) ? 1.0 : -1.0;
    acc.add(sign * to_double(c) * xp);
    xp *= one_minus;
  }
  return acc.value() / one_minus;
}

double k_moment_expansion(StableRate rate, int m) {
  rate.require_stable("k_moment_expansion");
  if (m < 1) throw domain_error("k_moment_expansion: m must be >= 1");
  const double lam = rate.lambda();
  const double log_inv = -std::log1p(-lam);  // log(1/(1-lambda))
  if (m == 1) return log_inv + kEulerGamma;
  if (m == 2) {
    return M_PI * M_PI / (3.0 * (1.0 - lam)) - log_inv - (1.0 + kEulerGamma);
  }
  double fact = 1.0;
  for (int i = 2; i <= m; ++i) fact *= i;
  return fact * zeta_precise(m) / int_pow(1.0 - lam, m - 1);
}

double k_variance_expansion(StableRate rate) {
  rate.require_stable("k_variance_expansion");
  const double lam = rate.lambda();
  const double log_inv = -std::log1p(-lam);
  return M_PI * M_PI / (3.0 * (1.0 - lam)) - log_inv * log_inv -
         (1.0 + 2.0 * kEulerGamma) * log_inv -
         (1.0 + kEulerGamma + kEulerGamma * kEulerGamma);
}

double n_moment_leading(StableRate rate, int m) {
  rate.require_stable("n_moment_leading");
  if (m < 1) throw domain_error("n_moment_leading: m must be >= 1");
  const double lam = rate.lambda();
  double dfact = 1.0;
  for (int f = 2 * m - 3; f >= 3; f -= 2) dfact *= f;
  return int_pow(2.0, m - 1) * dfact * int_pow(lam, m - 1) / int_pow(1.0 - lam, 2 * m - 1);
}

double l_moment_asym(ServerLoad load, int m) {
  if (m < 1) throw domain_error("l_moment_asym: m must be >= 1");
  const double lam = load.lambda();
  if (lam <= 1.0) {
    throw domain_error("l_moment_asym: requires lambda > 1 (large-load regime)");
  }
  return int_pow(lam, m) / (m + 1) + m * int_pow(lam, m - 1) * std::log(lam) / 2.0;
}

Truncation optimal_truncation(std::span<const double> terms) {
  if (terms.empty()) throw domain_error("optimal_truncation: empty sequence");
  // Find the first upturn of nonzero magnitudes; include everything before it.
  std::size_t stop = terms.size() - 1;
  double prev_mag = -1.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    double mag = std::abs(terms[i]);
    if (mag == 0.0) continue;
    if (prev_mag >= 0.0 && mag > prev_mag) {
      stop = i - 1;
      break;
    }
    prev_mag = mag;
  }
  NeumaierSum acc;
  for (std::size_t i = 0; i <= stop; ++i) acc.add(terms[i]);
  return Truncation{stop, acc.value()};
}

}  // namespace qlab
