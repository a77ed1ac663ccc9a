#include <doctest.h>

#include <cmath>

#include "qlab/series.hpp"

using namespace qlab;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("zeta_int: basic values and tail-bound accounting") {
  auto z2 = zeta_int(2, 1e-6);
  CHECK(z2.converged);
  CHECK(std::abs(z2.value - kPi * kPi / 6.0) < 1e-6);
  CHECK(z2.terms_used >= 1);

  auto z40 = zeta_int(40, 1e-12);
  CHECK(z40.converged);
  CHECK(std::abs(z40.value - 1.0) < 1e-12);

  auto z3 = zeta_int(3, 1e-8);
  CHECK(z3.converged);
  CHECK(std::abs(z3.value - 1.2020569031595942854) < 1e-8);

  CHECK_THROWS_AS(zeta_int(1, 1e-6), domain_error);
  CHECK_THROWS_AS(zeta_int(2, 0.0), domain_error);
}

TEST_CASE("zeta_int: doubling the term count stays within tolerance") {
  // The integral tail bound is honest: summing twice as many terms moves the
  // value by less than the advertised tolerance.
  const double tol = 1e-7;
  auto v = zeta_int(3, tol);
  NeumaierSum refined;
  for (std::uint64_t n = 1; n <= 2 * v.terms_used; ++n) {
    refined.add(1.0 / (static_cast<double>(n) * n * n));
  }
  CHECK(std::abs(refined.value() - v.value) < tol * std::abs(v.value));
}

TEST_CASE("zeta_precise: full-precision values") {
  CHECK_EQ(zeta_precise(2), doctest::Approx(kPi * kPi / 6.0).epsilon(1e-15));
  CHECK_EQ(zeta_precise(4), doctest::Approx(kPi * kPi * kPi * kPi / 90.0).epsilon(1e-15));
  CHECK_EQ(zeta_precise(3), doctest::Approx(1.2020569031595942854).epsilon(1e-15));
  CHECK_EQ(zeta_precise(5), doctest::Approx(1.03692775514336992633).epsilon(1e-15));
  CHECK_EQ(zeta_precise(7), doctest::Approx(1.00834927738192282684).epsilon(1e-15));
  CHECK_THROWS_AS(zeta_precise(1), domain_error);
}

TEST_CASE("polylog: known values") {
  auto li1 = polylog(1, 0.5, 1e-14);
  CHECK(li1.converged);
  CHECK_EQ(li1.value, doctest::Approx(std::log(2.0)).epsilon(1e-13));

  // Li_2(1/2) = pi^2/12 - log^2(2)/2
  auto li2 = polylog(2, 0.5, 1e-14);
  const double expected = kPi * kPi / 12.0 - std::log(2.0) * std::log(2.0) / 2.0;
  CHECK_EQ(li2.value, doctest::Approx(expected).epsilon(1e-13));
  CHECK_EQ(li2.value, doctest::Approx(0.582240526465012505903).epsilon(1e-13));

  CHECK_EQ(polylog(2, 0.25, 1e-14).value,
           doctest::Approx(0.2676526390827326069192).epsilon(1e-13));
  CHECK_EQ(polylog(3, 0.5, 1e-14).value,
           doctest::Approx(0.5372131936080402009406).epsilon(1e-13));
}

TEST_CASE("polylog: approaches zeta near lambda = 1") {
  auto li2 = polylog(2, 1.0 - 1e-9, 1e-6);
  CHECK(li2.converged);
  CHECK(std::abs(li2.value - zeta_precise(2)) < 1e-6);
}

TEST_CASE("polylog: domain errors") {
  CHECK_THROWS_AS(polylog(1, 1.0, 1e-10), domain_error);
  CHECK_THROWS_AS(polylog(2, 0.0, 1e-10), domain_error);
  CHECK_THROWS_AS(polylog(2, -0.5, 1e-10), domain_error);
  CHECK_THROWS_AS(polylog(0, 0.5, 1e-10), domain_error);
}

TEST_CASE("SeriesValue: converged results satisfy the last-term contract") {
  // last_term <= tol * |value| must hold on conversion, including at small
  // lambda where the geometric tail bound alone is weaker than the last term.
  const double tol = 1e-10;
  for (double lam : {0.1, 0.3, 0.5, 0.9, 0.999}) {
    auto v = polylog(2, lam, tol);
    CHECK(v.converged);
    CHECK(v.terms_used >= 1);
    CHECK(v.last_term <= tol * std::abs(v.value));
  }
  auto z = zeta_int(40, 1e-12);
  CHECK(z.converged);
  CHECK(z.last_term <= 1e-12 * std::abs(z.value));
}

TEST_CASE("NeumaierSum: compensation beats naive summation") {
  // 0.1 added ten times: compensated sum lands on 1 up to one ulp.
  NeumaierSum s;
  for (int i = 0; i < 10; ++i) s.add(0.1);
  CHECK(std::abs(s.value() - 1.0) < 1e-15);

  // Classic cancellation case: a huge value swamps 1.0 and is then removed.
  NeumaierSum t;
  t.add(1.0);
  t.add(1e100);
  t.add(1.0);
  t.add(-1e100);
  CHECK_EQ(t.value(), 2.0);
}

TEST_CASE("kEulerGamma matches its defining limit") {
  // gamma = lim (sum_{k<=n} 1/k) - log n; with n = 2^20 plus the 1/(2n)
  // and -1/(12n^2) corrections the limit is reproduced to ~1e-13.
  const double n = 1048576.0;
  NeumaierSum harmonic;
  for (double k = 1.0; k <= n; ++k) harmonic.add(1.0 / k);
  double approx = harmonic.value() - std::log(n) - 1.0 / (2.0 * n) + 1.0 / (12.0 * n * n);
  CHECK(std::abs(approx - kEulerGamma) < 1e-12);
}
