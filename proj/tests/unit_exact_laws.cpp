#include <doctest.h>

#include <cmath>

#include "qlab/exact_laws.hpp"

using namespace qlab;

// High-precision reference values, computed independently with 40-digit
// arithmetic and frozen here.
namespace {

struct LambertRef {
  double lambda;
  double t[4];
};
constexpr LambertRef kLambertRefs[] = {
    {0.3, {0.5668658346962735645489, 0.7611639556063734125742, 0.0, 0.0}},
    {0.5,
     {1.606695152415291763783, 2.74403388875948836048, 7.099285178890907114033,
      28.12820766517479018967}},
    {0.7,
     {4.756238765263609344286, 11.56997196115418125015, 52.74969052429083685835,
      401.2484015365827061965}},
    {0.9,
     {27.08648503406816780328, 143.4771236809528606837, 2054.727496926457316359,
      52698.30508718391233164}},
};

constexpr double kExK05[3] = {1.606695152415291763783, 3.881372625103684957177,
                              14.67244902280954802444};
constexpr double kExK09[3] = {3.009609448229796422587, 28.87419581420417261823,
                              640.0930671967312816476};

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace

TEST_CASE("busy_size_pmf: first values at lambda = 1/2 and 1") {
  StableRate half(0.5);
  CHECK_EQ(busy_size_pmf(half, 1), doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK_EQ(busy_size_pmf(half, 2), doctest::Approx(4.0 / 27.0).epsilon(1e-15));
  CHECK_EQ(busy_size_pmf(half, 3), doctest::Approx(16.0 / 243.0).epsilon(1e-15));
  CHECK_EQ(busy_size_pmf(half, 10),
           doctest::Approx(4.283621320468331417203e-3).epsilon(1e-13));

  StableRate critical(1.0);
  CHECK_EQ(busy_size_pmf(critical, 1), doctest::Approx(0.5).epsilon(1e-15));
  CHECK_EQ(busy_size_pmf(critical, 2), doctest::Approx(0.125).epsilon(1e-15));
  CHECK_EQ(busy_size_pmf(critical, 3), doctest::Approx(0.0625).epsilon(1e-15));

  CHECK_THROWS_AS(busy_size_pmf(half, 0), domain_error);
  CHECK_THROWS_AS(StableRate(1.1), domain_error);
  CHECK_THROWS_AS(StableRate(0.0), domain_error);
}

TEST_CASE("busy_size_pmf: logarithmic branch agrees with the exact one") {
  StableRate r(0.9);
  // n = 100 goes through the lgamma evaluation; the reference is exact.
  CHECK(rel_err(busy_size_pmf(r, 100), 2.264853437959802317066e-4) < 1e-12);
  // No seam around the branch switch: the pmf stays strictly decreasing.
  double prev = busy_size_pmf(r, 50);
  for (std::uint64_t n = 51; n <= 90; ++n) {
    double cur = busy_size_pmf(r, n);
    CHECK(cur > 0.0);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("busy_size_pmf: normalization") {
  for (double lam : {0.3, 0.5, 0.9}) {
    StableRate r(lam);
    NeumaierSum sum;
    for (std::uint64_t n = 1; n <= 50'000; ++n) sum.add(busy_size_pmf(r, n));
    CHECK(sum.value() >= 1.0 - 1e-8);
    CHECK(sum.value() <= 1.0 + 1e-12);
  }
}

TEST_CASE("busy_size_factorial_moment: closed form") {
  CHECK_EQ(busy_size_factorial_moment(StableRate(0.5), 1), doctest::Approx(2.0).epsilon(1e-15));
  CHECK_EQ(busy_size_factorial_moment(StableRate(0.9), 1),
           doctest::Approx(10.0).epsilon(1e-14));
  CHECK_EQ(busy_size_factorial_moment(StableRate(0.5), 2), doctest::Approx(8.0).epsilon(1e-15));
  CHECK_EQ(busy_size_factorial_moment(StableRate(0.5), 3),
           doctest::Approx(96.0).epsilon(1e-15));
  CHECK_THROWS_AS(busy_size_factorial_moment(StableRate(1.0), 1), domain_error);
  CHECK_THROWS_AS(busy_size_factorial_moment(StableRate(0.5), 0), domain_error);
}

TEST_CASE("busy_size_moment: Stirling transform against exact rationals") {
  CHECK_EQ(busy_size_moment(StableRate(0.5), 1), busy_size_factorial_moment(StableRate(0.5), 1));
  CHECK_EQ(busy_size_moment(StableRate(0.5), 2), doctest::Approx(10.0).epsilon(1e-14));
  CHECK_EQ(busy_size_moment(StableRate(0.5), 3), doctest::Approx(122.0).epsilon(1e-14));
  CHECK_EQ(busy_size_moment(StableRate(0.9), 2), doctest::Approx(1810.0).epsilon(1e-13));
  CHECK_EQ(busy_size_moment(StableRate(0.9), 3), doctest::Approx(977410.0).epsilon(1e-13));
}

TEST_CASE("busy_size_moment: agrees with direct pmf summation") {
  StableRate r(0.5);
  for (int m = 1; m <= 3; ++m) {
    NeumaierSum direct;
    for (std::uint64_t n = 1; n <= 3000; ++n) {
      double nm = 1.0;
      for (int i = 0; i < m; ++i) nm *= static_cast<double>(n);
      direct.add(nm * busy_size_pmf(r, n));
    }
    CHECK(rel_err(direct.value(), busy_size_moment(r, m)) < 1e-10);
  }
}

TEST_CASE("max_occupancy_tail: closed form and critical case") {
  StableRate half(0.5);
  CHECK_EQ(max_occupancy_tail(half, 0), 1.0);
  CHECK_EQ(max_occupancy_tail(half, 1), doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_EQ(max_occupancy_tail(half, 2), doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK_EQ(max_occupancy_tail(half, 3), doctest::Approx(1.0 / 15.0).epsilon(1e-15));

  StableRate critical(1.0);
  for (std::uint64_t k = 0; k <= 5; ++k) {
    CHECK_EQ(max_occupancy_tail(critical, k),
             doctest::Approx(1.0 / static_cast<double>(k + 1)).epsilon(1e-15));
  }

  StableRate high(0.9);
  double prev = 2.0;
  for (std::uint64_t k = 0; k <= 100; ++k) {
    double cur = max_occupancy_tail(high, k);
    CHECK(cur <= prev);
    CHECK(cur >= 0.0);
    prev = cur;
  }
}

TEST_CASE("max_occupancy_tail: stable near lambda = 1 for large k") {
  // 1 - lambda^{k+1} is prone to cancellation; the expm1 evaluation keeps the
  // tail consistent with the ruin form even at k = 10^4.
  StableRate r(0.999);
  double p = r.p();
  for (std::uint64_t k : {100ull, 1000ull, 10000ull}) {
    double tail = max_occupancy_tail(r, k);
    double ruin = gamblers_ruin(p, 1, k);
    CHECK(tail > 0.0);
    // The two stable evaluations accumulate rounding differently at k = 1e4;
    // instability would show up orders of magnitude above this.
    CHECK(rel_err(tail, ruin) < 1e-11);
  }
}

TEST_CASE("gamblers_ruin: closed form, orientation, and symmetric branch") {
  CHECK_EQ(gamblers_ruin(1.0 / 3.0, 1, 1), doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_EQ(gamblers_ruin(1.0 / 3.0, 1, 2), doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  // Up-biased walk from v=1 reaches the top with probability p when w=1.
  CHECK_EQ(gamblers_ruin(2.0 / 3.0, 1, 1), doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(gamblers_ruin(0.6, 2, 3) > 2.0 / 5.0);

  CHECK_EQ(gamblers_ruin(0.5, 1, 3, true), doctest::Approx(0.25).epsilon(1e-15));
  CHECK_THROWS_AS(gamblers_ruin(0.5, 1, 3), domain_error);
  CHECK_THROWS_AS(gamblers_ruin(0.0, 1, 1), domain_error);
  CHECK_THROWS_AS(gamblers_ruin(1.0, 1, 1), domain_error);
  CHECK_THROWS_AS(gamblers_ruin(0.3, 0, 1), domain_error);
  CHECK_THROWS_AS(gamblers_ruin(0.3, 1, 0), domain_error);
}

TEST_CASE("max_occupancy_tail equals the ruin probability") {
  for (double lam : {0.3, 0.5, 0.9}) {
    StableRate r(lam);
    for (std::uint64_t k = 1; k <= 20; ++k) {
      CHECK(std::abs(max_occupancy_tail(r, k) - gamblers_ruin(r.p(), 1, k)) <= 1e-15);
    }
  }
}

TEST_CASE("lambert_T: both methods reproduce the frozen references") {
  for (const auto& ref : kLambertRefs) {
    StableRate r(ref.lambda);
    int l_max = ref.lambda == 0.3 ? 1 : 3;
    for (int l = 0; l <= l_max; ++l) {
      auto direct = lambert_T(l, r, 1e-13, LambertMethod::kDirect);
      auto divisor = lambert_T(l, r, 1e-13, LambertMethod::kDivisor);
      CHECK(direct.converged);
      CHECK(divisor.converged);
      CHECK(rel_err(direct.value, ref.t[l]) < 1e-12);
      CHECK(rel_err(divisor.value, ref.t[l]) < 1e-12);
      CHECK(rel_err(direct.value, divisor.value) < 1e-12);
    }
  }
}

TEST_CASE("lambert_T: small-lambda limit and domain errors") {
  auto v = lambert_T(0, StableRate(1e-8), 1e-13);
  CHECK(rel_err(v.value, 1e-8) < 1e-7);  // T_0 = lambda + O(lambda^2)
  CHECK_THROWS_AS(lambert_T(0, StableRate(1.0), 1e-12), domain_error);
  CHECK_THROWS_AS(lambert_T(-1, StableRate(0.5), 1e-12), domain_error);
  CHECK_THROWS_AS(lambert_T(0, StableRate(0.5), 0.0), domain_error);
}

TEST_CASE("max_occupancy_moment: frozen references, both methods") {
  for (int m = 1; m <= 3; ++m) {
    double want05 = kExK05[m - 1];
    double want09 = kExK09[m - 1];
    CHECK(rel_err(max_occupancy_moment(StableRate(0.5), m), want05) < 5e-13);
    CHECK(rel_err(max_occupancy_moment(StableRate(0.9), m), want09) < 5e-13);
    CHECK(rel_err(max_occupancy_moment(StableRate(0.5), m, 1e-12, MomentMethod::kDirect),
                  want05) < 1e-10);
    CHECK(rel_err(max_occupancy_moment(StableRate(0.9), m, 1e-12, MomentMethod::kDirect),
                  want09) < 1e-10);
  }
  // Deep into the lambda -> 1 regime the Lambert path must still meet the
  // frozen value.
  CHECK(rel_err(max_occupancy_moment(StableRate(0.999), 1), 7.488466335427099627274) < 1e-12);
  CHECK(rel_err(max_occupancy_moment(StableRate(0.999), 2), 3281.379524790828021841) < 1e-12);
}

TEST_CASE("max_occupancy_moment: K -> 1 as lambda -> 0") {
  CHECK_EQ(max_occupancy_moment(StableRate(1e-6), 1), doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("q_polygamma: digamma identity against the Lambert sum") {
  for (double lam : {0.3, 0.5}) {
    double psi = q_polygamma(0, lam, 1.0, 1e-13);
    double t0 = (psi + std::log(1.0 - lam)) / std::log(lam);
    CHECK(std::abs(t0 - lambert_T(0, StableRate(lam), 1e-13).value) < 1e-10);
  }
}

TEST_CASE("q_polygamma: derivative identities against the Lambert sums") {
  for (double lam : {0.3, 0.5}) {
    for (int l = 1; l <= 2; ++l) {
      double psi_l = q_polygamma(l, lam, 1.0, 1e-13);
      double denom = std::pow(std::log(lam), l + 1);
      CHECK(std::abs(psi_l / denom - lambert_T(l, StableRate(lam), 1e-13).value) < 1e-9);
    }
  }
}

TEST_CASE("q_polygamma: shift recurrences") {
  // psi_q(x+1) - psi_q(x) = -log(q) q^x/(1-q^x); differentiating once more
  // gives -(log q)^2 q^x/(1-q^x)^2.
  const double q = 0.5;
  double d0 = q_polygamma(0, q, 2.0, 1e-13) - q_polygamma(0, q, 1.0, 1e-13);
  CHECK_EQ(d0, doctest::Approx(std::log(2.0)).epsilon(1e-12));
  double d1 = q_polygamma(1, q, 2.0, 1e-13) - q_polygamma(1, q, 1.0, 1e-13);
  CHECK_EQ(d1, doctest::Approx(-2.0 * std::log(2.0) * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("q_polygamma: tolerance stability and domain errors") {
  double coarse = q_polygamma(0, 0.5, 1.0, 1e-6);
  double fine = q_polygamma(0, 0.5, 1.0, 1e-13);
  CHECK(std::abs(coarse - fine) < 1e-5);
  CHECK_THROWS_AS(q_polygamma(0, 0.0, 1.0, 1e-10), domain_error);
  CHECK_THROWS_AS(q_polygamma(0, 1.0, 1.0, 1e-10), domain_error);
  CHECK_THROWS_AS(q_polygamma(0, 0.5, 0.0, 1e-10), domain_error);
  CHECK_THROWS_AS(q_polygamma(-1, 0.5, 1.0, 1e-10), domain_error);
}

TEST_CASE("erlang_denominator: recurrence equals the factorial sum") {
  ServerLoad two(2.0);
  CHECK_EQ(erlang_denominator(two, 0), 1.0);
  CHECK_EQ(erlang_denominator(two, 1), doctest::Approx(1.5).epsilon(1e-15));
  CHECK_EQ(erlang_denominator(two, 2), doctest::Approx(2.5).epsilon(1e-15));

  for (double lam : {0.5, 2.0, 50.0}) {
    ServerLoad load(lam);
    for (std::uint64_t l = 0; l <= 20; ++l) {
      // D_l = sum_{k<=l} l!/(l-k)! / lambda^k, evaluated as the product form
      // to stay in range.
      NeumaierSum sum;
      double term = 1.0;
      sum.add(term);
      for (std::uint64_t k = 1; k <= l; ++k) {
        term *= static_cast<double>(l - k + 1) / lam;
        sum.add(term);
      }
      CHECK(rel_err(erlang_denominator(load, l), sum.value()) < 1e-12);
    }
  }
}

TEST_CASE("server_search_tail: values and monotonicity") {
  CHECK_EQ(server_search_tail(ServerLoad(0.25), 0), 1.0);
  CHECK_EQ(server_search_tail(ServerLoad(2.0), 1), doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK_EQ(server_search_tail(ServerLoad(2.0), 2), doctest::Approx(0.4).epsilon(1e-15));

  ServerLoad fifty(50.0);
  CHECK(rel_err(server_search_tail(fifty, 5), 0.9021203205070395407564) < 1e-12);
  CHECK(rel_err(server_search_tail(fifty, 20), 0.6120946512804443083314) < 1e-12);
  CHECK(rel_err(server_search_tail(fifty, 50), 0.1047874555035522062709) < 1e-12);
  CHECK(rel_err(server_search_tail(fifty, 70), 0.001367928087343059290795) < 1e-12);
  CHECK(rel_err(server_search_tail(fifty, 100), 1.630319352403648749894e-10) < 1e-11);

  double prev = 2.0;
  for (std::uint64_t l = 0; l <= 200; ++l) {
    double cur = server_search_tail(fifty, l);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("server_search_moment: frozen references") {
  CHECK(rel_err(server_search_moment(ServerLoad(50.0), 1), 27.53102950825716993873) < 1e-12);
  CHECK(rel_err(server_search_moment(ServerLoad(50.0), 2), 1037.288646718299839648) < 1e-12);
  CHECK(rel_err(server_search_moment(ServerLoad(20.0), 1), 12.157562142760723289) < 1e-12);
  CHECK(rel_err(server_search_moment(ServerLoad(100.0), 1), 52.833261714613875674) < 1e-12);
  CHECK(rel_err(server_search_moment(ServerLoad(200.0), 1), 103.14779723952977474) < 1e-12);
  CHECK(rel_err(server_search_moment(ServerLoad(1000.0), 1), 503.9088712566133751817) < 1e-12);
  // lambda -> 0: the first server is almost always idle, so L -> 1.
  CHECK_EQ(server_search_moment(ServerLoad(1e-9), 1), doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("server_search_body_approx: substitution values and error decay") {
  CHECK_EQ(server_search_body_approx(ServerLoad(100.0), 0), doctest::Approx(1.01).epsilon(1e-15));
  CHECK_EQ(server_search_body_approx(ServerLoad(100.0), 50),
           doctest::Approx(0.52).epsilon(1e-15));
  // At matched body position l = lambda/2 the error is O(1/lambda): doubling
  // lambda twice should shrink it by roughly 4x; demand at least 2x.
  double err100 =
      std::abs(server_search_body_approx(ServerLoad(100.0), 50) - server_search_tail(ServerLoad(100.0), 50));
  double err400 = std::abs(server_search_body_approx(ServerLoad(400.0), 200) -
                           server_search_tail(ServerLoad(400.0), 200));
  CHECK(err400 < err100 / 2.0);
  CHECK_THROWS_AS(server_search_body_approx(ServerLoad(100.0), 91), domain_error);
}

TEST_CASE("station_search_tail: factor-of-lambda identity") {
  StableRate half(0.5);
  CHECK_EQ(station_search_tail(half, 0), doctest::Approx(0.5).epsilon(1e-15));
  CHECK_EQ(station_search_tail(half, 1), doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  for (double lam : {0.3, 0.9}) {
    StableRate r(lam);
    for (std::uint64_t i = 0; i <= 50; ++i) {
      CHECK_EQ(station_search_tail(r, i), lam * max_occupancy_tail(r, i));
    }
  }
  CHECK_THROWS_AS(station_search_tail(StableRate(1.0), 0), domain_error);
}

TEST_CASE("station_search_moment: identity and direct summation") {
  CHECK(rel_err(station_search_moment(StableRate(0.5), 1), 0.5 * kExK05[0]) < 1e-12);
  // Ex[I^m] = sum_i ((i+1)^m - i^m) Pr[I > i].
  StableRate r(0.9);
  NeumaierSum direct;
  for (std::uint64_t i = 0; i <= 2000; ++i) {
    double ip1 = static_cast<double>(i + 1);
    double ii = static_cast<double>(i);
    direct.add((ip1 * ip1 - ii * ii) * station_search_tail(r, i));
  }
  CHECK(std::abs(direct.value() - station_search_moment(r, 2)) < 1e-10);
}
