#pragma once

#include <cmath>
#include <cstdint>

#include "qlab/common.hpp"

namespace qlab {

// Truncated evaluation of an infinite sum, with enough metadata to audit the
// truncation decision afterwards.
struct SeriesValue {
  double value = 0.0;
  std::uint64_t terms_used = 0;
  double last_term = 0.0;  // magnitude of the final included term
  bool converged = false;
};

// Hard cap for any series loop; hitting it without meeting the tolerance is an
// error, never a silent truncation.
inline constexpr std::uint64_t kSeriesTermCap = 100'000'000;

// Relative-tolerance floor so that near-zero sums don't demand absurd term
// counts: convergence tests compare tail bounds to tol * max(|sum|, floor).
inline constexpr double kSeriesValueFloor = 1e-300;

// Euler-Mascheroni constant (20 significant digits, independently derived).
inline constexpr double kEulerGamma = 0.57721566490153286061;

// Neumaier variant of compensated summation: cheap and immune to the classic
// Kahan failure case where the next term is larger than the running sum.
class NeumaierSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// zeta(m) = sum n^-m, m >= 2, truncated when the integral tail bound
// int_N^inf x^-m dx drops below tol * max(|sum|, floor). Errors if the cap is
// hit first (m = 2 cannot honestly reach tolerances much below 1e-8 this way;
// see zeta_precise for the workhorse used by the asymptotic expansions).
SeriesValue zeta_int(int m, double tol);

// Full-double-precision zeta(m) for m >= 2: Bernoulli closed form for even m,
// Euler-Maclaurin-corrected partial sum otherwise.
double zeta_precise(int m);

// Li_k(lambda) = sum lambda^n / n^k over n >= 1, 0 < lambda < 1, k >= 1;
// geometric tail bound drives truncation.
SeriesValue polylog(int k, double lambda, double tol);

}  // namespace qlab
