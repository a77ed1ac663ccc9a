#pragma once

#include <cmath>

#include "qlab/common.hpp"

namespace qlab {

// Arrival rate for the single-server system, service rate normalized to 1.
// Admits (0, 1]; operations that need strict stability call require_stable().
class StableRate {
 public:
  explicit StableRate(double lambda) : lambda_(lambda) {
    if (!(lambda > 0.0) || lambda > 1.0 || !std::isfinite(lambda)) {
      throw domain_error("StableRate: lambda must be in (0, 1]");
    }
  }
  double lambda() const { return lambda_; }
  // Embedded jump-chain probabilities while customers are present.
  double p() const { return lambda_ / (1.0 + lambda_); }  // next event is an arrival
  double q() const { return 1.0 / (1.0 + lambda_); }      // next event is a departure
  // log(lambda), evaluated as log1p(lambda-1) to keep precision near 1.
  double log_lambda() const { return std::log1p(lambda_ - 1.0); }
  void require_stable(const char* op) const {
    if (lambda_ >= 1.0) {
      throw domain_error(std::string(op) + ": requires lambda < 1 (diverges at lambda = 1)");
    }
  }

 private:
  double lambda_;
};

// Arrival rate for the infinite-server system; always stable, any lambda > 0.
class ServerLoad {
 public:
  explicit ServerLoad(double lambda) : lambda_(lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw domain_error("ServerLoad: lambda must be positive and finite");
    }
  }
  double lambda() const { return lambda_; }
  double s() const { return std::sqrt(lambda_); }    // scale of the body/tail split
  double l0() const { return lambda_ - s(); }        // body regime boundary

 private:
  double lambda_;
};

}  // namespace qlab
