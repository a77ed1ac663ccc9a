#pragma once

#include <stdexcept>
#include <string>

namespace qlab {

// Domain/precondition violations (CLI exit code 2).
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A series failed to meet its tolerance within the term cap (CLI exit code 2).
class convergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A cross-check that must hold by construction failed (CLI exit code 4).
class internal_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace qlab
