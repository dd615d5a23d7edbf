#pragma once

#include <stdexcept>
#include <string>

namespace deann {

/// Malformed input file. The message names the offending line or byte offset.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal invariant was violated (e.g. corrupt cached norms).
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The request is well-formed but cannot be satisfied, such as a bandwidth
/// target outside the achievable median-KDE range.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double lo, double hi)
      : std::runtime_error(what), lo_(lo), hi_(hi) {}

  double achievable_lo() const noexcept { return lo_; }
  double achievable_hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

}  // namespace deann
