#pragma once

#include "eivbeta/simulate.hpp"

namespace testing_support {

// Constant-precision standard design with a given error model.
inline eivbeta::SimDesign design(double kx, int n, bool varying = false, std::uint64_t seed = 7) {
  auto d = eivbeta::SimDesign::standard(varying, kx, n);
  d.seed = seed;
  return d;
}

inline eivbeta::SimDesign error_free_design(int n, bool varying = false, std::uint64_t seed = 7) {
  auto d = eivbeta::SimDesign::standard(varying, 0.75, n);
  d.meas = eivbeta::MeasurementSpec::from_error_variance(0.0, 1.0, 0.0);
  d.seed = seed;
  return d;
}

}  // namespace testing_support
