#include "eivbeta/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace eivbeta {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::for_stream(std::uint64_t seed, std::uint64_t index) { return Rng(splitmix64(seed ^ splitmix64(index))); }

double Rng::uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::normal(double mean, double variance) { return mean + std::sqrt(variance) * normal(); }

double Rng::log_gamma_variate(double shape) {
  if (shape < 1.0) {
    // Gamma(a) = Gamma(a + 1) * U^(1/a), kept on the log scale
    const double boosted = log_gamma_variate(shape + 1.0);
    return boosted + std::log(uniform()) / shape;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return std::log(d * v);
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return std::log(d * v);
  }
}

double Rng::beta(double mu, double phi) {
  const double lg1 = log_gamma_variate(mu * phi);
  const double lg2 = log_gamma_variate((1.0 - mu) * phi);
  // g1 / (g1 + g2) = 1 / (1 + exp(lg2 - lg1))
  const double y = 1.0 / (1.0 + std::exp(lg2 - lg1));
  return std::clamp(y, 1e-12, 1.0 - 1e-12);
}

}  // namespace eivbeta
