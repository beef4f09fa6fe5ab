#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace eivbeta {

// Seedable generator with deterministic stream derivation: the stream for
// (seed, index) is an mt19937_64 seeded with splitmix64(seed ^ splitmix64(index)).
// The samplers below are implemented here rather than taken from <random>
// so draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  static Rng for_stream(std::uint64_t seed, std::uint64_t index);
  static constexpr std::string_view description() {
    return "mt19937_64; stream seed = splitmix64(seed ^ splitmix64(index)); "
           "normal: Box-Muller; gamma: Marsaglia-Tsang (log-space boost for shape < 1)";
  }

  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double normal(double mean, double variance);
  // log of a Gamma(shape, 1) variate.
  double log_gamma_variate(double shape);
  // Beta(mu, phi) through two gamma variates, clamped to [1e-12, 1 - 1e-12].
  double beta(double mu, double phi);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace eivbeta
