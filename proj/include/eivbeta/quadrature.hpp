#pragma once

#include <cstddef>
#include <vector>

namespace eivbeta {

// Q-point Gauss-Hermite rule for integrals of the form  int e^{-x^2} f(x) dx.
// Nodes ascend and are exactly antisymmetric; weights are exactly symmetric.
struct HermiteRule {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
  // log(weight / sqrt(pi)): the normalised weights used by the likelihood.
  std::vector<double> log_normalized_weights;

  // Sum of weight * f(node). Mirror-image nodes are paired before
  // accumulation, outermost pair first, so odd integrands cancel exactly.
  template <typename F>
  double integrate(F&& f) const {
    const std::size_t q = nodes.size();
    double total = 0.0;
    for (std::size_t i = 0; i < q / 2; ++i) {
      const std::size_t j = q - 1 - i;
      total += weights[i] * f(nodes[i]) + weights[j] * f(nodes[j]);
    }
    if (q % 2 == 1) total += weights[q / 2] * f(nodes[q / 2]);
    return total;
  }
};

inline constexpr int kMaxHermiteOrder = 200;

// Builds a rule from scratch: Golub-Welsch eigenvalues of the Jacobi matrix
// as starting points, Newton polishing on the orthonormal recurrence, and
// weights 2 / (H_Q'(x))^2 in orthonormal form so tail weights keep full
// relative precision. Throws DomainError unless 1 <= Q <= 200.
HermiteRule compute_hermite_rule(int order);

// Cached rule: built once per order and shared; the reference stays valid
// for the life of the program. Thread-safe.
const HermiteRule& hermite_rule(int order);

}  // namespace eivbeta
