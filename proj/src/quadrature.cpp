#include "eivbeta/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "eivbeta/error.hpp"

namespace eivbeta {
namespace {

struct RecurrenceValue {
  double value;       // orthonormal p_Q(x)
  double derivative;  // p_Q'(x) = sqrt(2Q) p_{Q-1}(x)
};

RecurrenceValue orthonormal_hermite(int order, double x) {
  double previous = 0.0;
  double current = 1.0 / std::pow(std::numbers::pi, 0.25);
  for (int j = 1; j <= order; ++j) {
    const double next = x * std::sqrt(2.0 / j) * current - std::sqrt((j - 1.0) / j) * previous;
    previous = current;
    current = next;
  }
  return {current, std::sqrt(2.0 * order) * previous};
}

}  // namespace

HermiteRule compute_hermite_rule(int order) {
  if (order < 1 || order > kMaxHermiteOrder) {
    throw DomainError("hermite_rule: order must be in [1, " + std::to_string(kMaxHermiteOrder) +
                      "], got " + std::to_string(order));
  }
  HermiteRule rule;
  rule.order = order;
  rule.nodes.assign(order, 0.0);
  rule.weights.assign(order, 0.0);

  if (order == 1) {
    rule.weights[0] = std::sqrt(std::numbers::pi);
  } else {
    Eigen::VectorXd diagonal = Eigen::VectorXd::Zero(order);
    Eigen::VectorXd off_diagonal(order - 1);
    for (int k = 1; k < order; ++k) off_diagonal[k - 1] = std::sqrt(k / 2.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diagonal, off_diagonal, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& guesses = solver.eigenvalues();

    for (int i = 0; i < order; ++i) {
      double x = guesses[i];
      RecurrenceValue rv = orthonormal_hermite(order, x);
      for (int iter = 0; iter < 20; ++iter) {
        const double step = rv.value / rv.derivative;
        x -= step;
        rv = orthonormal_hermite(order, x);
        if (std::fabs(step) <= 1e-15 * std::max(1.0, std::fabs(x))) break;
      }
      rule.nodes[i] = x;
      rule.weights[i] = 2.0 / (rv.derivative * rv.derivative);
    }

    for (int i = 0; i < order / 2; ++i) {
      const int j = order - 1 - i;
      const double node = 0.5 * (rule.nodes[j] - rule.nodes[i]);
      const double weight = 0.5 * (rule.weights[i] + rule.weights[j]);
      rule.nodes[i] = -node;
      rule.nodes[j] = node;
      rule.weights[i] = weight;
      rule.weights[j] = weight;
    }
    if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  }

  const double log_sqrt_pi = 0.5 * std::log(std::numbers::pi);
  rule.log_normalized_weights.resize(order);
  for (int i = 0; i < order; ++i) rule.log_normalized_weights[i] = std::log(rule.weights[i]) - log_sqrt_pi;
  return rule;
}

const HermiteRule& hermite_rule(int order) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<const HermiteRule>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) {
    it = cache.emplace(order, std::make_unique<const HermiteRule>(compute_hermite_rule(order))).first;
  }
  return *it->second;
}

}  // namespace eivbeta
