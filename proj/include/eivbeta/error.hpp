#pragma once

#include <stdexcept>
#include <string>

namespace eivbeta {

// Argument outside the mathematical domain of a function (non-positive gamma
// argument, response outside (0,1), quadrature order out of range, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The measurement-error model has zero total surrogate variance.
class DegenerateModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Nuisance / calibration estimates imply a non-positive latent variance.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An objective returned a non-finite value at a finite-difference probe.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, int coordinate)
      : std::runtime_error(what), coordinate_(coordinate) {}
  int coordinate() const noexcept { return coordinate_; }

 private:
  int coordinate_;
};

// Weighted design matrix of the residual hat matrix is not of full rank.
class RankDeficiencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace eivbeta
