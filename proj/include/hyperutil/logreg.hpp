#pragma once

#include <span>
#include <string>
#include <vector>

#include "hyperutil/data.hpp"

namespace hyperutil {

// Global linear utility V = w . x + b under a logistic link.
struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::string schema_fingerprint;

  bool operator==(const LinearModel&) const = default;
};

struct LogRegConfig {
  double l2 = 1e-4;
  double grad_tol = 1e-6;
  std::size_t max_iter = 20000;
};

struct LogRegReport {
  std::size_t iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
};

// Minimizes mean BCE + l2 * |w|^2 by full-batch gradient descent with
// Armijo backtracking.
LinearModel fit_logreg(const Dataset& train, const LogRegConfig& cfg = {},
                       LogRegReport* report = nullptr);

double predict_logreg(const LinearModel& model, std::span<const double> x);
std::vector<double> predict_logreg_batch(const LinearModel& model, const Matrix& x);

}  // namespace hyperutil
