#include "hyperutil/logreg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hyperutil/hypernet.hpp"

namespace hyperutil {
namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

struct Objective {
  const Dataset& data;
  double l2;

  // theta = [w_1..w_F, b]
  double value(const std::vector<double>& theta) const {
    const std::size_t f = data.features();
    double sum = 0.0;
    for (std::size_t r = 0; r < data.rows(); ++r) {
      double z = theta[f];
      for (std::size_t i = 0; i < f; ++i) z += theta[i] * data.x(r, i);
      // BCE in logit form: softplus(z) - y z
      sum += softplus(z) - (data.y[r] == 1 ? z : 0.0);
    }
    double reg = 0.0;
    for (std::size_t i = 0; i < f; ++i) reg += theta[i] * theta[i];
    return sum / static_cast<double>(data.rows()) + l2 * reg;
  }

  std::vector<double> gradient(const std::vector<double>& theta) const {
    const std::size_t f = data.features();
    std::vector<double> g(f + 1, 0.0);
    for (std::size_t r = 0; r < data.rows(); ++r) {
      double z = theta[f];
      for (std::size_t i = 0; i < f; ++i) z += theta[i] * data.x(r, i);
      const double d = sigmoid(z) - static_cast<double>(data.y[r]);
      for (std::size_t i = 0; i < f; ++i) g[i] += d * data.x(r, i);
      g[f] += d;
    }
    const double inv_n = 1.0 / static_cast<double>(data.rows());
    for (std::size_t i = 0; i <= f; ++i) g[i] *= inv_n;
    for (std::size_t i = 0; i < f; ++i) g[i] += 2.0 * l2 * theta[i];
    return g;
  }
};

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

LinearModel fit_logreg(const Dataset& train, const LogRegConfig& cfg, LogRegReport* report) {
  if (!train.has_both_classes()) {
    throw std::invalid_argument("fit_logreg: training data must contain both classes");
  }
  if (!(cfg.l2 >= 0.0)) throw std::invalid_argument("fit_logreg: l2 must be >= 0");
  const std::size_t f = train.features();
  const Objective obj{train, cfg.l2};

  std::vector<double> theta(f + 1, 0.0);
  double value = obj.value(theta);
  double step = 1.0;
  LogRegReport rep;
  std::vector<double> trial(f + 1);
  for (rep.iterations = 0; rep.iterations < cfg.max_iter; ++rep.iterations) {
    const auto g = obj.gradient(theta);
    const double gg = norm2(g);
    rep.grad_norm = std::sqrt(gg);
    if (rep.grad_norm < cfg.grad_tol) {
      rep.converged = true;
      break;
    }
    step = std::min(step * 2.0, 1e6);
    double trial_value = 0.0;
    while (true) {
      for (std::size_t i = 0; i <= f; ++i) trial[i] = theta[i] - step * g[i];
      trial_value = obj.value(trial);
      if (trial_value <= value - 0.5 * step * gg || step < 1e-14) break;
      step *= 0.5;
    }
    if (!(trial_value < value)) {
      // No further decrease is representable.
      rep.converged = rep.grad_norm < cfg.grad_tol;
      break;
    }
    theta.swap(trial);
    value = trial_value;
  }

  LinearModel model;
  model.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(f));
  model.bias = theta[f];
  model.schema_fingerprint = train.schema.fingerprint();
  if (report) *report = rep;
  return model;
}

double predict_logreg(const LinearModel& model, std::span<const double> x) {
  if (x.size() != model.weights.size()) {
    throw std::invalid_argument("predict_logreg: record length mismatch");
  }
  double z = model.bias;
  for (std::size_t i = 0; i < x.size(); ++i) z += model.weights[i] * x[i];
  return clamp_prob(sigmoid(z));
}

std::vector<double> predict_logreg_batch(const LinearModel& model, const Matrix& x) {
  std::vector<double> p(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) p[r] = predict_logreg(model, x.row(r));
  return p;
}

}  // namespace hyperutil
