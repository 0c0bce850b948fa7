#include "hyperutil/ensemble.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>
#include <set>
#include <stdexcept>

namespace hyperutil {
namespace {

Matrix member_probs(const EnsembleModel& ens, const Matrix& x) {
  const std::size_t m = ens.size();
  Matrix probs(x.rows(), m);
  for (std::size_t k = 0; k < m; ++k) {
    const auto p = predict_prob_batch(ens.members[k], x);
    for (std::size_t r = 0; r < x.rows(); ++r) probs(r, k) = p[r];
  }
  return probs;
}

Matrix single_row(std::span<const double> x) {
  return Matrix(1, x.size(), std::vector<double>(x.begin(), x.end()));
}

}  // namespace

void EnsembleModel::validate() const {
  if (members.empty()) throw std::invalid_argument("ensemble has no members");
  if (member_seeds.size() != members.size()) {
    throw std::invalid_argument("ensemble seed list does not match member count");
  }
  std::set<std::uint64_t> seen(member_seeds.begin(), member_seeds.end());
  if (seen.size() != member_seeds.size()) throw std::invalid_argument("ensemble member seeds repeat");
  for (const auto& m : members) {
    if (!(m.arch == members.front().arch)) {
      throw std::invalid_argument("ensemble members have different architectures");
    }
  }
}

EnsembleModel train_ensemble(const Dataset& train, std::size_t m, std::uint64_t base_seed,
                             const TrainConfig& cfg, std::vector<TrainReport>* reports) {
  if (m < 1) throw std::invalid_argument("train_ensemble: need at least one member");
  if (!train.has_both_classes()) {
    throw std::invalid_argument("train_ensemble: training data must contain both classes");
  }
  cfg.validate();

  std::vector<std::optional<HyperMember>> trained(m);
  std::vector<TrainReport> local_reports(m);
  std::vector<std::exception_ptr> errors(m);
  const auto count = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    const std::uint64_t seed = base_seed + idx;
    try {
      Dataset fit = train;
      Dataset validation;
      if (cfg.validation_fraction > 0.0) {
        const auto parts = split_indices(train.rows(), mix_seed(seed, 0x7a1), cfg.validation_fraction);
        fit = subset(train, parts.train);
        validation = subset(train, parts.test);
      }
      Dataset segment = bootstrap_sample(fit, seed);
      if (!segment.has_both_classes()) segment = fit;
      trained[idx] = train_member(segment, validation, cfg, seed, &local_reports[idx]);
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  for (std::size_t k = 0; k < m; ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const std::exception& e) {
      throw std::runtime_error("ensemble member " + std::to_string(k) + ": " + e.what());
    }
  }

  EnsembleModel ens;
  ens.config = cfg;
  ens.schema_fingerprint = train.schema.fingerprint();
  for (std::size_t k = 0; k < m; ++k) {
    ens.members.push_back(std::move(*trained[k]));
    ens.member_seeds.push_back(base_seed + k);
  }
  if (reports) *reports = std::move(local_reports);
  return ens;
}

double symmetric_mean(std::span<double> values) {
  if (values.empty()) throw std::invalid_argument("mean of no values");
  std::sort(values.begin(), values.end());
  double mean = values[0];
  for (std::size_t k = 1; k < values.size(); ++k) {
    mean += (values[k] - mean) / static_cast<double>(k + 1);
  }
  return std::clamp(mean, values.front(), values.back());
}

std::vector<Matrix> member_outputs(const EnsembleModel& ens, const Matrix& x) {
  ens.validate();
  std::vector<Matrix> outs;
  outs.reserve(ens.size());
  for (const auto& member : ens.members) outs.push_back(hyper_forward_batch(member, x));
  return outs;
}

Matrix avg_weights_batch(const EnsembleModel& ens, const Matrix& x) {
  const auto outs = member_outputs(ens, x);
  Matrix avg(x.rows(), x.cols() + 1);
  std::vector<double> vals(ens.size());
  for (std::size_t i = 0; i < avg.size(); ++i) {
    for (std::size_t k = 0; k < outs.size(); ++k) vals[k] = outs[k].data()[i];
    avg.data()[i] = symmetric_mean(vals);
  }
  return avg;
}

InstanceUtility avg_weights(const EnsembleModel& ens, std::span<const double> x) {
  const Matrix avg = avg_weights_batch(ens, single_row(x));
  InstanceUtility u;
  u.weights.assign(avg.row(0).begin(), avg.row(0).begin() + static_cast<std::ptrdiff_t>(x.size()));
  u.bias = avg(0, x.size());
  return u;
}

std::vector<Uncertainty> predict_uncertainty_batch(const EnsembleModel& ens, const Matrix& x) {
  ens.validate();
  const Matrix probs = member_probs(ens, x);
  std::vector<Uncertainty> out(x.rows());
  std::vector<double> vals(ens.size());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::copy(probs.row(r).begin(), probs.row(r).end(), vals.begin());
    const double mean = symmetric_mean(vals);
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    out[r] = {mean, std::sqrt(ss / static_cast<double>(vals.size()))};
  }
  return out;
}

std::vector<double> predict_batch(const EnsembleModel& ens, const Matrix& x) {
  ens.validate();
  const Matrix probs = member_probs(ens, x);
  std::vector<double> out(x.rows());
  std::vector<double> vals(ens.size());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::copy(probs.row(r).begin(), probs.row(r).end(), vals.begin());
    out[r] = symmetric_mean(vals);
  }
  return out;
}

double predict(const EnsembleModel& ens, std::span<const double> x) {
  return predict_batch(ens, single_row(x))[0];
}

Uncertainty predict_uncertainty(const EnsembleModel& ens, std::span<const double> x) {
  return predict_uncertainty_batch(ens, single_row(x))[0];
}

}  // namespace hyperutil
