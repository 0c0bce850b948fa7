#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyperutil/hypernet.hpp"

namespace hyperutil {

struct EnsembleModel {
  std::vector<HyperMember> members;
  std::vector<std::uint64_t> member_seeds;
  TrainConfig config;
  std::string schema_fingerprint;

  std::size_t size() const { return members.size(); }
  std::size_t features() const { return members.empty() ? 0 : members.front().features(); }
  // Throws std::invalid_argument when empty, mixed-width, or seeds repeat.
  void validate() const;
};

// Member m uses seed base_seed + m for its validation hold-out, its bootstrap
// resample of the remaining rows, its initialization and its batch order.
// Members train concurrently under OpenMP; results do not depend on the
// thread count.
EnsembleModel train_ensemble(const Dataset& train, std::size_t m, std::uint64_t base_seed,
                             const TrainConfig& cfg, std::vector<TrainReport>* reports = nullptr);

// Mean of a set of values, summed in ascending order so the result does not
// depend on the order the values arrive in. Identical inputs give that value
// back exactly, and the result is clamped into [min, max].
double symmetric_mean(std::span<double> values);

// Averaged personalized utility (explanation path).
InstanceUtility avg_weights(const EnsembleModel& ens, std::span<const double> x);
Matrix avg_weights_batch(const EnsembleModel& ens, const Matrix& x);

// Average of member probabilities (prediction path). This is not the
// sigmoid of the averaged-weight logit.
double predict(const EnsembleModel& ens, std::span<const double> x);
std::vector<double> predict_batch(const EnsembleModel& ens, const Matrix& x);

struct Uncertainty {
  double mean = 0.0;
  double std = 0.0;  // population std of member probabilities
};

Uncertainty predict_uncertainty(const EnsembleModel& ens, std::span<const double> x);
std::vector<Uncertainty> predict_uncertainty_batch(const EnsembleModel& ens, const Matrix& x);

// Per-member raw outputs [w, b], one N x (F+1) matrix per member.
std::vector<Matrix> member_outputs(const EnsembleModel& ens, const Matrix& x);

}  // namespace hyperutil
