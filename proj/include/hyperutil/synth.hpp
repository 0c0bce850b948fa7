#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

#include "hyperutil/data.hpp"

namespace hyperutil {

// Synthetic ride-request generator. Rows come from K driver archetypes that
// cluster in the profile features (expected income, age, working hours,
// earned income). Each row's true rejection logit is linear in its latent
// feature vector z, but the weights depend on the archetype and on z itself:
//
//   w_fare   = base[k][fare] - coupling * (1 + tanh(z_exp_inc))   (always < 0)
//   w_pickup = base[k][pickup] - curvature * z_pickup
//   w_j      = base[k][j]                                          otherwise
//
// plus optional per-row Gaussian jitter of scale `noise`. A subset of
// features flips sign between even and odd archetypes, so no single global
// weight vector fits the data.
struct SynthConfig {
  std::size_t rows = 5000;
  std::size_t features = 12;
  std::size_t archetypes = 3;
  double noise = 0.1;
  std::uint64_t seed = 1;
  double weight_scale = 2.0;
  double bias = -1.0;
};

nlohmann::json synth_config_to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct SynthGroundTruth {
  std::vector<int> archetype;     // per row
  Matrix base_weights;            // K x F, latent scale
  double fare_coupling = 0.0;
  double pickup_curvature = 0.0;
  double bias = 0.0;
  std::vector<double> loc;        // raw = loc + scale * z (continuous)
  std::vector<double> scale;
  Matrix row_weights;             // N x F, includes jitter
  std::vector<double> prob;       // true rejection probability per row

  // Latent vector z of a raw record.
  std::vector<double> latent(std::span<const double> raw) const;
  // Noise-free weights for archetype k at latent point z.
  std::vector<double> weights_at(int k, std::span<const double> z) const;
};

nlohmann::json ground_truth_to_json(const SynthGroundTruth& truth);

struct SynthData {
  RawTable raw;
  Dataset dataset;  // standardized with stats computed from `raw`
  NormStats stats;
  SynthGroundTruth truth;
};

// Schema with the generator's feature roles. Index 0 is the fare analogue.
FeatureSchema synthetic_schema(std::size_t features);

inline constexpr std::size_t kSynthFare = 0;
inline constexpr std::size_t kSynthExpInc = 1;
inline constexpr std::size_t kSynthAge = 2;
inline constexpr std::size_t kSynthPickup = 3;

SynthData gen_synthetic(const SynthConfig& cfg);

}  // namespace hyperutil
