#include "hyperutil/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace hyperutil {
namespace {

enum class Effect { kFare, kPickup, kPositive, kNegative, kAlternating };

struct Role {
  const char* name;
  double loc;
  double scale;
  int profile;  // index into the archetype profile centers, or -1
  Effect effect;
};

// Raw units loosely follow a ride-request survey: fare and incomes in
// currency, times in minutes or hours, age in years.
constexpr Role kRoles[] = {
    {"fare", 15.0, 5.0, -1, Effect::kFare},
    {"exp_inc", 150.0, 60.0, 0, Effect::kAlternating},
    {"age", 40.0, 10.0, 1, Effect::kAlternating},
    {"pickup", 10.0, 4.0, -1, Effect::kPickup},
    {"cong", 15.0, 8.0, -1, Effect::kPositive},
    {"tip", 2.0, 1.0, -1, Effect::kNegative},
    {"surge", 3.0, 2.0, -1, Effect::kNegative},
    {"rate", 4.5, 0.3, -1, Effect::kNegative},
    {"workhr", 30.0, 10.0, 2, Effect::kAlternating},
    {"earn_inc", 200.0, 100.0, 3, Effect::kPositive},
    {"idle", 10.0, 5.0, -1, Effect::kAlternating},
};
constexpr std::size_t kNamedRoles = std::size(kRoles);

constexpr double kFareCoupling = 0.4;
constexpr double kPickupCurvature = 0.3;
constexpr double kProfileRadius = 1.2;
constexpr double kProfileSpread = 0.5;

Role role_for(std::size_t i, std::size_t f) {
  if (f >= 6 && i == f - 1) return {"degree", 0.5, 0.5, -1, Effect::kNegative};
  if (i < kNamedRoles) return kRoles[i];
  return {nullptr, 0.0, 1.0, -1, Effect::kAlternating};
}

std::string role_name(std::size_t i, std::size_t f) {
  const Role r = role_for(i, f);
  return r.name ? r.name : "f" + std::to_string(i);
}

bool is_binary(std::size_t i, std::size_t f) { return f >= 6 && i == f - 1; }

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

nlohmann::json synth_config_to_json(const SynthConfig& cfg) {
  return {{"rows", cfg.rows},       {"features", cfg.features},
          {"archetypes", cfg.archetypes}, {"noise", cfg.noise},
          {"seed", cfg.seed},       {"weight_scale", cfg.weight_scale},
          {"bias", cfg.bias}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig cfg;
  cfg.rows = j.value("rows", cfg.rows);
  cfg.features = j.value("features", cfg.features);
  cfg.archetypes = j.value("archetypes", cfg.archetypes);
  cfg.noise = j.value("noise", cfg.noise);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.weight_scale = j.value("weight_scale", cfg.weight_scale);
  cfg.bias = j.value("bias", cfg.bias);
  return cfg;
}

FeatureSchema synthetic_schema(std::size_t features) {
  FeatureSchema schema;
  for (std::size_t i = 0; i < features; ++i) {
    schema.features.push_back(
        {role_name(i, features),
         is_binary(i, features) ? FeatureKind::kBinary : FeatureKind::kContinuous, ""});
  }
  schema.label_column = "label";
  return schema;
}

std::vector<double> SynthGroundTruth::latent(std::span<const double> raw) const {
  std::vector<double> z(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) z[i] = (raw[i] - loc[i]) / scale[i];
  return z;
}

std::vector<double> SynthGroundTruth::weights_at(int k, std::span<const double> z) const {
  const auto base = base_weights.row(static_cast<std::size_t>(k));
  std::vector<double> w(base.begin(), base.end());
  w[kSynthFare] -= fare_coupling * (1.0 + std::tanh(z[kSynthExpInc]));
  w[kSynthPickup] -= pickup_curvature * z[kSynthPickup];
  return w;
}

nlohmann::json ground_truth_to_json(const SynthGroundTruth& t) {
  nlohmann::json base = nlohmann::json::array();
  for (std::size_t k = 0; k < t.base_weights.rows(); ++k) {
    base.push_back(std::vector<double>(t.base_weights.row(k).begin(), t.base_weights.row(k).end()));
  }
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < t.row_weights.rows(); ++r) {
    rows.push_back(std::vector<double>(t.row_weights.row(r).begin(), t.row_weights.row(r).end()));
  }
  return {{"base_weights", base},
          {"fare_coupling", t.fare_coupling},
          {"pickup_curvature", t.pickup_curvature},
          {"bias", t.bias},
          {"loc", t.loc},
          {"scale", t.scale},
          {"archetype", t.archetype},
          {"row_weights", rows},
          {"prob", t.prob}};
}

SynthData gen_synthetic(const SynthConfig& cfg) {
  const std::size_t n = cfg.rows;
  const std::size_t f = cfg.features;
  const std::size_t k_count = cfg.archetypes;
  if (k_count < 2) throw std::invalid_argument("gen_synthetic: need at least 2 archetypes");
  if (n < k_count) throw std::invalid_argument("gen_synthetic: rows must be >= archetypes");
  if (f < 4) throw std::invalid_argument("gen_synthetic: need at least 4 features");
  if (!(cfg.noise >= 0.0)) throw std::invalid_argument("gen_synthetic: noise must be >= 0");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SynthGroundTruth truth;
  truth.fare_coupling = kFareCoupling * cfg.weight_scale;
  truth.pickup_curvature = kPickupCurvature * cfg.weight_scale;
  truth.bias = cfg.bias;
  truth.base_weights = Matrix(k_count, f);
  for (std::size_t i = 0; i < f; ++i) {
    const Role role = role_for(i, f);
    truth.loc.push_back(role.loc);
    truth.scale.push_back(role.scale);
  }
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::size_t i = 0; i < f; ++i) {
      const double u = unit(rng);
      double w = 0.0;
      switch (role_for(i, f).effect) {
        case Effect::kFare: w = -(0.4 + 0.4 * u); break;
        case Effect::kPickup: w = 0.5 + 0.5 * u; break;
        case Effect::kPositive: w = 0.2 + 0.4 * u; break;
        case Effect::kNegative: w = -(0.2 + 0.4 * u); break;
        case Effect::kAlternating: w = (k % 2 == 0 ? 1.0 : -1.0) * (1.0 + 0.8 * u); break;
      }
      truth.base_weights(k, i) = w * cfg.weight_scale;
    }
  }

  const FeatureSchema schema = synthetic_schema(f);
  RawTable raw;
  raw.schema = schema;
  raw.values = Matrix(n, f);
  raw.labels.resize(n);
  truth.archetype.resize(n);
  truth.row_weights = Matrix(n, f);
  truth.prob.resize(n);

  std::uniform_int_distribution<std::size_t> pick(0, k_count - 1);
  std::vector<double> z(f);
  for (std::size_t r = 0; r < n; ++r) {
    // Every archetype appears at least once.
    const std::size_t k = r < k_count ? r : pick(rng);
    truth.archetype[r] = static_cast<int>(k);
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(k_count);
    for (std::size_t i = 0; i < f; ++i) {
      const Role role = role_for(i, f);
      if (is_binary(i, f)) {
        const double p1 = 0.3 + 0.4 * static_cast<double>(k % 2);
        z[i] = unit(rng) < p1 ? 1.0 : -1.0;
        raw.values(r, i) = z[i] > 0 ? 1.0 : 0.0;
        continue;
      }
      if (role.profile >= 0) {
        const double center = kProfileRadius * std::cos(angle + 0.8 * role.profile);
        z[i] = center + kProfileSpread * gauss(rng);
      } else {
        z[i] = gauss(rng);
      }
      raw.values(r, i) = role.loc + role.scale * z[i];
    }
    // Re-derive z from the stored raw values so the recorded truth matches
    // what a consumer recomputes from the table.
    for (std::size_t i = 0; i < f; ++i) z[i] = (raw.values(r, i) - truth.loc[i]) / truth.scale[i];

    auto w = truth.weights_at(static_cast<int>(k), z);
    double logit = truth.bias;
    for (std::size_t i = 0; i < f; ++i) {
      if (cfg.noise > 0.0) w[i] += cfg.noise * gauss(rng);
      truth.row_weights(r, i) = w[i];
      logit += w[i] * z[i];
    }
    const double p = sigmoid(logit);
    truth.prob[r] = p;
    raw.labels[r] = unit(rng) < p ? 1 : 0;
  }

  auto [ds, stats] = standardize(raw);
  return {std::move(raw), std::move(ds), std::move(stats), std::move(truth)};
}

}  // namespace hyperutil
