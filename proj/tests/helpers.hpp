#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "hyperutil/data.hpp"
#include "hyperutil/ensemble.hpp"
#include "hyperutil/hypernet.hpp"
#include "hyperutil/matrix.hpp"

namespace testing_util {

inline hyperutil::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed,
                                       double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  hyperutil::Matrix m(r, c);
  for (double& v : m.data()) v = u(rng);
  return m;
}

inline hyperutil::FeatureSchema continuous_schema(std::size_t f) {
  hyperutil::FeatureSchema s;
  for (std::size_t i = 0; i < f; ++i) s.features.push_back({"x" + std::to_string(i)});
  return s;
}

// Already-standardized dataset wrapper with identity stats.
inline hyperutil::Dataset make_dataset(hyperutil::Matrix x, std::vector<int> y) {
  hyperutil::Dataset ds;
  ds.schema = continuous_schema(x.cols());
  ds.stats.mean.assign(x.cols(), 0.0);
  ds.stats.std.assign(x.cols(), 1.0);
  ds.stats.standardized.assign(x.cols(), true);
  ds.x = std::move(x);
  ds.y = std::move(y);
  return ds;
}

// Member whose output is the constant [w..., b] for every x.
inline hyperutil::HyperMember constant_member(const std::vector<double>& w, double b) {
  hyperutil::TrainConfig c;
  c.embed_dim = 4;
  c.hidden_dim = 4;
  hyperutil::HyperMember m = hyperutil::make_member(w.size(), c, 0);
  for (auto& l : m.net.layers) {
    l.weight.fill(0.0);
    l.bias.assign(l.bias.size(), 0.0);
  }
  auto& head = m.net.layers.back().bias;
  for (std::size_t i = 0; i < w.size(); ++i) head[i] = w[i];
  head[w.size()] = b;
  return m;
}

inline hyperutil::EnsembleModel ensemble_of(std::vector<hyperutil::HyperMember> members) {
  hyperutil::EnsembleModel e;
  for (std::size_t i = 0; i < members.size(); ++i) e.member_seeds.push_back(i);
  e.members = std::move(members);
  return e;
}

}  // namespace testing_util
