#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hyperutil/data.hpp"
#include "hyperutil/nn.hpp"

namespace hyperutil {

inline constexpr double kProbFloor = 1e-7;

double sigmoid(double z);
// Clamps into [1e-7, 1 - 1e-7].
double clamp_prob(double p);

// Personalized linear utility for one record: logit = weights . x + bias.
struct InstanceUtility {
  std::vector<double> weights;
  double bias = 0.0;

  double logit(std::span<const double> x) const;
};

struct TrainConfig {
  double lambda = 0.5;  // L1 share of the weight penalty
  double alpha = 1e-3;  // overall penalty scale
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::size_t patience = 20;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  // Backbone sizes; input/output dims are set from the data.
  std::size_t embed_dim = 64;
  std::size_t n_blocks = 2;
  std::size_t hidden_dim = 64;
  double dropout = 0.1;
  // Feed the network a zero vector so w and b do not depend on x. The member
  // then reduces to a global logistic model.
  bool input_independent = false;

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// One hypernetwork: maps x (length F) to F weights and a bias.
struct HyperMember {
  NetworkArch arch;
  NetParams net;
  std::string schema_fingerprint;
  bool input_independent = false;

  std::size_t features() const { return arch.input_dim; }
  bool operator==(const HyperMember&) const = default;
};

HyperMember make_member(std::size_t features, const TrainConfig& cfg, std::uint64_t seed,
                        std::string schema_fingerprint = {});

InstanceUtility hyper_forward(const HyperMember& member, std::span<const double> x);
// Rows of the result are [w_1 .. w_F, b] per input row.
Matrix hyper_forward_batch(const HyperMember& member, const Matrix& x);

double predict_prob(const HyperMember& member, std::span<const double> x);
std::vector<double> predict_prob_batch(const HyperMember& member, const Matrix& x);

// alpha * (lambda * |w|_1 + (1 - lambda) * |w|_2^2); bias is not penalized.
double penalty(const InstanceUtility& u, double lambda, double alpha);

struct LossAndGrad {
  double loss = 0.0;
  NetParams grads;
};

// Mean over rows of BCE(y, p) + penalty(w(x)), with p clamped. Gradients are
// exact for the clamped loss, so rows past the clamp contribute only through
// the penalty. The L1 subgradient at 0 is 0.
LossAndGrad batch_loss(const HyperMember& member, const Matrix& x, std::span<const int> y,
                       const TrainConfig& cfg, bool train_mode = false,
                       std::uint64_t dropout_seed = 0);

struct TrainReport {
  std::vector<double> train_loss;  // mean batch loss per epoch
  std::vector<double> val_nll;     // per epoch, empty without validation
  std::size_t best_epoch = 0;
  std::size_t batches = 0;
};

// Holds out `cfg.validation_fraction` of `train` (seeded) for early stopping.
HyperMember train_member(const Dataset& train, const TrainConfig& cfg, std::uint64_t seed,
                         TrainReport* report = nullptr);
// Explicit validation set; `validation` may be empty, which disables early
// stopping and returns the final parameters.
HyperMember train_member(const Dataset& fit, const Dataset& validation, const TrainConfig& cfg,
                         std::uint64_t seed, TrainReport* report = nullptr);

// Deterministic 64-bit seed mixing.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace hyperutil
