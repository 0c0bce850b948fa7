#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "json.hpp"

#include "hyperutil/matrix.hpp"

namespace hyperutil {

// Residual feed-forward network:
//   h0 = X We + be
//   h{k+1} = h_k + dropout(relu(h_k W1_k + b1_k)) W2_k + b2_k
//   out = h_L Wh + bh
struct NetworkArch {
  std::size_t input_dim = 1;
  std::size_t embed_dim = 64;
  std::size_t n_blocks = 2;
  std::size_t hidden_dim = 64;
  double dropout = 0.1;
  std::size_t output_dim = 1;

  void validate() const;
  bool operator==(const NetworkArch&) const = default;
};

nlohmann::json arch_to_json(const NetworkArch& arch);
NetworkArch arch_from_json(const nlohmann::json& j);

struct DenseLayer {
  Matrix weight;             // fan_in x fan_out
  std::vector<double> bias;  // fan_out

  bool operator==(const DenseLayer&) const = default;
};

// Layers in order: embed, (inner, outer) per block, head.
struct NetParams {
  std::vector<DenseLayer> layers;

  std::size_t parameter_count() const;
  // Flat coordinate access in layer order, weights before biases.
  double& coord(std::size_t i);
  double coord(std::size_t i) const;
  bool all_finite() const;
  NetParams zeros_like() const;

  bool operator==(const NetParams&) const = default;
};

// Glorot-uniform weights, zero biases.
NetParams init_params(const NetworkArch& arch, std::uint64_t seed);
NetParams zero_params(const NetworkArch& arch);

struct BlockCache {
  Matrix input;   // h_k
  Matrix pre;     // h_k W1 + b1
  Matrix hidden;  // dropout(relu(pre))
  Matrix mask;    // scaled keep-mask; empty when dropout is inactive
};

struct ForwardCache {
  Matrix input;
  std::vector<BlockCache> blocks;
  Matrix last;  // h_L
};

// Dropout is applied only when `train_mode` is set and the rate is positive;
// the mask is drawn from `dropout_seed`.
Matrix forward(const NetParams& params, const NetworkArch& arch, const Matrix& x,
               bool train_mode, std::uint64_t dropout_seed, ForwardCache* cache = nullptr);

// Gradients of sum(output .* grad_output) with respect to every parameter.
NetParams backward(const NetParams& params, const NetworkArch& arch, const ForwardCache& cache,
                   const Matrix& grad_output);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptState {
  std::uint64_t step = 0;
  NetParams first_moment;
  NetParams second_moment;
  AdamConfig config;
};

OptState make_opt_state(const NetParams& params, const AdamConfig& config = {});

// Bias-corrected Adam update in place. Throws NumericError on non-finite
// gradients, leaving params and state untouched.
void adam_step(OptState& state, NetParams& params, const NetParams& grads);

// Largest |a - fd| / (|a| + |fd| + 1e-12) over a seeded subsample of at
// least `samples` coordinates (all of them when there are fewer), where fd
// is the central difference of `loss` with step h.
double grad_check(const std::function<double(const NetParams&)>& loss, const NetParams& params,
                  const NetParams& analytic, double h, std::size_t samples = 200,
                  std::uint64_t seed = 0);

}  // namespace hyperutil
