#include "hyperutil/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "hyperutil/errors.hpp"
#include "hyperutil/kernels.hpp"

namespace hyperutil {
namespace {

std::vector<std::pair<std::size_t, std::size_t>> layer_shapes(const NetworkArch& arch) {
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  shapes.emplace_back(arch.input_dim, arch.embed_dim);
  for (std::size_t b = 0; b < arch.n_blocks; ++b) {
    shapes.emplace_back(arch.embed_dim, arch.hidden_dim);
    shapes.emplace_back(arch.hidden_dim, arch.embed_dim);
  }
  shapes.emplace_back(arch.embed_dim, arch.output_dim);
  return shapes;
}

void check_params(const NetParams& params, const NetworkArch& arch) {
  const auto shapes = layer_shapes(arch);
  if (params.layers.size() != shapes.size()) {
    throw std::invalid_argument("network has " + std::to_string(params.layers.size()) +
                                " layers, architecture expects " + std::to_string(shapes.size()));
  }
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto& layer = params.layers[l];
    if (layer.weight.rows() != shapes[l].first || layer.weight.cols() != shapes[l].second ||
        layer.bias.size() != shapes[l].second) {
      throw std::invalid_argument("layer " + std::to_string(l) + " shape does not match architecture");
    }
  }
}

}  // namespace

void NetworkArch::validate() const {
  if (input_dim < 1 || embed_dim < 1 || hidden_dim < 1 || output_dim < 1) {
    throw std::invalid_argument("network dimensions must be >= 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }
}

nlohmann::json arch_to_json(const NetworkArch& a) {
  return {{"input_dim", a.input_dim}, {"embed_dim", a.embed_dim},   {"n_blocks", a.n_blocks},
          {"hidden_dim", a.hidden_dim}, {"dropout", a.dropout}, {"output_dim", a.output_dim},
          {"activation", "relu"}};
}

NetworkArch arch_from_json(const nlohmann::json& j) {
  NetworkArch a;
  a.input_dim = j.at("input_dim").get<std::size_t>();
  a.embed_dim = j.at("embed_dim").get<std::size_t>();
  a.n_blocks = j.at("n_blocks").get<std::size_t>();
  a.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  a.dropout = j.at("dropout").get<double>();
  a.output_dim = j.at("output_dim").get<std::size_t>();
  a.validate();
  return a;
}

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

double& NetParams::coord(std::size_t i) {
  for (auto& l : layers) {
    if (i < l.weight.size()) return l.weight.data()[i];
    i -= l.weight.size();
    if (i < l.bias.size()) return l.bias[i];
    i -= l.bias.size();
  }
  throw std::out_of_range("parameter coordinate out of range");
}

double NetParams::coord(std::size_t i) const { return const_cast<NetParams*>(this)->coord(i); }

bool NetParams::all_finite() const {
  for (const auto& l : layers) {
    for (double v : l.weight.data()) {
      if (!std::isfinite(v)) return false;
    }
    for (double v : l.bias) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

NetParams NetParams::zeros_like() const {
  NetParams out;
  out.layers.reserve(layers.size());
  for (const auto& l : layers) {
    out.layers.push_back({Matrix(l.weight.rows(), l.weight.cols()), std::vector<double>(l.bias.size())});
  }
  return out;
}

NetParams zero_params(const NetworkArch& arch) {
  arch.validate();
  NetParams p;
  for (const auto& [in, out] : layer_shapes(arch)) {
    p.layers.push_back({Matrix(in, out), std::vector<double>(out)});
  }
  return p;
}

NetParams init_params(const NetworkArch& arch, std::uint64_t seed) {
  NetParams p = zero_params(arch);
  std::mt19937_64 rng(seed);
  for (auto& layer : p.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : layer.weight.data()) w = dist(rng);
  }
  return p;
}

Matrix forward(const NetParams& params, const NetworkArch& arch, const Matrix& x, bool train_mode,
               std::uint64_t dropout_seed, ForwardCache* cache) {
  check_params(params, arch);
  if (x.cols() != arch.input_dim) {
    throw std::invalid_argument("forward: input has " + std::to_string(x.cols()) +
                                " columns, network expects " + std::to_string(arch.input_dim));
  }
  const bool use_dropout = train_mode && arch.dropout > 0.0;
  std::mt19937_64 rng(dropout_seed);
  std::bernoulli_distribution keep(1.0 - arch.dropout);
  const double keep_scale = 1.0 / (1.0 - arch.dropout);

  Matrix h;
  kernels::affine(x, params.layers[0].weight, params.layers[0].bias, h);
  if (cache) {
    cache->input = x;
    cache->blocks.assign(arch.n_blocks, {});
  }
  Matrix pre, delta;
  for (std::size_t b = 0; b < arch.n_blocks; ++b) {
    const auto& inner = params.layers[1 + 2 * b];
    const auto& outer = params.layers[2 + 2 * b];
    kernels::affine(h, inner.weight, inner.bias, pre);
    Matrix hidden(pre.rows(), pre.cols());
    Matrix mask;
    if (use_dropout) mask = Matrix(pre.rows(), pre.cols());
    for (std::size_t i = 0; i < pre.size(); ++i) {
      double a = pre.data()[i] > 0.0 ? pre.data()[i] : 0.0;
      if (use_dropout) {
        const double m = keep(rng) ? keep_scale : 0.0;
        mask.data()[i] = m;
        a *= m;
      }
      hidden.data()[i] = a;
    }
    kernels::affine(hidden, outer.weight, outer.bias, delta);
    if (cache) {
      auto& bc = cache->blocks[b];
      bc.input = h;
      bc.pre = pre;
      bc.hidden = hidden;
      bc.mask = std::move(mask);
    }
    for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] += delta.data()[i];
  }
  Matrix out;
  const auto& head = params.layers.back();
  kernels::affine(h, head.weight, head.bias, out);
  if (cache) cache->last = std::move(h);
  return out;
}

NetParams backward(const NetParams& params, const NetworkArch& arch, const ForwardCache& cache,
                   const Matrix& grad_output) {
  check_params(params, arch);
  if (cache.blocks.size() != arch.n_blocks || cache.last.rows() != grad_output.rows() ||
      grad_output.cols() != arch.output_dim) {
    throw std::invalid_argument("backward: cache or gradient shape does not match the network");
  }
  NetParams grads = params.zeros_like();

  auto& head_g = grads.layers.back();
  kernels::accumulate_tn(cache.last, grad_output, head_g.weight);
  kernels::accumulate_colsum(grad_output, head_g.bias);
  Matrix dh;
  kernels::matmul_nt(grad_output, params.layers.back().weight, dh);

  Matrix dhidden, dpre, dinput;
  for (std::size_t b = arch.n_blocks; b-- > 0;) {
    const auto& bc = cache.blocks[b];
    const auto& inner = params.layers[1 + 2 * b];
    const auto& outer = params.layers[2 + 2 * b];
    auto& inner_g = grads.layers[1 + 2 * b];
    auto& outer_g = grads.layers[2 + 2 * b];

    kernels::accumulate_tn(bc.hidden, dh, outer_g.weight);
    kernels::accumulate_colsum(dh, outer_g.bias);
    kernels::matmul_nt(dh, outer.weight, dhidden);
    dpre = Matrix(dhidden.rows(), dhidden.cols());
    const bool masked = !bc.mask.empty();
    for (std::size_t i = 0; i < dpre.size(); ++i) {
      if (bc.pre.data()[i] <= 0.0) continue;
      dpre.data()[i] = masked ? dhidden.data()[i] * bc.mask.data()[i] : dhidden.data()[i];
    }
    kernels::accumulate_tn(bc.input, dpre, inner_g.weight);
    kernels::accumulate_colsum(dpre, inner_g.bias);
    kernels::matmul_nt(dpre, inner.weight, dinput);
    for (std::size_t i = 0; i < dh.size(); ++i) dh.data()[i] += dinput.data()[i];
  }

  auto& embed_g = grads.layers.front();
  kernels::accumulate_tn(cache.input, dh, embed_g.weight);
  kernels::accumulate_colsum(dh, embed_g.bias);
  return grads;
}

OptState make_opt_state(const NetParams& params, const AdamConfig& config) {
  return {0, params.zeros_like(), params.zeros_like(), config};
}

void adam_step(OptState& state, NetParams& params, const NetParams& grads) {
  if (grads.layers.size() != params.layers.size() ||
      state.first_moment.layers.size() != params.layers.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and state shapes differ");
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    if (grads.layers[l].weight.size() != params.layers[l].weight.size() ||
        grads.layers[l].bias.size() != params.layers[l].bias.size()) {
      throw std::invalid_argument("adam_step: layer " + std::to_string(l) + " shape mismatch");
    }
  }
  if (!grads.all_finite()) throw NumericError("adam_step: non-finite gradient");

  const auto& c = state.config;
  const auto t = static_cast<double>(state.step + 1);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  auto update = [&](double& p, double& m, double& v, double g) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    p -= c.learning_rate * (m / correct1) / (std::sqrt(v / correct2) + c.epsilon);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    auto& m = state.first_moment.layers[l];
    auto& v = state.second_moment.layers[l];
    const auto& g = grads.layers[l];
    for (std::size_t i = 0; i < p.weight.size(); ++i) {
      update(p.weight.data()[i], m.weight.data()[i], v.weight.data()[i], g.weight.data()[i]);
    }
    for (std::size_t i = 0; i < p.bias.size(); ++i) update(p.bias[i], m.bias[i], v.bias[i], g.bias[i]);
  }
  ++state.step;
}

double grad_check(const std::function<double(const NetParams&)>& loss, const NetParams& params,
                  const NetParams& analytic, double h, std::size_t samples, std::uint64_t seed) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: step h must be positive");
  const std::size_t n = params.parameter_count();
  if (analytic.parameter_count() != n) {
    throw std::invalid_argument("grad_check: analytic gradient has the wrong size");
  }
  std::vector<std::size_t> coords(n);
  std::iota(coords.begin(), coords.end(), 0);
  if (n > samples) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(samples);
    std::sort(coords.begin(), coords.end());
  }
  NetParams probe = params;
  double worst = 0.0;
  for (std::size_t i : coords) {
    const double original = probe.coord(i);
    probe.coord(i) = original + h;
    const double up = loss(probe);
    probe.coord(i) = original - h;
    const double down = loss(probe);
    probe.coord(i) = original;
    const double fd = (up - down) / (2.0 * h);
    const double a = analytic.coord(i);
    worst = std::max(worst, std::abs(a - fd) / (std::abs(a) + std::abs(fd) + 1e-12));
  }
  return worst;
}

}  // namespace hyperutil
