#include "hyperutil/hypernet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "hyperutil/errors.hpp"

namespace hyperutil {
namespace {

Matrix network_input(const HyperMember& member, const Matrix& x) {
  if (member.input_independent) return Matrix(x.rows(), x.cols());
  return x;
}

void check_width(const HyperMember& member, std::size_t width) {
  if (width != member.features()) {
    throw std::invalid_argument("record has " + std::to_string(width) + " features, model expects " +
                                std::to_string(member.features()));
  }
}

double row_logit(const Matrix& out, const Matrix& x, std::size_t r) {
  const std::size_t f = x.cols();
  double z = out(r, f);
  for (std::size_t i = 0; i < f; ++i) z += out(r, i) * x(r, i);
  return z;
}

double bce(double p, int y) { return y == 1 ? -std::log(p) : -std::log(1.0 - p); }

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

const double kLogitBound = std::log((1.0 - kProbFloor) / kProbFloor);

// Same value as bce(clamp_prob(sigmoid(z)), y) without the cancellation in 1 - p.
double bce_logit(double z, int y) {
  const double zc = std::clamp(z, -kLogitBound, kLogitBound);
  return y == 1 ? softplus(-zc) : softplus(zc);
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

double InstanceUtility::logit(std::span<const double> x) const {
  if (x.size() != weights.size()) throw std::invalid_argument("utility: record length mismatch");
  double z = bias;
  for (std::size_t i = 0; i < x.size(); ++i) z += weights[i] * x[i];
  return z;
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("validation fraction must lie in [0, 1)");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"lambda", c.lambda},
          {"alpha", c.alpha},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"patience", c.patience},
          {"validation_fraction", c.validation_fraction},
          {"seed", c.seed},
          {"embed_dim", c.embed_dim},
          {"n_blocks", c.n_blocks},
          {"hidden_dim", c.hidden_dim},
          {"dropout", c.dropout},
          {"input_independent", c.input_independent}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lambda = j.value("lambda", c.lambda);
  c.alpha = j.value("alpha", c.alpha);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.patience = j.value("patience", c.patience);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.seed = j.value("seed", c.seed);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.n_blocks = j.value("n_blocks", c.n_blocks);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.dropout = j.value("dropout", c.dropout);
  c.input_independent = j.value("input_independent", c.input_independent);
  c.validate();
  return c;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word
  std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b + 0x632be59bd9b4e019ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

HyperMember make_member(std::size_t features, const TrainConfig& cfg, std::uint64_t seed,
                        std::string schema_fingerprint) {
  cfg.validate();
  HyperMember m;
  m.arch.input_dim = features;
  m.arch.embed_dim = cfg.embed_dim;
  m.arch.n_blocks = cfg.n_blocks;
  m.arch.hidden_dim = cfg.hidden_dim;
  m.arch.dropout = cfg.dropout;
  m.arch.output_dim = features + 1;
  m.arch.validate();
  m.net = init_params(m.arch, seed);
  m.schema_fingerprint = std::move(schema_fingerprint);
  m.input_independent = cfg.input_independent;
  return m;
}

Matrix hyper_forward_batch(const HyperMember& member, const Matrix& x) {
  check_width(member, x.cols());
  return forward(member.net, member.arch, network_input(member, x), false, 0);
}

InstanceUtility hyper_forward(const HyperMember& member, std::span<const double> x) {
  check_width(member, x.size());
  const Matrix row(1, x.size(), std::vector<double>(x.begin(), x.end()));
  const Matrix out = hyper_forward_batch(member, row);
  InstanceUtility u;
  u.weights.assign(out.row(0).begin(), out.row(0).begin() + static_cast<std::ptrdiff_t>(x.size()));
  u.bias = out(0, x.size());
  return u;
}

double predict_prob(const HyperMember& member, std::span<const double> x) {
  const auto u = hyper_forward(member, x);
  return clamp_prob(sigmoid(u.logit(x)));
}

std::vector<double> predict_prob_batch(const HyperMember& member, const Matrix& x) {
  const Matrix out = hyper_forward_batch(member, x);
  std::vector<double> p(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) p[r] = clamp_prob(sigmoid(row_logit(out, x, r)));
  return p;
}

double penalty(const InstanceUtility& u, double lambda, double alpha) {
  double l1 = 0.0;
  double l2 = 0.0;
  for (double w : u.weights) {
    l1 += std::abs(w);
    l2 += w * w;
  }
  return alpha * (lambda * l1 + (1.0 - lambda) * l2);
}

LossAndGrad batch_loss(const HyperMember& member, const Matrix& x, std::span<const int> y,
                       const TrainConfig& cfg, bool train_mode, std::uint64_t dropout_seed) {
  const std::size_t b = x.rows();
  if (b == 0) throw std::invalid_argument("batch_loss: empty batch");
  if (y.size() != b) throw std::invalid_argument("batch_loss: label count differs from rows");
  check_width(member, x.cols());
  const std::size_t f = x.cols();

  ForwardCache cache;
  const Matrix out =
      forward(member.net, member.arch, network_input(member, x), train_mode, dropout_seed, &cache);

  const double inv_b = 1.0 / static_cast<double>(b);
  const double l1 = cfg.alpha * cfg.lambda;
  const double l2 = cfg.alpha * (1.0 - cfg.lambda);
  Matrix grad_out(b, f + 1);
  double total = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    const double z = row_logit(out, x, r);
    const double p = sigmoid(z);
    double pen = 0.0;
    for (std::size_t i = 0; i < f; ++i) {
      const double w = out(r, i);
      pen += l1 * std::abs(w) + l2 * w * w;
    }
    total += bce_logit(z, y[r]) + pen;

    // The clamped loss is flat beyond the bound.
    const double dz = std::abs(z) < kLogitBound ? (p - static_cast<double>(y[r])) * inv_b : 0.0;
    for (std::size_t i = 0; i < f; ++i) {
      const double w = out(r, i);
      const double sign = w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0);
      grad_out(r, i) = dz * x(r, i) + inv_b * (l1 * sign + 2.0 * l2 * w);
    }
    grad_out(r, f) = dz;
  }
  const double loss = total * inv_b;
  if (!std::isfinite(loss)) {
    throw NumericError("batch_loss: non-finite loss over a batch of " + std::to_string(b) + " rows");
  }
  return {loss, backward(member.net, member.arch, cache, grad_out)};
}

HyperMember train_member(const Dataset& train, const TrainConfig& cfg, std::uint64_t seed,
                         TrainReport* report) {
  if (!train.has_both_classes()) {
    throw std::invalid_argument("train_member: training data must contain both classes");
  }
  if (cfg.validation_fraction > 0.0 && train.rows() >= 2) {
    const auto idx = split_indices(train.rows(), mix_seed(seed, 0x7a1), cfg.validation_fraction);
    return train_member(subset(train, idx.train), subset(train, idx.test), cfg, seed, report);
  }
  return train_member(train, Dataset{}, cfg, seed, report);
}

HyperMember train_member(const Dataset& fit, const Dataset& validation, const TrainConfig& cfg,
                         std::uint64_t seed, TrainReport* report) {
  cfg.validate();
  if (!fit.has_both_classes()) {
    throw std::invalid_argument("train_member: training data must contain both classes");
  }
  const std::size_t n = fit.rows();
  const std::size_t f = fit.features();
  HyperMember member = make_member(f, cfg, seed, fit.schema.fingerprint());
  OptState opt = make_opt_state(member.net, {cfg.learning_rate, 0.9, 0.999, 1e-8});

  const bool early_stop = validation.rows() > 0;
  HyperMember best = member;
  double best_nll = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = {};

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(mix_seed(seed, 0x5f1));
  Matrix xb;
  std::vector<int> yb;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batch_count = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      xb = Matrix(end - start, f);
      yb.resize(end - start);
      for (std::size_t k = start; k < end; ++k) {
        std::copy_n(fit.x.row(order[k]).begin(), f, xb.row(k - start).begin());
        yb[k - start] = fit.y[order[k]];
      }
      const auto dropout_seed = mix_seed(mix_seed(seed, epoch), batch_count);
      auto [loss, grads] = batch_loss(member, xb, yb, cfg, true, dropout_seed);
      adam_step(opt, member.net, grads);
      loss_sum += loss;
      ++batch_count;
    }
    rep.batches += batch_count;
    rep.train_loss.push_back(loss_sum / static_cast<double>(batch_count));

    if (early_stop) {
      const auto p = predict_prob_batch(member, validation.x);
      double nll = 0.0;
      for (std::size_t r = 0; r < p.size(); ++r) nll += bce(p[r], validation.y[r]);
      nll /= static_cast<double>(p.size());
      rep.val_nll.push_back(nll);
      if (nll < best_nll) {
        best_nll = nll;
        best = member;
        rep.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
  }
  if (!early_stop) {
    rep.best_epoch = rep.train_loss.size() - 1;
    return member;
  }
  return best;
}

}  // namespace hyperutil
