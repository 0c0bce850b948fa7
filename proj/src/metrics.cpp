#include "hyperutil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "hyperutil/ensemble.hpp"
#include "hyperutil/hypernet.hpp"
#include "hyperutil/logreg.hpp"

namespace hyperutil {
namespace {

void check_lengths(std::span<const double> p, std::span<const int> y) {
  if (p.size() != y.size()) {
    throw std::invalid_argument("metric: " + std::to_string(p.size()) + " predictions but " +
                                std::to_string(y.size()) + " labels");
  }
  if (p.empty()) throw std::invalid_argument("metric: no predictions");
}

std::size_t bin_of(double p, std::size_t n_bins) {
  if (p <= 0.0) return 0;
  const auto b = static_cast<std::size_t>(p * static_cast<double>(n_bins));
  return std::min(b, n_bins - 1);
}

}  // namespace

double accuracy(std::span<const double> p, std::span<const int> y, double threshold) {
  check_lengths(p, y);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int pred = p[i] >= threshold ? 1 : 0;
    hits += pred == y[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(p.size());
}

double auc_roc(std::span<const double> p, std::span<const int> y) {
  check_lengths(p, y);
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  double pos_total = 0.0;
  double neg_total = 0.0;
  double wins = 0.0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    double pos = 0.0;
    double neg = 0.0;
    while (end < order.size() && p[order[end]] == p[order[start]]) {
      (y[order[end]] == 1 ? pos : neg) += 1.0;
      ++end;
    }
    wins += pos * neg_total + 0.5 * pos * neg;
    pos_total += pos;
    neg_total += neg;
    start = end;
  }
  if (pos_total == 0.0 || neg_total == 0.0) {
    throw std::invalid_argument("auc_roc: needs at least one positive and one negative");
  }
  return wins / (pos_total * neg_total);
}

double auc_pr(std::span<const double> p, std::span<const int> y) {
  check_lengths(p, y);
  const auto positives = static_cast<double>(std::count(y.begin(), y.end(), 1));
  if (positives == 0.0) throw std::invalid_argument("auc_pr: needs at least one positive");
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  double tp = 0.0;
  double fp = 0.0;
  double prev_recall = 0.0;
  double ap = 0.0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    while (end < order.size() && p[order[end]] == p[order[start]]) {
      (y[order[end]] == 1 ? tp : fp) += 1.0;
      ++end;
    }
    const double recall = tp / positives;
    const double precision = tp / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    start = end;
  }
  return ap;
}

std::vector<ReliabilityBin> reliability_bins(std::span<const double> p, std::span<const int> y,
                                             std::size_t n_bins) {
  check_lengths(p, y);
  if (n_bins < 1) throw std::invalid_argument("ece: n_bins must be >= 1");
  std::vector<ReliabilityBin> bins(n_bins);
  std::vector<double> conf_sum(n_bins, 0.0);
  std::vector<double> pos_sum(n_bins, 0.0);
  for (std::size_t b = 0; b < n_bins; ++b) {
    bins[b].lower = static_cast<double>(b) / static_cast<double>(n_bins);
    bins[b].upper = static_cast<double>(b + 1) / static_cast<double>(n_bins);
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::size_t b = bin_of(p[i], n_bins);
    ++bins[b].count;
    conf_sum[b] += p[i];
    pos_sum[b] += y[i] == 1 ? 1.0 : 0.0;
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (bins[b].count == 0) continue;
    const auto c = static_cast<double>(bins[b].count);
    bins[b].mean_confidence = conf_sum[b] / c;
    bins[b].positive_fraction = pos_sum[b] / c;
  }
  return bins;
}

double ece(std::span<const double> p, std::span<const int> y, std::size_t n_bins) {
  const auto bins = reliability_bins(p, y, n_bins);
  const auto n = static_cast<double>(p.size());
  double total = 0.0;
  for (const auto& b : bins) {
    if (b.count == 0) continue;
    total += static_cast<double>(b.count) / n * std::abs(b.mean_confidence - b.positive_fraction);
  }
  return total;
}

double brier(std::span<const double> p, std::span<const int> y) {
  check_lengths(p, y);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - static_cast<double>(y[i]);
    s += d * d;
  }
  return s / static_cast<double>(p.size());
}

double nll(std::span<const double> p, std::span<const int> y) {
  check_lengths(p, y);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = clamp_prob(p[i]);
    s -= y[i] == 1 ? std::log(q) : std::log(1.0 - q);
  }
  return s / static_cast<double>(p.size());
}

EvalReport evaluate_probs(std::span<const double> p, std::span<const int> y,
                          const MetricOptions& opts) {
  EvalReport r;
  r.acc = accuracy(p, y, opts.threshold);
  r.auc = auc_roc(p, y);
  r.aucpr = auc_pr(p, y);
  r.ece = ece(p, y, opts.n_bins);
  r.brier = brier(p, y);
  r.nll = nll(p, y);
  r.n_test = p.size();
  r.positive_rate =
      static_cast<double>(std::count(y.begin(), y.end(), 1)) / static_cast<double>(y.size());
  return r;
}

EvalReport evaluate(const EnsembleModel& model, const Dataset& test, const MetricOptions& opts) {
  const auto p = predict_batch(model, test.x);
  return evaluate_probs(p, test.y, opts);
}

EvalReport evaluate(const LinearModel& model, const Dataset& test, const MetricOptions& opts) {
  const auto p = predict_logreg_batch(model, test.x);
  return evaluate_probs(p, test.y, opts);
}

nlohmann::json report_to_json(const EvalReport& r) {
  return {{"acc", r.acc},     {"auc", r.auc}, {"aucpr", r.aucpr},   {"ece", r.ece},
          {"brier", r.brier}, {"nll", r.nll}, {"n_test", r.n_test}, {"positive_rate", r.positive_rate}};
}

std::string report_to_text(const EvalReport& r) {
  const std::pair<const char*, double> rows[] = {{"ACC", r.acc}, {"AUC", r.auc},     {"AUCPR", r.aucpr},
                                                 {"ECE", r.ece}, {"BS", r.brier},    {"NLL", r.nll},
                                                 {"positive_rate", r.positive_rate}};
  std::string out;
  char buf[96];
  for (const auto& [name, value] : rows) {
    std::snprintf(buf, sizeof(buf), "%-14s %10.6f\n", name, value);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "%-14s %10zu\n", "n_test", r.n_test);
  out += buf;
  return out;
}

std::vector<MetricSummary> summarize(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("summarize: no reports");
  const std::pair<const char*, double EvalReport::*> fields[] = {
      {"acc", &EvalReport::acc}, {"auc", &EvalReport::auc},     {"aucpr", &EvalReport::aucpr},
      {"ece", &EvalReport::ece}, {"brier", &EvalReport::brier}, {"nll", &EvalReport::nll}};
  std::vector<MetricSummary> out;
  const auto n = static_cast<double>(reports.size());
  for (const auto& [name, field] : fields) {
    double mean = 0.0;
    for (const auto& r : reports) mean += r.*field;
    mean /= n;
    double ss = 0.0;
    for (const auto& r : reports) ss += (r.*field - mean) * (r.*field - mean);
    out.push_back({name, mean, std::sqrt(ss / n)});
  }
  return out;
}

std::string summary_to_text(const std::vector<MetricSummary>& summary) {
  std::string out;
  char buf[96];
  for (const auto& s : summary) {
    std::snprintf(buf, sizeof(buf), "%s: %.3f ± %.3f\n", s.name.c_str(), s.mean, s.std);
    out += buf;
  }
  return out;
}

}  // namespace hyperutil
