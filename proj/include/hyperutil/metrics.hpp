#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hyperutil/data.hpp"

namespace hyperutil {

struct EnsembleModel;
struct LinearModel;

// Predicted class is 1 when p >= threshold.
double accuracy(std::span<const double> p, std::span<const int> y, double threshold = 0.5);
// Mann-Whitney: fraction of (positive, negative) pairs ranked correctly,
// ties count one half.
double auc_roc(std::span<const double> p, std::span<const int> y);
// Step-wise average precision over distinct descending scores, ties grouped.
double auc_pr(std::span<const double> p, std::span<const int> y);
// Equal-width bins on [0, 1] over p; the last bin is closed on the right.
double ece(std::span<const double> p, std::span<const int> y, std::size_t n_bins = 15);
double brier(std::span<const double> p, std::span<const int> y);
// Mean BCE with p clamped to [1e-7, 1 - 1e-7].
double nll(std::span<const double> p, std::span<const int> y);

struct ReliabilityBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double positive_fraction = 0.0;
};

std::vector<ReliabilityBin> reliability_bins(std::span<const double> p, std::span<const int> y,
                                             std::size_t n_bins = 15);

struct MetricOptions {
  std::size_t n_bins = 15;
  double threshold = 0.5;
};

struct EvalReport {
  double acc = 0.0;
  double auc = 0.0;
  double aucpr = 0.0;
  double ece = 0.0;
  double brier = 0.0;
  double nll = 0.0;
  std::size_t n_test = 0;
  double positive_rate = 0.0;

  bool operator==(const EvalReport&) const = default;
};

EvalReport evaluate_probs(std::span<const double> p, std::span<const int> y,
                          const MetricOptions& opts = {});
EvalReport evaluate(const EnsembleModel& model, const Dataset& test, const MetricOptions& opts = {});
EvalReport evaluate(const LinearModel& model, const Dataset& test, const MetricOptions& opts = {});

nlohmann::json report_to_json(const EvalReport& r);
// Aligned two-column text table.
std::string report_to_text(const EvalReport& r);

struct MetricSummary {
  std::string name;
  double mean = 0.0;
  double std = 0.0;  // population std across splits
};

// One entry per metric in the order acc, auc, aucpr, ece, brier, nll.
std::vector<MetricSummary> summarize(const std::vector<EvalReport>& reports);
// Lines of the form `metric: mean ± std`.
std::string summary_to_text(const std::vector<MetricSummary>& summary);

}  // namespace hyperutil
