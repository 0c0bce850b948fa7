#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hyperutil/data.hpp"
#include "hyperutil/ensemble.hpp"

namespace hyperutil {

// Positive weights and contributions push toward rejection (label 1).
inline constexpr const char* kSignConvention = "positive pushes toward rejection";

struct ImportanceRow {
  std::string name;
  double mean_weight = 0.0;  // mean over rows of the member-averaged weight
  double std_weight = 0.0;   // population std over rows
};

struct ImportanceTable {
  std::vector<ImportanceRow> rows;
};

ImportanceTable global_importance(const EnsembleModel& ens, const Dataset& ds);

// phi(v) = mean over rows of v * wbar(x with feature i set to v)_i, on an
// evenly spaced grid over the observed range of feature i.
struct ContributionCurve {
  std::size_t feature = 0;
  std::string name;
  std::vector<double> grid;             // standardized units
  std::vector<double> grid_raw;         // raw units
  std::vector<double> phi;
  std::vector<double> phi_std_members;  // std across members of their row-mean contribution
  std::vector<double> phi_std_rows;     // std across rows of v * wbar_i
};

ContributionCurve contribution_sweep(const EnsembleModel& ens, const Dataset& ds, std::size_t feature,
                                     std::size_t n_grid);

struct FeatureContribution {
  std::string name;
  double value = 0.0;       // x_i * wbar(x)_i
  double member_std = 0.0;  // std across members of x_i * w_m(x)_i
};

struct InstanceExplanation {
  std::vector<FeatureContribution> contributions;
  double bias = 0.0;   // bbar(x)
  double logit = 0.0;  // wbar(x) . x + bbar(x)
  double probability = 0.0;  // predict(), the member-averaged probability
};

InstanceExplanation instance_contributions(const EnsembleModel& ens, const FeatureSchema& schema,
                                           std::span<const double> x);

struct CounterfactualResult {
  std::vector<double> base;  // standardized record
  std::size_t feature = 0;
  std::string name;
  std::vector<double> grid_raw;
  std::vector<double> grid;  // standardized
  std::vector<double> phi;
  std::vector<double> phi_std_members;
  std::vector<double> prob;
  std::vector<double> prob_std;
  int base_class = 0;
  // First grid point whose predicted class differs from the base record's.
  std::optional<std::size_t> flip_index;
  std::optional<double> flip_raw;
};

// `raw_grid` is in raw units and must be non-decreasing.
CounterfactualResult counterfactual_sweep(const EnsembleModel& ens, const FeatureSchema& schema,
                                          std::span<const double> x, std::size_t feature,
                                          std::span<const double> raw_grid, const NormStats& stats);

void write_importance_csv(std::ostream& out, const ImportanceTable& table);
void write_curve_csv(std::ostream& out, const ContributionCurve& curve);
void write_instance_csv(std::ostream& out, const InstanceExplanation& e);
void write_counterfactual_csv(std::ostream& out, const CounterfactualResult& r);

nlohmann::json importance_to_json(const ImportanceTable& table);
nlohmann::json curve_to_json(const ContributionCurve& curve);
nlohmann::json instance_to_json(const InstanceExplanation& e);
nlohmann::json counterfactual_to_json(const CounterfactualResult& r);

}  // namespace hyperutil
