#include "hyperutil/explain.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <stdexcept>

namespace hyperutil {
namespace {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Order-independent mean and population std.
MeanStd mean_std(std::vector<double>& values) {
  const double mean = symmetric_mean(values);  // sorts values
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

void check_feature(const EnsembleModel& ens, std::size_t feature) {
  if (feature >= ens.features()) {
    throw std::out_of_range("feature index " + std::to_string(feature) + " out of range (model has " +
                            std::to_string(ens.features()) + " features)");
  }
}

std::string feature_name(const FeatureSchema& schema, std::size_t i) {
  return i < schema.size() ? schema.features[i].name : "x" + std::to_string(i);
}

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

ImportanceTable global_importance(const EnsembleModel& ens, const Dataset& ds) {
  if (ds.rows() == 0) throw std::invalid_argument("global_importance: empty dataset");
  const Matrix avg = avg_weights_batch(ens, ds.x);
  ImportanceTable table;
  std::vector<double> column(ds.rows());
  for (std::size_t i = 0; i < ds.features(); ++i) {
    for (std::size_t r = 0; r < ds.rows(); ++r) column[r] = avg(r, i);
    const auto s = mean_std(column);
    table.rows.push_back({feature_name(ds.schema, i), s.mean, s.std});
  }
  return table;
}

ContributionCurve contribution_sweep(const EnsembleModel& ens, const Dataset& ds, std::size_t feature,
                                     std::size_t n_grid) {
  ens.validate();
  check_feature(ens, feature);
  if (ds.rows() == 0) throw std::invalid_argument("contribution_sweep: empty dataset");
  if (n_grid < 2) throw std::invalid_argument("contribution_sweep: n_grid must be >= 2");
  double lo = ds.x(0, feature);
  double hi = lo;
  for (std::size_t r = 1; r < ds.rows(); ++r) {
    lo = std::min(lo, ds.x(r, feature));
    hi = std::max(hi, ds.x(r, feature));
  }
  if (!(hi > lo)) {
    throw std::invalid_argument("contribution_sweep: feature '" + feature_name(ds.schema, feature) +
                                "' takes a single value");
  }

  ContributionCurve curve;
  curve.feature = feature;
  curve.name = feature_name(ds.schema, feature);
  curve.grid.resize(n_grid);
  for (std::size_t g = 0; g < n_grid; ++g) {
    curve.grid[g] = g + 1 == n_grid ? hi : lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(n_grid - 1);
  }
  curve.grid_raw.resize(n_grid);
  curve.phi.resize(n_grid);
  curve.phi_std_members.resize(n_grid);
  curve.phi_std_rows.resize(n_grid);
  for (std::size_t g = 0; g < n_grid; ++g) {
    curve.grid_raw[g] = ds.stats.size() == ds.features() ? ds.stats.to_raw(feature, curve.grid[g]) : curve.grid[g];
  }

  const std::size_t n = ds.rows();
  const std::size_t m = ens.size();
  std::vector<std::exception_ptr> errors(n_grid);
  const auto grid_count = static_cast<std::ptrdiff_t>(n_grid);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t gi = 0; gi < grid_count; ++gi) {
    const auto g = static_cast<std::size_t>(gi);
    try {
      const double v = curve.grid[g];
      Matrix x = ds.x;
      for (std::size_t r = 0; r < n; ++r) x(r, feature) = v;
      const auto outs = member_outputs(ens, x);

      std::vector<double> per_member(m);
      std::vector<double> rows(n);
      for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t r = 0; r < n; ++r) rows[r] = v * outs[k](r, feature);
        per_member[k] = symmetric_mean(rows);
      }
      std::vector<double> vals(m);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < m; ++k) vals[k] = outs[k](r, feature);
        rows[r] = v * symmetric_mean(vals);
      }
      const auto by_rows = mean_std(rows);
      const auto by_members = mean_std(per_member);
      curve.phi[g] = by_rows.mean;
      curve.phi_std_rows[g] = by_rows.std;
      curve.phi_std_members[g] = by_members.std;
    } catch (...) {
      errors[g] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return curve;
}

InstanceExplanation instance_contributions(const EnsembleModel& ens, const FeatureSchema& schema,
                                           std::span<const double> x) {
  ens.validate();
  if (x.size() != ens.features()) throw std::invalid_argument("instance_contributions: record length mismatch");
  const Matrix row(1, x.size(), std::vector<double>(x.begin(), x.end()));
  const auto outs = member_outputs(ens, row);
  const auto u = avg_weights(ens, x);

  InstanceExplanation e;
  std::vector<double> vals(ens.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t k = 0; k < ens.size(); ++k) vals[k] = x[i] * outs[k](0, i);
    e.contributions.push_back({feature_name(schema, i), x[i] * u.weights[i], mean_std(vals).std});
  }
  e.bias = u.bias;
  e.logit = u.logit(x);
  e.probability = predict(ens, x);
  return e;
}

CounterfactualResult counterfactual_sweep(const EnsembleModel& ens, const FeatureSchema& schema,
                                          std::span<const double> x, std::size_t feature,
                                          std::span<const double> raw_grid, const NormStats& stats) {
  ens.validate();
  check_feature(ens, feature);
  if (x.size() != ens.features()) throw std::invalid_argument("counterfactual_sweep: record length mismatch");
  if (stats.size() != x.size()) throw std::invalid_argument("counterfactual_sweep: stats do not cover the record");
  if (raw_grid.empty()) throw std::invalid_argument("counterfactual_sweep: empty grid");
  for (std::size_t g = 0; g < raw_grid.size(); ++g) {
    if (!std::isfinite(raw_grid[g])) throw std::invalid_argument("counterfactual_sweep: non-finite grid value");
    if (g > 0 && raw_grid[g] < raw_grid[g - 1]) {
      throw std::invalid_argument("counterfactual_sweep: grid must be ascending");
    }
  }

  CounterfactualResult res;
  res.base.assign(x.begin(), x.end());
  res.feature = feature;
  res.name = feature_name(schema, feature);
  res.base_class = predict(ens, x) >= 0.5 ? 1 : 0;

  const std::size_t n_grid = raw_grid.size();
  res.grid_raw.assign(raw_grid.begin(), raw_grid.end());
  Matrix sweep(n_grid, x.size());
  res.grid.resize(n_grid);
  for (std::size_t g = 0; g < n_grid; ++g) {
    std::copy(x.begin(), x.end(), sweep.row(g).begin());
    res.grid[g] = stats.to_standard(feature, raw_grid[g]);
    sweep(g, feature) = res.grid[g];
  }

  const auto unc = predict_uncertainty_batch(ens, sweep);
  const auto outs = member_outputs(ens, sweep);
  std::vector<double> vals(ens.size());
  for (std::size_t g = 0; g < n_grid; ++g) {
    const double v = res.grid[g];
    for (std::size_t k = 0; k < ens.size(); ++k) vals[k] = outs[k](g, feature);
    const double wbar = symmetric_mean(vals);
    for (std::size_t k = 0; k < ens.size(); ++k) vals[k] = v * outs[k](g, feature);
    res.phi.push_back(v * wbar);
    res.phi_std_members.push_back(mean_std(vals).std);
    res.prob.push_back(unc[g].mean);
    res.prob_std.push_back(unc[g].std);
    const int cls = unc[g].mean >= 0.5 ? 1 : 0;
    if (!res.flip_index && cls != res.base_class) {
      res.flip_index = g;
      res.flip_raw = raw_grid[g];
    }
  }
  return res;
}

void write_importance_csv(std::ostream& out, const ImportanceTable& table) {
  out << "feature,mean_weight,std_weight\n";
  for (const auto& r : table.rows) out << r.name << ',' << num(r.mean_weight) << ',' << num(r.std_weight) << '\n';
}

void write_curve_csv(std::ostream& out, const ContributionCurve& c) {
  out << "grid_raw,grid_std,phi_mean,phi_std_members,phi_std_rows\n";
  for (std::size_t g = 0; g < c.grid.size(); ++g) {
    out << num(c.grid_raw[g]) << ',' << num(c.grid[g]) << ',' << num(c.phi[g]) << ','
        << num(c.phi_std_members[g]) << ',' << num(c.phi_std_rows[g]) << '\n';
  }
}

void write_instance_csv(std::ostream& out, const InstanceExplanation& e) {
  out << "feature,contribution,member_std\n";
  for (const auto& c : e.contributions) out << c.name << ',' << num(c.value) << ',' << num(c.member_std) << '\n';
  out << "(bias)," << num(e.bias) << ",\n";
}

void write_counterfactual_csv(std::ostream& out, const CounterfactualResult& r) {
  out << "grid_raw,grid_std,phi_mean,phi_std_members,prob_mean,prob_std\n";
  for (std::size_t g = 0; g < r.grid.size(); ++g) {
    out << num(r.grid_raw[g]) << ',' << num(r.grid[g]) << ',' << num(r.phi[g]) << ','
        << num(r.phi_std_members[g]) << ',' << num(r.prob[g]) << ',' << num(r.prob_std[g]) << '\n';
  }
}

nlohmann::json importance_to_json(const ImportanceTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"feature", r.name}, {"mean_weight", r.mean_weight}, {"std_weight", r.std_weight}});
  }
  return {{"sign_convention", kSignConvention}, {"features", rows}};
}

nlohmann::json curve_to_json(const ContributionCurve& c) {
  return {{"feature", c.name},           {"feature_index", c.feature},
          {"grid_raw", c.grid_raw},      {"grid_std", c.grid},
          {"phi_mean", c.phi},           {"phi_std_members", c.phi_std_members},
          {"phi_std_rows", c.phi_std_rows}, {"sign_convention", kSignConvention}};
}

nlohmann::json instance_to_json(const InstanceExplanation& e) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : e.contributions) {
    rows.push_back({{"feature", c.name}, {"contribution", c.value}, {"member_std", c.member_std}});
  }
  return {{"contributions", rows},
          {"bias", e.bias},
          {"explanation_logit", e.logit},
          {"explanation_probability", sigmoid(e.logit)},
          {"predicted_probability", e.probability},
          {"sign_convention", kSignConvention}};
}

nlohmann::json counterfactual_to_json(const CounterfactualResult& r) {
  nlohmann::json j = {{"feature", r.name},
                      {"feature_index", r.feature},
                      {"base_record_std", r.base},
                      {"base_class", r.base_class},
                      {"grid_raw", r.grid_raw},
                      {"grid_std", r.grid},
                      {"phi_mean", r.phi},
                      {"phi_std_members", r.phi_std_members},
                      {"prob_mean", r.prob},
                      {"prob_std", r.prob_std}};
  j["flip_index"] = r.flip_index ? nlohmann::json(*r.flip_index) : nlohmann::json(nullptr);
  j["flip_raw"] = r.flip_raw ? nlohmann::json(*r.flip_raw) : nlohmann::json(nullptr);
  return j;
}

}  // namespace hyperutil
