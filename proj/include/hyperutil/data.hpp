#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hyperutil/errors.hpp"
#include "hyperutil/matrix.hpp"

namespace hyperutil {

enum class FeatureKind { kContinuous, kBinary, kOneHot };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::kContinuous;
  // One-hot group name; empty unless kind == kOneHot.
  std::string group;

  bool operator==(const FeatureSpec&) const = default;
};

struct FeatureSchema {
  std::vector<FeatureSpec> features;
  std::string label_column = "label";
  // Label 1 always means the driver rejects the request.
  std::string label_positive_meaning = "reject";

  std::size_t size() const { return features.size(); }
  std::vector<std::string> names() const;
  std::optional<std::size_t> index_of(const std::string& name) const;

  // Throws SchemaError on duplicate/empty names or a label that collides
  // with a feature.
  void validate() const;

  // Stable 64-bit FNV-1a hash of names, kinds and label, as 16 hex digits.
  std::string fingerprint() const;

  bool operator==(const FeatureSchema&) const = default;
};

nlohmann::json schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const nlohmann::json& j);
FeatureSchema load_schema(const std::filesystem::path& path);

struct RawTable {
  FeatureSchema schema;
  Matrix values;  // N x F, schema column order
  std::vector<int> labels;

  std::size_t rows() const { return labels.size(); }
};

// Per-feature z-score parameters. Features that are not standardized
// (binary, one-hot) carry mean 0 and std 1 and `standardized == false`.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<bool> standardized;

  std::size_t size() const { return mean.size(); }
  double to_standard(std::size_t feature, double raw) const;
  double to_raw(std::size_t feature, double standard) const;

  bool operator==(const NormStats&) const = default;
};

nlohmann::json norm_stats_to_json(const NormStats& stats);
NormStats norm_stats_from_json(const nlohmann::json& j);

struct Dataset {
  Matrix x;            // N x F, standardized
  std::vector<int> y;  // 1 = reject, 0 = accept
  FeatureSchema schema;
  NormStats stats;

  std::size_t rows() const { return y.size(); }
  std::size_t features() const { return x.cols(); }
  double positive_rate() const;
  bool has_both_classes() const;
};

// Parses CSV text. The header must contain every schema feature and the
// label column, and nothing else; column order may differ from the schema.
RawTable parse_csv(std::istream& in, const FeatureSchema& schema);
RawTable load_csv(const std::filesystem::path& path, const FeatureSchema& schema);
void write_csv(std::ostream& out, const RawTable& table);

// Z-scores continuous columns with population std. When `stats` is given
// those are applied unchanged; otherwise they are computed from `raw`.
std::pair<Dataset, NormStats> standardize(const RawTable& raw,
                                          const std::optional<NormStats>& stats = std::nullopt);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded shuffle; test size = round(n * test_fraction).
SplitIndices split_indices(std::size_t n, std::uint64_t seed, double test_fraction);

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& rows);
RawTable subset(const RawTable& raw, const std::vector<std::size_t>& rows);

std::pair<Dataset, Dataset> split(const Dataset& ds, std::uint64_t seed, double test_fraction);
std::pair<RawTable, RawTable> split(const RawTable& raw, std::uint64_t seed, double test_fraction);

std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed);
Dataset bootstrap_sample(const Dataset& ds, std::uint64_t seed);

}  // namespace hyperutil
