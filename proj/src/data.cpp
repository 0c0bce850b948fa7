#include "hyperutil/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace hyperutil {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

const char* kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kContinuous: return "continuous";
    case FeatureKind::kBinary: return "binary";
    case FeatureKind::kOneHot: return "onehot";
  }
  return "?";
}

FeatureKind kind_from_name(const std::string& s) {
  if (s == "continuous") return FeatureKind::kContinuous;
  if (s == "binary") return FeatureKind::kBinary;
  if (s == "onehot") return FeatureKind::kOneHot;
  throw SchemaError("unknown feature kind '" + s + "'");
}

}  // namespace

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(f.name);
  return out;
}

std::optional<std::size_t> FeatureSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].name == name) return i;
  }
  return std::nullopt;
}

void FeatureSchema::validate() const {
  if (features.empty()) throw SchemaError("schema has no features");
  if (label_column.empty()) throw SchemaError("schema has no label column");
  if (label_positive_meaning != "reject") {
    throw SchemaError("label_positive_meaning must be 'reject'");
  }
  std::set<std::string> seen;
  for (const auto& f : features) {
    if (f.name.empty()) throw SchemaError("empty feature name");
    if (f.name == label_column) throw SchemaError("feature '" + f.name + "' collides with label");
    if (!seen.insert(f.name).second) throw SchemaError("duplicate feature name '" + f.name + "'");
    if (f.kind == FeatureKind::kOneHot && f.group.empty()) {
      throw SchemaError("one-hot feature '" + f.name + "' has no group");
    }
  }
}

std::string FeatureSchema::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const auto& f : features) {
    mix(f.name);
    mix(kind_name(f.kind));
    mix(f.group);
  }
  mix(label_column);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json schema_to_json(const FeatureSchema& schema) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : schema.features) {
    nlohmann::json e = {{"name", f.name}, {"kind", kind_name(f.kind)}};
    if (f.kind == FeatureKind::kOneHot) e["group"] = f.group;
    features.push_back(std::move(e));
  }
  return {{"features", features},
          {"label_column", schema.label_column},
          {"label_positive_meaning", schema.label_positive_meaning}};
}

FeatureSchema schema_from_json(const nlohmann::json& j) {
  FeatureSchema schema;
  try {
    for (const auto& e : j.at("features")) {
      FeatureSpec f;
      f.name = e.at("name").get<std::string>();
      f.kind = kind_from_name(e.value("kind", std::string("continuous")));
      f.group = e.value("group", std::string());
      schema.features.push_back(std::move(f));
    }
    schema.label_column = j.at("label_column").get<std::string>();
    schema.label_positive_meaning = j.value("label_positive_meaning", std::string("reject"));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
  schema.validate();
  return schema;
}

FeatureSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("schema file " + path.string() + " is not valid JSON: " + e.what());
  }
  return schema_from_json(j);
}

double NormStats::to_standard(std::size_t feature, double raw) const {
  return standardized[feature] ? (raw - mean[feature]) / std[feature] : raw;
}

double NormStats::to_raw(std::size_t feature, double standard) const {
  return standardized[feature] ? standard * std[feature] + mean[feature] : standard;
}

nlohmann::json norm_stats_to_json(const NormStats& stats) {
  return {{"mean", stats.mean}, {"std", stats.std}, {"standardized", stats.standardized}};
}

NormStats norm_stats_from_json(const nlohmann::json& j) {
  NormStats s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.std = j.at("std").get<std::vector<double>>();
  s.standardized = j.at("standardized").get<std::vector<bool>>();
  if (s.std.size() != s.mean.size() || s.standardized.size() != s.mean.size()) {
    throw SchemaError("norm stats arrays have different lengths");
  }
  return s;
}

double Dataset::positive_rate() const {
  if (y.empty()) return 0.0;
  return static_cast<double>(std::count(y.begin(), y.end(), 1)) / static_cast<double>(y.size());
}

bool Dataset::has_both_classes() const {
  const auto pos = std::count(y.begin(), y.end(), 1);
  return pos > 0 && static_cast<std::size_t>(pos) < y.size();
}

RawTable parse_csv(std::istream& in, const FeatureSchema& schema) {
  schema.validate();
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("CSV has no header row");
  const auto header = split_cells(line);

  std::unordered_map<std::string, std::size_t> column_of;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!column_of.emplace(std::string(header[c]), c).second) {
      throw SchemaError("duplicate CSV column '" + std::string(header[c]) + "'");
    }
  }
  const std::size_t f = schema.size();
  std::vector<std::size_t> feature_col(f);
  for (std::size_t i = 0; i < f; ++i) {
    auto it = column_of.find(schema.features[i].name);
    if (it == column_of.end()) {
      throw SchemaError("CSV is missing column '" + schema.features[i].name + "'");
    }
    feature_col[i] = it->second;
  }
  auto label_it = column_of.find(schema.label_column);
  if (label_it == column_of.end()) {
    throw SchemaError("CSV is missing label column '" + schema.label_column + "'");
  }
  const std::size_t label_col = label_it->second;
  if (header.size() != f + 1) {
    throw SchemaError("CSV has " + std::to_string(header.size()) + " columns, schema expects " +
                      std::to_string(f + 1));
  }

  RawTable table;
  table.schema = schema;
  std::vector<double> values;
  std::vector<double> cells(header.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto parts = split_cells(line);
    if (parts.size() != header.size()) {
      throw ParseError(row, "expected " + std::to_string(header.size()) + " cells, found " +
                                std::to_string(parts.size()));
    }
    for (std::size_t c = 0; c < parts.size(); ++c) {
      const auto cell = parts[c];
      if (cell.empty()) {
        throw ParseError(row, "missing value in column '" + std::string(header[c]) + "'");
      }
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ParseError(row, "non-numeric value '" + std::string(cell) + "' in column '" +
                                  std::string(header[c]) + "'");
      }
      cells[c] = v;
    }
    for (std::size_t i = 0; i < f; ++i) values.push_back(cells[feature_col[i]]);
    const double label = cells[label_col];
    if (label != 0.0 && label != 1.0) throw ParseError(row, "label must be 0 or 1");
    table.labels.push_back(static_cast<int>(label));
    ++row;
  }
  if (row == 0) throw SchemaError("CSV has no rows");
  table.values = Matrix(row, f, std::move(values));
  return table;
}

RawTable load_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file " + path.string());
  return parse_csv(in, schema);
}

void write_csv(std::ostream& out, const RawTable& table) {
  const auto& names = table.schema.features;
  for (const auto& f : names) out << f.name << ',';
  out << table.schema.label_column << '\n';
  char buf[64];
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.values.cols(); ++c) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), table.values(r, c));
      out.write(buf, res.ptr - buf);
      out << ',';
    }
    out << table.labels[r] << '\n';
  }
}

std::pair<Dataset, NormStats> standardize(const RawTable& raw,
                                          const std::optional<NormStats>& stats) {
  const std::size_t n = raw.rows();
  const std::size_t f = raw.schema.size();
  if (n == 0) throw std::invalid_argument("standardize: table has no rows");
  if (raw.values.rows() != n || raw.values.cols() != f) {
    throw SchemaError("standardize: value matrix does not match schema/labels");
  }

  NormStats used;
  if (stats) {
    if (stats->size() != f) {
      throw SchemaError("standardize: stats cover " + std::to_string(stats->size()) +
                        " features, schema has " + std::to_string(f));
    }
    for (std::size_t i = 0; i < f; ++i) {
      const bool continuous = raw.schema.features[i].kind == FeatureKind::kContinuous;
      if (continuous && !stats->standardized[i]) {
        throw SchemaError("standardize: stats do not cover continuous feature '" +
                          raw.schema.features[i].name + "'");
      }
    }
    used = *stats;
  } else {
    used.mean.assign(f, 0.0);
    used.std.assign(f, 1.0);
    used.standardized.assign(f, false);
    for (std::size_t i = 0; i < f; ++i) {
      if (raw.schema.features[i].kind != FeatureKind::kContinuous) continue;
      double sum = 0.0;
      for (std::size_t r = 0; r < n; ++r) sum += raw.values(r, i);
      const double mean = sum / static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        const double d = raw.values(r, i) - mean;
        ss += d * d;
      }
      const double sd = std::sqrt(ss / static_cast<double>(n));
      if (!(sd > 0.0)) {
        throw std::invalid_argument("standardize: column '" + raw.schema.features[i].name +
                                    "' has zero variance");
      }
      used.mean[i] = mean;
      used.std[i] = sd;
      used.standardized[i] = true;
    }
  }

  Dataset ds;
  ds.schema = raw.schema;
  ds.y = raw.labels;
  ds.x = Matrix(n, f);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < f; ++i) ds.x(r, i) = used.to_standard(i, raw.values(r, i));
  }
  ds.stats = used;
  return {std::move(ds), std::move(used)};
}

SplitIndices split_indices(std::size_t n, std::uint64_t seed, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("split: test_fraction must lie in (0, 1)");
  }
  if (n < 2) throw std::invalid_argument("split: need at least 2 rows");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  SplitIndices out;
  out.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
  out.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  std::sort(out.test.begin(), out.test.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

namespace {

Dataset take_rows(const Dataset& src, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.schema = src.schema;
  out.stats = src.stats;
  out.x = Matrix(rows.size(), src.features());
  out.y.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = rows[k];
    if (r >= src.rows()) throw std::out_of_range("subset: row index out of range");
    std::copy_n(src.x.row(r).begin(), src.features(), out.x.row(k).begin());
    out.y.push_back(src.y[r]);
  }
  return out;
}

RawTable take_rows(const RawTable& src, const std::vector<std::size_t>& rows) {
  RawTable out;
  out.schema = src.schema;
  out.values = Matrix(rows.size(), src.values.cols());
  out.labels.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = rows[k];
    if (r >= src.rows()) throw std::out_of_range("subset: row index out of range");
    std::copy_n(src.values.row(r).begin(), src.values.cols(), out.values.row(k).begin());
    out.labels.push_back(src.labels[r]);
  }
  return out;
}

}  // namespace

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& rows) {
  return take_rows(ds, rows);
}

RawTable subset(const RawTable& raw, const std::vector<std::size_t>& rows) {
  return take_rows(raw, rows);
}

std::pair<Dataset, Dataset> split(const Dataset& ds, std::uint64_t seed, double test_fraction) {
  const auto idx = split_indices(ds.rows(), seed, test_fraction);
  return {subset(ds, idx.train), subset(ds, idx.test)};
}

std::pair<RawTable, RawTable> split(const RawTable& raw, std::uint64_t seed,
                                    double test_fraction) {
  const auto idx = split_indices(raw.rows(), seed, test_fraction);
  return {subset(raw, idx.train), subset(raw, idx.test)};
}

std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("bootstrap: empty dataset");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

Dataset bootstrap_sample(const Dataset& ds, std::uint64_t seed) {
  return subset(ds, bootstrap_indices(ds.rows(), seed));
}

}  // namespace hyperutil
