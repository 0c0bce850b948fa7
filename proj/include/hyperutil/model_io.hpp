#pragma once

#include <filesystem>
#include <variant>

#include "json.hpp"

#include "hyperutil/data.hpp"
#include "hyperutil/ensemble.hpp"
#include "hyperutil/logreg.hpp"

namespace hyperutil {

inline constexpr int kModelFormatVersion = 1;

// A trained model together with everything needed to score raw records.
struct ModelFile {
  std::variant<EnsembleModel, LinearModel> model;
  FeatureSchema schema;
  NormStats stats;

  bool is_ensemble() const { return std::holds_alternative<EnsembleModel>(model); }
  const EnsembleModel& ensemble() const { return std::get<EnsembleModel>(model); }
  const LinearModel& linear() const { return std::get<LinearModel>(model); }
};

nlohmann::json model_to_json(const ModelFile& file);
// Throws ModelFormatError on unknown versions, inconsistent shapes or a
// fingerprint that does not match the embedded schema.
ModelFile model_from_json(const nlohmann::json& j);

// Written to a temporary file in the same directory, then renamed.
void save_model(const ModelFile& file, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

// Writes `contents` to `path` via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace hyperutil
