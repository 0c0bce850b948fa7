#include "hyperutil/model_io.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "hyperutil/errors.hpp"

namespace hyperutil {
namespace {

using nlohmann::json;

json matrix_block(const Matrix& m) { return {{"shape", {m.rows(), m.cols()}}, {"data", m.data()}}; }

json vector_block(const std::vector<double>& v) { return {{"shape", {v.size()}}, {"data", v}}; }

Matrix matrix_from(const json& j, std::size_t rows, std::size_t cols, const std::string& where) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  auto data = j.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || shape[0] != rows || shape[1] != cols || data.size() != rows * cols) {
    throw ModelFormatError(where + ": shape does not match architecture");
  }
  return Matrix(rows, cols, std::move(data));
}

std::vector<double> vector_from(const json& j, std::size_t n, const std::string& where) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  auto data = j.at("data").get<std::vector<double>>();
  if (shape.size() != 1 || shape[0] != n || data.size() != n) {
    throw ModelFormatError(where + ": shape does not match architecture");
  }
  return data;
}

json member_to_json(const HyperMember& m, std::uint64_t seed) {
  json layers = json::array();
  for (const auto& l : m.net.layers) {
    layers.push_back({{"weight", matrix_block(l.weight)}, {"bias", vector_block(l.bias)}});
  }
  return {{"seed", seed},
          {"arch", arch_to_json(m.arch)},
          {"input_independent", m.input_independent},
          {"layers", layers}};
}

HyperMember member_from_json(const json& j, const std::string& fingerprint, std::size_t index) {
  const std::string where = "member " + std::to_string(index);
  HyperMember m;
  m.arch = arch_from_json(j.at("arch"));
  m.input_independent = j.value("input_independent", false);
  m.schema_fingerprint = fingerprint;
  const NetParams shape = zero_params(m.arch);
  const auto& layers = j.at("layers");
  if (layers.size() != shape.layers.size()) throw ModelFormatError(where + ": wrong layer count");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& ref = shape.layers[l];
    const std::string lw = where + " layer " + std::to_string(l);
    m.net.layers.push_back({matrix_from(layers[l].at("weight"), ref.weight.rows(), ref.weight.cols(), lw),
                            vector_from(layers[l].at("bias"), ref.bias.size(), lw)});
  }
  if (!m.net.all_finite()) throw ModelFormatError(where + ": non-finite parameter");
  return m;
}

}  // namespace

json model_to_json(const ModelFile& file) {
  json j = {{"format_version", kModelFormatVersion},
            {"schema_fingerprint", file.schema.fingerprint()},
            {"schema", schema_to_json(file.schema)},
            {"norm_stats", norm_stats_to_json(file.stats)}};
  if (file.is_ensemble()) {
    const auto& ens = file.ensemble();
    j["kind"] = "ensemble";
    j["train_config"] = train_config_to_json(ens.config);
    json members = json::array();
    for (std::size_t k = 0; k < ens.size(); ++k) members.push_back(member_to_json(ens.members[k], ens.member_seeds[k]));
    j["members"] = members;
  } else {
    const auto& lin = file.linear();
    j["kind"] = "linear";
    j["weights"] = vector_block(lin.weights);
    j["bias"] = lin.bias;
  }
  return j;
}

ModelFile model_from_json(const json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw ModelFormatError("unsupported model format version " + std::to_string(version) +
                             " (this build reads version " + std::to_string(kModelFormatVersion) + ")");
    }
    ModelFile file;
    file.schema = schema_from_json(j.at("schema"));
    const auto fingerprint = j.at("schema_fingerprint").get<std::string>();
    if (fingerprint != file.schema.fingerprint()) {
      throw ModelFormatError("schema fingerprint " + fingerprint + " does not match embedded schema (" +
                             file.schema.fingerprint() + ")");
    }
    file.stats = norm_stats_from_json(j.at("norm_stats"));
    if (file.stats.size() != file.schema.size()) throw ModelFormatError("norm stats do not cover the schema");
    const std::size_t f = file.schema.size();

    const auto kind = j.at("kind").get<std::string>();
    if (kind == "ensemble") {
      EnsembleModel ens;
      ens.config = train_config_from_json(j.at("train_config"));
      ens.schema_fingerprint = fingerprint;
      const auto& members = j.at("members");
      for (std::size_t k = 0; k < members.size(); ++k) {
        ens.members.push_back(member_from_json(members[k], fingerprint, k));
        ens.member_seeds.push_back(members[k].at("seed").get<std::uint64_t>());
        if (ens.members.back().arch.input_dim != f || ens.members.back().arch.output_dim != f + 1) {
          throw ModelFormatError("member " + std::to_string(k) + " does not match the schema width");
        }
      }
      try {
        ens.validate();
      } catch (const std::invalid_argument& e) {
        throw ModelFormatError(e.what());
      }
      file.model = std::move(ens);
    } else if (kind == "linear") {
      LinearModel lin;
      lin.weights = vector_from(j.at("weights"), f, "linear weights");
      lin.bias = j.at("bias").get<double>();
      lin.schema_fingerprint = fingerprint;
      file.model = std::move(lin);
    } else {
      throw ModelFormatError("unknown model kind '" + kind + "'");
    }
    return file;
  } catch (const json::exception& e) {
    throw ModelFormatError(std::string("malformed model file: ") + e.what());
  } catch (const SchemaError& e) {
    throw ModelFormatError(std::string("malformed model schema: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ModelFormatError(std::string("invalid model contents: ") + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("failed writing " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

void save_model(const ModelFile& file, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_json(file).dump(1) + "\n");
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFormatError("cannot open model file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::exception& e) {
    throw ModelFormatError("model file " + path.string() + " is not valid JSON (truncated?): " + e.what());
  }
  return model_from_json(j);
}

}  // namespace hyperutil
