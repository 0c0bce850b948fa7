#include "cli.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hyperutil/data.hpp"
#include "hyperutil/ensemble.hpp"
#include "hyperutil/errors.hpp"
#include "hyperutil/explain.hpp"
#include "hyperutil/logreg.hpp"
#include "hyperutil/metrics.hpp"
#include "hyperutil/model_io.hpp"
#include "hyperutil/synth.hpp"

namespace hyperutil::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

template <typename T>
struct is_optional : std::false_type {};
template <typename T>
struct is_optional<std::optional<T>> : std::true_type {};

template <typename T>
void assign_from(const json& v, T& field) {
  if constexpr (is_optional<T>::value) {
    field = v.get<typename T::value_type>();
  } else {
    field = v.get<T>();
  }
}

template <typename T>
T parse_item(const std::string& item) {
  if constexpr (std::is_same_v<T, std::string>) {
    return item;
  } else {
    return static_cast<T>(std::stod(item));
  }
}

// Binds CLI options to fields and lets a JSON config file fill any option
// that was not given on the command line.
class Options {
 public:
  explicit Options(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "JSON config file; command-line flags override it");
  }

  template <typename T>
  CLI::Option* add(const std::string& flag, T& field, const std::string& desc) {
    CLI::Option* opt = app_->add_option(flag, field, desc);
    bind(flag, opt, [&field](const json& v) { assign_from(v, field); });
    return opt;
  }

  template <typename T>
  CLI::Option* add_list(const std::string& flag, std::vector<T>& field, const std::string& desc) {
    CLI::Option* opt = app_->add_option(flag, field, desc)->delimiter(',');
    bind(flag, opt, [&field](const json& v) {
      if (v.is_string()) {
        field.clear();
        std::stringstream ss(v.get<std::string>());
        std::string item;
        while (std::getline(ss, item, ',')) field.push_back(parse_item<T>(item));
      } else {
        field = v.get<std::vector<T>>();
      }
    });
    return opt;
  }

  CLI::Option* flag(const std::string& flag, bool& field, const std::string& desc) {
    CLI::Option* opt = app_->add_flag(flag, field, desc);
    bind(flag, opt, [&field](const json& v) { field = v.get<bool>(); });
    return opt;
  }

  void apply_config() const {
    if (config_path_.empty()) return;
    std::ifstream in(config_path_);
    if (!in) throw std::runtime_error("cannot open config file " + config_path_);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw std::runtime_error("config file " + config_path_ + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("config file must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
      const auto it = std::find_if(bindings_.begin(), bindings_.end(),
                                   [&](const Binding& b) { return b.key == normalize_key(key); });
      if (it == bindings_.end()) throw std::runtime_error("unknown config key '" + key + "'");
      if (it->option->count() > 0) continue;
      try {
        it->set(value);
      } catch (const json::exception& e) {
        throw std::runtime_error("config key '" + key + "': " + e.what());
      }
    }
  }

 private:
  struct Binding {
    std::string key;
    CLI::Option* option;
    std::function<void(const json&)> set;
  };

  void bind(const std::string& flag, CLI::Option* opt, std::function<void(const json&)> set) {
    bindings_.push_back({normalize_key(flag.substr(flag.find_first_not_of('-'))), opt, std::move(set)});
  }

  CLI::App* app_;
  std::string config_path_;
  std::vector<Binding> bindings_;
};

// Collects output files and writes them only when the command succeeds.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string contents) { pending_.emplace_back(dir_ / name, std::move(contents)); }
  void add_at(fs::path path, std::string contents) { pending_.emplace_back(std::move(path), std::move(contents)); }

  void commit(std::ostream& out) {
    std::vector<fs::path> written;
    try {
      for (const auto& [path, contents] : pending_) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        write_file_atomic(path, contents);
        written.push_back(path);
      }
    } catch (...) {
      std::error_code ec;
      for (const auto& p : written) fs::remove(p, ec);
      throw;
    }
    for (const auto& p : written) out << "wrote " << p.string() << '\n';
  }

 private:
  fs::path dir_;
  std::vector<std::pair<fs::path, std::string>> pending_;
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

template <typename Fn>
std::string to_string_with(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

struct TrainOptions {
  std::size_t m = 5;
  double lambda = 0.5;
  double alpha = 1e-3;
  std::uint64_t seed = 0;
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::size_t patience = 20;
  double val_fraction = 0.1;
  std::size_t embed_dim = 64;
  std::size_t n_blocks = 2;
  std::size_t hidden_dim = 64;
  double dropout = 0.1;
  bool baseline = false;
  double l2 = 1e-4;

  void bind(Options& o) {
    o.add("--m", m, "ensemble size");
    o.add("--lambda", lambda, "L1 share of the weight penalty, in [0, 1]");
    o.add("--alpha", alpha, "overall weight-penalty scale");
    o.add("--seed", seed, "base seed for ensemble members");
    o.add("--epochs", epochs, "maximum training epochs");
    o.add("--batch-size", batch_size, "mini-batch size");
    o.add("--lr", learning_rate, "Adam learning rate");
    o.add("--patience", patience, "early-stopping patience in epochs");
    o.add("--val-fraction", val_fraction, "share of training rows held out for early stopping");
    o.add("--embed-dim", embed_dim, "backbone embedding width");
    o.add("--blocks", n_blocks, "number of residual blocks");
    o.add("--hidden-dim", hidden_dim, "residual block hidden width");
    o.add("--dropout", dropout, "dropout rate inside residual blocks");
    o.flag("--baseline", baseline, "train the linear logistic baseline instead of the ensemble");
    o.add("--l2", l2, "L2 penalty of the linear baseline");
  }

  TrainConfig config() const {
    TrainConfig c;
    c.lambda = lambda;
    c.alpha = alpha;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.learning_rate = learning_rate;
    c.patience = patience;
    c.validation_fraction = val_fraction;
    c.seed = seed;
    c.embed_dim = embed_dim;
    c.n_blocks = n_blocks;
    c.hidden_dim = hidden_dim;
    c.dropout = dropout;
    c.validate();
    return c;
  }
};

struct DataOptions {
  std::string data;
  std::string schema;
  double test_fraction = 0.0;
  std::uint64_t split_seed = 0;

  void bind(Options& o, bool with_split) {
    o.add("--data", data, "input CSV")->check(CLI::ExistingFile);
    o.add("--schema", schema, "feature schema JSON");
    if (with_split) {
      o.add("--test-fraction", test_fraction, "hold out this share of rows (0 = use all rows)");
      o.add("--split-seed", split_seed, "seed of the train/test split");
    }
  }
};

FeatureSchema resolve_schema(const DataOptions& d, const ModelFile* model) {
  if (d.schema.empty()) {
    if (!model) throw SchemaError("--schema is required");
    return model->schema;
  }
  FeatureSchema schema = load_schema(d.schema);
  if (model && schema.fingerprint() != model->schema.fingerprint()) {
    throw SchemaError("schema fingerprint " + schema.fingerprint() + " does not match model fingerprint " +
                      model->schema.fingerprint());
  }
  return schema;
}

enum class Part { kAll, kTrain, kTest };

RawTable load_rows(const DataOptions& d, const FeatureSchema& schema, Part part) {
  if (d.data.empty()) throw std::invalid_argument("--data is required");
  RawTable raw = load_csv(d.data, schema);
  if (d.test_fraction <= 0.0 || part == Part::kAll) return raw;
  auto [train, test] = split(raw, d.split_seed, d.test_fraction);
  return part == Part::kTrain ? std::move(train) : std::move(test);
}

std::string training_summary(const EnsembleModel& ens, const std::vector<TrainReport>& reports) {
  std::ostringstream os;
  char buf[200];
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const auto& r = reports[k];
    if (r.train_loss.empty()) continue;
    const double best_val = r.val_nll.empty() ? 0.0 : r.val_nll[r.best_epoch];
    const double first_val = r.val_nll.empty() ? 0.0 : r.val_nll.front();
    std::snprintf(buf, sizeof(buf),
                  "member %zu (seed %llu): %zu epochs, best epoch %zu, train loss %.4f -> %.4f, "
                  "val NLL %.4f -> %.4f\n",
                  k, static_cast<unsigned long long>(ens.member_seeds[k]), r.train_loss.size(), r.best_epoch + 1,
                  r.train_loss.front(), r.train_loss.back(), first_val, best_val);
    os << buf;
  }
  return os.str();
}

std::vector<double> model_probs(const ModelFile& model, const Dataset& ds) {
  return model.is_ensemble() ? predict_batch(model.ensemble(), ds.x) : predict_logreg_batch(model.linear(), ds.x);
}

// ---- gen-synth -------------------------------------------------------------

struct GenSynthCommand {
  SynthConfig cfg;
  std::string out_dir;

  void bind(Options& o) {
    o.add("--out", out_dir, "output directory");
    o.add("--n", cfg.rows, "number of rows");
    o.add("--f", cfg.features, "number of features (>= 4)");
    o.add("--k", cfg.archetypes, "number of driver archetypes (>= 2)");
    o.add("--noise", cfg.noise, "per-row weight jitter");
    o.add("--seed", cfg.seed, "generator seed");
    o.add("--weight-scale", cfg.weight_scale, "multiplier on every true weight");
    o.add("--bias", cfg.bias, "true utility bias");
  }

  void run(std::ostream& out) const {
    if (out_dir.empty()) throw std::invalid_argument("--out is required");
    const SynthData data = gen_synthetic(cfg);
    Outputs outputs(out_dir);
    outputs.add("data.csv", to_string_with([&](std::ostream& os) { write_csv(os, data.raw); }));
    outputs.add("schema.json", dump(schema_to_json(data.raw.schema)));
    outputs.add("ground_truth.json", ground_truth_to_json(data.truth).dump() + "\n");
    outputs.add("synth_config.json", dump(synth_config_to_json(cfg)));
    outputs.commit(out);
    out << "rows: " << data.raw.rows() << "\nfeatures: " << data.raw.schema.size()
        << "\ncolumns: " << data.raw.schema.size() + 1 << "\npositive_rate: " << data.dataset.positive_rate()
        << '\n';
  }
};

// ---- train -----------------------------------------------------------------

struct TrainCommand {
  DataOptions data;
  TrainOptions train;
  std::string out_dir;
  std::string model_path;

  void bind(Options& o) {
    data.bind(o, true);
    train.bind(o);
    o.add("--out", out_dir, "output directory (model.json is written here)");
    o.add("--model", model_path, "explicit model file path");
  }

  void run(std::ostream& out) const {
    const FeatureSchema schema = resolve_schema(data, nullptr);
    const RawTable raw = load_rows(data, schema, Part::kTrain);
    auto [ds, stats] = standardize(raw);
    ModelFile file;
    file.schema = schema;
    file.stats = stats;
    if (train.baseline) {
      LogRegReport rep;
      file.model = fit_logreg(ds, {train.l2, 1e-6, 20000}, &rep);
      out << "linear baseline: " << rep.iterations << " iterations, gradient norm " << rep.grad_norm
          << (rep.converged ? " (converged)\n" : " (iteration limit)\n");
    } else {
      std::vector<TrainReport> reports;
      EnsembleModel ens = train_ensemble(ds, train.m, train.seed, train.config(), &reports);
      out << training_summary(ens, reports);
      file.model = std::move(ens);
    }
    const fs::path path = !model_path.empty() ? fs::path(model_path)
                          : !out_dir.empty()  ? fs::path(out_dir) / "model.json"
                                              : throw std::invalid_argument("--out or --model is required");
    Outputs outputs(out_dir);
    outputs.add_at(path, dump(model_to_json(file)));
    outputs.commit(out);
    out << "model kind: " << (train.baseline ? "linear" : "ensemble") << "\ntraining rows: " << ds.rows() << '\n';
  }
};

// ---- eval ------------------------------------------------------------------

struct EvalCommand {
  DataOptions data;
  TrainOptions train;
  std::string model_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  std::size_t n_bins = 15;
  double threshold = 0.5;

  void bind(Options& o) {
    data.bind(o, true);
    train.bind(o);
    o.add("--model", model_path, "trained model file (single-split mode)");
    o.add("--out", out_dir, "output directory for reports");
    o.add_list("--seeds", seeds, "comma-separated split seeds; trains and evaluates one model per split");
    o.add("--n-bins", n_bins, "calibration bins for ECE");
    o.add("--threshold", threshold, "classification threshold for accuracy");
  }

  void run(std::ostream& out) const {
    const MetricOptions opts{n_bins, threshold};
    json report;
    std::string text;
    if (!seeds.empty()) {
      if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw std::invalid_argument("--seeds must be unique");
      }
      if (data.test_fraction <= 0.0) throw std::invalid_argument("--seeds requires --test-fraction > 0");
      const FeatureSchema schema = resolve_schema(data, nullptr);
      const RawTable raw = load_csv(data.data, schema);
      std::vector<EvalReport> reports;
      json per_split = json::array();
      for (const auto s : seeds) {
        auto [train_raw, test_raw] = split(raw, s, data.test_fraction);
        auto [train_ds, stats] = standardize(train_raw);
        auto [test_ds, unused] = standardize(test_raw, stats);
        EvalReport r;
        if (train.baseline) {
          r = evaluate(fit_logreg(train_ds, {train.l2, 1e-6, 20000}), test_ds, opts);
        } else {
          r = evaluate(train_ensemble(train_ds, train.m, train.seed + 100 * s, train.config()), test_ds, opts);
        }
        reports.push_back(r);
        per_split.push_back({{"seed", s}, {"report", report_to_json(r)}});
        out << "split seed " << s << ": AUC " << r.auc << ", NLL " << r.nll << '\n';
      }
      const auto summary = summarize(reports);
      json agg = json::object();
      for (const auto& m : summary) agg[m.name] = {{"mean", m.mean}, {"std", m.std}};
      report = {{"model", train.baseline ? "linear" : "ensemble"},
                {"m", train.baseline ? 1 : train.m},
                {"test_fraction", data.test_fraction},
                {"splits", per_split},
                {"summary", agg}};
      text = summary_to_text(summary);
    } else {
      if (model_path.empty()) throw std::invalid_argument("--model is required without --seeds");
      const ModelFile model = load_model(model_path);
      const FeatureSchema schema = resolve_schema(data, &model);
      const RawTable raw = load_rows(data, schema, Part::kTest);
      auto [ds, unused] = standardize(raw, model.stats);
      const auto p = model_probs(model, ds);
      const EvalReport r = evaluate_probs(p, ds.y, opts);
      json bins = json::array();
      for (const auto& b : reliability_bins(p, ds.y, n_bins)) {
        bins.push_back({{"lower", b.lower},
                        {"upper", b.upper},
                        {"count", b.count},
                        {"mean_confidence", b.mean_confidence},
                        {"positive_fraction", b.positive_fraction}});
      }
      report = {{"model", model.is_ensemble() ? "ensemble" : "linear"},
                {"report", report_to_json(r)},
                {"reliability_bins", bins}};
      text = report_to_text(r);
    }
    out << text;
    if (!out_dir.empty()) {
      Outputs outputs(out_dir);
      outputs.add("eval_report.json", dump(report));
      outputs.add("eval_report.txt", text);
      outputs.commit(out);
    }
  }
};

// ---- explain ---------------------------------------------------------------

struct ExplainCommand {
  DataOptions data;
  std::string model_path;
  std::string out_dir;
  std::size_t n_grid = 20;
  std::vector<std::string> features;
  std::vector<std::size_t> rows;

  void bind(Options& o) {
    data.bind(o, true);
    o.add("--model", model_path, "trained ensemble model file");
    o.add("--out", out_dir, "output directory");
    o.add("--n-grid", n_grid, "grid points per contribution sweep");
    o.add_list("--features", features, "features to sweep (default: all with more than one value)");
    o.add_list("--rows", rows, "row indices for personalized contribution tables");
  }

  void run(std::ostream& out) const {
    if (model_path.empty()) throw std::invalid_argument("--model is required");
    if (out_dir.empty()) throw std::invalid_argument("--out is required");
    const ModelFile model = load_model(model_path);
    if (!model.is_ensemble()) throw std::invalid_argument("explain needs an ensemble model");
    const FeatureSchema schema = resolve_schema(data, &model);
    const RawTable raw = load_rows(data, schema, Part::kAll);
    auto [ds, unused] = standardize(raw, model.stats);
    const auto& ens = model.ensemble();

    Outputs outputs(out_dir);
    const auto table = global_importance(ens, ds);
    outputs.add("importance.csv", to_string_with([&](std::ostream& os) { write_importance_csv(os, table); }));
    outputs.add("importance.json", dump(importance_to_json(table)));

    std::vector<std::size_t> sweep;
    if (features.empty()) {
      for (std::size_t i = 0; i < schema.size(); ++i) {
        const auto col = ds.x.row(0)[i];
        bool varies = false;
        for (std::size_t r = 1; r < ds.rows() && !varies; ++r) varies = ds.x(r, i) != col;
        if (varies) sweep.push_back(i);
      }
    } else {
      for (const auto& name : features) sweep.push_back(feature_index(schema, name));
    }
    json curves = json::array();
    for (const auto i : sweep) {
      const auto curve = contribution_sweep(ens, ds, i, n_grid);
      outputs.add("sweep_" + curve.name + ".csv",
                  to_string_with([&](std::ostream& os) { write_curve_csv(os, curve); }));
      curves.push_back(curve_to_json(curve));
    }
    outputs.add("sweeps.json", dump(curves));

    for (const auto r : rows) {
      if (r >= ds.rows()) throw std::out_of_range("row " + std::to_string(r) + " out of range");
      const auto e = instance_contributions(ens, schema, ds.x.row(r));
      outputs.add("instance_" + std::to_string(r) + ".csv",
                  to_string_with([&](std::ostream& os) { write_instance_csv(os, e); }));
      auto j = instance_to_json(e);
      j["row"] = r;
      outputs.add("instance_" + std::to_string(r) + ".json", dump(j));
    }
    outputs.commit(out);

    out << "feature importance (" << kSignConvention << "):\n";
    char buf[128];
    for (const auto& row : table.rows) {
      std::snprintf(buf, sizeof(buf), "  %-12s %+9.4f  (std %.4f)\n", row.name.c_str(), row.mean_weight,
                    row.std_weight);
      out << buf;
    }
  }

  static std::size_t feature_index(const FeatureSchema& schema, const std::string& name) {
    if (auto i = schema.index_of(name)) return *i;
    std::string valid;
    for (const auto& n : schema.names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown feature '" + name + "'; valid names: " + valid);
  }
};

// ---- counterfactual ----------------------------------------------------------

struct CounterfactualCommand {
  DataOptions data;
  std::string model_path;
  std::string out_dir;
  std::size_t row = 0;
  std::string feature;
  std::vector<double> grid;
  std::optional<double> grid_min;
  std::optional<double> grid_max;
  std::size_t n_grid = 10;

  void bind(Options& o) {
    data.bind(o, true);
    o.add("--model", model_path, "trained ensemble model file");
    o.add("--out", out_dir, "output directory");
    o.add("--row", row, "row index of the base record");
    o.add("--feature", feature, "feature to sweep");
    o.add_list("--grid", grid, "comma-separated grid in raw units");
    o.add("--grid-min", grid_min, "grid start in raw units (with --grid-max)");
    o.add("--grid-max", grid_max, "grid end in raw units (with --grid-min)");
    o.add("--n-grid", n_grid, "grid points when using --grid-min/--grid-max");
  }

  void run(std::ostream& out) const {
    if (model_path.empty()) throw std::invalid_argument("--model is required");
    if (out_dir.empty()) throw std::invalid_argument("--out is required");
    if (feature.empty()) throw std::invalid_argument("--feature is required");
    const ModelFile model = load_model(model_path);
    if (!model.is_ensemble()) throw std::invalid_argument("counterfactual needs an ensemble model");
    const FeatureSchema schema = resolve_schema(data, &model);
    const std::size_t i = ExplainCommand::feature_index(schema, feature);
    const RawTable raw = load_rows(data, schema, Part::kAll);
    if (row >= raw.rows()) throw std::out_of_range("row " + std::to_string(row) + " out of range");
    auto [ds, unused] = standardize(raw, model.stats);

    std::vector<double> g = grid;
    if (g.empty()) {
      const double lo = grid_min.value_or(raw.values(row, i));
      const double hi = grid_max.value_or(raw.values(row, i));
      if (!grid_min || !grid_max) throw std::invalid_argument("give --grid or both --grid-min and --grid-max");
      if (n_grid < 2) throw std::invalid_argument("--n-grid must be >= 2");
      for (std::size_t k = 0; k < n_grid; ++k) {
        g.push_back(k + 1 == n_grid ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n_grid - 1));
      }
    }
    const auto& ens = model.ensemble();
    const auto res = counterfactual_sweep(ens, schema, ds.x.row(row), i, g, model.stats);
    const auto base = instance_contributions(ens, schema, ds.x.row(row));

    Outputs outputs(out_dir);
    outputs.add("counterfactual.csv", to_string_with([&](std::ostream& os) { write_counterfactual_csv(os, res); }));
    auto j = counterfactual_to_json(res);
    j["row"] = row;
    j["base_record_raw"] = std::vector<double>(raw.values.row(row).begin(), raw.values.row(row).end());
    outputs.add("counterfactual.json", dump(j));
    outputs.add("instance_" + std::to_string(row) + ".csv",
                to_string_with([&](std::ostream& os) { write_instance_csv(os, base); }));
    outputs.commit(out);

    out << "base rejection probability: " << base.probability << '\n';
    if (res.flip_raw) {
      out << "predicted class flips at " << feature << " = " << *res.flip_raw << '\n';
    } else {
      out << "predicted class does not change over the grid\n";
    }
  }
};

// ---- predict ---------------------------------------------------------------

struct PredictCommand {
  DataOptions data;
  std::string model_path;
  std::string out_dir;
  double threshold = 0.5;

  void bind(Options& o) {
    data.bind(o, true);
    o.add("--model", model_path, "trained model file");
    o.add("--out", out_dir, "output directory");
    o.add("--threshold", threshold, "classification threshold");
  }

  void run(std::ostream& out) const {
    if (model_path.empty()) throw std::invalid_argument("--model is required");
    if (out_dir.empty()) throw std::invalid_argument("--out is required");
    const ModelFile model = load_model(model_path);
    const FeatureSchema schema = resolve_schema(data, &model);
    const RawTable raw = load_rows(data, schema, Part::kAll);
    auto [ds, unused] = standardize(raw, model.stats);

    std::ostringstream csv;
    csv << "row,prob_mean,prob_std,predicted_class\n";
    std::vector<Uncertainty> unc;
    if (model.is_ensemble()) {
      unc = predict_uncertainty_batch(model.ensemble(), ds.x);
    } else {
      for (double p : predict_logreg_batch(model.linear(), ds.x)) unc.push_back({p, 0.0});
    }
    char buf[32];
    auto num = [&buf](double v) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      return std::string(buf, res.ptr);
    };
    std::size_t positives = 0;
    for (std::size_t r = 0; r < unc.size(); ++r) {
      const int cls = unc[r].mean >= threshold ? 1 : 0;
      positives += static_cast<std::size_t>(cls);
      csv << r << ',' << num(unc[r].mean) << ',' << num(unc[r].std) << ',' << cls << '\n';
    }
    Outputs outputs(out_dir);
    outputs.add("predictions.csv", csv.str());
    outputs.commit(out);
    out << "rows: " << unc.size() << "\npredicted rejections: " << positives << '\n';
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Personalized utility learning with ensemble hypernetworks"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)");

  GenSynthCommand gen;
  TrainCommand train;
  EvalCommand eval;
  ExplainCommand explain;
  CounterfactualCommand counterfactual;
  PredictCommand predict;

  auto* gen_app = app.add_subcommand("gen-synth", "generate a synthetic dataset with known ground truth");
  auto* train_app = app.add_subcommand("train", "train an ensemble (or --baseline linear model)");
  auto* eval_app = app.add_subcommand("eval", "evaluate a model, or run the multi-split protocol with --seeds");
  auto* explain_app = app.add_subcommand("explain", "feature importance and contribution sweeps");
  auto* cf_app = app.add_subcommand("counterfactual", "sweep one feature of one record");
  auto* predict_app = app.add_subcommand("predict", "rejection probabilities for every row");

  Options gen_opts(gen_app);
  gen.bind(gen_opts);
  Options train_opts(train_app);
  train.bind(train_opts);
  Options eval_opts(eval_app);
  eval.bind(eval_opts);
  Options explain_opts(explain_app);
  explain.bind(explain_opts);
  Options cf_opts(cf_app);
  counterfactual.bind(cf_opts);
  Options predict_opts(predict_app);
  predict.bind(predict_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (gen_app->parsed()) {
      gen_opts.apply_config();
      gen.run(out);
    } else if (train_app->parsed()) {
      train_opts.apply_config();
      train.run(out);
    } else if (eval_app->parsed()) {
      eval_opts.apply_config();
      eval.run(out);
    } else if (explain_app->parsed()) {
      explain_opts.apply_config();
      explain.run(out);
    } else if (cf_app->parsed()) {
      cf_opts.apply_config();
      counterfactual.run(out);
    } else if (predict_app->parsed()) {
      predict_opts.apply_config();
      predict.run(out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace hyperutil::cli
