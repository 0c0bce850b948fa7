// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <omp.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "metric_oracle.hpp"
#include "hyperutil/ensemble.hpp"
#include "hyperutil/explain.hpp"
#include "hyperutil/hypernet.hpp"
#include "hyperutil/logreg.hpp"
#include "hyperutil/metrics.hpp"
#include "hyperutil/model_io.hpp"
#include "hyperutil/synth.hpp"

using namespace hyperutil;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double pop_std(const std::vector<double>& v) {
  double m = mean_of(v), s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / v.size());
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * (i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ra = ranks(a), rb = ranks(b);
  double ma = mean_of(ra), mb = mean_of(rb), num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  if (da == 0 || db == 0) return 0.0;
  return num / std::sqrt(da * db);
}

// ---- 1 ----------------------------------------------------------------------

// Which side of every non-smooth point the loss sits on: ReLU inputs, the L1
// term at w = 0 and the probability clamp.
std::vector<bool> kink_sides(const HyperMember& m, const Dataset& batch) {
  static const double bound = std::log((1.0 - kProbFloor) / kProbFloor);
  ForwardCache cache;
  Matrix out = forward(m.net, m.arch, batch.x, false, 0, &cache);
  std::vector<bool> s;
  for (const auto& b : cache.blocks)
    for (double v : b.pre.data()) s.push_back(v > 0.0);
  const std::size_t f = batch.features();
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    double z = out(r, f);
    for (std::size_t i = 0; i < f; ++i) {
      s.push_back(out(r, i) > 0.0);
      z += out(r, i) * batch.x(r, i);
    }
    s.push_back(z > -bound);
    s.push_back(z < bound);
  }
  return s;
}

struct GradStats {
  double worst = 0.0;
  std::size_t skipped = 0;
};

// Central differences on 200 coordinates per pair. A coordinate whose +-h
// stencil straddles a kink has no derivative to compare, so another is drawn.
void check_pair(const HyperMember& m, const Dataset& batch, const TrainConfig& c, std::uint64_t seed,
                GradStats& st) {
  const double h = 1e-5;
  const NetParams analytic = batch_loss(m, batch.x, batch.y, c).grads;
  std::vector<std::size_t> coords(m.net.parameter_count());
  std::iota(coords.begin(), coords.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  HyperMember probe = m;
  std::size_t checked = 0;
  for (std::size_t i : coords) {
    if (checked == 200) break;
    const double original = probe.net.coord(i);
    probe.net.coord(i) = original + h;
    const double up = batch_loss(probe, batch.x, batch.y, c).loss;
    auto sides_up = kink_sides(probe, batch);
    probe.net.coord(i) = original - h;
    const double down = batch_loss(probe, batch.x, batch.y, c).loss;
    auto sides_down = kink_sides(probe, batch);
    probe.net.coord(i) = original;
    if (sides_up != sides_down) {
      ++st.skipped;
      continue;
    }
    const double fd = (up - down) / (2.0 * h);
    const double a = analytic.coord(i);
    st.worst = std::max(st.worst, std::abs(a - fd) / (std::abs(a) + std::abs(fd) + 1e-12));
    ++checked;
  }
}

Outcome gradient_correctness() {
  auto t0 = Clock::now();
  SynthData d = gen_synthetic(SynthConfig{});
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0, 1);
  GradStats st;
  for (int pair = 0; pair < 20; ++pair) {
    TrainConfig c;
    c.dropout = 0.0;
    c.alpha = 0.05;
    c.lambda = unit(rng);
    HyperMember m = make_member(d.dataset.features(), c, 1000 + pair);
    std::uniform_real_distribution<double> b(-0.2, 0.2);
    for (auto& l : m.net.layers)
      for (double& v : l.bias) v = b(rng);
    std::vector<std::size_t> rows(64);
    std::uniform_int_distribution<std::size_t> pick(0, d.dataset.rows() - 1);
    for (auto& r : rows) r = pick(rng);
    check_pair(m, subset(d.dataset, rows), c, pair, st);
  }
  double t = seconds_since(t0);
  return {st.worst < 1e-4 && t < 30.0,
          fmt("max rel error %.3g over 20 pairs x 200 coordinates (%zu kink-straddling draws replaced), %.1f s",
              st.worst, st.skipped, t)};
}

// ---- 2 ----------------------------------------------------------------------

Outcome metric_oracles() {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    auto in = oracle::random_instance(s);
    worst = std::max({worst, std::abs(accuracy(in.p, in.y) - oracle::accuracy(in.p, in.y)),
                      std::abs(auc_roc(in.p, in.y) - oracle::auc(in.p, in.y)),
                      std::abs(auc_pr(in.p, in.y) - oracle::aucpr(in.p, in.y)),
                      std::abs(ece(in.p, in.y) - oracle::ece(in.p, in.y)),
                      std::abs(brier(in.p, in.y) - oracle::brier(in.p, in.y)),
                      std::abs(nll(in.p, in.y) - oracle::nll(in.p, in.y))});
  }
  return {worst <= 1e-12, fmt("max abs deviation %.3g over 200 instances", worst)};
}

// ---- 3 and 4 share the five-split protocol ----------------------------------

struct SplitRun {
  EvalReport lin, ens5, ens1;
};

struct Protocol {
  std::vector<SplitRun> runs;
  double seconds = 0.0;
  double first_fit_seconds = 0.0;
};

Protocol run_protocol() {
  Protocol p;
  int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  auto t0 = Clock::now();
  SynthData d = gen_synthetic(SynthConfig{});
  TrainConfig cfg;
  for (std::uint64_t s = 0; s < 5; ++s) {
    // Same protocol as `eval --seeds`: normalization from the training rows only.
    auto [train_raw, test_raw] = split(d.raw, s, 0.3);
    auto [train, stats] = standardize(train_raw);
    Dataset test = standardize(test_raw, stats).first;
    SplitRun r;
    r.lin = evaluate(fit_logreg(train), test);
    auto tf = Clock::now();
    EnsembleModel ens = train_ensemble(train, 5, cfg.seed + 100 * s, cfg);
    if (s == 0) p.first_fit_seconds = seconds_since(tf);
    r.ens5 = evaluate(ens, test);
    // Member 0 is exactly what a one-member run with the same base seed trains.
    EnsembleModel single = ens;
    single.members.resize(1);
    single.member_seeds.resize(1);
    r.ens1 = evaluate(single, test);
    p.runs.push_back(r);
  }
  p.seconds = seconds_since(t0);
  omp_set_num_threads(saved);
  return p;
}

std::vector<double> column(const Protocol& p, std::function<double(const SplitRun&)> f) {
  std::vector<double> v;
  for (const auto& r : p.runs) v.push_back(f(r));
  return v;
}

Outcome trend_vs_logistic(const Protocol& p) {
  double auc_e = mean_of(column(p, [](auto& r) { return r.ens5.auc; }));
  double auc_l = mean_of(column(p, [](auto& r) { return r.lin.auc; }));
  double ece_e = mean_of(column(p, [](auto& r) { return r.ens5.ece; }));
  double ece_l = mean_of(column(p, [](auto& r) { return r.lin.ece; }));
  bool ok = auc_e - auc_l >= 0.05 && ece_e <= ece_l && p.seconds < 600.0;
  return {ok, fmt("AUC %.4f vs %.4f (gap %.4f), ECE %.4f vs %.4f, %.0f s single-thread "
                  "(one M=5 fit %.1f s)",
                  auc_e, auc_l, auc_e - auc_l, ece_e, ece_l, p.seconds, p.first_fit_seconds)};
}

Outcome ensemble_vs_single(const Protocol& p) {
  auto nll5 = column(p, [](auto& r) { return r.ens5.nll; });
  auto nll1 = column(p, [](auto& r) { return r.ens1.nll; });
  auto br5 = column(p, [](auto& r) { return r.ens5.brier; });
  auto br1 = column(p, [](auto& r) { return r.ens1.brier; });
  bool ok = mean_of(nll5) <= mean_of(nll1) + pop_std(nll1) && mean_of(br5) <= mean_of(br1) + pop_std(br1);
  return {ok, fmt("NLL %.4f vs %.4f (slack %.4f), Brier %.4f vs %.4f (slack %.4f)", mean_of(nll5),
                  mean_of(nll1), pop_std(nll1), mean_of(br5), mean_of(br1), pop_std(br1))};
}

// ---- 5, 7, 10 share one ensemble trained on the full default dataset --------

struct Fitted {
  SynthData data;
  EnsembleModel ens;
};

Fitted fit_default() {
  SynthData d = gen_synthetic(SynthConfig{});
  EnsembleModel e = train_ensemble(d.dataset, 5, 0, TrainConfig{});
  return {std::move(d), std::move(e)};
}

Outcome ground_truth_recovery(const Fitted& f) {
  ImportanceTable t = global_importance(f.ens, f.data.dataset);
  const auto& w = f.data.truth.row_weights;
  std::size_t eligible = 0, agree = 0;
  std::string names;
  for (std::size_t i = 0; i < w.cols(); ++i) {
    double m = 0.0;
    for (std::size_t r = 0; r < w.rows(); ++r) m += w(r, i);
    m /= w.rows();
    if (std::abs(m) <= 0.2) continue;
    ++eligible;
    if (m * t.rows[i].mean_weight > 0) {
      ++agree;
    } else {
      names += " " + t.rows[i].name;
    }
  }
  bool ok = eligible > 0 && agree >= 0.8 * eligible;
  return {ok, fmt("%zu of %zu features with |mean true weight| > 0.2 agree in sign%s%s", agree, eligible,
                  names.empty() ? "" : "; disagree:", names.c_str())};
}

Outcome counterfactual_monotone(const Fitted& f) {
  const Dataset& ds = f.data.dataset;
  const auto& raw = f.data.raw.values;
  double lo = raw(0, kSynthFare), hi = lo;
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    lo = std::min(lo, raw(r, kSynthFare));
    hi = std::max(hi, raw(r, kSynthFare));
  }
  std::vector<double> grid(20);
  for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = lo + (hi - lo) * k / (grid.size() - 1.0);
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> pick(0, ds.rows() - 1);
  int good = 0;
  double worst = 1.0;
  for (int b = 0; b < 50; ++b) {
    auto r = counterfactual_sweep(f.ens, ds.schema, ds.x.row(pick(rng)), kSynthFare, grid, ds.stats);
    double rho = spearman(grid, r.prob);
    good += rho <= -0.9;
    worst = std::max(worst == 1.0 ? rho : worst, rho);
  }
  return {good >= 45, fmt("%d of 50 base records with Spearman <= -0.9 (largest rho %.3f)", good, worst)};
}

Outcome additivity(const Fitted& f) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 1.5);
  double worst = 0.0;
  std::vector<double> x(f.ens.features());
  for (int n = 0; n < 1000; ++n) {
    for (double& v : x) v = g(rng);
    InstanceExplanation e = instance_contributions(f.ens, f.data.dataset.schema, x);
    double sum = e.bias;
    for (const auto& c : e.contributions) sum += c.value;
    worst = std::max(worst, std::abs(sum - avg_weights(f.ens, x).logit(x)));
  }
  return {worst <= 1e-12, fmt("max |sum of contributions + bias - logit| = %.3g over 1000 records", worst)};
}

// ---- 6 ----------------------------------------------------------------------

HyperMember constant_member(const std::vector<double>& w, double b) {
  TrainConfig c;
  HyperMember m = make_member(w.size(), c, 0);
  for (auto& l : m.net.layers) {
    l.weight.fill(0.0);
    l.bias.assign(l.bias.size(), 0.0);
  }
  for (std::size_t i = 0; i < w.size(); ++i) m.net.layers.back().bias[i] = w[i];
  m.net.layers.back().bias[w.size()] = b;
  return m;
}

EnsembleModel ensemble_of(std::vector<HyperMember> ms) {
  EnsembleModel e;
  for (std::size_t i = 0; i < ms.size(); ++i) e.member_seeds.push_back(i);
  e.members = std::move(ms);
  return e;
}

Outcome ensemble_identities() {
  std::vector<std::string> broken;
  SynthConfig sc;
  sc.rows = 200;
  Dataset ds = gen_synthetic(sc).dataset;

  HyperMember m = make_member(ds.features(), TrainConfig{}, 3);
  EnsembleModel same = ensemble_of({m, m, m, m, m});
  for (std::size_t r = 0; r < ds.rows(); ++r)
    if (predict(same, ds.x.row(r)) != predict_prob(m, ds.x.row(r))) {
      broken.push_back("identical members");
      break;
    }

  EnsembleModel two = ensemble_of({constant_member({1, 3}, 0), constant_member({3, 1}, 0)});
  if (avg_weights(two, std::vector<double>{0.5, -1}).weights != std::vector<double>{2, 2})
    broken.push_back("[1,3],[3,1] average");

  std::vector<HyperMember> ms;
  for (int s = 0; s < 5; ++s) ms.push_back(make_member(ds.features(), TrainConfig{}, 10 + s));
  EnsembleModel e = ensemble_of(ms);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    auto perm = ms;
    std::shuffle(perm.begin(), perm.end(), rng);
    EnsembleModel q = ensemble_of(perm);
    bool ok = predict_batch(e, ds.x) == predict_batch(q, ds.x) &&
              avg_weights_batch(e, ds.x) == avg_weights_batch(q, ds.x);
    if (!ok) {
      broken.push_back("permutation");
      break;
    }
  }
  std::string d = broken.empty() ? "identical-member, averaging and 10 permutations exact" : "broken:";
  for (auto& b : broken) d += " " + b;
  return {broken.empty(), d};
}

// ---- 8 ----------------------------------------------------------------------

Outcome baseline_consistency() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2, 2);
  Dataset ds;
  ds.schema.features.push_back({"x"});
  ds.stats = {{0.0}, {1.0}, {true}};
  ds.x = Matrix(500, 1);
  for (std::size_t r = 0; r < 500; ++r) {
    double v = u(rng);
    if (std::abs(v) < 0.1) v = v < 0 ? -0.1 : 0.1;
    ds.x(r, 0) = v;
    ds.y.push_back(v > 0);
  }
  double acc = accuracy(predict_logreg_batch(fit_logreg(ds), ds.x), ds.y);
  std::vector<double> constant(ds.rows(), ds.positive_rate());
  double auc = auc_roc(constant, ds.y);
  return {acc >= 0.95 && auc == 0.5, fmt("separable ACC %.4f, constant-predictor AUC %.17g", acc, auc)};
}

// ---- 9 ----------------------------------------------------------------------

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hyperutil");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::fprintf(stderr, "cli %s failed: %s\n", args[1].c_str(), err.str().c_str());
  return code;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = s.str();
  }
  return files;
}

// Whole pipeline into `root`; --threads is a global option.
bool pipeline(const fs::path& root, const std::string& threads) {
  auto p = [&](const char* n) { return (root / n).string(); };
  std::string data = p("synth/data.csv"), schema = p("synth/schema.json"), model = p("ens/model.json");
  auto run = [&](std::vector<std::string> a) {
    a.insert(a.begin(), {"--threads", threads});
    return cli(std::move(a)) == 0;
  };
  return run({"gen-synth", "--out", p("synth"), "--n", "1200"}) &&
         run({"train", "--data", data, "--schema", schema, "--test-fraction", "0.3", "--m", "3", "--epochs",
              "20", "--out", p("ens")}) &&
         run({"train", "--data", data, "--schema", schema, "--test-fraction", "0.3", "--baseline", "--out",
              p("lin")}) &&
         run({"eval", "--data", data, "--schema", schema, "--seeds", "0,1,2", "--test-fraction", "0.3", "--m",
              "3", "--epochs", "20", "--out", p("eval")}) &&
         run({"eval", "--data", data, "--schema", schema, "--model", model, "--test-fraction", "0.3", "--out",
              p("eval_single")}) &&
         run({"explain", "--data", data, "--schema", schema, "--model", model, "--rows", "0,5", "--out",
              p("explain")}) &&
         run({"counterfactual", "--data", data, "--schema", schema, "--model", model, "--row", "7", "--feature",
              "fare", "--grid-min", "5", "--grid-max", "45", "--n-grid", "12", "--out", p("cf")}) &&
         run({"predict", "--data", data, "--schema", schema, "--model", model, "--out", p("pred")});
}

Outcome determinism_and_persistence() {
  fs::path base = fs::temp_directory_path() / ("hyperutil_accept_" + std::to_string(::getpid()));
  fs::remove_all(base);
  bool ran = pipeline(base / "a", "1") && pipeline(base / "b", "1") && pipeline(base / "c", "4");
  std::size_t files = 0, differing = 0;
  std::string which;
  if (ran) {
    auto a = snapshot(base / "a"), b = snapshot(base / "b"), c = snapshot(base / "c");
    files = a.size();
    for (const auto& [name, content] : a) {
      if (b[name] != content || c[name] != content) {
        ++differing;
        which += " " + name;
      }
    }
    if (b.size() != a.size() || c.size() != a.size()) ++differing;
  }

  bool round_trip = false;
  if (ran) {
    ModelFile f = load_model(base / "a" / "ens" / "model.json");
    save_model(f, base / "copy.json");
    ModelFile g = load_model(base / "copy.json");
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0, 1);
    round_trip = true;
    std::vector<double> x(f.schema.size());
    for (int k = 0; k < 100; ++k) {
      for (double& v : x) v = n(rng);
      round_trip = round_trip && predict(f.ensemble(), x) == predict(g.ensemble(), x);
    }
  }
  fs::remove_all(base);
  bool ok = ran && differing == 0 && round_trip;
  return {ok, fmt("%zu output files identical across 2 single-thread runs and a 4-thread run%s%s; "
                  "save/load keeps 100 predictions exact: %s",
                  files, differing ? "; differing:" : "", which.c_str(), round_trip ? "yes" : "no")};
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;
  criteria.emplace_back("1 gradient correctness", gradient_correctness);
  criteria.emplace_back("2 metric oracle equivalence", metric_oracles);

  Protocol protocol;
  bool have_protocol = false;
  auto get_protocol = [&]() -> const Protocol& {
    if (!have_protocol) protocol = run_protocol(), have_protocol = true;
    return protocol;
  };
  criteria.emplace_back("3 ensemble vs logistic trend", [&] { return trend_vs_logistic(get_protocol()); });
  criteria.emplace_back("4 ensemble vs single member", [&] { return ensemble_vs_single(get_protocol()); });

  std::optional<Fitted> fitted;
  auto get_fitted = [&]() -> const Fitted& {
    if (!fitted) fitted = fit_default();
    return *fitted;
  };
  criteria.emplace_back("5 ground-truth sign recovery", [&] { return ground_truth_recovery(get_fitted()); });
  criteria.emplace_back("6 ensemble identities", ensemble_identities);
  criteria.emplace_back("7 counterfactual monotonicity", [&] { return counterfactual_monotone(get_fitted()); });
  criteria.emplace_back("8 baseline consistency", baseline_consistency);
  criteria.emplace_back("9 determinism and persistence", determinism_and_persistence);
  criteria.emplace_back("10 explanation additivity", [&] { return additivity(get_fitted()); });

  int failed = 0;
  for (auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
