#include "doctest.h"

#include <omp.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "hyperutil/ensemble.hpp"
#include "hyperutil/synth.hpp"

using namespace hyperutil;
using testing_util::constant_member;
using testing_util::ensemble_of;
using testing_util::random_matrix;

namespace {

TrainConfig quick_config() {
  TrainConfig c;
  c.embed_dim = 16;
  c.hidden_dim = 16;
  c.epochs = 5;
  return c;
}

Dataset small_synth() {
  SynthConfig sc;
  sc.rows = 600;
  return gen_synthetic(sc).dataset;
}

// Logit z with an all-zero input gives p = sigmoid(z).
HyperMember member_with_logit(double z) { return constant_member({0.0, 0.0}, z); }

}  // namespace

TEST_CASE("averaged weights of [1,3] and [3,1]") {
  EnsembleModel e = ensemble_of({constant_member({1, 3}, 0.5), constant_member({3, 1}, 1.5)});
  std::vector<double> x = {0.2, -0.4};
  InstanceUtility u = avg_weights(e, x);
  CHECK(u.weights == std::vector<double>{2, 2});
  CHECK(u.bias == 1.0);
}

TEST_CASE("member probabilities 0.2 and 0.8 average to 0.5") {
  double z = std::log(0.2 / 0.8);
  EnsembleModel e = ensemble_of({member_with_logit(z), member_with_logit(-z)});
  std::vector<double> x = {0, 0};
  CHECK(predict(e, x) == doctest::Approx(0.5).epsilon(1e-12));
  Uncertainty u = predict_uncertainty(e, x);
  CHECK(u.mean == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(u.std == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("logits {0, 2}: probability mean differs from sigmoid of mean logit") {
  EnsembleModel e = ensemble_of({member_with_logit(0.0), member_with_logit(2.0)});
  std::vector<double> x = {1.0, -1.0};
  double expect = (0.5 + 1.0 / (1.0 + std::exp(-2.0))) / 2.0;
  CHECK(predict(e, x) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(predict(e, x) == doctest::Approx(0.69040).epsilon(1e-5));
  double via_weights = sigmoid(avg_weights(e, x).logit(x));
  CHECK(via_weights == doctest::Approx(0.73106).epsilon(1e-5));
}

TEST_CASE("a single member ensemble degenerates to the member") {
  HyperMember m = make_member(3, quick_config(), 4);
  EnsembleModel e = ensemble_of({m});
  Matrix x = random_matrix(6, 3, 2);
  for (std::size_t r = 0; r < 6; ++r) {
    InstanceUtility a = avg_weights(e, x.row(r)), b = hyper_forward(m, x.row(r));
    CHECK(a.weights == b.weights);
    CHECK(a.bias == b.bias);
    CHECK(predict(e, x.row(r)) == predict_prob(m, x.row(r)));
    CHECK(predict_uncertainty(e, x.row(r)).std == 0.0);
  }
}

TEST_CASE("identical members agree with one member, and both reductions coincide") {
  HyperMember m = make_member(3, quick_config(), 9);
  EnsembleModel e = ensemble_of({m, m, m, m, m});
  Matrix x = random_matrix(20, 3, 3);
  for (std::size_t r = 0; r < 20; ++r) {
    auto row = x.row(r);
    CHECK(predict(e, row) == predict_prob(m, row));
    CHECK(sigmoid(avg_weights(e, row).logit(row)) == predict_prob(m, row));
    CHECK(clamp_prob(sigmoid(avg_weights(e, row).logit(row))) == predict(e, row));
    CHECK(avg_weights(e, row).weights == hyper_forward(m, row).weights);
    CHECK(predict_uncertainty(e, row).std == 0.0);
  }
}

TEST_CASE("prediction stays in the hull and ignores member order") {
  std::vector<HyperMember> ms;
  for (std::uint64_t s = 0; s < 5; ++s) ms.push_back(make_member(4, quick_config(), 100 + s));
  EnsembleModel e = ensemble_of(ms);
  std::vector<HyperMember> rev(ms.rbegin(), ms.rend());
  std::vector<HyperMember> rot(ms.begin() + 2, ms.end());
  rot.insert(rot.end(), ms.begin(), ms.begin() + 2);
  EnsembleModel er = ensemble_of(rev), eo = ensemble_of(rot);
  Matrix x = random_matrix(50, 4, 5, -3, 3);
  auto batch = predict_batch(e, x);
  auto unc = predict_uncertainty_batch(e, x);
  Matrix wbar = avg_weights_batch(e, x);
  for (std::size_t r = 0; r < 50; ++r) {
    auto row = x.row(r);
    double lo = 1, hi = 0;
    for (const auto& m : ms) {
      lo = std::min(lo, predict_prob(m, row));
      hi = std::max(hi, predict_prob(m, row));
    }
    double p = predict(e, row);
    CHECK(p >= lo);
    CHECK(p <= hi);
    CHECK(p == predict(er, row));
    CHECK(p == predict(eo, row));
    CHECK(avg_weights(e, row).weights == avg_weights(er, row).weights);
    CHECK(batch[r] == p);
    CHECK(unc[r].mean == p);
    CHECK(unc[r].std == predict_uncertainty(eo, row).std);
    InstanceUtility u = avg_weights(e, row);
    for (std::size_t i = 0; i < 4; ++i) CHECK(wbar(r, i) == u.weights[i]);
    CHECK(wbar(r, 4) == u.bias);
  }
}

TEST_CASE("symmetric_mean") {
  std::vector<double> v = {3.0, 1.0, 2.0};
  CHECK(symmetric_mean(v) == 2.0);
  std::vector<double> same(7, 0.1);
  CHECK(symmetric_mean(same) == 0.1);
  std::vector<double> a = {0.1, 0.7, 0.3, 0.9}, b = {0.9, 0.3, 0.1, 0.7};
  CHECK(symmetric_mean(a) == symmetric_mean(b));
  std::vector<double> empty;
  CHECK_THROWS(symmetric_mean(empty));
}

TEST_CASE("train_ensemble: distinct, deterministic, thread-count independent") {
  Dataset ds = small_synth();
  TrainConfig c = quick_config();
  int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  EnsembleModel a = train_ensemble(ds, 3, 10, c);
  omp_set_num_threads(3);
  EnsembleModel b = train_ensemble(ds, 3, 10, c);
  omp_set_num_threads(saved);
  REQUIRE(a.size() == 3);
  CHECK(a.member_seeds == std::vector<std::uint64_t>{10, 11, 12});
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.members[i] == b.members[i]);
  CHECK_FALSE(a.members[0] == a.members[1]);
  CHECK_FALSE(a.members[1] == a.members[2]);
  CHECK(a.schema_fingerprint == ds.schema.fingerprint());
  CHECK_NOTHROW(a.validate());
}

TEST_CASE("member training errors carry the member index") {
  // Overflowing inputs make every member's loss non-finite.
  Dataset ds = testing_util::make_dataset(random_matrix(30, 2, 1, 1e300, 1e301), std::vector<int>(30, 0));
  for (int i = 0; i < 15; ++i) ds.y[i] = 1;
  CHECK_THROWS_WITH(train_ensemble(ds, 2, 0, quick_config()), doctest::Contains("member 0"));
  ds.y.assign(30, 0);
  CHECK_THROWS_AS(train_ensemble(ds, 2, 0, quick_config()), std::invalid_argument);
  CHECK_THROWS(train_ensemble(small_synth(), 0, 0, quick_config()));
}

TEST_CASE("validate rejects bad ensembles") {
  EnsembleModel empty;
  CHECK_THROWS(empty.validate());
  EnsembleModel mixed = ensemble_of({constant_member({1}, 0), constant_member({1, 2}, 0)});
  CHECK_THROWS(mixed.validate());
  EnsembleModel dup = ensemble_of({constant_member({1}, 0), constant_member({2}, 0)});
  dup.member_seeds = {4, 4};
  CHECK_THROWS(dup.validate());
}

TEST_CASE("member_outputs stacks each member's raw output") {
  EnsembleModel e = ensemble_of({constant_member({1, 2}, 3), constant_member({4, 5}, 6)});
  Matrix x = random_matrix(2, 2, 1);
  auto outs = member_outputs(e, x);
  REQUIRE(outs.size() == 2);
  CHECK(outs[1](1, 0) == 4.0);
  CHECK(outs[1](1, 2) == 6.0);
  CHECK(outs[0](0, 1) == 2.0);
}
