#include "doctest.h"

#include <omp.h>

#include <array>
#include <vector>

#include "helpers.hpp"
#include "hyperutil/kernels.hpp"

using hyperutil::Matrix;
namespace k = hyperutil::kernels;
using testing_util::random_matrix;

namespace {

// Shapes straddle the dispatch threshold.
const std::vector<std::array<std::size_t, 3>> kShapes = {
    {1, 1, 1}, {3, 5, 2}, {64, 12, 64}, {257, 64, 65}, {1000, 64, 64}};

}  // namespace

TEST_CASE("affine matches a naive triple loop") {
  Matrix a = random_matrix(7, 4, 1), w = random_matrix(4, 3, 2);
  std::vector<double> b = {0.5, -1.0, 2.0};
  Matrix out(7, 3);
  k::serial::affine(a, w, b, out);
  for (std::size_t r = 0; r < 7; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      double s = b[c];
      for (std::size_t i = 0; i < 4; ++i) s += a(r, i) * w(i, c);
      CHECK(out(r, c) == doctest::Approx(s).epsilon(1e-14));
    }
}

TEST_CASE("serial and parallel kernels agree bit for bit") {
  int saved = omp_get_max_threads();
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    for (auto [n, in, outc] : kShapes) {
      CAPTURE(n);
      CAPTURE(threads);
      Matrix a = random_matrix(n, in, 11 + n), w = random_matrix(in, outc, 12 + n);
      std::vector<double> bias(outc, 0.25);
      Matrix s(n, outc), p(n, outc), d(n, outc);
      k::serial::affine(a, w, bias, s);
      k::parallel::affine(a, w, bias, p);
      k::affine(a, w, bias, d);
      CHECK(s == p);
      CHECK(s == d);

      Matrix g = random_matrix(n, outc, 13 + n);
      Matrix s2(n, in), p2(n, in);
      k::serial::matmul_nt(g, w, s2);
      k::parallel::matmul_nt(g, w, p2);
      CHECK(s2 == p2);

      Matrix s3 = random_matrix(in, outc, 14), p3 = s3;
      k::serial::accumulate_tn(a, g, s3);
      k::parallel::accumulate_tn(a, g, p3);
      CHECK(s3 == p3);

      std::vector<double> s4(outc, 1.0), p4(outc, 1.0);
      k::serial::accumulate_colsum(g, s4);
      k::parallel::accumulate_colsum(g, p4);
      CHECK(s4 == p4);
    }
  }
  omp_set_num_threads(saved);
}

TEST_CASE("accumulate_tn adds to existing contents") {
  Matrix a(2, 1, std::vector<double>{1, 2}), g(2, 1, std::vector<double>{3, 4});
  Matrix out(1, 1, 10.0);
  k::accumulate_tn(a, g, out);
  CHECK(out(0, 0) == 10.0 + 1 * 3 + 2 * 4);
}
