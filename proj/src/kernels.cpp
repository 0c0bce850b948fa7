#include "hyperutil/kernels.hpp"

#include <omp.h>

#include <stdexcept>
#include <string>

namespace hyperutil::kernels {
namespace {

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("kernel shape mismatch: ") + what);
}

void check_affine(const Matrix& a, const Matrix& w, std::span<const double> bias, Matrix& out) {
  check(a.cols() == w.rows(), "affine inner dimension");
  check(bias.empty() || bias.size() == w.cols(), "affine bias length");
  if (out.rows() != a.rows() || out.cols() != w.cols()) out = Matrix(a.rows(), w.cols());
}

void check_nt(const Matrix& g, const Matrix& w, Matrix& out) {
  check(g.cols() == w.cols(), "matmul_nt inner dimension");
  if (out.rows() != g.rows() || out.cols() != w.rows()) out = Matrix(g.rows(), w.rows());
}

void check_tn(const Matrix& a, const Matrix& g, const Matrix& out) {
  check(a.rows() == g.rows(), "accumulate_tn batch dimension");
  check(out.rows() == a.cols() && out.cols() == g.cols(), "accumulate_tn output shape");
}

inline void affine_row(const Matrix& a, const Matrix& w, std::span<const double> bias,
                       Matrix& out, std::size_t r) {
  const std::size_t n = w.cols();
  double* o = out.row(r).data();
  if (bias.empty()) {
    for (std::size_t j = 0; j < n; ++j) o[j] = 0.0;
  } else {
    for (std::size_t j = 0; j < n; ++j) o[j] = bias[j];
  }
  const double* ar = a.row(r).data();
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const double av = ar[k];
    const double* wr = w.row(k).data();
    for (std::size_t j = 0; j < n; ++j) o[j] += av * wr[j];
  }
}

inline void nt_row(const Matrix& g, const Matrix& w, Matrix& out, std::size_t r) {
  const double* gr = g.row(r).data();
  double* o = out.row(r).data();
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double* wr = w.row(i).data();
    double s = 0.0;
    for (std::size_t j = 0; j < w.cols(); ++j) s += gr[j] * wr[j];
    o[i] = s;
  }
}

// Accumulates output row i over batch rows in ascending order.
inline void tn_row(const Matrix& a, const Matrix& g, Matrix& out, std::size_t i) {
  double* o = out.row(i).data();
  const std::size_t n = g.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double av = a(r, i);
    if (av == 0.0) continue;
    const double* gr = g.row(r).data();
    for (std::size_t j = 0; j < n; ++j) o[j] += av * gr[j];
  }
}

inline void colsum_col(const Matrix& g, std::span<double> out, std::size_t j) {
  double s = out[j];
  for (std::size_t r = 0; r < g.rows(); ++r) s += g(r, j);
  out[j] = s;
}

bool worth_parallel(std::size_t work) {
  return work >= (1u << 15) && omp_get_max_threads() > 1 && !omp_in_parallel();
}

}  // namespace

namespace serial {

void affine(const Matrix& a, const Matrix& w, std::span<const double> bias, Matrix& out) {
  check_affine(a, w, bias, out);
  for (std::size_t r = 0; r < a.rows(); ++r) affine_row(a, w, bias, out, r);
}

void matmul_nt(const Matrix& g, const Matrix& w, Matrix& out) {
  check_nt(g, w, out);
  for (std::size_t r = 0; r < g.rows(); ++r) nt_row(g, w, out, r);
}

void accumulate_tn(const Matrix& a, const Matrix& g, Matrix& out) {
  check_tn(a, g, out);
  for (std::size_t i = 0; i < a.cols(); ++i) tn_row(a, g, out, i);
}

void accumulate_colsum(const Matrix& g, std::span<double> out) {
  check(out.size() == g.cols(), "colsum length");
  for (std::size_t j = 0; j < g.cols(); ++j) colsum_col(g, out, j);
}

}  // namespace serial

namespace parallel {

void affine(const Matrix& a, const Matrix& w, std::span<const double> bias, Matrix& out) {
  check_affine(a, w, bias, out);
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) affine_row(a, w, bias, out, static_cast<std::size_t>(r));
}

void matmul_nt(const Matrix& g, const Matrix& w, Matrix& out) {
  check_nt(g, w, out);
  const auto rows = static_cast<std::ptrdiff_t>(g.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) nt_row(g, w, out, static_cast<std::size_t>(r));
}

void accumulate_tn(const Matrix& a, const Matrix& g, Matrix& out) {
  check_tn(a, g, out);
  const auto n = static_cast<std::ptrdiff_t>(a.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) tn_row(a, g, out, static_cast<std::size_t>(i));
}

void accumulate_colsum(const Matrix& g, std::span<double> out) {
  check(out.size() == g.cols(), "colsum length");
  const auto n = static_cast<std::ptrdiff_t>(g.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < n; ++j) colsum_col(g, out, static_cast<std::size_t>(j));
}

}  // namespace parallel

void affine(const Matrix& a, const Matrix& w, std::span<const double> bias, Matrix& out) {
  if (worth_parallel(a.rows() * w.rows() * w.cols())) {
    parallel::affine(a, w, bias, out);
  } else {
    serial::affine(a, w, bias, out);
  }
}

void matmul_nt(const Matrix& g, const Matrix& w, Matrix& out) {
  if (worth_parallel(g.rows() * w.rows() * w.cols())) {
    parallel::matmul_nt(g, w, out);
  } else {
    serial::matmul_nt(g, w, out);
  }
}

void accumulate_tn(const Matrix& a, const Matrix& g, Matrix& out) {
  if (worth_parallel(a.rows() * a.cols() * g.cols())) {
    parallel::accumulate_tn(a, g, out);
  } else {
    serial::accumulate_tn(a, g, out);
  }
}

void accumulate_colsum(const Matrix& g, std::span<double> out) {
  if (worth_parallel(g.size())) {
    parallel::accumulate_colsum(g, out);
  } else {
    serial::accumulate_colsum(g, out);
  }
}

}  // namespace hyperutil::kernels
