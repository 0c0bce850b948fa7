#pragma once

// Dense kernels used by the network core. Each kernel has a serial reference
// and an OpenMP version. Both accumulate every output element in the same
// order, so their results are bit-identical regardless of thread count.

#include <span>

#include "hyperutil/matrix.hpp"

namespace hyperutil::kernels {

namespace serial {
// out = a * w + bias (bias broadcast over rows; may be empty).
void affine(const Matrix& a, const Matrix& w, std::span<const double> bias, Matrix& out);
// out = g * w^T
void matmul_nt(const Matrix& g, const Matrix& w, Matrix& out);
// out += a^T * g, summed over rows of a in row order.
void accumulate_tn(const Matrix& a, const Matrix& g, Matrix& out);
// out[j] += sum_r g(r, j)
void accumulate_colsum(const Matrix& g, std::span<double> out);
}  // namespace serial

namespace parallel {
void affine(const Matrix& a, const Matrix& w, std::span<const double> bias, Matrix& out);
void matmul_nt(const Matrix& g, const Matrix& w, Matrix& out);
void accumulate_tn(const Matrix& a, const Matrix& g, Matrix& out);
void accumulate_colsum(const Matrix& g, std::span<double> out);
}  // namespace parallel

// Dispatch used by the library. Small problems run the serial kernel.
void affine(const Matrix& a, const Matrix& w, std::span<const double> bias, Matrix& out);
void matmul_nt(const Matrix& g, const Matrix& w, Matrix& out);
void accumulate_tn(const Matrix& a, const Matrix& g, Matrix& out);
void accumulate_colsum(const Matrix& g, std::span<double> out);

}  // namespace hyperutil::kernels
