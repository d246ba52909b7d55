#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "acl/error.hpp"

namespace acl {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Row-major layout is part of the
// checkpoint byte format; do not change it.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

namespace num {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kZeroNormEps = 1e-12;

bool all_finite(std::span<const double> xs);
void require_finite(std::span<const double> xs, const char* what);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// Unit-norm copy of v; Err::ZeroVector if ||v|| < 1e-12.
Vector l2_normalize(std::span<const double> v);

// Cosine of the angle between a and b, clamped into [-1, 1].
double cosine_sim(std::span<const double> a, std::span<const double> b);

// arccos with the argument hard-clamped to [-1, 1]; result in [0, pi].
double stable_arccos(double u);

// log(sum(exp(xs))) via max-shift; Err::EmptyInput on an empty sequence.
double log_sum_exp(std::span<const double> xs);

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A^T * B
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
// C = A * B^T
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);
void add_row_inplace(Matrix& a, std::span<const double> row);
Vector col_sums(const Matrix& a);

}  // namespace num
}  // namespace acl
