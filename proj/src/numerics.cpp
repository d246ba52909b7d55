#include "acl/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace acl {
namespace num {

bool all_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void require_finite(std::span<const double> xs, const char* what) {
  if (!all_finite(xs)) {
    raise(Err::NumericFailure, std::string("non-finite value in ") + what);
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Vector l2_normalize(std::span<const double> v) {
  double n = l2_norm(v);
  if (n < kZeroNormEps) {
    raise(Err::ZeroVector, "cannot normalize a (near-)zero vector");
  }
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) raise(Err::DimMismatch, "cosine_sim: length mismatch");
  double na = l2_norm(a);
  double nb = l2_norm(b);
  if (na < kZeroNormEps || nb < kZeroNormEps) {
    raise(Err::ZeroVector, "cosine_sim of a (near-)zero vector");
  }
  double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

double stable_arccos(double u) { return std::acos(std::clamp(u, -1.0, 1.0)); }

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) raise(Err::EmptyInput, "log_sum_exp of empty sequence");
  double m = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) raise(Err::DimMismatch, "matmul: inner dims differ");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      double aik = a.at(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.data.data() + k * b.cols;
      double* crow = c.data.data() + i * c.cols;
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) raise(Err::DimMismatch, "matmul_at_b: row counts differ");
  Matrix c(a.cols, b.cols);
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* arow = a.data.data() + k * a.cols;
    const double* brow = b.data.data() + k * b.cols;
    for (std::size_t i = 0; i < a.cols; ++i) {
      double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = c.data.data() + i * c.cols;
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) raise(Err::DimMismatch, "matmul_a_bt: col counts differ");
  Matrix c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      c.at(i, j) = dot(a.row(i), b.row(j));
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  }
  return t;
}

void add_row_inplace(Matrix& a, std::span<const double> row) {
  if (row.size() != a.cols) raise(Err::DimMismatch, "add_row_inplace: width mismatch");
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* r = a.data.data() + i * a.cols;
    for (std::size_t j = 0; j < a.cols; ++j) r[j] += row[j];
  }
}

Vector col_sums(const Matrix& a) {
  Vector s(a.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* r = a.data.data() + i * a.cols;
    for (std::size_t j = 0; j < a.cols; ++j) s[j] += r[j];
  }
  return s;
}

}  // namespace num
}  // namespace acl
