#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mmtl/core.hpp"

namespace mmtl {

// Dense row-major matrix of finite doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, Vector data);

  static Matrix identity(std::size_t n);
  static Matrix diag(std::span<const double> d);
  static Matrix from_rows(const std::vector<Vector>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  Vector col(std::size_t j) const;

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  Matrix transpose() const;
  bool all_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

Matrix multiply(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

struct SvdResult {
  Matrix U;  // rows x k, orthonormal columns
  Vector S;  // k singular values, nonincreasing
  Matrix V;  // cols x k, orthonormal columns; first nonzero entry of each column positive

  /// U * diag(values) * V^T.
  Matrix compose(std::span<const double> values) const;
  Matrix reconstruct() const { return compose(S); }
};

/// Thin SVD, k = min(rows, cols), by one-sided Jacobi rotations.
SvdResult svd(const Matrix& a);

double trace_norm(const Matrix& a);

Vector project_l2_ball(std::span<const double> v, double radius);

/// Euclidean projection onto {s >= 0, sum(s) <= radius}.
Vector project_simplex_scaled(std::span<const double> s, double radius);

/// Nearest point (Frobenius) with trace norm <= radius.
Matrix project_trace_ball(const Matrix& w, double radius);

/// Singular value soft-thresholding: prox of threshold * trace norm.
Matrix svt(const Matrix& w, double threshold);

struct PcaResult {
  Vector mean;        // column means of the fitted data
  Matrix projection;  // d x k, top-k right singular vectors of the centered data
  Matrix reduced;     // n x k, centered data times projection
  Vector singular_values;  // all min(n, d) singular values of the centered data

  Matrix transform(const Matrix& x) const;
};

/// PCA on the rows of x (n samples by d features); centers but does not scale.
PcaResult pca_fit_transform(const Matrix& x, std::size_t k);

}  // namespace mmtl
