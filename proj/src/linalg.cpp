#include "mmtl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace mmtl {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, Vector data) : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) throw ShapeMismatch("matrix data length does not equal rows*cols");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diag(std::span<const double> d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw ShapeMismatch("ragged rows");
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

Vector Matrix::col(std::size_t j) const {
  Vector c(rows_);
  for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
  return c;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeMismatch("multiply: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeMismatch("subtract: shape mismatch");
  Matrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] -= bd[i];
  return c;
}

double frobenius_norm(const Matrix& a) { return norm(a.data()); }

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeMismatch("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double trace_norm(const Matrix& a) {
  const SvdResult s = svd(a);
  return compensated_sum(s.S);
}

Vector project_l2_ball(std::span<const double> v, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("ball radius must be positive");
  Vector out(v.begin(), v.end());
  const double n = norm(v);
  if (n <= radius) return out;
  const double scale = radius / n;
  for (double& x : out) x *= scale;
  return out;
}

Vector project_simplex_scaled(std::span<const double> s, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("simplex radius must be positive");
  Vector clipped(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) clipped[i] = std::max(0.0, s[i]);
  if (compensated_sum(clipped) <= radius) return clipped;

  // Onto {x >= 0, sum x = radius}: threshold theta from the sorted prefix sums.
  Vector u = clipped;
  std::sort(u.begin(), u.end(), std::greater<>());
  double prefix = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    prefix += u[j];
    const double cand = (prefix - radius) / static_cast<double>(j + 1);
    if (u[j] - cand > 0.0) theta = cand;
  }
  Vector out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = std::max(0.0, s[i] - theta);
  return out;
}

Matrix project_trace_ball(const Matrix& w, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("trace ball radius must be positive");
  const SvdResult s = svd(w);
  if (compensated_sum(s.S) <= radius) return w;
  return s.compose(project_simplex_scaled(s.S, radius));
}

Matrix svt(const Matrix& w, double threshold) {
  if (!(threshold >= 0.0)) throw InvalidArgument("threshold must be nonnegative");
  const SvdResult s = svd(w);
  Vector shrunk(s.S.size());
  for (std::size_t i = 0; i < shrunk.size(); ++i) shrunk[i] = std::max(0.0, s.S[i] - threshold);
  return s.compose(shrunk);
}

Matrix PcaResult::transform(const Matrix& x) const {
  if (x.cols() != mean.size()) throw ShapeMismatch("pca transform: feature count differs from fit");
  Matrix centered = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = centered.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] -= mean[j];
  }
  return multiply(centered, projection);
}

PcaResult pca_fit_transform(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (k < 1 || k > std::min(n, d))
    throw InvalidArgument("pca target dimension must lie in [1, min(n, d)] = [1, " +
                          std::to_string(std::min(n, d)) + "]");
  if (!x.all_finite()) throw InvalidArgument("pca: non-finite input");

  PcaResult out;
  out.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += x(i, j);
  for (double& m : out.mean) m /= static_cast<double>(n);

  Matrix basis;
  if (n > d) {
    // Right singular vectors of the centered data are the eigenvectors of
    // X^T X - n * mean * mean^T; accumulate the Gram matrix on raw rows so
    // sparse inputs (images) stay cheap.
    Matrix gram(d, d);
    for (std::size_t i = 0; i < n; ++i) {
      auto r = x.row(i);
      for (std::size_t a = 0; a < d; ++a) {
        const double xa = r[a];
        if (xa == 0.0) continue;
        auto g = gram.row(a);
        for (std::size_t b = a; b < d; ++b) g[b] += xa * r[b];
      }
    }
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a; b < d; ++b) {
        const double v = gram(a, b) - static_cast<double>(n) * out.mean[a] * out.mean[b];
        gram(a, b) = v;
        gram(b, a) = v;
      }
    }
    SvdResult s = svd(gram);
    basis = std::move(s.V);
    out.singular_values.resize(d);
    for (std::size_t i = 0; i < d; ++i) out.singular_values[i] = std::sqrt(std::max(0.0, s.S[i]));
  } else {
    Matrix centered = x;
    for (std::size_t i = 0; i < n; ++i) {
      auto r = centered.row(i);
      for (std::size_t j = 0; j < d; ++j) r[j] -= out.mean[j];
    }
    SvdResult s = svd(centered);
    basis = std::move(s.V);
    out.singular_values = std::move(s.S);
  }

  out.projection = Matrix(d, k);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < k; ++j) out.projection(i, j) = basis(i, j);
  out.reduced = out.transform(x);
  return out;
}

}  // namespace mmtl
