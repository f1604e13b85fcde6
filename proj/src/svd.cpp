#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmtl/linalg.hpp"

namespace mmtl {

namespace {

constexpr double kOffDiagonalTol = 1e-12;
constexpr int kMaxSweeps = 80;

using Columns = std::vector<Vector>;

void rotate(Vector& x, Vector& y, double c, double s) {
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xi = x[k];
    const double yi = y[k];
    x[k] = c * xi - s * yi;
    y[k] = s * xi + c * yi;
  }
}

// Fills columns whose singular value vanished so that the set is orthonormal.
void complete_basis(Columns& u, const std::vector<bool>& valid) {
  const std::size_t m = u.empty() ? 0 : u.front().size();
  std::vector<bool> done = valid;
  for (std::size_t j = 0; j < u.size(); ++j) {
    if (done[j]) continue;
    Vector best;
    double best_norm = -1.0;
    for (std::size_t e = 0; e < m; ++e) {
      Vector cand(m, 0.0);
      cand[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < u.size(); ++i) {
          if (!done[i]) continue;
          const double p = dot(u[i], cand);
          for (std::size_t k = 0; k < m; ++k) cand[k] -= p * u[i][k];
        }
      }
      const double n = norm(cand);
      if (n > best_norm) {
        best_norm = n;
        best = std::move(cand);
      }
      if (best_norm > 0.7) break;
    }
    for (double& x : best) x /= best_norm;
    u[j] = std::move(best);
    done[j] = true;
  }
}

// a is m x n with m >= n.
SvdResult svd_tall(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Columns g(n, Vector(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) g[j][i] = a(i, j);
  Columns v(n, Vector(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) v[j][j] = 1.0;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t j = 1; j < n; ++j) {
      for (std::size_t i = 0; i < j; ++i) {
        const double alpha = dot(g[i], g[i]);
        const double beta = dot(g[j], g[j]);
        const double gamma = dot(g[i], g[j]);
        if (gamma == 0.0 || std::abs(gamma) <= kOffDiagonalTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(g[i], g[j], c, s);
        rotate(v[i], v[j], c, s);
      }
    }
    if (!rotated) break;
  }

  Vector sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm(g[j]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  const double smax = n ? sigma[order.front()] : 0.0;
  const double floor = smax * 1e-14 * static_cast<double>(std::max<std::size_t>(m, 1));
  Columns u(n);
  std::vector<bool> valid(n, false);
  SvdResult out;
  out.S.resize(n);
  Columns vs(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t j = order[r];
    out.S[r] = sigma[j];
    vs[r] = v[j];
    if (sigma[j] > floor && sigma[j] > 0.0) {
      u[r] = g[j];
      for (double& x : u[r]) x /= sigma[j];
      valid[r] = true;
    } else {
      u[r] = Vector(m, 0.0);
    }
  }
  complete_basis(u, valid);

  out.U = Matrix(m, n);
  out.V = Matrix(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < m; ++i) out.U(i, r) = u[r][i];
    for (std::size_t i = 0; i < n; ++i) out.V(i, r) = vs[r][i];
  }
  return out;
}

void fix_signs(SvdResult& s) {
  const std::size_t k = s.S.size();
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t i = 0; i < s.V.rows(); ++i) {
      const double x = s.V(i, r);
      if (std::abs(x) <= 1e-12) continue;
      if (x < 0.0) {
        for (std::size_t q = 0; q < s.V.rows(); ++q) s.V(q, r) = -s.V(q, r);
        for (std::size_t q = 0; q < s.U.rows(); ++q) s.U(q, r) = -s.U(q, r);
      }
      break;
    }
  }
}

}  // namespace

SvdResult svd(const Matrix& a) {
  if (a.empty()) throw InvalidArgument("svd of an empty matrix");
  if (!a.all_finite()) throw InvalidArgument("svd: matrix has non-finite entries");
  SvdResult out;
  if (a.rows() >= a.cols()) {
    out = svd_tall(a);
  } else {
    SvdResult t = svd_tall(a.transpose());
    out.U = std::move(t.V);
    out.S = std::move(t.S);
    out.V = std::move(t.U);
  }
  fix_signs(out);
  return out;
}

Matrix SvdResult::compose(std::span<const double> values) const {
  const std::size_t m = U.rows();
  const std::size_t n = V.rows();
  Matrix out(m, n, 0.0);
  for (std::size_t r = 0; r < values.size(); ++r) {
    const double s = values[r];
    if (s == 0.0) continue;
    for (std::size_t i = 0; i < m; ++i) {
      const double ui = U(i, r) * s;
      if (ui == 0.0) continue;
      auto row = out.row(i);
      for (std::size_t j = 0; j < n; ++j) row[j] += ui * V(j, r);
    }
  }
  return out;
}

}  // namespace mmtl
