#include <doctest.h>

#include <cmath>

#include "mmtl/linalg.hpp"
#include "mmtl/verify.hpp"
#include "support.hpp"

using namespace mmtl;

namespace {

double orthonormality_error(const Matrix& q) {
  const Matrix g = multiply(q.transpose(), q);
  return max_abs_diff(g, Matrix::identity(g.rows()));
}

}  // namespace

TEST_SUITE("linalg") {

TEST_CASE("svd of simple matrices") {
  const auto id = svd(Matrix::identity(3));
  CHECK(id.S == Vector{1, 1, 1});
  const Vector d{3, 1};
  const auto s = svd(Matrix::diag(d));
  CHECK(s.S[0] == doctest::Approx(3.0));
  CHECK(s.S[1] == doctest::Approx(1.0));
  CHECK(std::abs(s.U(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(s.V(1, 1)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(svd(Matrix(2, 2, Vector{1, std::nan(""), 0, 1})), InvalidArgument);
}

TEST_CASE("svd reconstructs random matrices with orthonormal factors") {
  KeyedRng rng(31, {1});
  for (int i = 0; i < 200; ++i) {
    const std::size_t r = gen::size_in(rng, 1, 9), c = gen::size_in(rng, 1, 9);
    const Matrix a = gen::normal_matrix(rng, r, c, rng.uniform(0.1, 10.0));
    const auto s = svd(a);
    CHECK(frobenius_norm(s.reconstruct() - a) <= 1e-8);
    CHECK(orthonormality_error(s.U) <= 1e-8);
    CHECK(orthonormality_error(s.V) <= 1e-8);
    for (std::size_t k = 1; k < s.S.size(); ++k) CHECK(s.S[k] <= s.S[k - 1]);
    for (std::size_t k = 0; k < s.V.cols(); ++k) {
      for (std::size_t j = 0; j < s.V.rows(); ++j) {
        if (s.V(j, k) != 0.0) {
          CHECK(s.V(j, k) > 0.0);
          break;
        }
      }
    }
    // Independent oracle: Jacobi on the Gram matrix.
    const Vector ev = verify::symmetric_eigen(multiply(a.transpose(), a));
    for (std::size_t k = 0; k < s.S.size(); ++k)
      CHECK(s.S[k] == doctest::Approx(std::sqrt(std::max(0.0, ev[k]))).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("l2 ball projection") {
  const Vector p = project_l2_ball(Vector{3, 4}, 1.0);
  CHECK(p[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(project_l2_ball(Vector{0.5, 0}, 1.0) == Vector{0.5, 0});
  CHECK_THROWS_AS(project_l2_ball(Vector{1}, 0.0), InvalidArgument);
}

TEST_CASE("scaled simplex projection") {
  CHECK(project_simplex_scaled(Vector{3, 1}, 2.0) == Vector{2, 0});
  CHECK(project_simplex_scaled(Vector{0.5, 0.5}, 2.0) == Vector{0.5, 0.5});
  const Vector p = project_simplex_scaled(Vector{1, 1, 1}, 1.5);
  for (double x : p) CHECK(x == doctest::Approx(0.5));
}

TEST_CASE("simplex projection is the nearest feasible point") {
  KeyedRng rng(31, {2});
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = gen::size_in(rng, 1, 8);
    const Vector s = gen::normal_vector(rng, n, 2.0);
    const double r = rng.uniform(0.1, 4.0);
    const Vector p = project_simplex_scaled(s, r);
    double total = 0.0;
    for (double x : p) {
      CHECK(x >= 0.0);
      total += x;
    }
    CHECK(total <= r + 1e-10);
    CHECK(gen::distance(p, verify::simplex_projection_bisect(s, r)) <= 1e-9);
    // No random feasible point is closer.
    const double dp = gen::distance(p, s);
    for (int k = 0; k < 20; ++k) {
      Vector q = gen::uniform_vector(rng, n, 0.0, 1.0);
      double sum = 0.0;
      for (double x : q) sum += x;
      const double scale = rng.uniform(0.0, r) / std::max(sum, 1e-12);
      for (double& x : q) x *= scale;
      CHECK(gen::distance(q, s) >= dp - 1e-12);
    }
  }
}

TEST_CASE("trace ball projection and svt") {
  const Vector d{3, 1};
  const Matrix w = Matrix::diag(d);
  CHECK(max_abs_diff(project_trace_ball(w, 2.0), Matrix::diag(Vector{2, 0})) <= 1e-12);
  CHECK(max_abs_diff(project_trace_ball(w, 5.0), w) <= 1e-8);
  CHECK(max_abs_diff(svt(w, 1.5), Matrix::diag(Vector{1.5, 0})) <= 1e-12);
  CHECK(max_abs_diff(svt(w, 0.0), w) <= 1e-8);
  CHECK_THROWS_AS(svt(w, -1.0), InvalidArgument);
}

TEST_CASE("trace ball projection against the eigen oracle; singular values never grow") {
  KeyedRng rng(31, {3});
  for (int i = 0; i < 200; ++i) {
    const std::size_t r = gen::size_in(rng, 1, 6), c = gen::size_in(rng, 1, 6);
    const Matrix w = gen::normal_matrix(rng, r, c, rng.uniform(0.2, 3.0));
    const double radius = rng.uniform(0.1, 5.0);
    const Matrix p = project_trace_ball(w, radius);
    CHECK(trace_norm(p) <= radius + 1e-8);
    CHECK(max_abs_diff(p, verify::trace_ball_projection_eigen(w, radius)) <= 1e-6);
    const auto sw = svd(w).S;
    const auto sp = svd(p).S;
    const auto st = svd(svt(w, rng.uniform(0.0, 2.0))).S;
    for (std::size_t k = 0; k < sw.size(); ++k) {
      CHECK(sp[k] <= sw[k] + 1e-10);
      CHECK(st[k] <= sw[k] + 1e-10);
    }
  }
}

TEST_CASE("svt minimizes the prox objective among scaled candidates") {
  KeyedRng rng(31, {4});
  for (int i = 0; i < 100; ++i) {
    const Matrix w = gen::normal_matrix(rng, gen::size_in(rng, 1, 5), gen::size_in(rng, 1, 5));
    const double lam = rng.uniform(0.0, 1.5);
    const Matrix x = svt(w, lam);
    auto obj = [&](const Matrix& m) { return 0.5 * std::pow(frobenius_norm(m - w), 2) + lam * trace_norm(m); };
    const double best = obj(x);
    for (double s = 0.0; s <= 1.5; s += 0.05) {
      Matrix scaled = x;
      for (double& v : scaled.data()) v *= s;
      CHECK(obj(scaled) >= best - 1e-10);
      Matrix ws = w;
      for (double& v : ws.data()) v *= s;
      CHECK(obj(ws) >= best - 1e-10);
    }
  }
}

TEST_CASE("pca") {
  // Points on a line through (1,1,1) in direction (1,2,2)/3.
  const Vector dir{1.0 / 3, 2.0 / 3, 2.0 / 3};
  const Vector ts{-2, -1, 0, 0.5, 3};
  Matrix x(ts.size(), 3);
  for (std::size_t i = 0; i < ts.size(); ++i)
    for (std::size_t j = 0; j < 3; ++j) x(i, j) = 1.0 + ts[i] * dir[j];
  const auto p = pca_fit_transform(x, 1);
  const double mean_t = (ts[0] + ts[1] + ts[2] + ts[3] + ts[4]) / 5.0;
  const double sign = p.reduced(0, 0) * (ts[0] - mean_t) > 0 ? 1.0 : -1.0;
  for (std::size_t i = 0; i < ts.size(); ++i)
    CHECK(sign * p.reduced(i, 0) == doctest::Approx(ts[i] - mean_t).epsilon(1e-10));

  KeyedRng rng(31, {5});
  const Matrix y = gen::normal_matrix(rng, 12, 4);
  const auto full = pca_fit_transform(y, 4);
  const Matrix back = multiply(full.reduced, full.projection.transpose());
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(back(i, j) + full.mean[j] == doctest::Approx(y(i, j)).epsilon(1e-8));
  CHECK(max_abs_diff(full.transform(y), full.reduced) <= 1e-12);

  // Captured variance equals the top-k squared singular values.
  const auto two = pca_fit_transform(y, 2);
  double captured = 0.0;
  for (double v : two.reduced.data()) captured += v * v;
  CHECK(captured == doctest::Approx(two.singular_values[0] * two.singular_values[0] +
                                    two.singular_values[1] * two.singular_values[1]));
  CHECK_THROWS_AS(pca_fit_transform(y, 0), InvalidArgument);
  CHECK_THROWS_AS(pca_fit_transform(y, 5), InvalidArgument);
}

}
