#include <algorithm>
#include <cmath>
#include <limits>

#include "mmtl/verify.hpp"

namespace mmtl::verify {

namespace {

double value_at(double alpha, std::span<const double> r, double b) {
  double excess = 0.0;
  for (double x : r) excess += std::max(0.0, x - b);
  return b + excess / alpha;
}

// Trust-region minimizer in the eigenbasis of A: coefficients c = Q^T b.
struct EigenQuadratic {
  Vector lambda;
  Matrix q;
};

Vector solve_trust_region(const EigenQuadratic& eq, std::span<const double> b, double radius) {
  const std::size_t n = eq.lambda.size();
  Vector c(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i] += eq.q(j, i) * b[j];
  const double scale = std::max(1.0, std::abs(eq.lambda.front()));
  const double tiny = 1e-13 * scale;

  auto coeffs = [&](double mu) {
    Vector out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double den = eq.lambda[i] + mu;
      out[i] = den > tiny ? c[i] / den : 0.0;
    }
    return out;
  };
  bool interior = true;
  for (std::size_t i = 0; i < n; ++i)
    if (eq.lambda[i] <= tiny && std::abs(c[i]) > 1e-14 * (1.0 + norm(c))) interior = false;
  Vector z = coeffs(0.0);
  if (!(interior && norm(z) <= radius)) {
    double lo = 0.0;
    double hi = norm(c) / radius + 1.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (norm(coeffs(mid)) > radius ? lo : hi) = mid;
    }
    z = coeffs(hi);
  }
  Vector v(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) v[j] += eq.q(j, i) * z[i];
  return v;
}

}  // namespace

AlphaMinimaxSolution grid_inner_minimize(double alpha, std::span<const double> r, double step) {
  const double top = r.empty() ? 0.0 : *std::max_element(r.begin(), r.end());
  const auto last = static_cast<std::size_t>(std::ceil(top / step)) + 1;
  double best_b = 0.0;
  double best = value_at(alpha, r, 0.0);
  for (std::size_t k = 1; k <= last; ++k) {
    const double b = static_cast<double>(k) * step;
    const double v = value_at(alpha, r, b);
    if (v < best - 1e-12) {
      best = v;
      best_b = b;
    }
  }
  AlphaMinimaxSolution out;
  out.b_star = best_b;
  out.value = best;
  for (double x : r) out.xi.push_back(std::max(0.0, x - best_b));
  return out;
}

Vector symmetric_eigen(const Matrix& a, Matrix* vectors) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ShapeMismatch("symmetric_eigen needs a square matrix");
  Matrix m = a;
  Matrix v = Matrix::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) (i == j ? total : off) += m(i, j) * m(i, j);
    if (off <= 1e-30 * (total + off) || off == 0.0) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return m(x, x) > m(y, y); });
  Vector values(n);
  Matrix sorted(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    values[r] = m(order[r], order[r]);
    for (std::size_t k = 0; k < n; ++k) sorted(k, r) = v(k, order[r]);
  }
  if (vectors) *vectors = std::move(sorted);
  return values;
}

double spectral_norm(const Matrix& a) {
  // Eigenvalues of [[0, A], [A^T, 0]] are +-sigma_i; avoids squaring A.
  const std::size_t r = a.rows(), c = a.cols();
  if (r == 0 || c == 0) return 0.0;
  Matrix aug(r + c, r + c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) aug(i, r + j) = aug(r + j, i) = a(i, j);
  return std::max(0.0, symmetric_eigen(aug).front());
}

Vector simplex_projection_bisect(std::span<const double> s, double radius) {
  Vector out(s.size());
  auto mass = [&](double theta) {
    double total = 0.0;
    for (double x : s) total += std::max(0.0, x - theta);
    return total;
  };
  double theta = 0.0;
  if (mass(0.0) > radius) {
    double lo = 0.0;
    double hi = *std::max_element(s.begin(), s.end());
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (mass(mid) > radius ? lo : hi) = mid;
    }
    theta = 0.5 * (lo + hi);
  }
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = std::max(0.0, s[i] - theta);
  return out;
}

Matrix trace_ball_projection_eigen(const Matrix& w, double radius) {
  Matrix v;
  const Vector ev = symmetric_eigen(multiply(w.transpose(), w), &v);
  Vector sigma(ev.size());
  for (std::size_t i = 0; i < ev.size(); ++i) sigma[i] = std::sqrt(std::max(0.0, ev[i]));
  double total = 0.0;
  for (double x : sigma) total += x;
  if (total <= radius) return w;
  const Vector shrunk = simplex_projection_bisect(sigma, radius);
  // W V diag(shrunk / sigma) V^T.
  const std::size_t d = w.cols();
  Matrix scale(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k)
        if (sigma[k] > 0.0) scale(i, j) += v(i, k) * (shrunk[k] / sigma[k]) * v(j, k);
  return multiply(w, scale);
}

double ball_certificate(std::span<const double> s, std::span<const double> p, double radius) {
  Vector g(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) g[i] = s[i] - p[i];
  return radius * norm(g) - dot(g, p);
}

double simplex_certificate(std::span<const double> s, std::span<const double> p, double radius) {
  Vector g(s.size());
  double top = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    g[i] = s[i] - p[i];
    top = std::max(top, g[i]);
  }
  return radius * top - dot(g, p);
}

double trace_ball_certificate(const Matrix& w, const Matrix& p, double radius) {
  const Matrix g = w - p;
  return radius * spectral_norm(g) - dot(g.data(), p.data());
}

double svt_optimality_violation(const Matrix& w, const Matrix& x, double lambda) {
  const Matrix r = w - x;
  const Vector ev = symmetric_eigen(multiply(x.transpose(), x));
  double tr = 0.0;
  for (double e : ev) tr += std::sqrt(std::max(0.0, e));
  const double op_excess = std::max(0.0, spectral_norm(r) - lambda);
  const double align = std::abs(dot(r.data(), x.data()) - lambda * tr);
  return std::max(op_excess, align);
}

Vector trust_region_quadratic(const Matrix& a, std::span<const double> b, double radius) {
  EigenQuadratic eq;
  eq.lambda = symmetric_eigen(a, &eq.q);
  return solve_trust_region(eq, b, radius);
}

double ep_constrained_grid_minimum(const MultiTaskDataset& data, double tau0, double tau1, const Composer& composer) {
  const std::size_t d = data.dim();
  const std::size_t T = data.num_tasks();
  if (d > 2) throw InvalidArgument("grid oracle is limited to d <= 2");

  std::vector<EigenQuadratic> quads(T);
  for (std::size_t t = 0; t < T; ++t) {
    Matrix a(d, d);
    const auto& ex = data.task(t).examples;
    for (const auto& e : ex)
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) a(i, j) += e.x[i] * e.x[j] / static_cast<double>(ex.size());
    quads[t].lambda = symmetric_eigen(a, &quads[t].q);
  }

  // Best per-task risk given v0: minimise over |vt| <= tau1 of the residual quadratic.
  auto h = [&](const Vector& v0) {
    Vector risks(T);
    for (std::size_t t = 0; t < T; ++t) {
      const auto& ex = data.task(t).examples;
      const double inv_m = 1.0 / static_cast<double>(ex.size());
      Vector b(d, 0.0);
      for (const auto& e : ex) {
        const double resid = e.y - dot(v0, e.x);
        for (std::size_t j = 0; j < d; ++j) b[j] += inv_m * resid * e.x[j];
      }
      const Vector vt = solve_trust_region(quads[t], b, tau1);
      double risk = 0.0;
      for (const auto& e : ex) {
        const double r = dot(v0, e.x) + dot(vt, e.x) - e.y;
        risk += inv_m * r * r;
      }
      risks[t] = risk;
    }
    return compose(composer, RiskVector(std::move(risks)));
  };

  // h is convex in v0 (partial minimisation of a jointly convex objective), so
  // nested golden-section search over the disk is exact up to its tolerance.
  auto golden = [](double lo, double hi, const auto& f) {
    constexpr double kInv = 0.6180339887498949;
    double a = hi - kInv * (hi - lo), b = lo + kInv * (hi - lo);
    double fa = f(a), fb = f(b);
    for (int it = 0; it < 90; ++it) {
      if (fa < fb) {
        hi = b;
        b = a;
        fb = fa;
        a = hi - kInv * (hi - lo);
        fa = f(a);
      } else {
        lo = a;
        a = b;
        fa = fb;
        b = lo + kInv * (hi - lo);
        fb = f(b);
      }
    }
    return std::min({fa, fb, f(0.5 * (lo + hi))});
  };
  if (d == 1) return golden(-tau0, tau0, [&](double x) { return h(Vector{x}); });
  return golden(-tau0, tau0, [&](double x) {
    const double w = std::sqrt(std::max(0.0, tau0 * tau0 - x * x));
    return golden(-w, w, [&](double y) { return h(Vector{x, y}); });
  });
}

}  // namespace mmtl::verify
