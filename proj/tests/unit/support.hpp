#pragma once

// Hand-rolled generators for the property tests. Each takes a KeyedRng so a
// failing case can be replayed from its (seed, stream) pair.

#include <cmath>
#include <vector>

#include "mmtl/core.hpp"
#include "mmtl/linalg.hpp"
#include "mmtl/models.hpp"
#include "mmtl/rng.hpp"

namespace gen {

using mmtl::KeyedRng;
using mmtl::Matrix;
using mmtl::Vector;

inline std::size_t size_in(KeyedRng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

inline Vector normal_vector(KeyedRng& rng, std::size_t n, double scale = 1.0) {
  Vector v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

inline Vector uniform_vector(KeyedRng& rng, std::size_t n, double lo, double hi) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline Matrix normal_matrix(KeyedRng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  return Matrix(r, c, normal_vector(rng, r * c, scale));
}

// Nonnegative risks; about a third of the draws force ties to exercise breakpoints.
inline mmtl::RiskVector risks(KeyedRng& rng, std::size_t T, double hi = 10.0) {
  Vector r = uniform_vector(rng, T, 0.0, hi);
  if (T > 1 && rng.below(3) == 0) r[rng.below(T)] = r[rng.below(T)];
  if (rng.below(5) == 0) r[rng.below(T)] = 0.0;
  return mmtl::RiskVector(std::move(r));
}

inline mmtl::MultiTaskDataset regression(KeyedRng& rng, std::size_t T, std::size_t d, std::size_t m,
                                         double noise = 0.3) {
  std::vector<mmtl::TaskSample> tasks(T);
  const Vector shared = normal_vector(rng, d);
  for (std::size_t t = 0; t < T; ++t) {
    tasks[t].task_id = t;
    Vector w = shared;
    for (double& x : w) x += 0.5 * rng.normal();
    for (std::size_t i = 0; i < m; ++i) {
      mmtl::LabeledExample e{normal_vector(rng, d), 0.0};
      e.y = mmtl::dot(w, e.x) + noise * rng.normal();
      tasks[t].examples.push_back(std::move(e));
    }
  }
  return mmtl::MultiTaskDataset(std::move(tasks), mmtl::ProblemKind::regression);
}

inline mmtl::MultiTaskDataset classification(KeyedRng& rng, std::size_t T, std::size_t d, std::size_t m) {
  std::vector<mmtl::TaskSample> tasks(T);
  for (std::size_t t = 0; t < T; ++t) {
    tasks[t].task_id = t;
    const Vector w = normal_vector(rng, d);
    for (std::size_t i = 0; i < m; ++i) {
      mmtl::LabeledExample e{normal_vector(rng, d), 0.0};
      e.y = mmtl::dot(w, e.x) + 0.2 * rng.normal() >= 0.0 ? 1.0 : -1.0;
      tasks[t].examples.push_back(std::move(e));
    }
  }
  return mmtl::MultiTaskDataset(std::move(tasks), mmtl::ProblemKind::classification);
}

inline mmtl::ModelParams ep_params(KeyedRng& rng, std::size_t T, std::size_t d, double scale = 1.0) {
  mmtl::EpParams p;
  p.v0 = normal_vector(rng, d, scale);
  for (std::size_t t = 0; t < T; ++t) p.vt.push_back(normal_vector(rng, d, scale));
  return p;
}

inline mmtl::ModelParams aep_params(KeyedRng& rng, std::size_t T, std::size_t d, double scale = 1.0) {
  return mmtl::AepParams{normal_matrix(rng, T, d, scale)};
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace gen
