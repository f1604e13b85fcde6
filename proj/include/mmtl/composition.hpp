#pragma once

#include <string>
#include <variant>

#include "mmtl/core.hpp"

namespace mmtl {

// Risk composers phi: R_+^T -> R_+. Every variant is the support function of
// a convex set of nonnegative task weights, which is what the subgradients
// below return an element of.

struct WeightedL1 {
  Vector weights;  // simplex vector, one entry per task
};
struct L2Composer {};
struct MaxComposer {};
struct AlphaMinimax {
  double alpha = 1.0;
};

class Composer {
 public:
  using Variant = std::variant<WeightedL1, L2Composer, MaxComposer, AlphaMinimax>;

  static Composer weighted_l1(Vector weights);
  static Composer uniform_l1(std::size_t num_tasks);
  static Composer l2() { return Composer(L2Composer{}); }
  static Composer max() { return Composer(MaxComposer{}); }
  static Composer alpha_minimax(double alpha);

  const Variant& variant() const { return v_; }
  std::string name() const;

 private:
  explicit Composer(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

struct AlphaMinimaxSolution {
  double b_star = 0.0;  // relaxed maximum
  Vector xi;            // per-task excess max(0, r_t - b_star)
  double value = 0.0;   // b_star + sum(xi) / alpha
};

/// Exact minimizer over b >= 0 of b + (1/alpha) * sum_t max(0, r_t - b).
/// b* is the smallest candidate in {0} U {r_t} whose right slope is >= 0.
AlphaMinimaxSolution inner_minimize_b(double alpha, const RiskVector& r);

double compose(const Composer& c, const RiskVector& r);

/// One element of the subdifferential of compose(c, .) at r.
///  weighted_l1: the weights; l2: r / (sqrt(T) |r|), zero at r = 0;
///  max: indicator of the lowest-index argmax;
///  alpha_minimax: 1/alpha on entries above b*, the leftover mass
///  1 - k/alpha split evenly across entries equal to b* when b* > 0.
Vector compose_subgradient(const Composer& c, const RiskVector& r);

/// Harmonic mean of ceil(level*T + 0.5) and ceil(level*T + 1.5).
double default_alpha(std::size_t num_tasks, double level);

}  // namespace mmtl
