#include "mmtl/composition.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mmtl {

Composer Composer::weighted_l1(Vector weights) {
  if (weights.empty()) throw InvalidArgument("weighted_l1 needs at least one weight");
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("weighted_l1 weights must be nonnegative");
  if (std::abs(compensated_sum(weights) - 1.0) > 1e-12) throw InvalidArgument("weighted_l1 weights must sum to 1");
  return Composer(WeightedL1{std::move(weights)});
}

Composer Composer::uniform_l1(std::size_t num_tasks) {
  if (num_tasks == 0) throw InvalidArgument("uniform_l1 needs T >= 1");
  return Composer(WeightedL1{Vector(num_tasks, 1.0 / static_cast<double>(num_tasks))});
}

Composer Composer::alpha_minimax(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be positive");
  return Composer(AlphaMinimax{alpha});
}

std::string Composer::name() const {
  struct Visitor {
    std::string operator()(const WeightedL1&) const { return "l1"; }
    std::string operator()(const L2Composer&) const { return "l2"; }
    std::string operator()(const MaxComposer&) const { return "minimax"; }
    std::string operator()(const AlphaMinimax& a) const {
      char buf[64];
      std::snprintf(buf, sizeof buf, "alpha_minimax(%g)", a.alpha);
      return buf;
    }
  };
  return std::visit(Visitor{}, v_);
}

AlphaMinimaxSolution inner_minimize_b(double alpha, const RiskVector& r) {
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  const std::size_t T = r.size();
  if (T == 0) throw InvalidArgument("empty risk vector");

  Vector sorted(r.values().begin(), r.values().end());
  std::sort(sorted.begin(), sorted.end());

  // Right slope at b is 1 - #{t : r_t > b} / alpha; scan candidates upward.
  double b_star = sorted.back();
  auto count_above = [&](double b) {
    return static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), b));
  };
  if (count_above(0.0) <= alpha) {
    b_star = 0.0;
  } else {
    for (double b : sorted) {
      if (count_above(b) <= alpha) {
        b_star = b;
        break;
      }
    }
  }

  AlphaMinimaxSolution sol;
  sol.b_star = b_star;
  sol.xi.resize(T);
  for (std::size_t t = 0; t < T; ++t) sol.xi[t] = std::max(0.0, r[t] - b_star);
  sol.value = b_star + compensated_sum(sol.xi) / alpha;
  return sol;
}

namespace {

void check_length(const Composer& c, const RiskVector& r) {
  if (r.size() == 0) throw InvalidArgument("empty risk vector");
  if (const auto* w = std::get_if<WeightedL1>(&c.variant()); w && w->weights.size() != r.size())
    throw ShapeMismatch("weighted_l1 has " + std::to_string(w->weights.size()) + " weights but " +
                        std::to_string(r.size()) + " risks");
}

}  // namespace

double compose(const Composer& c, const RiskVector& r) {
  check_length(c, r);
  struct Visitor {
    const RiskVector& r;
    double operator()(const WeightedL1& w) const {
      Vector terms(r.size());
      for (std::size_t t = 0; t < r.size(); ++t) terms[t] = w.weights[t] * r[t];
      return compensated_sum(terms);
    }
    double operator()(const L2Composer&) const {
      return norm(r.values()) / std::sqrt(static_cast<double>(r.size()));
    }
    double operator()(const MaxComposer&) const { return r.max(); }
    double operator()(const AlphaMinimax& a) const { return inner_minimize_b(a.alpha, r).value; }
  };
  return std::visit(Visitor{r}, c.variant());
}

Vector compose_subgradient(const Composer& c, const RiskVector& r) {
  check_length(c, r);
  const std::size_t T = r.size();
  struct Visitor {
    const RiskVector& r;
    std::size_t T;
    Vector operator()(const WeightedL1& w) const { return w.weights; }
    Vector operator()(const L2Composer&) const {
      Vector g(T, 0.0);
      const double n = norm(r.values());
      if (n == 0.0) return g;
      const double scale = 1.0 / (std::sqrt(static_cast<double>(T)) * n);
      for (std::size_t t = 0; t < T; ++t) g[t] = r[t] * scale;
      return g;
    }
    Vector operator()(const MaxComposer&) const {
      Vector g(T, 0.0);
      std::size_t best = 0;
      for (std::size_t t = 1; t < T; ++t)
        if (r[t] > r[best]) best = t;
      g[best] = 1.0;
      return g;
    }
    Vector operator()(const AlphaMinimax& a) const {
      const AlphaMinimaxSolution sol = inner_minimize_b(a.alpha, r);
      Vector g(T, 0.0);
      std::size_t above = 0;
      std::size_t tied = 0;
      for (std::size_t t = 0; t < T; ++t) {
        if (r[t] > sol.b_star) {
          g[t] = 1.0 / a.alpha;
          ++above;
        } else if (r[t] == sol.b_star) {
          ++tied;
        }
      }
      // With b* > 0 the weights must total exactly 1; the shortfall sits on
      // the entries at the breakpoint (each receives at most 1/alpha).
      if (sol.b_star > 0.0 && tied > 0) {
        const double leftover = std::max(0.0, 1.0 - static_cast<double>(above) / a.alpha);
        const double share = std::min(leftover / static_cast<double>(tied), 1.0 / a.alpha);
        for (std::size_t t = 0; t < T; ++t)
          if (r[t] == sol.b_star) g[t] = share;
      }
      return g;
    }
  };
  return std::visit(Visitor{r, T}, c.variant());
}

double default_alpha(std::size_t num_tasks, double level) {
  if (num_tasks == 0) throw InvalidArgument("default_alpha needs T >= 1");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("level must lie in (0, 1)");
  const double T = static_cast<double>(num_tasks);
  const double lo = std::ceil(level * T + 0.5);
  const double hi = std::ceil(level * T + 1.5);
  return 2.0 / (1.0 / lo + 1.0 / hi);
}

}  // namespace mmtl
