#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "mmtl/core.hpp"
#include "mmtl/rng.hpp"

namespace mmtl {

double lemma1_bound(std::size_t num_representations, double delta, std::size_t num_tasks);
double theorem1_rhs(std::size_t num_representations, double delta, std::size_t num_tasks, double loss_bound);
double markov_rhs(double mean_empirical_risk, double epsilon, double gamma);

/// gamma + 1/T + 2 L R + sqrt(8 log(4/delta) / m): the true-risk level in the theorem's event.
double theorem1_threshold(double gamma, std::size_t num_tasks, double lipschitz, double rademacher, double delta,
                          std::size_t m);

struct RademacherEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_draws = 0;
};

/// Monte Carlo mean over sign vectors of (bound / m) |sum_i sigma_i x_i|, the
/// supremum over the linear class with |w| <= bound.
RademacherEstimate estimate_rademacher(const std::vector<Vector>& sample, double hypothesis_norm_bound,
                                       std::size_t n_draws, std::uint64_t seed);

// A task: inputs uniform on the unit sphere; regression targets <theta, x> + u
// with u uniform on [-noise, noise], or classification labels sign(<theta, x> + u).
struct TaskMeasure {
  Vector theta;
  double noise = 0.0;
};

// Finite family of representations, each a unit direction u whose hypotheses
// are x -> a <u, x> with |a| <= hypothesis_bound.
struct FiniteEnvironment {
  std::vector<Vector> representations;
  std::function<TaskMeasure(KeyedRng&)> task_prior;
  double hypothesis_bound = 1.0;
  std::size_t m = 20;
  LossKind loss;            // clip_bound holds B
  double lipschitz = 1.0;   // of the loss in the prediction, over the reachable range

  std::size_t dim() const { return representations.empty() ? 0 : representations.front().size(); }
  std::size_t num_representations() const { return representations.size(); }
  std::vector<LabeledExample> draw_sample(const TaskMeasure& task, KeyedRng& rng, std::size_t n) const;
  void validate() const;
};

/// d = 5 inputs, four representations, and a prior mixing two clusters of
/// task parameters with weights 0.9 and 0.1. Representation 0 fits both
/// clusters moderately, 1 fits the majority cluster closely, 2 fits the minority
/// cluster closely, 3 is orthogonal to both. B is set so clipping never binds.
FiniteEnvironment default_environment(LossVariant loss = LossVariant::squared);

struct ErmResult {
  double coef = 0.0;
  double risk = 0.0;  // clipped empirical risk at coef
};

/// Exact empirical risk minimizer over a in [-bound, bound].
ErmResult erm_1d(std::span<const LabeledExample> sample, std::span<const double> direction, double bound,
                 const LossKind& kind);

struct TailBoundOptions {
  std::size_t fresh_tasks = 2000;      // new tasks per meta-replicate for the tail estimate
  std::size_t theorem_tasks = 20;      // new tasks per meta-replicate for the true-risk event
  std::size_t holdout_points = 10000;  // true-risk proxy sample size
  std::size_t rademacher_draws = 400;
};

struct BoundReport {
  double gamma = 0.0;
  double delta = 0.0;
  std::size_t num_tasks = 0;
  std::size_t meta_reps = 0;
  std::size_t skipped = 0;                // replicates without a gamma-feasible representation
  double skip_rate = 0.0;
  double empirical_tail_freq = 0.0;       // share of used replicates whose tail estimate exceeds lemma1_bound
  double allowed_tail_freq = 0.0;         // delta/2 + 3 binomial standard deviations
  double mean_tail_estimate = 0.0;        // mean over used replicates of the new-task tail estimate
  double lemma1_bound = 0.0;
  double theorem1_threshold = 0.0;
  double theorem1_rhs = 0.0;
  double theorem1_event_freq = 0.0;       // mean share of new tasks whose ERM true risk exceeds the threshold
  double theorem1_violation_freq = 0.0;   // share of used replicates where that share exceeds theorem1_rhs
  double markov_rhs = 0.0;                // mean over used replicates, epsilon = 0
  RademacherEstimate rademacher;
  double loss_bound = 0.0;
  double lipschitz = 0.0;
  std::vector<std::size_t> selections;    // how often each representation was selected

  bool lemma_corroborated() const { return empirical_tail_freq <= allowed_tail_freq; }
  std::string to_json() const;
};

/// Per meta-replicate: draw T tasks, keep the representations whose maximum
/// ERM risk is <= gamma, select the feasible one with the largest estimated
/// new-task tail, and compare that tail with the lemma's bound. New tasks use
/// streams that do not depend on T, so runs at different T share them.
/// Throws InconclusiveError when every replicate is skipped.
BoundReport verify_tail_bound(const FiniteEnvironment& env, std::size_t num_tasks, double gamma, double delta,
                              std::size_t meta_reps, std::uint64_t seed, const TailBoundOptions& options = {});

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

struct BoundComparison {
  std::size_t num_tasks = 0;
  double gamma = 0.0;
  double markov = 0.0;
  double theorem1 = 0.0;
};

/// markov_rhs(mean_empirical_risk, 0, gamma) beside theorem1_rhs for each (T, gamma).
std::vector<BoundComparison> compare_bounds(std::size_t num_representations, double delta, double loss_bound,
                                            double mean_empirical_risk, std::span<const std::size_t> task_grid,
                                            std::span<const double> gamma_grid);

}  // namespace mmtl
