#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmtl/errors.hpp"

namespace mmtl {

using Vector = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

/// Neumaier-compensated sum; result does not depend on rounding of partial sums.
double compensated_sum(std::span<const double> values);

struct LabeledExample {
  Vector x;
  double y = 0.0;
};

enum class ProblemKind { regression, classification };

struct TaskSample {
  std::size_t task_id = 0;
  std::vector<LabeledExample> examples;

  std::size_t size() const { return examples.size(); }
  std::size_t dim() const { return examples.empty() ? 0 : examples.front().x.size(); }
};

// T >= 1 tasks with ids 0..T-1 in order, shared input dimension d, every task
// non-empty; for classification every label is +1 or -1.
class MultiTaskDataset {
 public:
  MultiTaskDataset(std::vector<TaskSample> tasks, ProblemKind kind);

  std::size_t num_tasks() const { return tasks_.size(); }
  std::size_t dim() const { return dim_; }
  ProblemKind kind() const { return kind_; }
  const TaskSample& task(std::size_t t) const;
  const std::vector<TaskSample>& tasks() const { return tasks_; }
  std::size_t total_examples() const;
  std::vector<std::size_t> task_sizes() const;

 private:
  std::vector<TaskSample> tasks_;
  std::size_t dim_ = 0;
  ProblemKind kind_ = ProblemKind::regression;
};

/// New dataset holding the listed tasks, renumbered 0..k-1 in the given order.
MultiTaskDataset subset_tasks(const MultiTaskDataset& data, std::span<const std::size_t> task_ids);

enum class LossVariant { squared, hinge };

struct LossKind {
  LossVariant variant = LossVariant::squared;
  /// Upper clip B; only the theory harness sets this, training never clips.
  std::optional<double> clip_bound;

  static LossKind squared() { return {LossVariant::squared, std::nullopt}; }
  static LossKind hinge() { return {LossVariant::hinge, std::nullopt}; }
  LossKind clipped(double bound) const;
};

std::string to_string(LossVariant v);

double loss(const LossKind& kind, double prediction, double label);

/// Subderivative with respect to the prediction. Hinge uses 0 at the kink.
double loss_subderivative(const LossKind& kind, double prediction, double label);

// Per-task empirical risks; every entry finite and >= 0.
class RiskVector {
 public:
  RiskVector() = default;
  explicit RiskVector(Vector values);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t t) const { return values_[t]; }
  std::span<const double> values() const { return values_; }
  double max() const;
  double mean() const;

 private:
  Vector values_;
};

using Predictor = std::function<double(std::span<const double>)>;

/// Mean loss of `predictor` over the task's examples.
double empirical_risk(const TaskSample& task, const Predictor& predictor, const LossKind& kind);

}  // namespace mmtl
