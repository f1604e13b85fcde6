#include "mmtl/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mmtl {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeMismatch("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) {
  // Scaled to avoid overflow for large entries.
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (double x : v) {
    const double r = x / scale;
    s += r * r;
  }
  return scale * std::sqrt(s);
}

double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double c = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      c += (sum - t) + v;
    else
      c += (v - t) + sum;
    sum = t;
  }
  return sum + c;
}

MultiTaskDataset::MultiTaskDataset(std::vector<TaskSample> tasks, ProblemKind kind)
    : tasks_(std::move(tasks)), kind_(kind) {
  if (tasks_.empty()) throw InvalidArgument("dataset needs at least one task");
  dim_ = tasks_.front().dim();
  for (std::size_t t = 0; t < tasks_.size(); ++t) {
    const TaskSample& task = tasks_[t];
    if (task.task_id != t)
      throw InvalidTask("task ids must be 0..T-1 in order; got " + std::to_string(task.task_id) +
                        " at position " + std::to_string(t));
    if (task.examples.empty()) throw InvalidTask("task " + std::to_string(t) + " has no examples");
    for (const LabeledExample& ex : task.examples) {
      if (ex.x.size() != dim_) throw ShapeMismatch("task " + std::to_string(t) + ": inconsistent input dimension");
      if (kind_ == ProblemKind::classification && ex.y != 1.0 && ex.y != -1.0)
        throw InvalidLabel("task " + std::to_string(t) + ": classification label must be +1 or -1");
    }
  }
}

const TaskSample& MultiTaskDataset::task(std::size_t t) const {
  if (t >= tasks_.size()) throw InvalidTask("unknown task " + std::to_string(t));
  return tasks_[t];
}

std::size_t MultiTaskDataset::total_examples() const {
  std::size_t n = 0;
  for (const auto& t : tasks_) n += t.size();
  return n;
}

std::vector<std::size_t> MultiTaskDataset::task_sizes() const {
  std::vector<std::size_t> sizes;
  sizes.reserve(tasks_.size());
  for (const auto& t : tasks_) sizes.push_back(t.size());
  return sizes;
}

MultiTaskDataset subset_tasks(const MultiTaskDataset& data, std::span<const std::size_t> task_ids) {
  std::vector<TaskSample> tasks;
  tasks.reserve(task_ids.size());
  for (std::size_t i = 0; i < task_ids.size(); ++i) {
    TaskSample t = data.task(task_ids[i]);
    t.task_id = i;
    tasks.push_back(std::move(t));
  }
  return MultiTaskDataset(std::move(tasks), data.kind());
}

LossKind LossKind::clipped(double bound) const {
  if (!(bound > 0.0)) throw InvalidArgument("clip bound must be positive");
  LossKind k = *this;
  k.clip_bound = bound;
  return k;
}

std::string to_string(LossVariant v) { return v == LossVariant::squared ? "squared" : "hinge"; }

namespace {

void check_label(const LossKind& kind, double label) {
  if (kind.variant == LossVariant::hinge && label != 1.0 && label != -1.0)
    throw InvalidLabel("hinge loss needs a +1/-1 label, got " + std::to_string(label));
}

}  // namespace

double loss(const LossKind& kind, double prediction, double label) {
  check_label(kind, label);
  double value = 0.0;
  if (kind.variant == LossVariant::squared) {
    const double r = prediction - label;
    value = r * r;
  } else {
    value = std::max(0.0, 1.0 - prediction * label);
  }
  if (kind.clip_bound) value = std::min(value, *kind.clip_bound);
  return value;
}

double loss_subderivative(const LossKind& kind, double prediction, double label) {
  check_label(kind, label);
  if (kind.variant == LossVariant::squared) return 2.0 * (prediction - label);
  return prediction * label < 1.0 ? -label : 0.0;
}

RiskVector::RiskVector(Vector values) : values_(std::move(values)) {
  for (double v : values_)
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("risk entries must be finite and nonnegative");
}

double RiskVector::max() const {
  if (values_.empty()) throw InvalidArgument("max of empty risk vector");
  return *std::max_element(values_.begin(), values_.end());
}

double RiskVector::mean() const {
  if (values_.empty()) throw InvalidArgument("mean of empty risk vector");
  return compensated_sum(values_) / static_cast<double>(values_.size());
}

double empirical_risk(const TaskSample& task, const Predictor& predictor, const LossKind& kind) {
  if (task.examples.empty()) throw InvalidTask("empirical risk of an empty task");
  double sum = 0.0;
  for (const LabeledExample& ex : task.examples) sum += loss(kind, predictor(ex.x), ex.y);
  return sum / static_cast<double>(task.examples.size());
}

}  // namespace mmtl
