#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "mmtl/data.hpp"
#include "mmtl/models.hpp"
#include "mmtl/solver.hpp"

namespace mmtl {

enum class MetricKind { l2_risk, rmse, normalized_mean_rmse, multiclass_01 };

std::string to_string(MetricKind k);
MetricKind parse_metric_kind(const std::string& s);

struct Metrics {
  double max_risk = 0.0;
  double mean_risk = 0.0;
  RiskVector per_task;
  MetricKind metric_kind = MetricKind::l2_risk;
};

/// Aggregates per-task values: max, and the plain mean or, for
/// normalized_mean_rmse, the mean weighted by task_sizes / sum(task_sizes).
Metrics make_metrics(RiskVector per_task, MetricKind kind, std::span<const std::size_t> task_sizes = {});

/// Per-task test metric of a trained model. l2_risk uses `kind`; rmse and
/// normalized_mean_rmse use the square root of the task's mean squared error.
Metrics evaluate_mtl(const ModelParams& model, const MultiTaskDataset& test, const LossKind& kind,
                     MetricKind metric_kind);

/// Fits predictors for new tasks from their train splits only, reusing the
/// shared part of a trained model.
///  EP: v0 frozen; each task fits vt with |vt| <= tau1, or with penalty lambda1 |vt|^2.
///  AEP: predictors live in the span of the right singular vectors of W whose
///  singular values exceed 1e-6 * sigma_max; each task fits coefficients c with
///  |c| <= radius, or with penalty lambda |c|.
ModelParams adapt_ltl(const ModelParams& trained, const MultiTaskDataset& new_train, const ModelConfig& model_config,
                      const LossKind& kind, const SolveConfig& cfg);

/// adapt_ltl on new_tasks.train, then evaluate_mtl on new_tasks.test.
Metrics evaluate_ltl(const ModelParams& trained, const TrainTestPair& new_tasks, const ModelConfig& model_config,
                     const LossKind& kind, const SolveConfig& cfg, MetricKind metric_kind);

/// Right singular vectors of W (d x k) above the relative threshold.
Matrix shared_subspace(const Matrix& W, double rel_threshold = 1e-6);

/// Task ids 0..T-1 shuffled with the seed, then cut into k contiguous folds
/// whose sizes differ by at most one.
std::vector<std::vector<std::size_t>> task_folds(std::size_t num_tasks, std::size_t k, std::uint64_t seed);

struct CvResult {
  std::vector<Metrics> folds;
  double max_mean = 0.0;
  double max_std = 0.0;  // sample standard deviation across folds, 0 for one fold
  double mean_mean = 0.0;
  double mean_std = 0.0;
};

using FoldRunner = std::function<Metrics(std::span<const std::size_t> train_ids, std::span<const std::size_t> heldout_ids)>;

/// Runs `runner` once per fold with that fold held out. Throws if k > T or k < 2.
CvResult task_cv(std::size_t num_tasks, std::size_t k, std::uint64_t seed, const FoldRunner& runner);

/// Sample mean and standard deviation (n - 1 denominator), compensated.
std::pair<double, double> mean_and_std(std::span<const double> values);

/// Fraction of rows of `features` whose tournament decode differs from the label.
/// Task k of `binary` scores pairs()[k].
double multiclass_01(const ModelParams& binary, const Matrix& features, std::span<const std::uint8_t> labels,
                     const TournamentSpec& spec);

}  // namespace mmtl
