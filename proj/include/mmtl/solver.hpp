#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>

#include "mmtl/composition.hpp"
#include "mmtl/models.hpp"

namespace mmtl {

enum class StepSchedule { constant, inv_sqrt };

struct SolveConfig {
  std::size_t max_iters = 2000;
  double step0 = 1.0;
  StepSchedule step_schedule = StepSchedule::inv_sqrt;
  double tol = 1e-6;  // plateau tolerance, relative to max(1, |best objective|)
  std::size_t patience = 50;
  std::uint64_t seed = 0;  // the method is deterministic; kept so runs record it
  std::optional<std::filesystem::path> trace_path;  // CSV: iteration,objective,max_risk,mean_risk
  // Constrained EP only: after the joint solve, refit each vt with v0 fixed
  // and keep it where the task's risk drops. Never raises the objective.
  bool refit_task_blocks = true;

  void validate() const;
};

struct SolveReport {
  double final_objective = 0.0;  // objective of the last evaluated iterate
  double best_objective = 0.0;
  std::size_t iterations_run = 0;  // subgradient steps taken
  Vector objective_trace;          // objective of iterate k, k = 0 is the zero start
  Vector best_trace;               // running minimum of objective_trace
  bool converged = false;          // stopped by the plateau rule rather than max_iters
};

struct SolveResult {
  ModelParams params;  // best iterate
  SolveReport report;
};

/// phi(risks) + Omega, with Omega = 0 in constrained mode.
double objective_value(const ModelParams& params, const MultiTaskDataset& data, const ModelConfig& model_config,
                       const Composer& composer, const LossKind& kind);

/// Projected (constrained) or proximal (regularized) subgradient method from
/// zero. Steps are step0 * s(k) / max(1, |g|) with s(k) = 1 or 1/sqrt(k).
/// Throws DivergenceError on a non-finite objective.
SolveResult solve(const MultiTaskDataset& data, const ModelConfig& model_config, const Composer& composer,
                  const LossKind& kind, const SolveConfig& cfg);

// Same loop over a flat parameter vector, for problems that are not a full
// multi-task model (per-task adaptation in evaluation).
struct FlatProblem {
  // Value of the smooth-or-subdifferentiable part; writes a subgradient.
  std::function<double(std::span<const double> x, Vector& grad)> data_term;
  // Value of the prox-handled part; 0 for constrained problems.
  std::function<double(std::span<const double> x)> penalty;
  // Projection onto the feasible set, or prox of eta * penalty.
  std::function<void(Vector& x, double eta)> prox;
};

struct FlatResult {
  Vector x;
  SolveReport report;
};

using IterationObserver = std::function<void(std::size_t iteration, double objective)>;

FlatResult minimize(const FlatProblem& problem, Vector x0, const SolveConfig& cfg,
                    const IterationObserver& observer = {});

}  // namespace mmtl
