#pragma once

#include <variant>

#include "mmtl/core.hpp"
#include "mmtl/linalg.hpp"

namespace mmtl {

/// Shared-plus-offset linear model: task t predicts <v0 + vt[t], x>.
struct EpParams {
  Vector v0;
  std::vector<Vector> vt;

  static EpParams zeros(std::size_t num_tasks, std::size_t dim);
};

struct EpRegularized {
  double lambda0 = 1.0;  // penalty lambda0 * |v0|^2
  double lambda1 = 1.0;  // penalty (lambda1 / T) * sum_t |vt|^2
};
struct EpConstrained {
  double tau0 = 1.0;  // |v0| <= tau0
  double tau1 = 1.0;  // |vt| <= tau1 for every t
};
struct EpConfig {
  std::variant<EpRegularized, EpConstrained> mode;
};

/// Row t of W is task t's predictor.
struct AepParams {
  Matrix W;

  static AepParams zeros(std::size_t num_tasks, std::size_t dim);
};

struct AepRegularized {
  double lambda = 1.0;  // penalty lambda * |W|_tr
};
struct AepConstrained {
  double radius = 1.0;  // |W|_tr <= radius
};
struct AepConfig {
  std::variant<AepRegularized, AepConstrained> mode;
};

using ModelParams = std::variant<EpParams, AepParams>;
using ModelConfig = std::variant<EpConfig, AepConfig>;

/// Throws InvalidArgument unless every hyperparameter is positive and finite.
void validate(const ModelConfig& config);
bool is_constrained(const ModelConfig& config);

/// All-zero parameters of the family the config describes.
ModelParams initial_params(const ModelConfig& config, std::size_t num_tasks, std::size_t dim);

std::size_t num_tasks(const ModelParams& model);
std::size_t input_dim(const ModelParams& model);

/// Effective linear predictor of a task: v0 + vt (EP) or row t of W (AEP).
Vector task_weights(const ModelParams& model, std::size_t task);

double predict(const ModelParams& model, std::size_t task, std::span<const double> x);

RiskVector risk_vector(const ModelParams& model, const MultiTaskDataset& data, const LossKind& kind);

/// Omega(params) for a regularized config; throws for a constrained config.
double regularizer_value(const ModelParams& model, const ModelConfig& config);

/// Euclidean projection onto the constraint set; throws for a regularized config.
ModelParams project_feasible(const ModelParams& model, const ModelConfig& config);

bool is_feasible(const ModelParams& model, const ModelConfig& config, double tol = 1e-8);

/// Gradient of task t's empirical risk with respect to its effective
/// predictor: g = (1/m_t) sum_i loss'(pred_i, y_i) x_i. In parameter space it
/// occupies the v0 and vt[t] blocks (EP) or row t (AEP); see embed_direction.
struct TaskGradient {
  std::size_t task_id = 0;
  Vector g;
};

TaskGradient risk_gradient_contribution(const ModelParams& model, const MultiTaskDataset& data,
                                        const LossKind& kind, std::size_t task);

/// Full parameter-space direction for one task's gradient, shaped like `like`.
ModelParams embed_direction(const ModelParams& like, const TaskGradient& grad);

/// Flat layout used by the solver: EP = [v0, vt[0], ..., vt[T-1]], AEP = W row-major.
Vector flatten(const ModelParams& model);
ModelParams unflatten(const ModelParams& like, std::span<const double> flat);

void check_shape(const ModelParams& model, const MultiTaskDataset& data);

}  // namespace mmtl
