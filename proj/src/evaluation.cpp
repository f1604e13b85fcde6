#include "mmtl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmtl/rng.hpp"

namespace mmtl {

namespace {

// Single-task fit of coefficients c for inputs z = basis^T x (or x itself when
// basis is empty), predicting offset(x) + <c, z>.
struct SingleTaskFit {
  std::vector<Vector> z;
  Vector offsets;
  Vector y;
};

Vector fit_single_task(const SingleTaskFit& fit, std::size_t dim, const LossKind& kind, const SolveConfig& cfg,
                       FlatProblem problem) {
  const double inv_m = 1.0 / static_cast<double>(fit.y.size());
  Vector losses(fit.y.size());
  problem.data_term = [&](std::span<const double> c, Vector& grad) {
    grad.assign(dim, 0.0);
    for (std::size_t i = 0; i < fit.y.size(); ++i) {
      const double pred = fit.offsets[i] + dot(c, fit.z[i]);
      losses[i] = loss(kind, pred, fit.y[i]);
      const double d = loss_subderivative(kind, pred, fit.y[i]) * inv_m;
      if (d != 0.0)
        for (std::size_t j = 0; j < dim; ++j) grad[j] += d * fit.z[i][j];
    }
    return compensated_sum(losses) * inv_m;
  };
  return minimize(problem, Vector(dim, 0.0), cfg).x;
}

FlatProblem ball_problem(double radius) {
  FlatProblem p;
  p.penalty = [](std::span<const double>) { return 0.0; };
  p.prox = [radius](Vector& c, double) { c = project_l2_ball(c, radius); };
  return p;
}

ModelParams adapt_ep(const EpParams& trained, const MultiTaskDataset& data, const EpConfig& config,
                     const LossKind& kind, const SolveConfig& cfg) {
  const std::size_t d = data.dim();
  FlatProblem problem;
  if (const auto* c = std::get_if<EpConstrained>(&config.mode)) {
    problem = ball_problem(c->tau1);
  } else {
    const double lambda = std::get<EpRegularized>(config.mode).lambda1;
    problem.penalty = [lambda](std::span<const double> v) { return lambda * dot(v, v); };
    problem.prox = [lambda](Vector& v, double eta) {
      for (double& x : v) x /= 1.0 + 2.0 * eta * lambda;
    };
  }
  EpParams out = EpParams::zeros(data.num_tasks(), d);
  out.v0 = trained.v0;
  for (std::size_t t = 0; t < data.num_tasks(); ++t) {
    SingleTaskFit fit;
    for (const auto& ex : data.task(t).examples) {
      fit.z.push_back(ex.x);
      fit.offsets.push_back(dot(trained.v0, ex.x));
      fit.y.push_back(ex.y);
    }
    out.vt[t] = fit_single_task(fit, d, kind, cfg, problem);
  }
  return out;
}

ModelParams adapt_aep(const AepParams& trained, const MultiTaskDataset& data, const AepConfig& config,
                      const LossKind& kind, const SolveConfig& cfg) {
  const std::size_t d = data.dim();
  AepParams out = AepParams::zeros(data.num_tasks(), d);
  const Matrix basis = shared_subspace(trained.W);
  const std::size_t k = basis.cols();
  if (k == 0) return out;

  FlatProblem problem;
  if (const auto* c = std::get_if<AepConstrained>(&config.mode)) {
    problem = ball_problem(c->radius);
  } else {
    const double lambda = std::get<AepRegularized>(config.mode).lambda;
    problem.penalty = [lambda](std::span<const double> c) { return lambda * norm(c); };
    problem.prox = [lambda](Vector& c, double eta) {
      const double n = norm(c);
      const double f = n > 0.0 ? std::max(0.0, 1.0 - eta * lambda / n) : 0.0;
      for (double& x : c) x *= f;
    };
  }
  for (std::size_t t = 0; t < data.num_tasks(); ++t) {
    SingleTaskFit fit;
    for (const auto& ex : data.task(t).examples) {
      Vector z(k, 0.0);
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t q = 0; q < k; ++q) z[q] += basis(j, q) * ex.x[j];
      fit.z.push_back(std::move(z));
      fit.offsets.push_back(0.0);
      fit.y.push_back(ex.y);
    }
    const Vector c = fit_single_task(fit, k, kind, cfg, problem);
    auto row = out.W.row(t);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t q = 0; q < k; ++q) row[j] += basis(j, q) * c[q];
  }
  return out;
}

}  // namespace

std::string to_string(MetricKind k) {
  switch (k) {
    case MetricKind::l2_risk: return "l2_risk";
    case MetricKind::rmse: return "rmse";
    case MetricKind::normalized_mean_rmse: return "normalized_mean_rmse";
    case MetricKind::multiclass_01: return "multiclass_01";
  }
  return "unknown";
}

MetricKind parse_metric_kind(const std::string& s) {
  for (MetricKind k :
       {MetricKind::l2_risk, MetricKind::rmse, MetricKind::normalized_mean_rmse, MetricKind::multiclass_01})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown metric kind '" + s + "'");
}

Metrics make_metrics(RiskVector per_task, MetricKind kind, std::span<const std::size_t> task_sizes) {
  Metrics m;
  m.metric_kind = kind;
  m.max_risk = per_task.max();
  if (kind == MetricKind::normalized_mean_rmse) {
    if (task_sizes.size() != per_task.size()) throw ShapeMismatch("need one task size per task");
    const double total = static_cast<double>(std::accumulate(task_sizes.begin(), task_sizes.end(), std::size_t{0}));
    Vector weighted(per_task.size());
    for (std::size_t t = 0; t < per_task.size(); ++t)
      weighted[t] = per_task[t] * static_cast<double>(task_sizes[t]) / total;
    m.mean_risk = compensated_sum(weighted);
  } else {
    m.mean_risk = per_task.mean();
  }
  m.per_task = std::move(per_task);
  return m;
}

Metrics evaluate_mtl(const ModelParams& model, const MultiTaskDataset& test, const LossKind& kind,
                     MetricKind metric_kind) {
  if (num_tasks(model) != test.num_tasks())
    throw InvalidTask("model has " + std::to_string(num_tasks(model)) + " tasks, test data has " +
                      std::to_string(test.num_tasks()));
  switch (metric_kind) {
    case MetricKind::l2_risk:
      return make_metrics(risk_vector(model, test, kind), metric_kind);
    case MetricKind::rmse:
    case MetricKind::normalized_mean_rmse: {
      const RiskVector mse = risk_vector(model, test, LossKind::squared());
      Vector r(mse.size());
      for (std::size_t t = 0; t < r.size(); ++t) r[t] = std::sqrt(mse[t]);
      return make_metrics(RiskVector(std::move(r)), metric_kind, test.task_sizes());
    }
    case MetricKind::multiclass_01:
      break;
  }
  throw InvalidArgument("multiclass_01 is computed by multiclass_01(), not per task");
}

Matrix shared_subspace(const Matrix& W, double rel_threshold) {
  const SvdResult s = svd(W);
  const double top = s.S.empty() ? 0.0 : s.S.front();
  std::size_t k = 0;
  while (k < s.S.size() && top > 0.0 && s.S[k] > rel_threshold * top) ++k;
  Matrix basis(W.cols(), k);
  for (std::size_t j = 0; j < W.cols(); ++j)
    for (std::size_t q = 0; q < k; ++q) basis(j, q) = s.V(j, q);
  return basis;
}

ModelParams adapt_ltl(const ModelParams& trained, const MultiTaskDataset& new_train, const ModelConfig& model_config,
                      const LossKind& kind, const SolveConfig& cfg) {
  validate(model_config);
  if (input_dim(trained) != new_train.dim())
    throw ShapeMismatch("shared component has dimension " + std::to_string(input_dim(trained)) +
                        ", new tasks have " + std::to_string(new_train.dim()));
  if (const auto* ep = std::get_if<EpParams>(&trained)) {
    const auto* c = std::get_if<EpConfig>(&model_config);
    if (!c) throw InvalidArgument("EP model with an AEP config");
    return adapt_ep(*ep, new_train, *c, kind, cfg);
  }
  const auto* c = std::get_if<AepConfig>(&model_config);
  if (!c) throw InvalidArgument("AEP model with an EP config");
  return adapt_aep(std::get<AepParams>(trained), new_train, *c, kind, cfg);
}

Metrics evaluate_ltl(const ModelParams& trained, const TrainTestPair& new_tasks, const ModelConfig& model_config,
                     const LossKind& kind, const SolveConfig& cfg, MetricKind metric_kind) {
  const ModelParams adapted = adapt_ltl(trained, new_tasks.train, model_config, kind, cfg);
  return evaluate_mtl(adapted, new_tasks.test, kind, metric_kind);
}

std::vector<std::vector<std::size_t>> task_folds(std::size_t num_tasks, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("cross-validation needs at least 2 folds");
  if (k > num_tasks)
    throw InvalidArgument(std::to_string(k) + " folds requested for " + std::to_string(num_tasks) + " tasks");
  std::vector<std::size_t> order(num_tasks);
  std::iota(order.begin(), order.end(), 0);
  KeyedRng rng(seed, {0xcf01du});
  for (std::size_t i = num_tasks; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = num_tasks / k + (f < num_tasks % k ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(folds[f].begin(), folds[f].end());
    pos += size;
  }
  return folds;
}

std::pair<double, double> mean_and_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = compensated_sum(values) / n;
  if (values.size() == 1) return {mean, 0.0};
  Vector sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - mean) * (values[i] - mean);
  return {mean, std::sqrt(compensated_sum(sq) / (n - 1.0))};
}

CvResult task_cv(std::size_t num_tasks, std::size_t k, std::uint64_t seed, const FoldRunner& runner) {
  const auto folds = task_folds(num_tasks, k, seed);
  CvResult out;
  Vector maxes, means;
  for (const auto& held : folds) {
    std::vector<std::size_t> train;
    std::vector<bool> is_held(num_tasks, false);
    for (std::size_t t : held) is_held[t] = true;
    for (std::size_t t = 0; t < num_tasks; ++t)
      if (!is_held[t]) train.push_back(t);
    out.folds.push_back(runner(train, held));
    maxes.push_back(out.folds.back().max_risk);
    means.push_back(out.folds.back().mean_risk);
  }
  std::tie(out.max_mean, out.max_std) = mean_and_std(maxes);
  std::tie(out.mean_mean, out.mean_std) = mean_and_std(means);
  return out;
}

double multiclass_01(const ModelParams& binary, const Matrix& features, std::span<const std::uint8_t> labels,
                     const TournamentSpec& spec) {
  const std::size_t pairs = spec.pairs().size();
  if (num_tasks(binary) != pairs)
    throw ShapeMismatch("model has " + std::to_string(num_tasks(binary)) + " binary tasks, tournament needs " +
                        std::to_string(pairs));
  if (features.cols() != input_dim(binary) || features.rows() != labels.size())
    throw ShapeMismatch("features, labels and model dimensions disagree");
  if (labels.empty()) throw InvalidArgument("no test points");
  std::vector<Vector> w(pairs);
  for (std::size_t k = 0; k < pairs; ++k) w[k] = task_weights(binary, k);
  std::size_t wrong = 0;
  Vector scores(pairs);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    for (std::size_t k = 0; k < pairs; ++k) scores[k] = dot(w[k], features.row(i));
    if (tournament_decode(scores, spec) != labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

}  // namespace mmtl
