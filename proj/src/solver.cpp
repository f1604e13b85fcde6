#include "mmtl/solver.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mmtl/linalg.hpp"

namespace mmtl {

namespace {

// Risk of one task under predictor w, with the risk gradient written to g.
double task_risk_and_gradient(std::span<const double> w, const TaskSample& sample, const LossKind& kind, Vector& g) {
  g.assign(w.size(), 0.0);
  Vector losses(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const LabeledExample& ex = sample.examples[i];
    const double pred = dot(w, ex.x);
    losses[i] = loss(kind, pred, ex.y);
    const double d = loss_subderivative(kind, pred, ex.y);
    if (d != 0.0)
      for (std::size_t j = 0; j < w.size(); ++j) g[j] += d * ex.x[j];
  }
  const double inv_m = 1.0 / static_cast<double>(sample.size());
  for (double& x : g) x *= inv_m;
  return compensated_sum(losses) * inv_m;
}

double step_scale(StepSchedule s, std::size_t k) {
  return s == StepSchedule::constant ? 1.0 : 1.0 / std::sqrt(static_cast<double>(k));
}

void shrink(std::span<double> v, double factor) {
  for (double& x : v) x *= factor;
}

}  // namespace

void SolveConfig::validate() const {
  if (max_iters < 1) throw InvalidArgument("max_iters must be at least 1");
  if (!(step0 > 0.0) || !std::isfinite(step0)) throw InvalidArgument("step0 must be positive");
  if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
  if (patience < 1) throw InvalidArgument("patience must be at least 1");
}

double objective_value(const ModelParams& params, const MultiTaskDataset& data, const ModelConfig& model_config,
                       const Composer& composer, const LossKind& kind) {
  const double fit = compose(composer, risk_vector(params, data, kind));
  return is_constrained(model_config) ? fit : fit + regularizer_value(params, model_config);
}

FlatResult minimize(const FlatProblem& problem, Vector x0, const SolveConfig& cfg, const IterationObserver& observer) {
  cfg.validate();
  FlatResult out;
  SolveReport& rep = out.report;
  Vector x = std::move(x0);
  Vector g;
  out.x = x;
  double best = 0.0;

  for (std::size_t k = 0;; ++k) {
    const double value = problem.data_term(x, g) + problem.penalty(x);
    if (!std::isfinite(value))
      throw DivergenceError("objective became non-finite at iteration " + std::to_string(k));
    if (observer) observer(k, value);
    rep.objective_trace.push_back(value);
    if (k == 0 || value < best) {
      best = value;
      out.x = x;
    }
    rep.best_trace.push_back(best);

    if (k >= cfg.patience) {
      const double before = rep.best_trace[k - cfg.patience];
      if (before - best < cfg.tol * std::max(1.0, std::abs(best))) {
        rep.converged = true;
        break;
      }
    }
    if (k == cfg.max_iters) break;

    const double eta = cfg.step0 * step_scale(cfg.step_schedule, k + 1) / std::max(1.0, norm(g));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= eta * g[i];
    problem.prox(x, eta);
    rep.iterations_run = k + 1;
  }
  rep.final_objective = rep.objective_trace.back();
  rep.best_objective = best;
  return out;
}

namespace {

// With v0 fixed the task risks decouple in vt, so re-solving each task block
// on its own and keeping it only where the task risk drops cannot raise phi
// for any monotone composer. It picks, among equally good minimax solutions,
// the one whose non-binding tasks are fitted rather than left mid-path.
void refit_task_blocks(EpParams& p, const MultiTaskDataset& data, const EpConstrained& box, const LossKind& kind,
                       const SolveConfig& cfg) {
  const std::size_t d = data.dim();
  SolveConfig inner = cfg;
  inner.trace_path.reset();
  inner.refit_task_blocks = false;
  Vector w(d), g;
  for (std::size_t t = 0; t < data.num_tasks(); ++t) {
    const TaskSample& task = data.task(t);
    auto risk_at = [&](std::span<const double> vt, Vector& grad) {
      for (std::size_t j = 0; j < d; ++j) w[j] = p.v0[j] + vt[j];
      return task_risk_and_gradient(w, task, kind, grad);
    };
    FlatProblem prob;
    prob.data_term = risk_at;
    prob.penalty = [](std::span<const double>) { return 0.0; };
    prob.prox = [&](Vector& x, double) { x = project_l2_ball(x, box.tau1); };
    const double before = risk_at(p.vt[t], g);
    FlatResult r = minimize(prob, p.vt[t], inner);
    if (risk_at(r.x, g) < before) p.vt[t] = std::move(r.x);
  }
}

}  // namespace

SolveResult solve(const MultiTaskDataset& data, const ModelConfig& model_config, const Composer& composer,
                  const LossKind& kind, const SolveConfig& cfg) {
  validate(model_config);
  if (const auto* l1 = std::get_if<WeightedL1>(&composer.variant()); l1 && l1->weights.size() != data.num_tasks())
    throw ShapeMismatch("composer has " + std::to_string(l1->weights.size()) + " weights for " +
                        std::to_string(data.num_tasks()) + " tasks");

  const std::size_t T = data.num_tasks();
  const std::size_t d = data.dim();
  const ModelParams shape = initial_params(model_config, T, d);
  const bool is_ep = std::holds_alternative<EpParams>(shape);
  const bool constrained = is_constrained(model_config);

  Vector risks(T);
  std::vector<Vector> task_grads(T);

  FlatProblem problem;
  problem.data_term = [&](std::span<const double> x, Vector& grad) {
    Vector w(d);
    for (std::size_t t = 0; t < T; ++t) {
      if (is_ep) {
        for (std::size_t j = 0; j < d; ++j) w[j] = x[j] + x[(t + 1) * d + j];
      } else {
        std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(t * d), d, w.begin());
      }
      risks[t] = task_risk_and_gradient(w, data.task(t), kind, task_grads[t]);
    }
    const RiskVector rv(risks);
    const Vector weights = compose_subgradient(composer, rv);
    grad.assign(x.size(), 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      const double wt = weights[t];
      if (wt == 0.0) continue;
      const std::size_t block = is_ep ? (t + 1) * d : t * d;
      for (std::size_t j = 0; j < d; ++j) {
        grad[block + j] += wt * task_grads[t][j];
        if (is_ep) grad[j] += wt * task_grads[t][j];
      }
    }
    return compose(composer, rv);
  };

  if (constrained) {
    problem.penalty = [](std::span<const double>) { return 0.0; };
    problem.prox = [&](Vector& x, double) {
      x = flatten(project_feasible(unflatten(shape, x), model_config));
    };
  } else if (is_ep) {
    const auto reg = std::get<EpRegularized>(std::get<EpConfig>(model_config).mode);
    const double l1 = reg.lambda1 / static_cast<double>(T);
    problem.penalty = [&, reg, l1](std::span<const double> x) {
      double tail = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        auto v = x.subspan((t + 1) * d, d);
        tail += dot(v, v);
      }
      auto v0 = x.subspan(0, d);
      return reg.lambda0 * dot(v0, v0) + l1 * tail;
    };
    problem.prox = [&, reg, l1](Vector& x, double eta) {
      std::span<double> all(x);
      shrink(all.subspan(0, d), 1.0 / (1.0 + 2.0 * eta * reg.lambda0));
      shrink(all.subspan(d), 1.0 / (1.0 + 2.0 * eta * l1));
    };
  } else {
    const double lambda = std::get<AepRegularized>(std::get<AepConfig>(model_config).mode).lambda;
    problem.penalty = [&, lambda](std::span<const double> x) {
      return lambda * trace_norm(Matrix(T, d, Vector(x.begin(), x.end())));
    };
    problem.prox = [&, lambda](Vector& x, double eta) {
      Matrix w = svt(Matrix(T, d, std::move(x)), eta * lambda);
      x.assign(w.data().begin(), w.data().end());
    };
  }

  std::ofstream trace;
  IterationObserver observer;
  if (cfg.trace_path) {
    trace.open(*cfg.trace_path);
    if (!trace) throw DataError("cannot open trace file " + cfg.trace_path->string());
    trace << "iteration,objective,max_risk,mean_risk\n";
    observer = [&](std::size_t k, double value) {
      const RiskVector rv(risks);
      char line[160];
      std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", k, value, rv.max(), rv.mean());
      trace << line;
    };
  }

  FlatResult flat = minimize(problem, flatten(shape), cfg, observer);
  SolveResult out{unflatten(shape, flat.x), std::move(flat.report)};
  if (is_ep && constrained && cfg.refit_task_blocks) {
    refit_task_blocks(std::get<EpParams>(out.params), data, std::get<EpConstrained>(std::get<EpConfig>(model_config).mode),
                      kind, cfg);
    out.report.best_objective = objective_value(out.params, data, model_config, composer, kind);
  }
  return out;
}

}  // namespace mmtl
