#include "mmtl/models.hpp"

#include <cmath>

namespace mmtl {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

bool positive(double x) { return x > 0.0 && std::isfinite(x); }

}  // namespace

EpParams EpParams::zeros(std::size_t num_tasks, std::size_t dim) {
  return EpParams{Vector(dim, 0.0), std::vector<Vector>(num_tasks, Vector(dim, 0.0))};
}

AepParams AepParams::zeros(std::size_t num_tasks, std::size_t dim) { return AepParams{Matrix(num_tasks, dim)}; }

void validate(const ModelConfig& config) {
  std::visit(Overloaded{
                 [](const EpConfig& c) {
                   std::visit(Overloaded{[](const EpRegularized& r) {
                                           if (!positive(r.lambda0) || !positive(r.lambda1))
                                             throw InvalidArgument("EP lambdas must be positive");
                                         },
                                         [](const EpConstrained& r) {
                                           if (!positive(r.tau0) || !positive(r.tau1))
                                             throw InvalidArgument("EP radii must be positive");
                                         }},
                              c.mode);
                 },
                 [](const AepConfig& c) {
                   std::visit(Overloaded{[](const AepRegularized& r) {
                                           if (!positive(r.lambda)) throw InvalidArgument("AEP lambda must be positive");
                                         },
                                         [](const AepConstrained& r) {
                                           if (!positive(r.radius))
                                             throw InvalidArgument("AEP trace-norm radius must be positive");
                                         }},
                              c.mode);
                 }},
             config);
}

bool is_constrained(const ModelConfig& config) {
  return std::visit(Overloaded{[](const EpConfig& c) { return std::holds_alternative<EpConstrained>(c.mode); },
                               [](const AepConfig& c) { return std::holds_alternative<AepConstrained>(c.mode); }},
                    config);
}

ModelParams initial_params(const ModelConfig& config, std::size_t num_tasks, std::size_t dim) {
  if (std::holds_alternative<EpConfig>(config)) return EpParams::zeros(num_tasks, dim);
  return AepParams::zeros(num_tasks, dim);
}

std::size_t num_tasks(const ModelParams& model) {
  return std::visit(Overloaded{[](const EpParams& p) { return p.vt.size(); },
                               [](const AepParams& p) { return p.W.rows(); }},
                    model);
}

std::size_t input_dim(const ModelParams& model) {
  return std::visit(Overloaded{[](const EpParams& p) { return p.v0.size(); },
                               [](const AepParams& p) { return p.W.cols(); }},
                    model);
}

void check_shape(const ModelParams& model, const MultiTaskDataset& data) {
  if (num_tasks(model) != data.num_tasks() || input_dim(model) != data.dim())
    throw ShapeMismatch("model is " + std::to_string(num_tasks(model)) + " tasks x " +
                        std::to_string(input_dim(model)) + " dims, data is " + std::to_string(data.num_tasks()) +
                        " x " + std::to_string(data.dim()));
}

Vector task_weights(const ModelParams& model, std::size_t task) {
  if (task >= num_tasks(model)) throw InvalidTask("unknown task " + std::to_string(task));
  return std::visit(Overloaded{[&](const EpParams& p) {
                                 Vector w = p.v0;
                                 for (std::size_t j = 0; j < w.size(); ++j) w[j] += p.vt[task][j];
                                 return w;
                               },
                               [&](const AepParams& p) {
                                 auto r = p.W.row(task);
                                 return Vector(r.begin(), r.end());
                               }},
                    model);
}

double predict(const ModelParams& model, std::size_t task, std::span<const double> x) {
  if (x.size() != input_dim(model)) throw ShapeMismatch("input dimension differs from model dimension");
  return dot(task_weights(model, task), x);
}

RiskVector risk_vector(const ModelParams& model, const MultiTaskDataset& data, const LossKind& kind) {
  check_shape(model, data);
  Vector r(data.num_tasks());
  for (std::size_t t = 0; t < data.num_tasks(); ++t) {
    const Vector w = task_weights(model, t);
    r[t] = empirical_risk(data.task(t), [&](std::span<const double> x) { return dot(w, x); }, kind);
  }
  return RiskVector(std::move(r));
}

double regularizer_value(const ModelParams& model, const ModelConfig& config) {
  if (is_constrained(config)) throw InvalidArgument("regularizer_value needs a regularized config");
  if (const auto* ep = std::get_if<EpParams>(&model)) {
    const auto* cfg = std::get_if<EpConfig>(&config);
    if (!cfg) throw InvalidArgument("EP parameters with an AEP config");
    const auto& reg = std::get<EpRegularized>(cfg->mode);
    double sum = 0.0;
    for (const Vector& v : ep->vt) sum += dot(v, v);
    return reg.lambda0 * dot(ep->v0, ep->v0) + reg.lambda1 / static_cast<double>(ep->vt.size()) * sum;
  }
  const auto* cfg = std::get_if<AepConfig>(&config);
  if (!cfg) throw InvalidArgument("AEP parameters with an EP config");
  return std::get<AepRegularized>(cfg->mode).lambda * trace_norm(std::get<AepParams>(model).W);
}

ModelParams project_feasible(const ModelParams& model, const ModelConfig& config) {
  if (!is_constrained(config)) throw InvalidArgument("project_feasible needs a constrained config");
  if (const auto* ep = std::get_if<EpParams>(&model)) {
    const auto* cfg = std::get_if<EpConfig>(&config);
    if (!cfg) throw InvalidArgument("EP parameters with an AEP config");
    const auto& c = std::get<EpConstrained>(cfg->mode);
    EpParams out;
    out.v0 = project_l2_ball(ep->v0, c.tau0);
    out.vt.reserve(ep->vt.size());
    for (const Vector& v : ep->vt) out.vt.push_back(project_l2_ball(v, c.tau1));
    return out;
  }
  const auto* cfg = std::get_if<AepConfig>(&config);
  if (!cfg) throw InvalidArgument("AEP parameters with an EP config");
  return AepParams{project_trace_ball(std::get<AepParams>(model).W, std::get<AepConstrained>(cfg->mode).radius)};
}

bool is_feasible(const ModelParams& model, const ModelConfig& config, double tol) {
  if (!is_constrained(config)) return true;
  if (const auto* ep = std::get_if<EpParams>(&model)) {
    const auto& c = std::get<EpConstrained>(std::get<EpConfig>(config).mode);
    if (norm(ep->v0) > c.tau0 + tol) return false;
    for (const Vector& v : ep->vt)
      if (norm(v) > c.tau1 + tol) return false;
    return true;
  }
  const auto& c = std::get<AepConstrained>(std::get<AepConfig>(config).mode);
  return trace_norm(std::get<AepParams>(model).W) <= c.radius + tol;
}

TaskGradient risk_gradient_contribution(const ModelParams& model, const MultiTaskDataset& data, const LossKind& kind,
                                        std::size_t task) {
  check_shape(model, data);
  const TaskSample& sample = data.task(task);
  const Vector w = task_weights(model, task);
  TaskGradient out{task, Vector(w.size(), 0.0)};
  for (const LabeledExample& ex : sample.examples) {
    const double d = loss_subderivative(kind, dot(w, ex.x), ex.y);
    if (d == 0.0) continue;
    for (std::size_t j = 0; j < w.size(); ++j) out.g[j] += d * ex.x[j];
  }
  const double inv_m = 1.0 / static_cast<double>(sample.size());
  for (double& g : out.g) g *= inv_m;
  return out;
}

ModelParams embed_direction(const ModelParams& like, const TaskGradient& grad) {
  const std::size_t T = num_tasks(like);
  const std::size_t d = input_dim(like);
  if (grad.task_id >= T || grad.g.size() != d) throw ShapeMismatch("gradient does not fit the model shape");
  if (std::holds_alternative<EpParams>(like)) {
    EpParams dir = EpParams::zeros(T, d);
    dir.v0 = grad.g;
    dir.vt[grad.task_id] = grad.g;
    return dir;
  }
  AepParams dir = AepParams::zeros(T, d);
  std::copy(grad.g.begin(), grad.g.end(), dir.W.row(grad.task_id).begin());
  return dir;
}

Vector flatten(const ModelParams& model) {
  return std::visit(Overloaded{[](const EpParams& p) {
                                 Vector flat(p.v0);
                                 for (const Vector& v : p.vt) flat.insert(flat.end(), v.begin(), v.end());
                                 return flat;
                               },
                               [](const AepParams& p) { return Vector(p.W.data().begin(), p.W.data().end()); }},
                    model);
}

ModelParams unflatten(const ModelParams& like, std::span<const double> flat) {
  const std::size_t T = num_tasks(like);
  const std::size_t d = input_dim(like);
  if (std::holds_alternative<EpParams>(like)) {
    if (flat.size() != (T + 1) * d) throw ShapeMismatch("flat EP vector has the wrong length");
    EpParams p;
    p.v0.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(d));
    p.vt.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
      auto first = flat.begin() + static_cast<std::ptrdiff_t>((t + 1) * d);
      p.vt[t].assign(first, first + static_cast<std::ptrdiff_t>(d));
    }
    return p;
  }
  if (flat.size() != T * d) throw ShapeMismatch("flat AEP vector has the wrong length");
  return AepParams{Matrix(T, d, Vector(flat.begin(), flat.end()))};
}

}  // namespace mmtl
