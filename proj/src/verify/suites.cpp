#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "mmtl/theory.hpp"
#include "mmtl/verify.hpp"

namespace mmtl::verify {

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

// Tracks the worst observed error for a property against its tolerance.
struct Worst {
  double value = 0.0;
  std::size_t count = 0;
  std::size_t failures = 0;

  void add(double err, double tol) {
    ++count;
    value = std::max(value, err);
    if (!(err <= tol)) ++failures;
  }
  Check check(std::string name, double tol) const {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%zu cases, worst %.3g (tol %.1g), %zu failures", count, value, tol, failures);
    return {std::move(name), failures == 0, buf};
  }
};

Vector random_vector(KeyedRng& rng, std::size_t n, double scale) {
  Vector v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

Matrix random_matrix(KeyedRng& rng, std::size_t rows, std::size_t cols, double scale) {
  return Matrix(rows, cols, random_vector(rng, rows * cols, scale));
}

double distance(std::span<const double> a, std::span<const double> b) {
  Vector d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return norm(d);
}

Composer random_composer(KeyedRng& rng, std::size_t T, std::size_t which) {
  switch (which % 4) {
    case 0: {
      Vector w(T);
      double total = 0.0;
      for (double& x : w) total += (x = rng.uniform(0.01, 1.0));
      for (double& x : w) x /= total;
      double sum = 0.0;
      for (std::size_t i = 0; i + 1 < T; ++i) sum += w[i];
      w.back() = 1.0 - sum;
      if (w.back() < 0.0) return Composer::uniform_l1(T);
      return Composer::weighted_l1(std::move(w));
    }
    case 1: return Composer::l2();
    case 2: return Composer::max();
    default: return Composer::alpha_minimax(rng.uniform(0.1, 2.0 * static_cast<double>(T)));
  }
}

// Risks on a coarse lattice so ties and zeros (the kinks) occur often.
Vector kinky_risks(KeyedRng& rng, std::size_t T) {
  Vector r(T);
  for (double& x : r) x = rng.uniform() < 0.5 ? static_cast<double>(rng.below(5)) * 0.5 : rng.uniform(0.0, 3.0);
  return r;
}

}  // namespace

bool SuiteResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

SolveConfig oracle_solve_config() {
  SolveConfig cfg;
  cfg.max_iters = 200000;
  cfg.patience = 200000;
  cfg.tol = 1e-12;
  cfg.step0 = 1.0;
  cfg.step_schedule = StepSchedule::inv_sqrt;
  return cfg;
}

MultiTaskDataset random_toy_instance(KeyedRng& rng, std::size_t num_tasks, std::size_t dim, std::size_t m) {
  std::vector<TaskSample> tasks(num_tasks);
  for (std::size_t t = 0; t < num_tasks; ++t) {
    tasks[t].task_id = t;
    const Vector theta = random_vector(rng, dim, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
      LabeledExample ex;
      ex.x = random_vector(rng, dim, 1.0);
      ex.y = dot(theta, ex.x) + 0.3 * rng.normal();
      tasks[t].examples.push_back(std::move(ex));
    }
  }
  return MultiTaskDataset(std::move(tasks), ProblemKind::regression);
}

SuiteResult composition_suite(const SuiteOptions& opt) {
  const auto start = Clock::now();
  SuiteResult res{"composition", {}, 0.0};
  KeyedRng rng(opt.seed, {101});

  Worst value_err, b_err, compose_err, l1_scaling;
  std::size_t nonzero_b = 0;
  std::size_t max_mismatch = 0;
  for (std::size_t k = 0; k < opt.instances; ++k) {
    const std::size_t T = 1 + rng.below(20);
    Vector r(T);
    for (double& x : r) x = static_cast<double>(rng.below(20001)) * 1e-4;
    const double alpha = rng.uniform(0.1, 2.0 * static_cast<double>(T));
    const RiskVector rv(r);
    const auto exact = inner_minimize_b(alpha, rv);
    const auto grid = grid_inner_minimize(alpha, r);
    value_err.add(std::abs(exact.value - grid.value), 1e-6);
    b_err.add(std::abs(exact.b_star - grid.b_star), 1e-6);
    compose_err.add(std::abs(compose(Composer::alpha_minimax(alpha), rv) - grid.value), 1e-6);

    // alpha >= T: b* is exactly zero and the value is (1/alpha) sum r.
    const double big = rng.uniform(static_cast<double>(T), 2.0 * static_cast<double>(T));
    const auto at_big = inner_minimize_b(big, rv);
    if (at_big.b_star != 0.0) ++nonzero_b;
    const double scaled = compose(Composer::uniform_l1(T), rv) * static_cast<double>(T) / big;
    l1_scaling.add(std::abs(at_big.value - scaled), 1e-12 * std::max(1.0, scaled));

    // alpha <= 0.3 on integer-gap vectors reproduces the max exactly.
    Vector ints(T);
    const double base = rng.uniform(0.0, 2.0);
    for (double& x : ints) x = base + static_cast<double>(rng.below(10));
    const RiskVector iv(ints);
    if (compose(Composer::alpha_minimax(rng.uniform(0.01, 0.3)), iv) != compose(Composer::max(), iv)) ++max_mismatch;
  }
  res.checks.push_back(value_err.check("inner value vs 1e-4 grid scan", 1e-6));
  res.checks.push_back(b_err.check("b* vs 1e-4 grid scan", 1e-6));
  res.checks.push_back(compose_err.check("compose(alpha_minimax) vs grid scan", 1e-6));
  res.checks.push_back({"alpha >= T gives b* = 0 exactly", nonzero_b == 0,
                        std::to_string(nonzero_b) + " nonzero of " + std::to_string(opt.instances)});
  res.checks.push_back(l1_scaling.check("alpha >= T value equals (T/alpha) * mean", 1e-12));
  res.checks.push_back({"alpha <= 0.3 equals max exactly on integer-gap vectors", max_mismatch == 0,
                        std::to_string(max_mismatch) + " mismatches of " + std::to_string(opt.instances)});
  res.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return res;
}

SuiteResult projection_suite(const SuiteOptions& opt) {
  const auto start = Clock::now();
  SuiteResult res{"projections", {}, 0.0};
  KeyedRng rng(opt.seed, {102});

  Worst ball_err, ball_cert, simplex_err, simplex_cert, trace_err, trace_cert, svt_opt;
  Worst idem, expand;
  for (std::size_t k = 0; k < opt.instances; ++k) {
    const std::size_t n = 1 + rng.below(36);
    const double scale = rng.uniform(0.1, 3.0);
    const double radius = rng.uniform(0.1, 3.0);

    const Vector v = random_vector(rng, n, scale);
    const Vector pb = project_l2_ball(v, radius);
    const double nv = norm(v);
    Vector expect = v;
    if (nv > radius)
      for (double& x : expect) x *= radius / nv;
    ball_err.add(distance(pb, expect), 1e-6);
    ball_cert.add(std::sqrt(std::max(0.0, ball_certificate(v, pb, radius))) / std::max(1.0, norm(v)), 1e-6);

    const Vector ps = project_simplex_scaled(v, radius);
    simplex_err.add(distance(ps, simplex_projection_bisect(v, radius)), 1e-6);
    simplex_cert.add(std::sqrt(std::max(0.0, simplex_certificate(v, ps, radius))) / std::max(1.0, norm(v)), 1e-6);

    const std::size_t rows = 1 + rng.below(6), cols = 1 + rng.below(6);
    const Matrix w = random_matrix(rng, rows, cols, scale);
    const Matrix pt = project_trace_ball(w, radius);
    trace_err.add(max_abs_diff(pt, trace_ball_projection_eigen(w, radius)), 1e-6);
    // The certificate bounds the squared distance, so rounding in the gap
    // surfaces at sqrt(eps) times the input scale; compare relative to it.
    trace_cert.add(std::sqrt(std::max(0.0, trace_ball_certificate(w, pt, radius))) / std::max(1.0, frobenius_norm(w)),
                   1e-6);
    const double lambda = rng.uniform(0.0, 2.0 * scale);
    svt_opt.add(svt_optimality_violation(w, svt(w, lambda), lambda), 1e-6);

    // Idempotence and non-expansiveness on a second random point.
    const Vector u = random_vector(rng, n, scale);
    const Matrix w2 = random_matrix(rng, rows, cols, scale);
    idem.add(distance(project_l2_ball(pb, radius), pb), 1e-10);
    idem.add(distance(project_simplex_scaled(ps, radius), ps), 1e-10);
    idem.add(max_abs_diff(project_trace_ball(pt, radius), pt), 1e-10);
    expand.add(distance(project_l2_ball(v, radius), project_l2_ball(u, radius)) - distance(v, u), 1e-10);
    expand.add(distance(project_simplex_scaled(v, radius), project_simplex_scaled(u, radius)) - distance(v, u), 1e-10);
    expand.add(frobenius_norm(project_trace_ball(w, radius) - project_trace_ball(w2, radius)) -
                   frobenius_norm(w - w2),
               1e-10);
  }
  res.checks.push_back(ball_err.check("l2 ball vs closed form", 1e-6));
  res.checks.push_back(ball_cert.check("l2 ball certified distance (relative)", 1e-6));
  res.checks.push_back(simplex_err.check("scaled simplex vs bisection oracle", 1e-6));
  res.checks.push_back(simplex_cert.check("scaled simplex certified distance (relative)", 1e-6));
  res.checks.push_back(trace_err.check("trace ball vs eigen oracle (<= 6x6)", 1e-6));
  res.checks.push_back(trace_cert.check("trace ball certified distance (relative)", 1e-6));
  res.checks.push_back(svt_opt.check("svt optimality conditions", 1e-6));
  res.checks.push_back(idem.check("idempotence", 1e-10));
  res.checks.push_back(expand.check("non-expansiveness", 1e-10));
  res.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return res;
}

SuiteResult solver_oracle_suite(const SuiteOptions& opt) {
  const auto start = Clock::now();
  SuiteResult res{"solver_oracle", {}, 0.0};
  KeyedRng rng(opt.seed, {103});
  const SolveConfig cfg = oracle_solve_config();

  const char* names[] = {"l1", "l2", "max", "alpha_minimax"};
  Worst gap[4];
  Worst below;
  for (std::size_t k = 0; k < opt.solver_instances; ++k) {
    const std::size_t T = 1 + rng.below(3);
    const std::size_t d = 1 + rng.below(2);
    const std::size_t m = 3 + rng.below(6);
    const MultiTaskDataset data = random_toy_instance(rng, T, d, m);
    const double tau0 = rng.uniform(0.2, 1.5);
    const double tau1 = rng.uniform(0.1, 1.0);
    const ModelConfig mc = EpConfig{EpConstrained{tau0, tau1}};
    const Composer composers[] = {Composer::uniform_l1(T), Composer::l2(), Composer::max(),
                                  Composer::alpha_minimax(default_alpha(T, 0.5))};
    for (int c = 0; c < 4; ++c) {
      const double oracle = ep_constrained_grid_minimum(data, tau0, tau1, composers[c]);
      const SolveResult sr = solve(data, mc, composers[c], LossKind::squared(), cfg);
      const double got = objective_value(sr.params, data, mc, composers[c], LossKind::squared());
      gap[c].add(std::abs(got - oracle), 1e-3);
      below.add(oracle - got, 1e-6);
    }
  }
  for (int c = 0; c < 4; ++c)
    res.checks.push_back(gap[c].check(std::string("EP constrained ") + names[c] + " vs grid minimum", 1e-3));
  res.checks.push_back(below.check("solver never beats the grid minimum", 1e-6));
  res.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return res;
}

SuiteResult subgradient_suite(const SuiteOptions& opt) {
  const auto start = Clock::now();
  SuiteResult res{"subgradients", {}, 0.0};
  KeyedRng rng(opt.seed, {104});
  const std::size_t per_kind = std::max<std::size_t>(1, (opt.instances * 10 + 2) / 3);

  // Composer: phi(r') >= phi(r) + <g, r' - r>.
  Worst comp;
  for (std::size_t k = 0; k < per_kind; ++k) {
    const std::size_t T = 1 + rng.below(12);
    const Composer c = random_composer(rng, T, k);
    const Vector r = kinky_risks(rng, T), r2 = kinky_risks(rng, T);
    const RiskVector rv(r), rv2(r2);
    const Vector g = compose_subgradient(c, rv);
    const double lhs = compose(c, rv2);
    Vector diff(T);
    for (std::size_t t = 0; t < T; ++t) diff[t] = r2[t] - r[t];
    const double rhs = compose(c, rv) + dot(g, diff);
    comp.add((rhs - lhs) / std::max(1.0, std::abs(lhs)), 1e-10);
  }

  // Losses in the prediction.
  Worst losses;
  for (std::size_t k = 0; k < per_kind; ++k) {
    const bool hinge = k % 2 == 1;
    const LossKind kind = hinge ? LossKind::hinge() : LossKind::squared();
    const double y = hinge ? rng.sign() : rng.normal();
    const double p = rng.uniform() < 0.3 ? y : rng.uniform(-3.0, 3.0);  // hits the hinge kink at p = y
    const double q = rng.uniform(-3.0, 3.0);
    const double rhs = loss(kind, p, y) + loss_subderivative(kind, p, y) * (q - p);
    const double lhs = loss(kind, q, y);
    losses.add((rhs - lhs) / std::max(1.0, std::abs(lhs)), 1e-10);
  }

  // Full composed objective in parameter space.
  Worst full;
  for (std::size_t k = 0; k < per_kind; ++k) {
    const std::size_t T = 1 + rng.below(4), d = 1 + rng.below(3);
    const bool hinge = k % 2 == 1;
    std::vector<TaskSample> tasks(T);
    for (std::size_t t = 0; t < T; ++t) {
      tasks[t].task_id = t;
      for (std::size_t i = 0; i < 4; ++i) {
        LabeledExample ex{random_vector(rng, d, 1.0), 0.0};
        ex.y = hinge ? rng.sign() : rng.normal();
        tasks[t].examples.push_back(std::move(ex));
      }
    }
    const MultiTaskDataset data(std::move(tasks), hinge ? ProblemKind::classification : ProblemKind::regression);
    const LossKind kind = hinge ? LossKind::hinge() : LossKind::squared();
    const Composer c = random_composer(rng, T, k);
    const bool ep = k % 3 != 0;
    const ModelParams like = ep ? ModelParams(EpParams::zeros(T, d)) : ModelParams(AepParams::zeros(T, d));
    const std::size_t n = flatten(like).size();
    const ModelParams a = unflatten(like, random_vector(rng, n, 1.0));
    const ModelParams b = unflatten(like, random_vector(rng, n, 1.0));

    const RiskVector ra = risk_vector(a, data, kind);
    const Vector w = compose_subgradient(c, ra);
    Vector g(n, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      const Vector dir = flatten(embed_direction(like, risk_gradient_contribution(a, data, kind, t)));
      for (std::size_t i = 0; i < n; ++i) g[i] += w[t] * dir[i];
    }
    const Vector fa = flatten(a), fb = flatten(b);
    Vector diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = fb[i] - fa[i];
    const double lhs = compose(c, risk_vector(b, data, kind));
    const double rhs = compose(c, ra) + dot(g, diff);
    full.add((rhs - lhs) / std::max(1.0, std::abs(lhs)), 1e-10);
  }

  res.checks.push_back(comp.check("composer subgradient inequality", 1e-10));
  res.checks.push_back(losses.check("loss subderivative inequality", 1e-10));
  res.checks.push_back(full.check("composed objective subgradient inequality", 1e-10));
  const std::size_t total = comp.count + losses.count + full.count;
  const std::size_t bad = comp.failures + losses.failures + full.failures;
  res.checks.push_back({"total first-order checks", bad == 0,
                        std::to_string(total) + " checks, " + std::to_string(bad) + " violations"});
  res.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return res;
}

SuiteResult theory_suite(const SuiteOptions& opt) {
  const auto start = Clock::now();
  SuiteResult res{"theory", {}, 0.0};

  const double l1a = lemma1_bound(1, 0.2, 50), l1b = lemma1_bound(4, 0.1, 100), th = theorem1_rhs(4, 0.1, 100, 1.0);
  const bool arithmetic = std::abs(l1a - std::log(10.0) / 50.0) < 1e-9 && std::abs(l1b - std::log(80.0) / 100.0) < 1e-9 &&
                          std::abs(th - (std::log(80.0) + std::log(101.0)) / 100.0) < 1e-9;
  res.checks.push_back({"bound arithmetic", arithmetic, fmt("lemma1 %.6f %.6f theorem1 %.6f", l1a, l1b, th)});

  const FiniteEnvironment env = default_environment();
  const std::size_t grid[] = {25, 50, 100};
  Vector ts, tails;
  for (std::size_t T : grid) {
    const BoundReport r = verify_tail_bound(env, T, 0.2, 0.1, opt.theory_meta_reps, opt.seed);
    char buf[200];
    std::snprintf(buf, sizeof buf, "violation freq %.4f <= %.4f, mean tail %.5f, lemma bound %.4f, skipped %zu",
                  r.empirical_tail_freq, r.allowed_tail_freq, r.mean_tail_estimate, r.lemma1_bound, r.skipped);
    res.checks.push_back({"lemma tail bound at T=" + std::to_string(T), r.lemma_corroborated(), buf});
    ts.push_back(static_cast<double>(T));
    tails.push_back(r.mean_tail_estimate);
  }
  const double rho = spearman(ts, tails);
  res.checks.push_back({"tail estimate decreases with T", rho < 0.0, fmt("spearman %.3f", rho)});
  res.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return res;
}

std::vector<std::string> suite_names() { return {"composition", "projections", "solver_oracle", "subgradients", "theory"}; }

SuiteResult run_suite(const std::string& name, const SuiteOptions& opt) {
  if (name == "composition") return composition_suite(opt);
  if (name == "projections") return projection_suite(opt);
  if (name == "solver_oracle") return solver_oracle_suite(opt);
  if (name == "subgradients") return subgradient_suite(opt);
  if (name == "theory") return theory_suite(opt);
  throw InvalidArgument("unknown suite '" + name + "'");
}

}  // namespace mmtl::verify
