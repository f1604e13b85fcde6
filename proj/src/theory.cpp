#include "mmtl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace mmtl {

namespace {

enum Stream : std::uint64_t { kTrainTask = 11, kFreshTask = 12, kHoldout = 13, kRademacher = 14 };

Vector unit_sphere(KeyedRng& rng, std::size_t d) {
  Vector v(d);
  double n = 0.0;
  while (n == 0.0) {
    for (double& x : v) x = rng.normal();
    n = norm(v);
  }
  for (double& x : v) x /= n;
  return v;
}

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
}

double risk_at(std::span<const double> z, std::span<const double> y, double a, const LossKind& kind) {
  Vector losses(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) losses[i] = loss(kind, a * z[i], y[i]);
  return compensated_sum(losses) / static_cast<double>(z.size());
}

ErmResult erm_projected(std::span<const double> z, std::span<const double> y, double bound, const LossKind& kind) {
  if (kind.variant == LossVariant::squared) {
    double zz = 0.0, zy = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      zz += z[i] * z[i];
      zy += z[i] * y[i];
    }
    const double a = zz > 0.0 ? std::clamp(zy / zz, -bound, bound) : 0.0;
    return {a, risk_at(z, y, a, kind)};
  }
  // Hinge risk is piecewise linear in a; its minimum sits at an endpoint or a kink.
  Vector cands{-bound, bound, 0.0};
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] == 0.0) continue;
    const double k = 1.0 / (y[i] * z[i]);
    if (std::abs(k) <= bound) cands.push_back(k);
  }
  ErmResult best{0.0, risk_at(z, y, 0.0, kind)};
  for (double a : cands) {
    const double r = risk_at(z, y, a, kind);
    if (r < best.risk) best = {a, r};
  }
  return best;
}

void project_sample(std::span<const LabeledExample> sample, std::span<const double> u, Vector& z, Vector& y) {
  z.resize(sample.size());
  y.resize(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    z[i] = dot(u, sample[i].x);
    y[i] = sample[i].y;
  }
}

Vector ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  Vector r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double lemma1_bound(std::size_t num_representations, double delta, std::size_t num_tasks) {
  check_delta(delta);
  if (num_representations < 1 || num_tasks < 1) throw InvalidArgument("C and T must be at least 1");
  return std::log(2.0 * static_cast<double>(num_representations) / delta) / static_cast<double>(num_tasks);
}

double theorem1_rhs(std::size_t num_representations, double delta, std::size_t num_tasks, double loss_bound) {
  if (!(loss_bound > 0.0)) throw InvalidArgument("loss bound must be positive");
  const double T = static_cast<double>(num_tasks);
  return lemma1_bound(num_representations, delta, num_tasks) + (std::log(std::ceil(loss_bound)) + std::log(T + 1.0)) / T;
}

double markov_rhs(double mean_empirical_risk, double epsilon, double gamma) {
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
  return (mean_empirical_risk + epsilon) / gamma;
}

double theorem1_threshold(double gamma, std::size_t num_tasks, double lipschitz, double rademacher, double delta,
                          std::size_t m) {
  check_delta(delta);
  return gamma + 1.0 / static_cast<double>(num_tasks) + 2.0 * lipschitz * rademacher +
         std::sqrt(8.0 * std::log(4.0 / delta) / static_cast<double>(m));
}

RademacherEstimate estimate_rademacher(const std::vector<Vector>& sample, double hypothesis_norm_bound,
                                       std::size_t n_draws, std::uint64_t seed) {
  if (n_draws < 1) throw InvalidArgument("n_draws must be at least 1");
  if (sample.empty()) throw InvalidArgument("empty sample");
  const std::size_t d = sample.front().size();
  const double scale = hypothesis_norm_bound / static_cast<double>(sample.size());
  KeyedRng rng(seed, {kRademacher});
  Vector values(n_draws);
  Vector s(d);
  for (std::size_t k = 0; k < n_draws; ++k) {
    std::fill(s.begin(), s.end(), 0.0);
    for (const Vector& x : sample) {
      const double sigma = rng.sign();
      for (std::size_t j = 0; j < d; ++j) s[j] += sigma * x[j];
    }
    values[k] = scale * norm(s);
  }
  const double mean = compensated_sum(values) / static_cast<double>(n_draws);
  double sd = 0.0;
  if (n_draws > 1) {
    Vector sq(n_draws);
    for (std::size_t k = 0; k < n_draws; ++k) sq[k] = (values[k] - mean) * (values[k] - mean);
    sd = std::sqrt(compensated_sum(sq) / static_cast<double>(n_draws - 1));
  }
  return {mean, sd / std::sqrt(static_cast<double>(n_draws)), n_draws};
}

std::vector<LabeledExample> FiniteEnvironment::draw_sample(const TaskMeasure& task, KeyedRng& rng,
                                                           std::size_t n) const {
  std::vector<LabeledExample> out(n);
  for (auto& ex : out) {
    ex.x = unit_sphere(rng, task.theta.size());
    const double signal = dot(task.theta, ex.x) + task.noise * (2.0 * rng.uniform() - 1.0);
    ex.y = loss.variant == LossVariant::hinge ? (signal >= 0.0 ? 1.0 : -1.0) : signal;
  }
  return out;
}

void FiniteEnvironment::validate() const {
  if (representations.empty()) throw InvalidArgument("environment needs at least one representation");
  for (const Vector& u : representations)
    if (u.size() != dim() || std::abs(norm(u) - 1.0) > 1e-9)
      throw InvalidArgument("representations must be unit vectors of one dimension");
  if (!task_prior) throw InvalidArgument("environment has no task prior");
  if (!(hypothesis_bound > 0.0) || m < 1) throw InvalidArgument("hypothesis bound and m must be positive");
  if (!loss.clip_bound || !(*loss.clip_bound > 0.0)) throw InvalidArgument("environment loss needs a clip bound B");
}

FiniteEnvironment default_environment(LossVariant variant) {
  constexpr std::size_t d = 5;
  constexpr double spread = 0.15;
  constexpr double noise = 0.2;
  constexpr double weight_a = 0.9;
  const double h = 1.0 / std::sqrt(2.0);

  FiniteEnvironment env;
  env.representations = {{h, h, 0, 0, 0}, {1, 0, 0, 0, 0}, {0, 1, 0, 0, 0}, {0, 0, 1, 0, 0}};
  env.hypothesis_bound = 2.0;
  env.m = 20;
  env.task_prior = [=](KeyedRng& rng) {
    TaskMeasure task;
    task.theta.assign(d, 0.0);
    task.theta[rng.uniform() < weight_a ? 0 : 1] = 1.0;
    const Vector dir = unit_sphere(rng, d);
    const double radius = spread * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    for (std::size_t j = 0; j < d; ++j) task.theta[j] += radius * dir[j];
    task.noise = noise;
    return task;
  };
  if (variant == LossVariant::squared) {
    // |a <u,x> - y| <= bound + |theta| + noise on the unit sphere.
    const double reach = env.hypothesis_bound + 1.0 + spread + noise;
    env.loss = LossKind::squared().clipped(reach * reach);
    env.lipschitz = 2.0 * reach;
  } else {
    env.loss = LossKind::hinge().clipped(1.0 + env.hypothesis_bound);
    env.lipschitz = 1.0;
  }
  return env;
}

ErmResult erm_1d(std::span<const LabeledExample> sample, std::span<const double> direction, double bound,
                 const LossKind& kind) {
  if (sample.empty()) throw InvalidArgument("empty sample");
  Vector z, y;
  project_sample(sample, direction, z, y);
  return erm_projected(z, y, bound, kind);
}

BoundReport verify_tail_bound(const FiniteEnvironment& env, std::size_t num_tasks, double gamma, double delta,
                              std::size_t meta_reps, std::uint64_t seed, const TailBoundOptions& options) {
  env.validate();
  check_delta(delta);
  if (num_tasks < 1 || meta_reps < 1) throw InvalidArgument("T and meta_reps must be at least 1");
  const std::size_t C = env.num_representations();

  BoundReport rep;
  rep.gamma = gamma;
  rep.delta = delta;
  rep.num_tasks = num_tasks;
  rep.meta_reps = meta_reps;
  rep.loss_bound = *env.loss.clip_bound;
  rep.lipschitz = env.lipschitz;
  rep.lemma1_bound = lemma1_bound(C, delta, num_tasks);
  rep.theorem1_rhs = theorem1_rhs(C, delta, num_tasks, rep.loss_bound);
  rep.selections.assign(C, 0);
  {
    KeyedRng rng(seed, {kTrainTask, 0, 0});
    const TaskMeasure task = env.task_prior(rng);
    std::vector<Vector> xs;
    for (auto& ex : env.draw_sample(task, rng, env.m)) xs.push_back(std::move(ex.x));
    rep.rademacher = estimate_rademacher(xs, env.hypothesis_bound, options.rademacher_draws, seed);
  }
  rep.theorem1_threshold = theorem1_threshold(gamma, num_tasks, env.lipschitz, rep.rademacher.value, delta, env.m);

  Vector z, y;
  Vector tails, event_shares, markov;
  std::size_t violations = 0, theorem_violations = 0;
  for (std::size_t r = 0; r < meta_reps; ++r) {
    Vector worst(C, 0.0);
    Vector mean_risk(C, 0.0);
    for (std::size_t t = 0; t < num_tasks; ++t) {
      KeyedRng rng(seed, {kTrainTask, r, t});
      const auto sample = env.draw_sample(env.task_prior(rng), rng, env.m);
      for (std::size_t c = 0; c < C; ++c) {
        project_sample(sample, env.representations[c], z, y);
        const double risk = erm_projected(z, y, env.hypothesis_bound, env.loss).risk;
        worst[c] = std::max(worst[c], risk);
        mean_risk[c] += risk / static_cast<double>(num_tasks);
      }
    }

    std::vector<std::size_t> exceed(C, 0);
    for (std::size_t j = 0; j < options.fresh_tasks; ++j) {
      KeyedRng rng(seed, {kFreshTask, r, j});
      const auto sample = env.draw_sample(env.task_prior(rng), rng, env.m);
      for (std::size_t c = 0; c < C; ++c) {
        if (worst[c] > gamma) continue;
        project_sample(sample, env.representations[c], z, y);
        if (erm_projected(z, y, env.hypothesis_bound, env.loss).risk > gamma) ++exceed[c];
      }
    }

    std::size_t chosen = C;
    for (std::size_t c = 0; c < C; ++c)
      if (worst[c] <= gamma && (chosen == C || exceed[c] > exceed[chosen])) chosen = c;
    if (chosen == C) {
      ++rep.skipped;
      continue;
    }
    ++rep.selections[chosen];
    const double tail = static_cast<double>(exceed[chosen]) / static_cast<double>(options.fresh_tasks);
    tails.push_back(tail);
    if (tail > rep.lemma1_bound) ++violations;
    markov.push_back(markov_rhs(mean_risk[chosen], 0.0, gamma));

    const auto& u = env.representations[chosen];
    std::size_t events = 0;
    for (std::size_t j = 0; j < options.theorem_tasks; ++j) {
      KeyedRng rng(seed, {kFreshTask, r, j});
      const TaskMeasure task = env.task_prior(rng);
      const auto sample = env.draw_sample(task, rng, env.m);
      const double a = erm_1d(sample, u, env.hypothesis_bound, env.loss).coef;
      KeyedRng hold(seed, {kHoldout, r, j});
      const auto big = env.draw_sample(task, hold, options.holdout_points);
      project_sample(big, u, z, y);
      if (risk_at(z, y, a, env.loss) > rep.theorem1_threshold) ++events;
    }
    const double share = static_cast<double>(events) / static_cast<double>(std::max<std::size_t>(1, options.theorem_tasks));
    event_shares.push_back(share);
    if (share > rep.theorem1_rhs) ++theorem_violations;
  }

  const std::size_t used = tails.size();
  rep.skip_rate = static_cast<double>(rep.skipped) / static_cast<double>(meta_reps);
  if (used == 0)
    throw InconclusiveError("no meta-replicate had a representation with maximum empirical risk <= gamma");
  const double n = static_cast<double>(used);
  rep.empirical_tail_freq = static_cast<double>(violations) / n;
  const double p = delta / 2.0;
  rep.allowed_tail_freq = p + 3.0 * std::sqrt(p * (1.0 - p) / n);
  rep.mean_tail_estimate = compensated_sum(tails) / n;
  rep.theorem1_event_freq = compensated_sum(event_shares) / n;
  rep.theorem1_violation_freq = static_cast<double>(theorem_violations) / n;
  rep.markov_rhs = compensated_sum(markov) / n;
  return rep;
}

std::string BoundReport::to_json() const {
  std::string sel;
  for (std::size_t c = 0; c < selections.size(); ++c) sel += (c ? "," : "") + std::to_string(selections[c]);
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "{\"gamma\":%.17g,\"delta\":%.17g,\"T\":%zu,\"meta_reps\":%zu,\"skipped\":%zu,\"skip_rate\":%.17g,"
                "\"empirical_tail_freq\":%.17g,\"allowed_tail_freq\":%.17g,\"mean_tail_estimate\":%.17g,"
                "\"lemma1_bound\":%.17g,\"theorem1_threshold\":%.17g,\"theorem1_rhs\":%.17g,"
                "\"theorem1_event_freq\":%.17g,\"theorem1_violation_freq\":%.17g,\"markov_rhs\":%.17g,"
                "\"rademacher\":%.17g,\"rademacher_std_error\":%.17g,\"loss_bound\":%.17g,\"lipschitz\":%.17g,"
                "\"selections\":[%s]}",
                gamma, delta, num_tasks, meta_reps, skipped, skip_rate, empirical_tail_freq, allowed_tail_freq,
                mean_tail_estimate, lemma1_bound, theorem1_threshold, theorem1_rhs, theorem1_event_freq,
                theorem1_violation_freq, markov_rhs, rademacher.value, rademacher.std_error, loss_bound, lipschitz,
                sel.c_str());
  return buf;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("spearman needs two equal-length series of >= 2");
  const Vector rx = ranks(x), ry = ranks(y);
  const double mx = compensated_sum(rx) / static_cast<double>(rx.size());
  const double my = compensated_sum(ry) / static_cast<double>(ry.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::vector<BoundComparison> compare_bounds(std::size_t num_representations, double delta, double loss_bound,
                                            double mean_empirical_risk, std::span<const std::size_t> task_grid,
                                            std::span<const double> gamma_grid) {
  std::vector<BoundComparison> out;
  for (std::size_t T : task_grid)
    for (double g : gamma_grid)
      out.push_back({T, g, markov_rhs(mean_empirical_risk, 0.0, g),
                     theorem1_rhs(num_representations, delta, T, loss_bound)});
  return out;
}

}  // namespace mmtl
