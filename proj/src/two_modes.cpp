#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mmtl/data.hpp"
#include "mmtl/rng.hpp"

namespace mmtl {

namespace {

enum Stream : std::uint64_t { kMu = 1, kTaskParam = 2, kTaskSample = 3 };
enum Phase : std::uint64_t { kTraining = 0, kNewTasks = 1 };

struct DrawnTask {
  Vector theta;
  TaskSample train;
  TaskSample test;
};

DrawnTask draw_task(const TwoModesConfig& cfg, std::span<const double> center, std::uint64_t phase, std::size_t t) {
  DrawnTask out;
  KeyedRng prng(cfg.seed, {kTaskParam, phase, t});
  out.theta.resize(cfg.d);
  for (std::size_t j = 0; j < cfg.d; ++j) out.theta[j] = center[j] + cfg.sigma_task * prng.normal();

  KeyedRng srng(cfg.seed, {kTaskSample, phase, t});
  out.train.task_id = t;
  out.test.task_id = t;
  for (std::size_t i = 0; i < cfg.m_train + cfg.m_test; ++i) {
    LabeledExample ex;
    ex.x.resize(cfg.d);
    for (double& x : ex.x) x = srng.normal();
    ex.y = dot(out.theta, ex.x) + cfg.sigma_noise * srng.normal();
    (i < cfg.m_train ? out.train : out.test).examples.push_back(std::move(ex));
  }
  return out;
}

Vector scaled(std::span<const double> v, double c) {
  Vector out(v.begin(), v.end());
  for (double& x : out) x *= c;
  return out;
}

}  // namespace

void TwoModesConfig::validate() const {
  if (d < 1 || n_type1 + n_type2 < 1 || m_train < 1 || m_test < 1)
    throw InvalidArgument("two-modes dimension and counts must be at least 1");
  if (!(mode_radius >= 0.0) || !(sigma_task >= 0.0) || !(sigma_noise >= 0.0))
    throw InvalidArgument("two-modes radius and sigmas must be nonnegative");
}

TwoModesData generate_two_modes(const TwoModesConfig& cfg) {
  cfg.validate();
  KeyedRng rng(cfg.seed, {kMu});
  Vector mu(cfg.d);
  double n = 0.0;
  while (n == 0.0) {
    for (double& x : mu) x = rng.normal();
    n = norm(mu);
  }
  for (double& x : mu) x *= cfg.mode_radius / n;

  const Vector second = scaled(mu, -2.0);
  const std::size_t T = cfg.n_type1 + cfg.n_type2;
  std::vector<TaskSample> train, test;
  Matrix params(T, cfg.d);
  for (std::size_t t = 0; t < T; ++t) {
    DrawnTask task = draw_task(cfg, t < cfg.n_type1 ? std::span<const double>(mu) : second, kTraining, t);
    std::copy(task.theta.begin(), task.theta.end(), params.row(t).begin());
    train.push_back(std::move(task.train));
    test.push_back(std::move(task.test));
  }
  return TwoModesData{MultiTaskDataset(std::move(train), ProblemKind::regression),
                      MultiTaskDataset(std::move(test), ProblemKind::regression), std::move(params), std::move(mu)};
}

TrainTestPair generate_ltl_two_modes_test_tasks(const TwoModesConfig& cfg, std::span<const double> mu,
                                                std::size_t n_tasks) {
  cfg.validate();
  if (mu.size() != cfg.d)
    throw ShapeMismatch("mu has dimension " + std::to_string(mu.size()) + ", config says " + std::to_string(cfg.d));
  if (n_tasks < 1) throw InvalidArgument("need at least one new task");
  const double share = static_cast<double>(cfg.n_type1) / static_cast<double>(cfg.n_type1 + cfg.n_type2);
  const auto n1 = static_cast<std::size_t>(std::llround(share * static_cast<double>(n_tasks)));

  const Vector second = scaled(mu, -2.0);
  std::vector<TaskSample> train, test;
  for (std::size_t t = 0; t < n_tasks; ++t) {
    DrawnTask task = draw_task(cfg, t < n1 ? mu : std::span<const double>(second), kNewTasks, t);
    train.push_back(std::move(task.train));
    test.push_back(std::move(task.test));
  }
  return TrainTestPair{MultiTaskDataset(std::move(train), ProblemKind::regression),
                       MultiTaskDataset(std::move(test), ProblemKind::regression)};
}

void write_two_modes_dump(const std::filesystem::path& csv, const TwoModesConfig& cfg) {
  const TwoModesData data = generate_two_modes(cfg);
  write_task_table(csv, to_task_table(TrainTestPair{data.train, data.test}));
  const nlohmann::json side = {{"generator", "two_modes"},
                               {"seed", cfg.seed},
                               {"d", cfg.d},
                               {"n_type1", cfg.n_type1},
                               {"n_type2", cfg.n_type2},
                               {"mode_radius", cfg.mode_radius},
                               {"sigma_task", cfg.sigma_task},
                               {"sigma_noise", cfg.sigma_noise},
                               {"m_train", cfg.m_train},
                               {"m_test", cfg.m_test},
                               {"mu", data.mu}};
  std::filesystem::path meta = csv;
  meta.replace_extension(".json");
  std::ofstream out(meta);
  if (!out) throw DataError("cannot write " + meta.string());
  out << side.dump(2) << '\n';
}

}  // namespace mmtl
