#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "mmtl/experiment.hpp"
#include "mmtl/rng.hpp"
#include "mmtl/theory.hpp"

#ifndef MMTL_VERSION
#define MMTL_VERSION "0.0.0"
#endif

namespace mmtl {

using nlohmann::json;

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string experiment_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::two_modes: return "two_modes";
    case ExperimentKind::task_table: return "task_table";
    case ExperimentKind::mnist: return "mnist";
    case ExperimentKind::theory: return "theory";
  }
  return "unknown";
}

std::uint64_t replicate_seed(std::uint64_t seed, std::size_t replicate) {
  return KeyedRng(seed, {0x7e9, replicate}).next_u64();
}

std::filesystem::path pick_output_dir(const ExperimentConfig& cfg, const RunOptions& opts) {
  if (opts.output_dir) return *opts.output_dir;
  if (const char* env = std::getenv("MMTL_OUTPUT_DIR"); env && *env) return env;
  if (cfg.output_dir) return *cfg.output_dir;
  return "results";
}

struct Cell {
  std::size_t composer = 0;
  std::size_t capacity = 0;
  std::size_t replicate = 0;
};

struct CellOutput {
  std::vector<ResultRow> rows;
  SolveReport report;
  std::size_t num_tasks = 0;
  double ms = 0.0;
};

// Everything a cell needs that is shared across cells and read-only.
struct Shared {
  std::optional<TaskTable> table;
  std::vector<std::vector<std::size_t>> folds;
  std::optional<Tournament> tournament;
  Matrix mnist_test;
  std::vector<std::uint8_t> mnist_test_labels;
};

ResultRow metric_row(const std::string& prefix, const Metrics& m) {
  ResultRow row;
  row.metric_kind = prefix + to_string(m.metric_kind);
  row.max_value = m.max_risk;
  row.mean_value = m.mean_risk;
  return row;
}

class CellRunner {
 public:
  CellRunner(const ExperimentConfig& cfg, const Shared& shared, const std::filesystem::path& out, bool trace)
      : cfg_(cfg), shared_(shared), out_(out), trace_(trace) {}

  CellOutput run(const Cell& cell) const {
    const auto start = std::chrono::steady_clock::now();
    CellOutput out;
    switch (cfg_.experiment) {
      case ExperimentKind::two_modes: two_modes(cell, out); break;
      case ExperimentKind::task_table: task_table(cell, out); break;
      case ExperimentKind::mnist: mnist(cell, out); break;
      case ExperimentKind::theory: throw InvalidArgument("theory runs have no cells");
    }
    out.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    for (auto& row : out.rows) {
      row.experiment = experiment_name(cfg_.experiment);
      row.composer = cfg_.composers[cell.composer].name();
      row.capacity = cfg_.capacity_grid[cell.capacity];
      row.replicate = std::to_string(cell.replicate);
      row.wall_time_ms = out.ms;
    }
    return out;
  }

 private:
  std::string tag(const Cell& c) const {
    return "k" + std::to_string(c.composer) + "_c" + std::to_string(c.capacity) + "_r" + std::to_string(c.replicate);
  }

  SolveConfig solve_config(const Cell& c) const {
    SolveConfig s = cfg_.solver;
    s.seed = replicate_seed(cfg_.seed, c.replicate);
    if (trace_) s.trace_path = out_ / "traces" / (tag(c) + ".csv");
    return s;
  }

  ModelParams train(const Cell& c, const MultiTaskDataset& data, const LossKind& kind, CellOutput& out) const {
    const Composer composer = cfg_.composers[c.composer].build(data.num_tasks());
    SolveResult res = solve(data, cfg_.model_config(cfg_.capacity_grid[c.capacity]), composer, kind, solve_config(c));
    out.report = res.report;
    out.num_tasks = data.num_tasks();
    if (cfg_.save_checkpoints) save_checkpoint(out_ / "checkpoints" / (tag(c) + ".json"), res.params);
    return std::move(res.params);
  }

  void two_modes(const Cell& c, CellOutput& out) const {
    TwoModesConfig tm = cfg_.two_modes;
    tm.seed = replicate_seed(cfg_.seed, c.replicate);
    const TwoModesData data = generate_two_modes(tm);
    const LossKind kind = LossKind::squared();
    const ModelParams params = train(c, data.train, kind, out);
    out.rows.push_back(metric_row("mtl_", evaluate_mtl(params, data.test, kind, MetricKind::l2_risk)));
    if (cfg_.ltl) {
      const std::size_t n = cfg_.ltl_tasks ? cfg_.ltl_tasks : data.train.num_tasks();
      const TrainTestPair fresh = generate_ltl_two_modes_test_tasks(tm, data.mu, n);
      const ModelConfig mc = cfg_.model_config(cfg_.capacity_grid[c.capacity]);
      out.rows.push_back(
          metric_row("ltl_", evaluate_ltl(params, fresh, mc, kind, solve_config(c), MetricKind::l2_risk)));
    }
  }

  void task_table(const Cell& c, CellOutput& out) const {
    const TaskTable& table = *shared_.table;
    const auto& metrics = cfg_.task_table->metrics;
    const LossKind kind = LossKind::squared();
    const MultiTaskDataset train_all = table.train();
    const MultiTaskDataset test_all = table.test();

    if (shared_.folds.empty()) {
      const ModelParams params = train(c, train_all, kind, out);
      for (MetricKind mk : metrics) out.rows.push_back(metric_row("mtl_", evaluate_mtl(params, test_all, kind, mk)));
      return;
    }
    const auto& heldout = shared_.folds[c.replicate];
    std::vector<std::size_t> kept;
    for (std::size_t t = 0; t < table.num_tasks(); ++t)
      if (!std::binary_search(heldout.begin(), heldout.end(), t)) kept.push_back(t);
    const ModelParams params = train(c, subset_tasks(train_all, kept), kind, out);
    const MultiTaskDataset kept_test = subset_tasks(test_all, kept);
    for (MetricKind mk : metrics) out.rows.push_back(metric_row("mtl_", evaluate_mtl(params, kept_test, kind, mk)));
    if (cfg_.ltl) {
      const TrainTestPair fresh{subset_tasks(train_all, heldout), subset_tasks(test_all, heldout)};
      const ModelConfig mc = cfg_.model_config(cfg_.capacity_grid[c.capacity]);
      // Adapt once, score with every metric.
      const ModelParams adapted = adapt_ltl(params, fresh.train, mc, kind, solve_config(c));
      for (MetricKind mk : metrics) out.rows.push_back(metric_row("ltl_", evaluate_mtl(adapted, fresh.test, kind, mk)));
    }
  }

  void mnist(const Cell& c, CellOutput& out) const {
    const Tournament& tour = *shared_.tournament;
    const ModelParams params = train(c, tour.train, LossKind::hinge(), out);
    const double err = multiclass_01(params, shared_.mnist_test, shared_.mnist_test_labels, cfg_.mnist->spec);
    ResultRow row;
    row.metric_kind = "multiclass_01";
    row.max_value = err;
    row.mean_value = err;
    out.rows.push_back(row);
  }

  const ExperimentConfig& cfg_;
  const Shared& shared_;
  std::filesystem::path out_;
  bool trace_;
};

Shared prepare(const ExperimentConfig& cfg) {
  Shared s;
  if (cfg.experiment == ExperimentKind::task_table) {
    const TaskTableSection& sec = *cfg.task_table;
    s.table = load_task_table(sec.path, sec.schema, sec.split);
    s.table->test();  // every task needs test rows; fail before any cell runs
    if (sec.folds) {
      if (*sec.folds > s.table->num_tasks())
        throw ConfigError("config field 'task_table.folds': exceeds the number of tasks (" +
                          std::to_string(s.table->num_tasks()) + ")");
      s.folds = task_folds(s.table->num_tasks(), *sec.folds, cfg.seed);
    }
  } else if (cfg.experiment == ExperimentKind::mnist) {
    const MnistSection& sec = *cfg.mnist;
    const Matrix train_x = to_feature_matrix(read_idx_images(sec.train_images));
    const auto train_y = read_idx_labels(sec.train_labels);
    if (train_y.size() != train_x.rows()) throw DataError("mnist train images and labels differ in count");
    s.tournament = build_mnist_tournament(train_x, train_y, sec.spec);
    s.mnist_test = s.tournament->pca.transform(to_feature_matrix(read_idx_images(sec.test_images)));
    s.mnist_test_labels = read_idx_labels(sec.test_labels);
    if (s.mnist_test_labels.size() != s.mnist_test.rows())
      throw DataError("mnist test images and labels differ in count");
  }
  return s;
}

std::size_t replicate_count(const ExperimentConfig& cfg, const Shared& s) {
  return s.folds.empty() ? cfg.replicates : s.folds.size();
}

std::vector<CellOutput> run_cells(const std::vector<Cell>& cells, const CellRunner& runner, std::size_t workers) {
  std::vector<CellOutput> outputs(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        outputs[i] = runner.run(cells[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cells.size();
        return;
      }
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, cells.size()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return outputs;
}

// Mean rows over replicates for each (composer, capacity, metric_kind).
std::vector<ResultRow> aggregate(const std::vector<ResultRow>& group) {
  std::vector<std::string> kinds;
  for (const auto& r : group)
    if (std::find(kinds.begin(), kinds.end(), r.metric_kind) == kinds.end()) kinds.push_back(r.metric_kind);
  std::vector<ResultRow> out;
  for (const auto& kind : kinds) {
    Vector maxes, means, times;
    for (const auto& r : group)
      if (r.metric_kind == kind) {
        maxes.push_back(r.max_value);
        means.push_back(r.mean_value);
        times.push_back(r.wall_time_ms);
      }
    ResultRow row = group.front();
    row.replicate = "mean";
    row.metric_kind = kind;
    const auto [max_mean, max_std] = mean_and_std(maxes);
    row.max_value = max_mean;
    row.mean_value = mean_and_std(means).first;
    row.std = max_std;
    row.wall_time_ms = compensated_sum(times);
    out.push_back(row);
  }
  return out;
}

void write_results(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << results_header() << '\n';
  for (const auto& row : rows) out << format_row(row) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

json base_manifest(const ExperimentConfig& cfg) {
  json m;
  m["version"] = MMTL_VERSION;
  m["experiment"] = experiment_name(cfg.experiment);
  m["seed"] = cfg.seed;
  m["config"] = cfg.source;
  return m;
}

RunOutcome run_theory(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  const TheorySection& th = cfg.theory;
  const FiniteEnvironment env = default_environment(th.loss);
  RunOutcome outcome;
  outcome.output_dir = dir;
  json reports = json::array();
  Vector ts, tails;
  double mean_empirical = 0.0;  // of the selected representation, from the last grid point
  for (std::size_t T : th.task_grid) {
    const auto start = std::chrono::steady_clock::now();
    const BoundReport rep = verify_tail_bound(env, T, th.gamma, th.delta, th.meta_reps, cfg.seed);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    reports.push_back(json::parse(rep.to_json()));
    ts.push_back(static_cast<double>(T));
    tails.push_back(rep.mean_tail_estimate);
    mean_empirical = rep.markov_rhs * th.gamma;

    ResultRow lemma{"theory", "erm", static_cast<double>(T), "all", "lemma_tail", rep.empirical_tail_freq,
                    rep.mean_tail_estimate, std::nullopt, ms};
    ResultRow theorem{"theory", "erm", static_cast<double>(T), "all", "theorem_event", rep.theorem1_violation_freq,
                      rep.theorem1_event_freq, std::nullopt, ms};
    outcome.rows.push_back(lemma);
    outcome.rows.push_back(theorem);
  }
  json doc = base_manifest(cfg);
  doc["reports"] = reports;
  doc["tail_trend_spearman"] = ts.size() >= 2 ? spearman(ts, tails) : 0.0;
  write_json(dir / "theory_report.json", doc);

  const auto table = compare_bounds(env.num_representations(), th.delta, *env.loss.clip_bound, mean_empirical, th.task_grid,
                                    th.gamma_grid);
  std::ofstream csv(dir / "bound_comparison.csv", std::ios::binary);
  csv << "num_tasks,gamma,markov_rhs,theorem1_rhs\n";
  for (const auto& row : table)
    csv << row.num_tasks << ',' << fmt(row.gamma) << ',' << fmt(row.markov) << ',' << fmt(row.theorem1) << '\n';

  write_results(dir / "results.csv", outcome.rows);
  write_json(dir / "manifest.json", doc);
  return outcome;
}

}  // namespace

std::string results_header() { return "experiment,composer,capacity,replicate,metric_kind,max_value,mean_value,std,wall_time_ms"; }

std::string format_row(const ResultRow& r) {
  char ms[32];
  std::snprintf(ms, sizeof ms, "%.3f", r.wall_time_ms);
  std::string composer = r.composer;
  // alpha_minimax(0.1) has no comma, but quote defensively if one ever appears.
  if (composer.find(',') != std::string::npos) composer = "\"" + composer + "\"";
  return r.experiment + ',' + composer + ',' + fmt(r.capacity) + ',' + r.replicate + ',' + r.metric_kind + ',' +
         fmt(r.max_value) + ',' + fmt(r.mean_value) + ',' + (r.std ? fmt(*r.std) : std::string()) + ',' + ms;
}

RunOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  const std::filesystem::path dir = pick_output_dir(cfg, opts);
  std::filesystem::create_directories(dir);
  if (cfg.experiment == ExperimentKind::theory) return run_theory(cfg, dir);

  if (cfg.composers.empty()) throw ConfigError("config field 'composers': must not be empty");
  if (cfg.capacity_grid.empty()) throw ConfigError("config field 'capacity_grid': must not be empty");
  cfg.solver.validate();
  if (opts.trace) std::filesystem::create_directories(dir / "traces");
  if (cfg.save_checkpoints) std::filesystem::create_directories(dir / "checkpoints");
  if (cfg.save_datasets && cfg.experiment == ExperimentKind::two_modes) {
    std::filesystem::create_directories(dir / "datasets");
    for (std::size_t r = 0; r < cfg.replicates; ++r) {
      TwoModesConfig tm = cfg.two_modes;
      tm.seed = replicate_seed(cfg.seed, r);
      write_two_modes_dump(dir / "datasets" / ("two_modes_r" + std::to_string(r) + ".csv"), tm);
    }
  }

  const Shared shared = prepare(cfg);
  const std::size_t reps = replicate_count(cfg, shared);
  std::vector<Cell> cells;
  for (std::size_t k = 0; k < cfg.composers.size(); ++k)
    for (std::size_t c = 0; c < cfg.capacity_grid.size(); ++c)
      for (std::size_t r = 0; r < reps; ++r) cells.push_back({k, c, r});

  const CellRunner runner(cfg, shared, dir, opts.trace);
  const std::vector<CellOutput> outputs = run_cells(cells, runner, opts.workers);

  RunOutcome outcome;
  outcome.output_dir = dir;
  outcome.solves = cells.size();
  json summaries = json::array();
  // cells are already in (composer, capacity, replicate) order
  for (std::size_t start = 0; start < cells.size(); start += reps) {
    std::vector<ResultRow> group;
    for (std::size_t i = start; i < start + reps; ++i) {
      const CellOutput& o = outputs[i];
      group.insert(group.end(), o.rows.begin(), o.rows.end());
      summaries.push_back({{"composer", cfg.composers[cells[i].composer].name()},
                           {"capacity", cfg.capacity_grid[cells[i].capacity]},
                           {"replicate", cells[i].replicate},
                           {"num_tasks", o.num_tasks},
                           {"final_objective", o.report.final_objective},
                           {"best_objective", o.report.best_objective},
                           {"iterations_run", o.report.iterations_run},
                           {"converged", o.report.converged}});
    }
    outcome.rows.insert(outcome.rows.end(), group.begin(), group.end());
    if (reps > 1) {
      const auto agg = aggregate(group);
      outcome.rows.insert(outcome.rows.end(), agg.begin(), agg.end());
    }
  }

  write_results(dir / "results.csv", outcome.rows);
  json manifest = base_manifest(cfg);
  json seeds = json::array();
  for (std::size_t r = 0; r < reps; ++r) seeds.push_back(replicate_seed(cfg.seed, r));
  manifest["replicate_seeds"] = seeds;
  if (!shared.folds.empty()) manifest["folds"] = shared.folds;
  manifest["cells"] = summaries;
  write_json(dir / "manifest.json", manifest);
  return outcome;
}

}  // namespace mmtl
