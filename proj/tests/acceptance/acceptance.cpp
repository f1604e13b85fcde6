// Acceptance runner: one PASS/FAIL line per criterion.
//
//   mmtl_acceptance [--only 3,5] [--expect-fail 6] [--workers N] [--data-dir DIR]
//
// Exit status is 0 when every criterion passes, except that criteria named in
// --expect-fail must fail (a known red that starts passing is reported too).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "mmtl/experiment.hpp"
#include "mmtl/theory.hpp"
#include "mmtl/verify.hpp"

#ifndef MMTL_TEST_DATA_DIR
#define MMTL_TEST_DATA_DIR "tests/data"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mmtl;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Env {
  fs::path data;
  fs::path scratch;
  std::size_t workers = 1;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Verdict suite_verdict(const std::string& name, double limit_s, const verify::SuiteOptions& opt = {}) {
  const verify::SuiteResult r = verify::run_suite(name, opt);
  std::string failed;
  for (const auto& c : r.checks)
    if (!c.passed) failed += (failed.empty() ? "" : "; ") + c.name + " (" + c.detail + ")";
  const bool fast = r.seconds < limit_s;
  Verdict v;
  v.pass = r.passed() && fast;
  v.detail = fmt("%zu checks, %.1f s (limit %.0f s)", r.checks.size(), r.seconds, limit_s);
  if (!failed.empty()) v.detail += ", failed: " + failed;
  if (!fast) v.detail += ", too slow";
  return v;
}

RunOutcome run(const json& doc, const Env& env, const std::string& tag) {
  RunOptions opts;
  opts.output_dir = env.scratch / tag;
  opts.workers = env.workers;
  fs::remove_all(*opts.output_dir);
  return run_experiment(parse_config(doc), opts);
}

json two_modes_config(double sigma_task, double sigma_noise) {
  return {{"experiment", "two_modes"},
          {"composers", {"l1", "minimax"}},
          {"capacity_grid", {2.0}},
          {"replicates", 20},
          {"seed", 7},
          {"model_params", {{"tau0", 10.0}}},
          {"two_modes", {{"sigma_task", sigma_task}, {"sigma_noise", sigma_noise}}}};
}

struct WinRates {
  double minimax_max = 0.0;  // share of replicates where minimax has the lower LTL max risk
  double l1_mean = 0.0;      // share where l1 has the lower LTL mean risk
};

WinRates win_rates(const RunOutcome& out) {
  std::map<std::string, std::pair<double, double>> l1, mm;
  for (const auto& r : out.rows) {
    if (r.metric_kind != "ltl_l2_risk" || r.replicate == "mean") continue;
    (r.composer == "l1" ? l1 : mm)[r.replicate] = {r.max_value, r.mean_value};
  }
  WinRates w;
  for (const auto& [rep, v] : l1) {
    w.minimax_max += mm.at(rep).first < v.first ? 1.0 : 0.0;
    w.l1_mean += v.second < mm.at(rep).second ? 1.0 : 0.0;
  }
  w.minimax_max /= static_cast<double>(l1.size());
  w.l1_mean /= static_cast<double>(l1.size());
  return w;
}

// The twelve criteria.

Verdict composition(const Env&) { return suite_verdict("composition", 10.0); }
Verdict projections(const Env&) { return suite_verdict("projections", 30.0); }
Verdict solver_oracle(const Env&) { return suite_verdict("solver_oracle", 120.0); }

Verdict alpha_regimes(const Env&) {
  // Fixed toy instance: three tasks pulling in different directions.
  KeyedRng rng(404, {1});
  const MultiTaskDataset data = verify::random_toy_instance(rng, 3, 2, 6);
  const ModelConfig mc = EpConfig{EpConstrained{1.0, 0.5}};
  const SolveConfig cfg = verify::oracle_solve_config();
  const LossKind sq = LossKind::squared();
  const double l1 = solve(data, mc, Composer::uniform_l1(3), sq, cfg).report.best_objective;
  const double alpha = 4.5;
  const double big = solve(data, mc, Composer::alpha_minimax(alpha), sq, cfg).report.best_objective;
  const double mx = solve(data, mc, Composer::max(), sq, cfg).report.best_objective;
  const double small = solve(data, mc, Composer::alpha_minimax(0.3), sq, cfg).report.best_objective;
  const double e1 = std::abs(big - 3.0 / alpha * l1);
  const double e2 = std::abs(small - mx);
  return {e1 <= 2e-3 && e2 <= 2e-3, fmt("|alpha>T - (T/alpha) l1| = %.2e, |alpha=0.3 - max| = %.2e (tol 2e-3)", e1, e2)};
}

Verdict subgradients(const Env&) {
  verify::SuiteOptions opt;
  opt.instances = 1000;  // 10 000 first-order checks in total
  return suite_verdict("subgradients", 600.0, opt);
}

Verdict two_modes_direction(const Env& env) {
  std::string detail;
  bool ok = true;
  for (double noise : {0.5, 1.0}) {
    const WinRates w = win_rates(run(two_modes_config(0.1, noise), env, fmt("tm_0.1_%g", noise)));
    ok = ok && w.minimax_max >= 0.7 && w.l1_mean >= 0.7;
    detail += fmt("sigma_task 0.1 noise %g: minimax max-win %.0f%%, l1 mean-win %.0f%%; ", noise, 100 * w.minimax_max,
                  100 * w.l1_mean);
  }
  const WinRates wide = win_rates(run(two_modes_config(2.0, 1.0), env, "tm_2.0"));
  ok = ok && wide.minimax_max < 0.7;
  detail += fmt("sigma_task 2.0: minimax max-win %.0f%% (needs < 70%%)", 100 * wide.minimax_max);
  return {ok, detail};
}

Verdict mtl_ltl_consistency(const Env& env) {
  double worst = 0.0;
  std::string where;
  for (double noise : {0.5, 1.0}) {
    const RunOutcome out = run(two_modes_config(0.1, noise), env, fmt("tm_0.1_%g", noise));
    std::map<std::string, const ResultRow*> mtl, ltl;
    for (const auto& r : out.rows) {
      if (r.replicate != "mean") continue;
      if (r.metric_kind == "mtl_l2_risk") mtl[r.composer] = &r;
      if (r.metric_kind == "ltl_l2_risk") ltl[r.composer] = &r;
    }
    for (const auto& [c, m] : mtl) {
      const ResultRow* l = ltl.at(c);
      for (const auto& [name, a, b] : {std::tuple{"max", m->max_value, l->max_value}, std::tuple{"mean", m->mean_value, l->mean_value}}) {
        const double rel = std::abs(a - b) / std::max(a, b);
        if (rel > worst) {
          worst = rel;
          where = fmt("%s %s at noise %g", c.c_str(), name, noise);
        }
      }
    }
  }
  return {worst < 0.15, fmt("largest relative MTL/LTL gap %.1f%% (%s), limit 15%%", 100 * worst, where.c_str())};
}

Verdict theory_tail(const Env&) { return suite_verdict("theory", 600.0); }

Verdict bound_arithmetic(const Env& env) {
  const double a = lemma1_bound(1, 0.2, 50), b = lemma1_bound(4, 0.1, 100), c = theorem1_rhs(4, 0.1, 100, 1.0);
  bool ok = std::abs(a - std::log(10.0) / 50.0) < 1e-9 && std::abs(b - std::log(80.0) / 100.0) < 1e-9 &&
            std::abs(c - (std::log(80.0) + std::log(101.0)) / 100.0) < 1e-9 &&
            std::abs(markov_rhs(0.2, 0.0, 0.5) - 0.4) < 1e-9;
  const std::vector<std::size_t> Ts{25, 50, 100, 1000, 10000};
  const std::vector<double> gammas{0.1, 0.2, 0.4};
  const FiniteEnvironment fe = default_environment();
  const auto table = compare_bounds(fe.num_representations(), 0.1, *fe.loss.clip_bound, 0.05, Ts, gammas);
  fs::create_directories(env.scratch);
  std::ofstream csv(env.scratch / "bound_comparison.csv");
  csv << "num_tasks,gamma,markov_rhs,theorem1_rhs\n";
  for (const auto& r : table) csv << r.num_tasks << ',' << r.gamma << ',' << r.markov << ',' << r.theorem1 << '\n';
  ok = ok && table.size() == Ts.size() * gammas.size();
  return {ok, fmt("lemma1 %.6f %.6f, theorem1 %.6f; %zu-row comparison written", a, b, c, table.size())};
}

Verdict mnist(const Env& env) {
  const auto p = [&](const char* f) { return (env.data / f).string(); };
  const json doc = {{"experiment", "mnist"},
                    {"composers", {"l1", "minimax", "alpha_minimax(0.2)"}},
                    {"capacity_grid", {1.0, 4.0, 16.0, 64.0}},
                    {"seed", 1},
                    {"mnist",
                     {{"train_images", p("mnist5k-train-images-idx3-ubyte.gz")},
                      {"train_labels", p("mnist5k-train-labels-idx1-ubyte.gz")},
                      {"test_images", p("mnist5k-test-images-idx3-ubyte.gz")},
                      {"test_labels", p("mnist5k-test-labels-idx1-ubyte.gz")},
                      {"pca_dim", 50},
                      {"train_fraction", 0.03}}}};
  const auto start = std::chrono::steady_clock::now();
  const RunOutcome out = run(doc, env, "mnist");
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::map<std::string, double> at_top, at_bottom;
  for (const auto& r : out.rows) {
    if (r.capacity == 64.0) at_top[r.composer] = r.max_value;
    if (r.capacity == 1.0) at_bottom[r.composer] = r.max_value;
  }
  bool ok = at_top.size() == 3 && s < 1800.0;
  std::string detail = "largest capacity:";
  for (const auto& [c, e] : at_top) {
    ok = ok && e < 0.9;
    detail += fmt(" %s %.3f", c.c_str(), e);
  }
  const double mm = at_bottom.at("minimax"), l1 = at_bottom.at("l1");
  ok = ok && mm <= l1 + 0.02;
  detail += fmt("; smallest capacity: minimax %.3f vs l1 %.3f; %.0f s", mm, l1, s);
  return {ok, detail};
}

std::vector<std::string> results_without_time(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l.substr(0, l.rfind(',')));
  return out;
}

Verdict determinism(const Env& env) {
  json tm = two_modes_config(0.1, 0.5);
  tm["replicates"] = 4;
  tm["composers"] = {"l1", "l2", "minimax", "alpha_minimax(0.1)"};
  json tt = {{"experiment", "task_table"},
             {"composers", {"l1", "minimax"}},
             {"capacity_grid", {1.0}},
             {"seed", 5},
             {"task_table",
              {{"path", (env.data / "school_standin.csv").string()},
               {"task_column", "school"},
               {"feature_columns", {"x0", "x1", "x2", "x3", "x4", "x5", "x6", "x7"}},
               {"target_column", "score"},
               {"split", {{"kind", "random"}, {"holdout", 8}, {"seed", 2}}},
               {"folds", 3}}}};
  std::size_t compared = 0;
  bool same = true;
  for (const auto& [name, doc] : {std::pair{"tm", tm}, std::pair{"tt", tt}}) {
    Env serial = env, pooled = env;
    serial.workers = 1;
    pooled.workers = std::max<std::size_t>(4, env.workers);
    const RunOutcome a = run(doc, serial, std::string("det_a_") + name);
    const RunOutcome b = run(doc, pooled, std::string("det_b_") + name);
    const auto la = results_without_time(a.output_dir / "results.csv");
    const auto lb = results_without_time(b.output_dir / "results.csv");
    same = same && la == lb;
    compared += la.size();
  }
  return {same, fmt("%zu results.csv lines compared across serial and %zu-worker runs", compared,
                    std::max<std::size_t>(4, env.workers))};
}

Verdict task_tables(const Env& env) {
  TaskTableSchema s{"subject", {}, "rating", std::string("is_test")};
  for (int j = 0; j < 13; ++j) s.feature_columns.push_back("f" + std::to_string(j));
  const TaskTable pc = load_task_table(env.data / "computer_standin.csv", s, SplitRule{SplitRule::Kind::column, 1, 0});
  bool shapes = pc.num_tasks() == 189;
  for (std::size_t t = 0; t < pc.num_tasks(); ++t)
    shapes = shapes && pc.train_rows[t].size() == 16 && pc.test_rows[t].size() == 4;

  const json feats = {"f0", "f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8", "f9", "f10", "f11", "f12"};
  const json computer = {{"experiment", "task_table"},
                         {"composers", {"l1", "minimax", "alpha_minimax(0.1)"}},
                         {"capacity_grid", {0.1, 1.0, 10.0}},
                         {"seed", 3},
                         {"solver", {{"max_iters", 300}}},
                         {"task_table",
                          {{"path", (env.data / "computer_standin.csv").string()},
                           {"task_column", "subject"},
                           {"feature_columns", feats},
                           {"target_column", "rating"},
                           {"split_column", "is_test"},
                           {"split", {{"kind", "column"}}}}}};
  json school = {{"experiment", "task_table"},
                 {"composers", {"l1", "minimax", "alpha_minimax(0.1)"}},
                 {"capacity_grid", {0.1, 1.0, 10.0}},
                 {"seed", 3},
                 {"solver", {{"max_iters", 300}}},
                 {"task_table",
                  {{"path", (env.data / "school_standin.csv").string()},
                   {"task_column", "school"},
                   {"feature_columns", {"x0", "x1", "x2", "x3", "x4", "x5", "x6", "x7"}},
                   {"target_column", "score"},
                   {"split", {{"kind", "random"}, {"holdout", 8}, {"seed", 4}}},
                   {"folds", 5}}}};
  // 3 composers x 3 capacities, two metrics; the school run adds 5 folds with MTL and LTL rows.
  const RunOutcome pc_run = run(computer, env, "computer");
  const RunOutcome school_run = run(school, env, "school");
  auto finite = [](const RunOutcome& o) {
    return std::all_of(o.rows.begin(), o.rows.end(), [](const ResultRow& r) { return std::isfinite(r.max_value) && std::isfinite(r.mean_value); });
  };
  const std::size_t school_cells = 3 * 3 * 5;
  const bool grid = pc_run.rows.size() == 9 * 2 && school_run.rows.size() == school_cells * 4 + 9 * 4 &&
                    finite(pc_run) && finite(school_run);
  return {shapes && grid, fmt("computer: %zu tasks, 16/4 split %s; grid rows computer %zu, school %zu (%zu solves)",
                              pc.num_tasks(), shapes ? "ok" : "wrong", pc_run.rows.size(), school_run.rows.size(),
                              school_run.solves)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict(const Env&)> fn;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only, expect_fail;
  Env env;
  env.data = MMTL_TEST_DATA_DIR;
  env.scratch = fs::temp_directory_path() / "mmtl_acceptance";
  env.workers = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--only", only, "Criteria to run")->delimiter(',');
  app.add_option("--expect-fail", expect_fail, "Criteria known to fail")->delimiter(',');
  app.add_option("--workers", env.workers, "Worker threads for experiment runs");
  app.add_option("--data-dir", env.data, "Directory holding the bundled fixtures");
  app.add_option("--scratch", env.scratch, "Directory for run outputs");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "composition oracle suite", composition},
      {2, "projection oracle suite", projections},
      {3, "solver vs exhaustive minimization", solver_oracle},
      {4, "alpha regimes at the solver level", alpha_regimes},
      {5, "subgradient validity", subgradients},
      {6, "two-modes directionality", two_modes_direction},
      {7, "MTL/LTL consistency on two-modes", mtl_ltl_consistency},
      {8, "tail bound on the finite environment", theory_tail},
      {9, "bound arithmetic and comparison", bound_arithmetic},
      {10, "MNIST tournament desk scale", mnist},
      {11, "run determinism", determinism},
      {12, "task-table loaders and sweep", task_tables},
  };

  const std::set<int> xfail(expect_fail.begin(), expect_fail.end());
  int unexpected = 0, passed = 0, run_count = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    ++run_count;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.fn(env);
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s #%d %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), s);
    std::fflush(stdout);
    passed += v.pass ? 1 : 0;
    if (v.pass == static_cast<bool>(xfail.count(c.id))) {
      ++unexpected;
      if (v.pass) std::printf("  #%d was expected to fail and passed\n", c.id);
    }
  }
  std::printf("%d/%d criteria passed\n", passed, run_count);
  return unexpected == 0 ? 0 : 1;
}
