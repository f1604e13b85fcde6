#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmtl/composition.hpp"
#include "mmtl/data.hpp"
#include "mmtl/evaluation.hpp"
#include "mmtl/models.hpp"
#include "mmtl/solver.hpp"

namespace mmtl {

/// Invalid or malformed experiment configuration; what() names the field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class ExperimentKind { two_modes, task_table, mnist, theory };
enum class ModelKind { ep, aep };
enum class ModelMode { regularized, constrained };

// A composer named in a config; alpha_minimax carries the level in (0, 1)
// that default_alpha turns into alpha once T is known.
struct ComposerSpec {
  enum class Kind { l1, l2, minimax, alpha_minimax } kind = Kind::l1;
  double level = 0.0;

  std::string name() const;
  Composer build(std::size_t num_tasks) const;
};

struct TaskTableSection {
  std::filesystem::path path;
  TaskTableSchema schema;
  SplitRule split;
  std::optional<std::size_t> folds;  // task-level CV for the LTL protocol
  std::vector<MetricKind> metrics{MetricKind::rmse, MetricKind::normalized_mean_rmse};
};

struct MnistSection {
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  TournamentSpec spec;
};

struct TheorySection {
  std::vector<std::size_t> task_grid{25, 50, 100};
  std::vector<double> gamma_grid{0.1, 0.2, 0.4};  // for the bound comparison table
  double gamma = 0.2;
  double delta = 0.1;
  std::size_t meta_reps = 500;
  LossVariant loss = LossVariant::squared;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::two_modes;
  ModelKind model = ModelKind::ep;
  ModelMode mode = ModelMode::constrained;
  std::vector<ComposerSpec> composers;
  std::vector<double> capacity_grid;
  std::size_t replicates = 1;
  std::uint64_t seed = 0;
  LossVariant loss = LossVariant::squared;
  SolveConfig solver;
  bool ltl = true;
  bool save_checkpoints = false;
  bool save_datasets = false;  // two_modes: dump each replicate's generated tasks
  std::optional<std::filesystem::path> output_dir;

  // Hyperparameters not on the swept axis.
  double tau0 = 1.0;     // EP constrained
  double lambda0 = 1.0;  // EP regularized

  TwoModesConfig two_modes;
  std::size_t ltl_tasks = 0;  // two_modes new tasks; 0 means the training task count
  std::optional<TaskTableSection> task_table;
  std::optional<MnistSection> mnist;
  TheorySection theory;

  nlohmann::json source;  // the document as read, echoed into the manifest

  /// Model config for one capacity value: tau1 (EP constrained), lambda1 (EP
  /// regularized), trace-norm radius (AEP constrained) or lambda (AEP regularized).
  ModelConfig model_config(double capacity) const;
};

/// Throws ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

// ---- checkpoints ---------------------------------------------------------------

/// {"kind":"ep","T":..,"d":..,"v0":[..],"vt":[[..],..]} or {"kind":"aep","T":..,"d":..,"W":[[..],..]}.
nlohmann::json checkpoint_json(const ModelParams& model);
ModelParams checkpoint_from_json(const nlohmann::json& doc);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& model);
ModelParams load_checkpoint(const std::filesystem::path& path);

// ---- runs --------------------------------------------------------------------

struct ResultRow {
  std::string experiment;
  std::string composer;
  double capacity = 0.0;
  std::string replicate;     // replicate or fold index, or "mean" for aggregates
  std::string metric_kind;   // e.g. mtl_l2_risk, ltl_rmse, multiclass_01
  double max_value = 0.0;
  double mean_value = 0.0;
  std::optional<double> std;  // aggregates only: std of max_value across replicates
  double wall_time_ms = 0.0;
};

std::string results_header();
std::string format_row(const ResultRow& row);

struct RunOptions {
  std::optional<std::filesystem::path> output_dir;  // overrides env and config
  std::size_t workers = 1;
  bool trace = false;
};

struct RunOutcome {
  std::vector<ResultRow> rows;
  std::filesystem::path output_dir;
  std::size_t solves = 0;
};

/// Runs every (composer, capacity, replicate) cell and writes results.csv and
/// manifest.json into the output directory.
RunOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& opts);

/// Command-line entry: `run <config.json>` or `verify <suite>`. Returns the
/// process exit code: 0 success, 1 verification failure, 2 config error,
/// 3 data error, 4 solver divergence.
int cli_main(int argc, char** argv);

}  // namespace mmtl
