#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mmtl/core.hpp"
#include "mmtl/linalg.hpp"

namespace mmtl {

struct TrainTestPair {
  MultiTaskDataset train;
  MultiTaskDataset test;
};

// ---- two-modes synthetic environment ----------------------------------------

struct TwoModesConfig {
  std::size_t d = 10;
  std::size_t n_type1 = 50;  // tasks centred at mu
  std::size_t n_type2 = 5;   // tasks centred at -2 mu
  double mode_radius = 5.0;
  double sigma_task = 0.1;
  double sigma_noise = 0.5;
  std::size_t m_train = 5;
  std::size_t m_test = 15;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TwoModesData {
  MultiTaskDataset train;
  MultiTaskDataset test;
  Matrix true_params;  // T x d, row t generates task t
  Vector mu;
};

/// Type-1 tasks come first (ids 0..n_type1-1), then type-2.
TwoModesData generate_two_modes(const TwoModesConfig& cfg);

/// Fresh tasks around the same modes, in the config's type-1 : type-2
/// proportion (rounded), drawn from streams disjoint from generate_two_modes.
TrainTestPair generate_ltl_two_modes_test_tasks(const TwoModesConfig& cfg, std::span<const double> mu,
                                                std::size_t n_tasks);

// ---- CSV task tables ----------------------------------------------------------

struct TaskTableSchema {
  std::string task_column;
  std::vector<std::string> feature_columns;
  std::string target_column;
  std::optional<std::string> split_column;  // required for SplitRule::Kind::column
};

struct SplitRule {
  enum class Kind {
    last_n,  // the last `holdout` rows of each task (file order) are test rows
    random,  // `holdout` rows per task chosen by a seeded shuffle
    column,  // split_column: 1/test/true marks a test row, 0/train/false a train row
  };
  Kind kind = Kind::last_n;
  std::size_t holdout = 1;
  std::uint64_t seed = 0;
};

struct TaskTable {
  std::vector<std::string> task_keys;  // original task ids, in order of first appearance
  std::vector<std::string> feature_names;
  std::vector<std::vector<LabeledExample>> rows;  // per task, file order
  std::vector<std::vector<std::size_t>> train_rows;
  std::vector<std::vector<std::size_t>> test_rows;

  std::size_t num_tasks() const { return task_keys.size(); }
  std::size_t dim() const { return feature_names.size(); }

  MultiTaskDataset train(ProblemKind kind = ProblemKind::regression) const;
  /// Throws EmptyTaskError if some task has no test rows.
  MultiTaskDataset test(ProblemKind kind = ProblemKind::regression) const;
  /// Every row of every task, ignoring the split.
  MultiTaskDataset all(ProblemKind kind = ProblemKind::regression) const;
};

/// Throws MissingColumnError, NonNumericCellError (naming the 1-based data
/// row and column) or EmptyTaskError (a task without train rows).
TaskTable load_task_table(const std::filesystem::path& path, const TaskTableSchema& schema, const SplitRule& split);

/// Writes columns task, features..., target, is_test. Reloading with
/// schema_for_written(table) and a column split reproduces the table.
void write_task_table(const std::filesystem::path& path, const TaskTable& table);
TaskTableSchema schema_for_written(const TaskTable& table);

/// Task table with every task's train and test rows, keys "0".."T-1".
TaskTable to_task_table(const TrainTestPair& data);

/// Generates the two-modes tasks for `cfg`, writes them with write_task_table
/// and puts the generating config (seed included) in a .json next to `csv`.
void write_two_modes_dump(const std::filesystem::path& csv, const TwoModesConfig& cfg);

// ---- MNIST ------------------------------------------------------------------

struct IdxImages {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major per image
};

/// Reads IDX files, gzip-compressed or raw. Throws CorruptIdxError.
IdxImages read_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);

/// One image per row, pixels scaled to [0, 1].
Matrix to_feature_matrix(const IdxImages& images);

struct TournamentSpec {
  std::size_t n_classes = 10;
  std::size_t pca_dim = 50;
  double train_fraction = 0.02;

  void validate() const;
  /// (a, b) with a < b in lexicographic order.
  std::vector<std::pair<std::size_t, std::size_t>> pairs() const;
};

struct Tournament {
  MultiTaskDataset train;  // task k is pairs()[k]: class a -> +1, class b -> -1
  PcaResult pca;
  std::vector<std::size_t> retained_per_class;
};

/// PCA is fit on all of `features`; each class keeps its first
/// ceil(train_fraction * class size) rows in the given order.
Tournament build_mnist_tournament(const Matrix& features, std::span<const std::uint8_t> labels,
                                  const TournamentSpec& spec);

/// Round-robin vote. Score k > 0 is a vote for pairs()[k].first, < 0 for the
/// second class, exactly 0 for the first. Ties go to the lowest class.
std::size_t tournament_decode(std::span<const double> scores, const TournamentSpec& spec);

}  // namespace mmtl
