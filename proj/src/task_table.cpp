#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include "mmtl/data.hpp"
#include "mmtl/rng.hpp"

namespace mmtl {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t") - first + 1);
}

double parse_cell(const std::string& raw, std::size_t row, const std::string& column) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw NonNumericCellError("row " + std::to_string(row) + ", column '" + column + "': '" + raw +
                              "' is not a finite number");
  return v;
}

bool parse_split_cell(const std::string& raw, std::size_t row, const std::string& column) {
  std::string s = trim(raw);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "test" || s == "true") return true;
  if (s == "train" || s == "false") return false;
  return parse_cell(raw, row, column) != 0.0;
}

std::size_t column_index(const std::map<std::string, std::size_t>& header, const std::string& name) {
  const auto it = header.find(name);
  if (it == header.end()) throw MissingColumnError("column '" + name + "' not found in header");
  return it->second;
}

MultiTaskDataset gather(const TaskTable& table, const std::vector<std::vector<std::size_t>>* which, ProblemKind kind,
                        const char* split_name) {
  std::vector<TaskSample> tasks(table.num_tasks());
  for (std::size_t t = 0; t < table.num_tasks(); ++t) {
    tasks[t].task_id = t;
    if (which) {
      for (std::size_t i : (*which)[t]) tasks[t].examples.push_back(table.rows[t][i]);
    } else {
      tasks[t].examples = table.rows[t];
    }
    if (tasks[t].examples.empty())
      throw EmptyTaskError("task '" + table.task_keys[t] + "' has no " + split_name + " rows");
  }
  return MultiTaskDataset(std::move(tasks), kind);
}

}  // namespace

MultiTaskDataset TaskTable::train(ProblemKind kind) const { return gather(*this, &train_rows, kind, "train"); }
MultiTaskDataset TaskTable::test(ProblemKind kind) const { return gather(*this, &test_rows, kind, "test"); }
MultiTaskDataset TaskTable::all(ProblemKind kind) const { return gather(*this, nullptr, kind, "data"); }

TaskTable load_task_table(const std::filesystem::path& path, const TaskTableSchema& schema, const SplitRule& split) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open task table " + path.string());
  if (schema.feature_columns.empty()) throw InvalidArgument("schema lists no feature columns");
  if (split.kind == SplitRule::Kind::column && !schema.split_column)
    throw InvalidArgument("column split requires schema.split_column");

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + " is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::map<std::string, std::size_t> header;
  const auto names = split_csv_line(line);
  for (std::size_t i = 0; i < names.size(); ++i) header.emplace(trim(names[i]), i);

  const std::size_t task_col = column_index(header, schema.task_column);
  const std::size_t target_col = column_index(header, schema.target_column);
  std::vector<std::size_t> feature_cols;
  for (const auto& f : schema.feature_columns) feature_cols.push_back(column_index(header, f));
  std::optional<std::size_t> split_col;
  if (split.kind == SplitRule::Kind::column) split_col = column_index(header, *schema.split_column);

  TaskTable table;
  table.feature_names = schema.feature_columns;
  std::map<std::string, std::size_t> task_index;
  std::vector<std::vector<bool>> marked_test;

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty() || line == "\r") continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() != names.size())
      throw DataError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(names.size()));
    const std::string key = trim(cells[task_col]);
    auto [it, inserted] = task_index.emplace(key, table.task_keys.size());
    if (inserted) {
      table.task_keys.push_back(key);
      table.rows.emplace_back();
      marked_test.emplace_back();
    }
    LabeledExample ex;
    ex.x.reserve(feature_cols.size());
    for (std::size_t k = 0; k < feature_cols.size(); ++k)
      ex.x.push_back(parse_cell(cells[feature_cols[k]], row, schema.feature_columns[k]));
    ex.y = parse_cell(cells[target_col], row, schema.target_column);
    table.rows[it->second].push_back(std::move(ex));
    if (split_col) marked_test[it->second].push_back(parse_split_cell(cells[*split_col], row, *schema.split_column));
  }
  if (table.task_keys.empty()) throw DataError(path.string() + " has no data rows");

  const std::size_t T = table.num_tasks();
  table.train_rows.resize(T);
  table.test_rows.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t n = table.rows[t].size();
    std::vector<bool> is_test(n, false);
    switch (split.kind) {
      case SplitRule::Kind::last_n:
        for (std::size_t i = n - std::min(n, split.holdout); i < n; ++i) is_test[i] = true;
        break;
      case SplitRule::Kind::random: {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        KeyedRng rng(split.seed, {0x5b11u, t});
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        for (std::size_t i = 0; i < std::min(n, split.holdout); ++i) is_test[order[i]] = true;
        break;
      }
      case SplitRule::Kind::column:
        is_test = marked_test[t];
        break;
    }
    for (std::size_t i = 0; i < n; ++i) (is_test[i] ? table.test_rows[t] : table.train_rows[t]).push_back(i);
    if (table.train_rows[t].empty())
      throw EmptyTaskError("task '" + table.task_keys[t] + "' has no train rows after the split");
  }
  return table;
}

TaskTableSchema schema_for_written(const TaskTable& table) {
  return TaskTableSchema{"task", table.feature_names, "target", std::string("is_test")};
}

void write_task_table(const std::filesystem::path& path, const TaskTable& table) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "task";
  for (const auto& f : table.feature_names) out << ',' << quote_if_needed(f);
  out << ",target,is_test\n";
  char buf[40];
  for (std::size_t t = 0; t < table.num_tasks(); ++t) {
    std::vector<bool> is_test(table.rows[t].size(), false);
    for (std::size_t i : table.test_rows[t]) is_test[i] = true;
    for (std::size_t i = 0; i < table.rows[t].size(); ++i) {
      out << quote_if_needed(table.task_keys[t]);
      for (double x : table.rows[t][i].x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out << ',' << buf;
      }
      std::snprintf(buf, sizeof buf, "%.17g", table.rows[t][i].y);
      out << ',' << buf << ',' << (is_test[i] ? 1 : 0) << '\n';
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
}

TaskTable to_task_table(const TrainTestPair& data) {
  if (data.train.num_tasks() != data.test.num_tasks()) throw ShapeMismatch("train and test task counts differ");
  TaskTable table;
  for (std::size_t j = 0; j < data.train.dim(); ++j) table.feature_names.push_back("x" + std::to_string(j));
  for (std::size_t t = 0; t < data.train.num_tasks(); ++t) {
    table.task_keys.push_back(std::to_string(t));
    auto rows = data.train.task(t).examples;
    std::vector<std::size_t> train(rows.size()), test;
    std::iota(train.begin(), train.end(), 0);
    for (const auto& ex : data.test.task(t).examples) {
      test.push_back(rows.size());
      rows.push_back(ex);
    }
    table.rows.push_back(std::move(rows));
    table.train_rows.push_back(std::move(train));
    table.test_rows.push_back(std::move(test));
  }
  return table;
}

}  // namespace mmtl
