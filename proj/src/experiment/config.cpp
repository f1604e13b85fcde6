#include <cmath>
#include <fstream>
#include <set>

#include "mmtl/experiment.hpp"

namespace mmtl {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void reject_unknown(const json& obj, const std::string& prefix, const std::set<std::string>& known) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key())) fail(join(prefix, it.key()), "unknown field");
}

const json* find(const json& obj, const std::string& key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double number(const json& v, const std::string& field) {
  if (!v.is_number()) fail(field, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(field, "must be finite");
  return x;
}

double positive(const json& v, const std::string& field) {
  const double x = number(v, field);
  if (!(x > 0.0)) fail(field, "must be positive");
  return x;
}

double nonnegative(const json& v, const std::string& field) {
  const double x = number(v, field);
  if (!(x >= 0.0)) fail(field, "must be nonnegative");
  return x;
}

std::uint64_t unsigned_int(const json& v, const std::string& field) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    fail(field, "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

std::size_t count(const json& v, const std::string& field) {
  const std::uint64_t n = unsigned_int(v, field);
  if (n < 1) fail(field, "must be at least 1");
  return static_cast<std::size_t>(n);
}

std::string text(const json& v, const std::string& field) {
  if (!v.is_string()) fail(field, "expected a string");
  return v.get<std::string>();
}

bool boolean(const json& v, const std::string& field) {
  if (!v.is_boolean()) fail(field, "expected true or false");
  return v.get<bool>();
}

const json& object(const json& v, const std::string& field) {
  if (!v.is_object()) fail(field, "expected an object");
  return v;
}

const json& array(const json& v, const std::string& field, bool nonempty = true) {
  if (!v.is_array()) fail(field, "expected an array");
  if (nonempty && v.empty()) fail(field, "must not be empty");
  return v;
}

const json& required(const json& obj, const std::string& prefix, const std::string& key) {
  const json* v = find(obj, key);
  if (!v) fail(join(prefix, key), "missing");
  return *v;
}

LossVariant parse_loss(const json& v, const std::string& field) {
  const std::string s = text(v, field);
  if (s == "squared") return LossVariant::squared;
  if (s == "hinge") return LossVariant::hinge;
  fail(field, "expected \"squared\" or \"hinge\"");
}

ComposerSpec parse_composer(const json& v, const std::string& field) {
  ComposerSpec c;
  auto set_level = [&](double level) {
    if (!(level > 0.0 && level < 1.0)) fail(field, "alpha_minimax level must lie in (0, 1)");
    c.kind = ComposerSpec::Kind::alpha_minimax;
    c.level = level;
  };
  if (v.is_object()) {
    if (v.size() != 1 || !v.contains("alpha_minimax")) fail(field, "expected {\"alpha_minimax\": level}");
    set_level(number(v["alpha_minimax"], field + ".alpha_minimax"));
    return c;
  }
  const std::string s = text(v, field);
  if (s == "l1") c.kind = ComposerSpec::Kind::l1;
  else if (s == "l2") c.kind = ComposerSpec::Kind::l2;
  else if (s == "minimax" || s == "max") c.kind = ComposerSpec::Kind::minimax;
  else if (s.rfind("alpha_minimax(", 0) == 0 && s.back() == ')') {
    try {
      set_level(std::stod(s.substr(14, s.size() - 15)));
    } catch (const std::logic_error&) {
      fail(field, "cannot read the level in '" + s + "'");
    }
  } else {
    fail(field, "unknown composer '" + s + "'");
  }
  return c;
}

void parse_solver(const json& v, SolveConfig& out) {
  const std::string p = "solver";
  object(v, p);
  reject_unknown(v, p, {"max_iters", "step0", "step_schedule", "tol", "patience", "refit_task_blocks"});
  if (auto* x = find(v, "max_iters")) out.max_iters = count(*x, p + ".max_iters");
  if (auto* x = find(v, "step0")) out.step0 = positive(*x, p + ".step0");
  if (auto* x = find(v, "tol")) out.tol = positive(*x, p + ".tol");
  if (auto* x = find(v, "patience")) out.patience = count(*x, p + ".patience");
  if (auto* x = find(v, "refit_task_blocks")) out.refit_task_blocks = boolean(*x, p + ".refit_task_blocks");
  if (auto* x = find(v, "step_schedule")) {
    const std::string s = text(*x, p + ".step_schedule");
    if (s == "inv_sqrt") out.step_schedule = StepSchedule::inv_sqrt;
    else if (s == "constant") out.step_schedule = StepSchedule::constant;
    else fail(p + ".step_schedule", "expected \"inv_sqrt\" or \"constant\"");
  }
}

void parse_two_modes(const json& v, ExperimentConfig& cfg) {
  const std::string p = "two_modes";
  object(v, p);
  reject_unknown(v, p, {"d", "n_type1", "n_type2", "mode_radius", "sigma_task", "sigma_noise", "m_train", "m_test",
                        "ltl_tasks"});
  TwoModesConfig& t = cfg.two_modes;
  if (auto* x = find(v, "d")) t.d = count(*x, p + ".d");
  if (auto* x = find(v, "n_type1")) t.n_type1 = static_cast<std::size_t>(unsigned_int(*x, p + ".n_type1"));
  if (auto* x = find(v, "n_type2")) t.n_type2 = static_cast<std::size_t>(unsigned_int(*x, p + ".n_type2"));
  if (auto* x = find(v, "mode_radius")) t.mode_radius = nonnegative(*x, p + ".mode_radius");
  if (auto* x = find(v, "sigma_task")) t.sigma_task = nonnegative(*x, p + ".sigma_task");
  if (auto* x = find(v, "sigma_noise")) t.sigma_noise = nonnegative(*x, p + ".sigma_noise");
  if (auto* x = find(v, "m_train")) t.m_train = count(*x, p + ".m_train");
  if (auto* x = find(v, "m_test")) t.m_test = count(*x, p + ".m_test");
  if (auto* x = find(v, "ltl_tasks")) cfg.ltl_tasks = count(*x, p + ".ltl_tasks");
  if (t.n_type1 + t.n_type2 < 1) fail(p + ".n_type1", "two-modes needs at least one task");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& s) {
  std::filesystem::path p(s);
  return p.is_absolute() || base.empty() ? p : base / p;
}

TaskTableSection parse_task_table(const json& v, const std::filesystem::path& base) {
  const std::string p = "task_table";
  object(v, p);
  reject_unknown(v, p, {"path", "task_column", "feature_columns", "target_column", "split_column", "split", "folds",
                        "metrics"});
  TaskTableSection s;
  s.path = resolve(base, text(required(v, p, "path"), p + ".path"));
  s.schema.task_column = text(required(v, p, "task_column"), p + ".task_column");
  s.schema.target_column = text(required(v, p, "target_column"), p + ".target_column");
  const json& feats = array(required(v, p, "feature_columns"), p + ".feature_columns");
  for (std::size_t i = 0; i < feats.size(); ++i)
    s.schema.feature_columns.push_back(text(feats[i], p + ".feature_columns[" + std::to_string(i) + "]"));
  if (auto* x = find(v, "split_column")) s.schema.split_column = text(*x, p + ".split_column");
  if (auto* x = find(v, "split")) {
    const std::string q = p + ".split";
    object(*x, q);
    reject_unknown(*x, q, {"kind", "holdout", "seed"});
    const std::string kind = text(required(*x, q, "kind"), q + ".kind");
    if (kind == "last_n") s.split.kind = SplitRule::Kind::last_n;
    else if (kind == "random") s.split.kind = SplitRule::Kind::random;
    else if (kind == "column") s.split.kind = SplitRule::Kind::column;
    else fail(q + ".kind", "expected \"last_n\", \"random\" or \"column\"");
    if (auto* h = find(*x, "holdout")) s.split.holdout = count(*h, q + ".holdout");
    if (auto* h = find(*x, "seed")) s.split.seed = unsigned_int(*h, q + ".seed");
    if (s.split.kind == SplitRule::Kind::column && !s.schema.split_column)
      fail(p + ".split_column", "required when split.kind is \"column\"");
  }
  if (auto* x = find(v, "folds")) {
    s.folds = count(*x, p + ".folds");
    if (*s.folds < 2) fail(p + ".folds", "must be at least 2");
  }
  if (auto* x = find(v, "metrics")) {
    const json& arr = array(*x, p + ".metrics");
    s.metrics.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string field = p + ".metrics[" + std::to_string(i) + "]";
      try {
        s.metrics.push_back(parse_metric_kind(text(arr[i], field)));
      } catch (const InvalidArgument& e) {
        fail(field, e.what());
      }
      if (s.metrics.back() == MetricKind::multiclass_01) fail(field, "multiclass_01 applies to mnist only");
    }
  }
  return s;
}

MnistSection parse_mnist(const json& v, const std::filesystem::path& base) {
  const std::string p = "mnist";
  object(v, p);
  reject_unknown(v, p, {"train_images", "train_labels", "test_images", "test_labels", "pca_dim", "train_fraction",
                        "n_classes"});
  MnistSection s;
  s.train_images = resolve(base, text(required(v, p, "train_images"), p + ".train_images"));
  s.train_labels = resolve(base, text(required(v, p, "train_labels"), p + ".train_labels"));
  s.test_images = resolve(base, text(required(v, p, "test_images"), p + ".test_images"));
  s.test_labels = resolve(base, text(required(v, p, "test_labels"), p + ".test_labels"));
  if (auto* x = find(v, "pca_dim")) s.spec.pca_dim = count(*x, p + ".pca_dim");
  if (auto* x = find(v, "n_classes")) s.spec.n_classes = count(*x, p + ".n_classes");
  if (auto* x = find(v, "train_fraction")) {
    s.spec.train_fraction = positive(*x, p + ".train_fraction");
    if (s.spec.train_fraction > 1.0) fail(p + ".train_fraction", "must be at most 1");
  }
  if (s.spec.n_classes < 2) fail(p + ".n_classes", "must be at least 2");
  return s;
}

TheorySection parse_theory(const json& v) {
  const std::string p = "theory";
  object(v, p);
  reject_unknown(v, p, {"task_grid", "gamma_grid", "gamma", "delta", "meta_reps", "loss"});
  TheorySection s;
  if (auto* x = find(v, "task_grid")) {
    s.task_grid.clear();
    const json& arr = array(*x, p + ".task_grid");
    for (std::size_t i = 0; i < arr.size(); ++i)
      s.task_grid.push_back(count(arr[i], p + ".task_grid[" + std::to_string(i) + "]"));
  }
  if (auto* x = find(v, "gamma_grid")) {
    s.gamma_grid.clear();
    const json& arr = array(*x, p + ".gamma_grid");
    for (std::size_t i = 0; i < arr.size(); ++i)
      s.gamma_grid.push_back(positive(arr[i], p + ".gamma_grid[" + std::to_string(i) + "]"));
  }
  if (auto* x = find(v, "gamma")) s.gamma = positive(*x, p + ".gamma");
  if (auto* x = find(v, "delta")) {
    s.delta = positive(*x, p + ".delta");
    if (s.delta >= 1.0) fail(p + ".delta", "must lie in (0, 1)");
  }
  if (auto* x = find(v, "meta_reps")) s.meta_reps = count(*x, p + ".meta_reps");
  if (auto* x = find(v, "loss")) s.loss = parse_loss(*x, p + ".loss");
  return s;
}

ExperimentConfig parse_config_at(const json& doc, const std::filesystem::path& base) {
  if (!doc.is_object()) fail("(root)", "expected a JSON object");
  reject_unknown(doc, "", {"experiment", "model", "mode", "composers", "capacity_grid", "replicates", "seed", "loss",
                           "solver", "ltl", "save_checkpoints", "save_datasets", "output_dir", "model_params", "two_modes",
                           "task_table", "mnist", "theory"});
  ExperimentConfig cfg;
  cfg.source = doc;

  const std::string exp = text(required(doc, "", "experiment"), "experiment");
  if (exp == "two_modes") cfg.experiment = ExperimentKind::two_modes;
  else if (exp == "task_table") cfg.experiment = ExperimentKind::task_table;
  else if (exp == "mnist") cfg.experiment = ExperimentKind::mnist;
  else if (exp == "theory") cfg.experiment = ExperimentKind::theory;
  else fail("experiment", "expected two_modes, task_table, mnist or theory");
  const bool trains = cfg.experiment != ExperimentKind::theory;

  if (cfg.experiment == ExperimentKind::mnist) {
    cfg.model = ModelKind::aep;
    cfg.loss = LossVariant::hinge;
  }
  if (auto* x = find(doc, "model")) {
    const std::string s = text(*x, "model");
    if (s == "ep") cfg.model = ModelKind::ep;
    else if (s == "aep") cfg.model = ModelKind::aep;
    else fail("model", "expected \"ep\" or \"aep\"");
  }
  if (auto* x = find(doc, "mode")) {
    const std::string s = text(*x, "mode");
    if (s == "constrained") cfg.mode = ModelMode::constrained;
    else if (s == "regularized") cfg.mode = ModelMode::regularized;
    else fail("mode", "expected \"constrained\" or \"regularized\"");
  }
  if (trains || find(doc, "composers")) {
    const json& arr = array(required(doc, "", "composers"), "composers");
    for (std::size_t i = 0; i < arr.size(); ++i)
      cfg.composers.push_back(parse_composer(arr[i], "composers[" + std::to_string(i) + "]"));
  }
  if (trains || find(doc, "capacity_grid")) {
    const json& arr = array(required(doc, "", "capacity_grid"), "capacity_grid");
    for (std::size_t i = 0; i < arr.size(); ++i)
      cfg.capacity_grid.push_back(positive(arr[i], "capacity_grid[" + std::to_string(i) + "]"));
  }
  if (auto* x = find(doc, "replicates")) cfg.replicates = count(*x, "replicates");
  if (auto* x = find(doc, "seed")) cfg.seed = unsigned_int(*x, "seed");
  if (auto* x = find(doc, "loss")) cfg.loss = parse_loss(*x, "loss");
  if (auto* x = find(doc, "solver")) parse_solver(*x, cfg.solver);
  cfg.solver.seed = cfg.seed;
  if (auto* x = find(doc, "ltl")) cfg.ltl = boolean(*x, "ltl");
  if (auto* x = find(doc, "save_checkpoints")) cfg.save_checkpoints = boolean(*x, "save_checkpoints");
  if (auto* x = find(doc, "save_datasets")) cfg.save_datasets = boolean(*x, "save_datasets");
  if (auto* x = find(doc, "output_dir")) cfg.output_dir = resolve(base, text(*x, "output_dir"));
  if (auto* x = find(doc, "model_params")) {
    object(*x, "model_params");
    reject_unknown(*x, "model_params", {"tau0", "lambda0"});
    if (auto* y = find(*x, "tau0")) cfg.tau0 = positive(*y, "model_params.tau0");
    if (auto* y = find(*x, "lambda0")) cfg.lambda0 = positive(*y, "model_params.lambda0");
  }
  if (auto* x = find(doc, "two_modes")) parse_two_modes(*x, cfg);
  if (auto* x = find(doc, "task_table")) cfg.task_table = parse_task_table(*x, base);
  if (auto* x = find(doc, "mnist")) cfg.mnist = parse_mnist(*x, base);
  if (auto* x = find(doc, "theory")) cfg.theory = parse_theory(*x);

  if (cfg.experiment == ExperimentKind::task_table && !cfg.task_table) fail("task_table", "missing");
  if (cfg.experiment == ExperimentKind::mnist && !cfg.mnist) fail("mnist", "missing");
  if (cfg.experiment == ExperimentKind::two_modes && cfg.loss != LossVariant::squared)
    fail("loss", "two_modes is a regression experiment; use \"squared\"");
  if (cfg.experiment == ExperimentKind::mnist && cfg.loss != LossVariant::hinge)
    fail("loss", "mnist tasks are binary; use \"hinge\"");
  return cfg;
}

}  // namespace

std::string ComposerSpec::name() const {
  switch (kind) {
    case Kind::l1: return "l1";
    case Kind::l2: return "l2";
    case Kind::minimax: return "minimax";
    case Kind::alpha_minimax: {
      char buf[48];
      std::snprintf(buf, sizeof buf, "alpha_minimax(%g)", level);
      return buf;
    }
  }
  return "unknown";
}

Composer ComposerSpec::build(std::size_t num_tasks) const {
  switch (kind) {
    case Kind::l1: return Composer::uniform_l1(num_tasks);
    case Kind::l2: return Composer::l2();
    case Kind::minimax: return Composer::max();
    case Kind::alpha_minimax: return Composer::alpha_minimax(default_alpha(num_tasks, level));
  }
  throw InvalidArgument("unknown composer");
}

ModelConfig ExperimentConfig::model_config(double capacity) const {
  if (model == ModelKind::ep) {
    if (mode == ModelMode::constrained) return EpConfig{EpConstrained{tau0, capacity}};
    return EpConfig{EpRegularized{lambda0, capacity}};
  }
  if (mode == ModelMode::constrained) return AepConfig{AepConstrained{capacity}};
  return AepConfig{AepRegularized{capacity}};
}

ExperimentConfig parse_config(const json& doc) { return parse_config_at(doc, {}); }

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config_at(doc, path.parent_path());
}

}  // namespace mmtl
