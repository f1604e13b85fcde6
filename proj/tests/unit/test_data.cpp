#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "mmtl/data.hpp"
#include "mmtl/solver.hpp"
#include "support.hpp"

using namespace mmtl;
namespace fs = std::filesystem;

#ifndef MMTL_TEST_DATA_DIR
#define MMTL_TEST_DATA_DIR "tests/data"
#endif

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mmtl_data_tests";
  fs::create_directories(dir);
  return dir / name;
}

fs::path write_text(const std::string& name, const std::string& body) {
  const fs::path p = scratch(name);
  std::ofstream(p, std::ios::binary) << body;
  return p;
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

fs::path write_idx_images(const std::string& name, std::size_t n, std::size_t r, std::size_t c,
                          const std::vector<std::uint8_t>& px, std::uint32_t magic = 0x803) {
  const fs::path p = scratch(name);
  std::ofstream out(p, std::ios::binary);
  put_u32(out, magic);
  put_u32(out, static_cast<std::uint32_t>(n));
  put_u32(out, static_cast<std::uint32_t>(r));
  put_u32(out, static_cast<std::uint32_t>(c));
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  return p;
}

fs::path write_idx_labels(const std::string& name, const std::vector<std::uint8_t>& labels) {
  const fs::path p = scratch(name);
  std::ofstream out(p, std::ios::binary);
  put_u32(out, 0x801);
  put_u32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
  return p;
}

const TaskTableSchema kToySchema{"task", {"a", "b"}, "y", std::nullopt};

}  // namespace

TEST_SUITE("data") {

TEST_CASE("two-modes shapes and determinism") {
  TwoModesConfig cfg;
  cfg.seed = 3;
  const auto a = generate_two_modes(cfg);
  CHECK(a.train.num_tasks() == 55);
  CHECK(a.train.dim() == 10);
  CHECK(a.train.task(0).size() == 5);
  CHECK(a.test.task(54).size() == 15);
  CHECK(norm(a.mu) == doctest::Approx(5.0));
  const auto b = generate_two_modes(cfg);
  CHECK(a.train.task(7).examples[2].x == b.train.task(7).examples[2].x);
  CHECK(a.test.task(50).examples[0].y == b.test.task(50).examples[0].y);
  cfg.seed = 4;
  CHECK(generate_two_modes(cfg).mu != a.mu);
}

TEST_CASE("two-modes without noise: type-1 tasks share one exact predictor") {
  TwoModesConfig cfg;
  cfg.sigma_task = 0.0;
  cfg.sigma_noise = 0.0;
  cfg.seed = 9;
  const auto g = generate_two_modes(cfg);
  for (std::size_t t = 0; t < cfg.n_type1; ++t) {
    CHECK(g.true_params.row(t)[0] == g.mu[0]);
    for (const auto& e : g.test.task(t).examples) CHECK(dot(g.mu, e.x) == doctest::Approx(e.y).epsilon(1e-12));
  }
  for (std::size_t t = cfg.n_type1; t < 55; ++t) CHECK(g.true_params.row(t)[3] == doctest::Approx(-2.0 * g.mu[3]));
  const auto fresh = generate_ltl_two_modes_test_tasks(cfg, g.mu, 55);
  CHECK(fresh.train.num_tasks() == 55);
  for (const auto& e : fresh.test.task(0).examples) CHECK(dot(g.mu, e.x) == doctest::Approx(e.y).epsilon(1e-12));
  for (const auto& e : fresh.test.task(52).examples) CHECK(-2.0 * dot(g.mu, e.x) == doctest::Approx(e.y).epsilon(1e-12));
}

TEST_CASE("two-modes task parameters concentrate at mu; inputs are isotropic") {
  TwoModesConfig cfg;
  cfg.n_type1 = 4000;
  cfg.n_type2 = 1;
  cfg.m_train = 1;
  cfg.m_test = 1;
  cfg.sigma_task = 0.5;
  cfg.seed = 12;
  const auto g = generate_two_modes(cfg);
  Vector mean(cfg.d, 0.0);
  for (std::size_t t = 0; t < cfg.n_type1; ++t)
    for (std::size_t j = 0; j < cfg.d; ++j) mean[j] += g.true_params(t, j) / static_cast<double>(cfg.n_type1);
  for (std::size_t j = 0; j < cfg.d; ++j)
    CHECK(std::abs(mean[j] - g.mu[j]) < 3.0 * 0.5 / std::sqrt(static_cast<double>(cfg.n_type1)) * 1.5);

  cfg = TwoModesConfig{};
  cfg.n_type1 = 1;
  cfg.n_type2 = 0;
  cfg.m_train = 20000;
  const auto big = generate_two_modes(cfg);
  Matrix cov(cfg.d, cfg.d);
  const auto& ex = big.train.task(0).examples;
  for (const auto& e : ex)
    for (std::size_t i = 0; i < cfg.d; ++i)
      for (std::size_t j = 0; j < cfg.d; ++j) cov(i, j) += e.x[i] * e.x[j] / static_cast<double>(ex.size());
  CHECK(max_abs_diff(cov, Matrix::identity(cfg.d)) < 0.06);
}

TEST_CASE("fresh LTL tasks keep the mode proportions and differ from training draws") {
  TwoModesConfig cfg;
  cfg.seed = 5;
  const auto g = generate_two_modes(cfg);
  const auto fresh = generate_ltl_two_modes_test_tasks(cfg, g.mu, 11);
  CHECK(fresh.train.num_tasks() == 11);
  CHECK(fresh.train.task(0).examples[0].x != g.train.task(0).examples[0].x);
  CHECK_THROWS_AS(generate_ltl_two_modes_test_tasks(cfg, Vector(3, 1.0), 5), ShapeMismatch);
}

TEST_CASE("toy task table with a last-row holdout") {
  const auto p = write_text("toy.csv",
                            "task,a,b,y\n"
                            "s1,1,0,1\ns1,0,1,2\ns1,1,1,3\ns1,2,0,4\n"
                            "s2,1,0,5\ns2,0,1,6\ns2,1,1,7\ns2,2,0,8\n"
                            "s3,1,0,9\ns3,0,1,10\ns3,1,1,11\ns3,2,0,12\n");
  const auto t = load_task_table(p, kToySchema, SplitRule{});
  CHECK(t.num_tasks() == 3);
  CHECK(t.task_keys == std::vector<std::string>{"s1", "s2", "s3"});
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(t.train_rows[k].size() == 3);
    CHECK(t.test_rows[k] == std::vector<std::size_t>{3});
  }
  CHECK(t.test().task(1).examples[0].y == 8.0);
  CHECK(t.train().task(2).size() == 3);
  CHECK(t.all().task(0).size() == 4);
}

TEST_CASE("task table errors") {
  const auto bad_cell = write_text("bad_cell.csv", "task,a,b,y\ns1,1,0,1\ns1,0,1,oops\n");
  try {
    load_task_table(bad_cell, kToySchema, SplitRule{});
    FAIL("expected NonNumericCellError");
  } catch (const NonNumericCellError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    CHECK(std::string(e.what()).find("'y'") != std::string::npos);
  }
  const auto missing = write_text("missing.csv", "task,a,y\ns1,1,1\n");
  CHECK_THROWS_AS(load_task_table(missing, kToySchema, SplitRule{}), MissingColumnError);
  const auto tiny = write_text("tiny.csv", "task,a,b,y\ns1,1,0,1\ns2,1,1,1\ns2,0,0,2\n");
  CHECK_THROWS_AS(load_task_table(tiny, kToySchema, SplitRule{}), EmptyTaskError);
  CHECK_THROWS_AS(load_task_table(scratch("nope.csv"), kToySchema, SplitRule{}), DataError);
}

TEST_CASE("random split is seeded and keeps the per-task counts") {
  const auto p = write_text("rand.csv", "task,a,b,y\nA,1,0,1\nA,0,1,2\nA,1,1,3\nA,2,2,4\nA,3,1,5\nB,1,0,1\nB,1,1,2\nB,0,1,3\n");
  SplitRule r{SplitRule::Kind::random, 2, 77};
  const auto a = load_task_table(p, kToySchema, r);
  const auto b = load_task_table(p, kToySchema, r);
  CHECK(a.test_rows == b.test_rows);
  CHECK(a.test_rows[0].size() == 2);
  CHECK(a.train_rows[0].size() == 3);
  CHECK(a.train_rows[1].size() == 1);
}

TEST_CASE("task table round trip") {
  TwoModesConfig cfg;
  cfg.n_type1 = 3;
  cfg.n_type2 = 2;
  cfg.seed = 8;
  const auto g = generate_two_modes(cfg);
  const TaskTable t = to_task_table(TrainTestPair{g.train, g.test});
  const auto p = scratch("roundtrip.csv");
  write_task_table(p, t);
  const auto back = load_task_table(p, schema_for_written(t), SplitRule{SplitRule::Kind::column, 1, 0});
  CHECK(back.task_keys == t.task_keys);
  CHECK(back.train_rows == t.train_rows);
  CHECK(back.test_rows == t.test_rows);
  for (std::size_t k = 0; k < t.num_tasks(); ++k)
    for (std::size_t i = 0; i < t.rows[k].size(); ++i) {
      CHECK(back.rows[k][i].x == t.rows[k][i].x);
      CHECK(back.rows[k][i].y == t.rows[k][i].y);
    }
}

TEST_CASE("personal-computer shaped table: 189 tasks, 16/4 split") {
  TaskTableSchema s{"subject", {}, "rating", std::string("is_test")};
  for (int j = 0; j < 13; ++j) s.feature_columns.push_back("f" + std::to_string(j));
  const auto t = load_task_table(fs::path(MMTL_TEST_DATA_DIR) / "computer_standin.csv", s,
                                 SplitRule{SplitRule::Kind::column, 1, 0});
  CHECK(t.num_tasks() == 189);
  CHECK(t.dim() == 13);
  for (std::size_t k = 0; k < t.num_tasks(); ++k) {
    CHECK(t.train_rows[k].size() == 16);
    CHECK(t.test_rows[k].size() == 4);
  }
  const auto last4 = load_task_table(fs::path(MMTL_TEST_DATA_DIR) / "computer_standin.csv",
                                     TaskTableSchema{s.task_column, s.feature_columns, s.target_column, std::nullopt},
                                     SplitRule{SplitRule::Kind::last_n, 4, 0});
  CHECK(last4.test_rows == t.test_rows);
}

TEST_CASE("idx reading") {
  const std::vector<std::uint8_t> px{0, 255, 10, 20, 30, 40, 50, 60};
  const auto img = read_idx_images(write_idx_images("two.idx", 2, 2, 2, px));
  CHECK(img.count == 2);
  CHECK(img.rows == 2);
  CHECK(img.pixels == px);
  const Matrix f = to_feature_matrix(img);
  CHECK(f.rows() == 2);
  CHECK(f.cols() == 4);
  CHECK(f(0, 1) == 1.0);
  CHECK(read_idx_labels(write_idx_labels("two.lbl", {3, 7})) == std::vector<std::uint8_t>{3, 7});

  CHECK_THROWS_AS(read_idx_images(write_idx_images("badmagic.idx", 2, 2, 2, px, 0x802)), CorruptIdxError);
  CHECK_THROWS_AS(read_idx_images(write_idx_images("short.idx", 3, 2, 2, px)), CorruptIdxError);
  CHECK_THROWS_AS(read_idx_labels(write_idx_images("wrongkind.idx", 2, 2, 2, px)), CorruptIdxError);
  CHECK_THROWS_AS(read_idx_images(scratch("absent.idx")), DataError);
}

TEST_CASE("gzip fixtures decode") {
  const auto img = read_idx_images(fs::path(MMTL_TEST_DATA_DIR) / "mnist5k-test-images-idx3-ubyte.gz");
  const auto lab = read_idx_labels(fs::path(MMTL_TEST_DATA_DIR) / "mnist5k-test-labels-idx1-ubyte.gz");
  CHECK(img.rows == 28);
  CHECK(img.cols == 28);
  CHECK(img.count == lab.size());
  std::map<int, int> per;
  for (auto l : lab) ++per[l];
  CHECK(per.size() == 10);
}

TEST_CASE("tournament spec and build") {
  TournamentSpec spec;
  CHECK(spec.pairs().size() == 45);
  CHECK(spec.pairs().front() == std::pair<std::size_t, std::size_t>{0, 1});
  CHECK(spec.pairs()[9] == std::pair<std::size_t, std::size_t>{1, 2});

  // Three classes, clearly separated, four points each.
  KeyedRng rng(61, {1});
  Matrix x(12, 3);
  std::vector<std::uint8_t> y;
  for (std::size_t i = 0; i < 12; ++i) {
    const std::size_t cls = i % 3;
    y.push_back(static_cast<std::uint8_t>(cls));
    for (std::size_t j = 0; j < 3; ++j) x(i, j) = (j == cls ? 5.0 : 0.0) + 0.1 * rng.normal();
  }
  TournamentSpec s3{3, 3, 0.5};
  const auto tour = build_mnist_tournament(x, y, s3);
  CHECK(tour.train.num_tasks() == 3);
  CHECK(tour.retained_per_class == std::vector<std::size_t>{2, 2, 2});
  for (std::size_t k = 0; k < 3; ++k) {
    int pos = 0, neg = 0;
    for (const auto& e : tour.train.task(k).examples) (e.y > 0 ? pos : neg)++;
    CHECK(pos == 2);
    CHECK(neg == 2);
  }
  // Task 0 is the pair (0, 1): its first example is row 0 (class 0, +1).
  CHECK(tour.train.task(0).examples[0].y == 1.0);
  CHECK(tour.train.task(0).examples[0].x == Vector(tour.pca.reduced.row(0).begin(), tour.pca.reduced.row(0).end()));

  std::vector<std::uint8_t> missing(12, 0);
  CHECK_THROWS(build_mnist_tournament(x, missing, s3));
}

TEST_CASE("tournament decode") {
  TournamentSpec spec;
  const auto pairs = spec.pairs();
  Vector all_first(45, 1.0);
  CHECK(tournament_decode(all_first, spec) == 0);

  // 3 and 7 both win 8 games: 3 loses only to 0, 7 only to 3; elsewhere the higher class wins.
  Vector s(45, 0.0);
  for (std::size_t k = 0; k < 45; ++k) {
    const auto [a, b] = pairs[k];
    auto wins = [&](std::size_t w) { s[k] = w == a ? 1.0 : -1.0; };
    if (a == 3 && b == 7) wins(3);
    else if (a == 3 || b == 3) wins(b == 3 && a == 0 ? a : 3);
    else if (a == 7 || b == 7) wins(7);
    else wins(b);
  }
  CHECK(tournament_decode(s, spec) == 3);
  CHECK_THROWS(tournament_decode(Vector(44, 1.0), spec));

  KeyedRng rng(61, {2});
  for (int i = 0; i < 500; ++i) {
    Vector r(45);
    for (double& x : r) x = rng.below(7) == 0 ? 0.0 : rng.normal();
    std::vector<int> votes(10, 0);
    for (std::size_t k = 0; k < 45; ++k) ++votes[r[k] >= 0.0 ? pairs[k].first : pairs[k].second];
    const auto best = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    CHECK(tournament_decode(r, spec) == best);
  }
}

TEST_CASE("two-modes dump reloads to the generated tasks") {
  TwoModesConfig cfg;
  cfg.n_type1 = 4;
  cfg.n_type2 = 1;
  cfg.seed = 21;
  const auto csv = scratch("dump.csv");
  write_two_modes_dump(csv, cfg);
  const auto g = generate_two_modes(cfg);
  const TaskTable t = load_task_table(csv, schema_for_written(to_task_table(TrainTestPair{g.train, g.test})),
                                      SplitRule{SplitRule::Kind::column, 1, 0});
  CHECK(t.num_tasks() == 5);
  CHECK(t.train().task(3).examples[1].x == g.train.task(3).examples[1].x);
  CHECK(t.test().task(4).examples[2].y == g.test.task(4).examples[2].y);
  std::ifstream side(scratch("dump.json"));
  const auto doc = nlohmann::json::parse(side);
  CHECK(doc["seed"] == 21);
  CHECK(doc["n_type1"] == 4);
  CHECK(doc["sigma_task"] == 0.1);
}

TEST_CASE("full-dimension PCA: trace-ball risks do not depend on the input rotation") {
  KeyedRng rng(61, {3});
  const std::size_t d = 4, n = 30;
  Matrix x(n, d);
  std::vector<std::uint8_t> y;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = i % 3;
    y.push_back(static_cast<std::uint8_t>(cls));
    for (std::size_t j = 0; j < d; ++j) x(i, j) = (j == cls ? 2.0 : 0.0) + rng.normal();
  }
  const Matrix q = svd(gen::normal_matrix(rng, d, d)).V;
  Matrix xq(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k) xq(i, j) += x(i, k) * q(k, j);
  const TournamentSpec spec{3, d, 0.5};
  const auto a = build_mnist_tournament(x, y, spec);
  const auto b = build_mnist_tournament(xq, y, spec);
  SolveConfig cfg;
  cfg.max_iters = 300;
  const ModelConfig mc = AepConfig{AepConstrained{2.0}};
  const auto ra = solve(a.train, mc, Composer::max(), LossKind::hinge(), cfg);
  const auto rb = solve(b.train, mc, Composer::max(), LossKind::hinge(), cfg);
  const RiskVector va = risk_vector(ra.params, a.train, LossKind::hinge());
  const RiskVector vb = risk_vector(rb.params, b.train, LossKind::hinge());
  for (std::size_t t = 0; t < 3; ++t) CHECK(va[t] == doctest::Approx(vb[t]).epsilon(1e-8));
}

}
