#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>
#include <unistd.h>

#include "svbmpc/config.hpp"
#include "svbmpc/csv.hpp"
#include "svbmpc/experiment.hpp"
#include "svbmpc/model_io.hpp"

using namespace svbmpc;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() /
             ("svbmpc_test_" + tag + "_" + std::to_string(::getpid())))
  {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

ExperimentConfig fast_config()
{
  ExperimentConfig cfg;
  cfg.gen_len = 500;
  cfg.train_len = 250;
  cfg.valid_len = 240;
  cfg.steps = 120;
  cfg.solver_max_iter = 60;
  return cfg;
}

}  // namespace

TEST_CASE("csv round-trips bit-exactly")
{
  TempDir dir("csv");
  CsvTable t;
  t.columns = {"a", "b"};
  t.rows = {{1.0 / 3.0, -2.5e-17}, {3.14159265358979312, 1e300}};
  const std::string path = dir.str() + "/t.csv";
  write_csv(path, t);
  const CsvTable r = read_csv(path);
  REQUIRE(r.columns == t.columns);
  REQUIRE(r.rows.size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t j = 0; j < t.rows[i].size(); ++j)
      CHECK(r.rows[i][j] == t.rows[i][j]);
}

TEST_CASE("config parsing, overrides and unknown keys")
{
  TempDir dir("cfg");
  const std::string path = dir.str() + "/exp.cfg";
  {
    std::ofstream out(path);
    out << "# comment line\n";
    out << "plant.m_st = 2.5\n";
    out << "mpc.Q = 80\n";
    out << "run.seed = 7\n";
    out << "narx.standardize = false\n";
  }
  const ExperimentConfig cfg = load_config(path);
  CHECK(cfg.plant.m_st == 2.5);
  CHECK(cfg.mpc_Q == 80.0);
  CHECK(cfg.seed == 7);
  CHECK_FALSE(cfg.standardize);

  {
    std::ofstream out(path);
    out << "plant.unknown_field = 1\n";
  }
  CHECK_THROWS_AS(load_config(path), UsageError);

  {
    std::ofstream out(path);
    out << "plant.m_st = banana\n";
  }
  CHECK_THROWS_AS(load_config(path), UsageError);
}

TEST_CASE("model json round-trip preserves predictions")
{
  const ExperimentConfig cfg = fast_config();
  TempDir dir("model");
  const CsvTable data = gen_data(cfg, dir.str());
  const auto models = fit_models(data, cfg, dir.str());
  REQUIRE(models.size() == 2);

  const FittedModel loaded = load_model(dir.str() + "/model_y1.json");
  Vector z(5);
  z << 336.0, 336.2, 336.1, 1.0, 1.0;
  const auto a = predictive(models[0], z);
  const auto b = predictive(loaded, z);
  CHECK(a.mean == b.mean);
  CHECK(a.precision == b.precision);
  CHECK(a.dof == b.dof);
}

TEST_CASE("gen-data respects the input boxes and the seed")
{
  const ExperimentConfig cfg = fast_config();
  TempDir d1("gen1"), d2("gen2");
  const CsvTable a = gen_data(cfg, d1.str());
  const CsvTable b = gen_data(cfg, d2.str());
  CHECK(hash_file(d1.str() + "/data.csv") == hash_file(d2.str() + "/data.csv"));

  const auto u1 = a.column("u1");
  const auto u2 = a.column("u2");
  for (double v : u1) {
    CHECK(v >= 0.0);
    CHECK(v <= 60.0);
  }
  for (double v : u2) {
    CHECK(v >= 0.0);
    CHECK(v <= 2.0);
  }
}

TEST_CASE("gen-data noise multiplier scales the measurement spread")
{
  ExperimentConfig cfg = fast_config();
  cfg.gen_len = 1000;
  cfg.noise_mult = 3.0;
  TempDir dir("noise");
  const CsvTable t = gen_data(cfg, dir.str());
  const auto x1 = t.column("x1");
  const auto y1 = t.column("y1");
  double ss = 0.0;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    const double d = y1[i] - x1[i];
    ss += d * d;
  }
  const double sample_std = std::sqrt(ss / static_cast<double>(x1.size()));
  const double expected = 3.0 * std::sqrt(0.7);
  CHECK(sample_std > 0.9 * expected);
  CHECK(sample_std < 1.1 * expected);
}

TEST_CASE("fit command artifacts and determinism")
{
  const ExperimentConfig cfg = fast_config();
  TempDir dir("fit");
  const CsvTable data = gen_data(cfg, dir.str());
  fit_models(data, cfg, dir.str());
  const auto h1 = hash_file(dir.str() + "/model_y1.json");
  fit_models(data, cfg, dir.str());
  CHECK(hash_file(dir.str() + "/model_y1.json") == h1);
  CHECK(fs::exists(dir.str() + "/model_y2.json"));
  CHECK(fs::exists(dir.str() + "/fit_report.json"));
}

TEST_CASE("fit fails cleanly on an empty training split")
{
  ExperimentConfig cfg = fast_config();
  cfg.train_len = 2;
  TempDir dir("fitbad");
  CsvTable data;
  data.columns = {"t", "x1", "x2", "x3", "u1", "u2", "y1", "y2"};
  data.rows = {{0, 336, 336, 343, 1, 1, 336, 343},
               {0.1, 336, 336, 343, 1, 1, 336, 343}};
  CHECK_THROWS_AS(fit_models(data, cfg, dir.str()), UsageError);
}

TEST_CASE("validation traces have the declared schema and finite metrics")
{
  const ExperimentConfig cfg = fast_config();
  TempDir dir("val");
  const CsvTable data = gen_data(cfg, dir.str());
  const auto models = fit_models(data, cfg, dir.str());
  const ValidationMetrics m = validate_models(data, models, cfg, dir.str());
  REQUIRE(m.rmse.size() == 2);
  CHECK(std::isfinite(m.rmse[0]));
  CHECK(std::isfinite(m.rmse[1]));
  CHECK(m.rmse[0] < 5.0);
  CHECK(m.rmse[1] < 5.0);

  const CsvTable v1 = read_csv(dir.str() + "/validate_y1.csv");
  CHECK(v1.columns == std::vector<std::string>{"k", "y_true", "y_pred_mean",
                                               "y_pred_var", "abs_error"});
  CHECK(v1.rows.size() == static_cast<std::size_t>(cfg.valid_len));
}

TEST_CASE("validation on a noiseless exactly-linear plant is near exact")
{
  // Build a dataset from a known linear recursion and push it through the
  // fit/validate pipeline; one-step RMSE collapses to numerical noise.
  ExperimentConfig cfg = fast_config();
  cfg.noise_mult = 0.0;
  cfg.narx.degree = 1;
  cfg.valid_len = 200;
  TempDir dir("linval");

  CsvTable data;
  data.columns = {"t", "x1", "x2", "x3", "u1", "u2", "y1", "y2"};
  RngStream rng(5, "u");
  double y1 = 1.0, y2 = -0.5;
  double y1p = 1.0, y2p = -0.5, y1pp = 1.0, y2pp = -0.5;
  for (int k = 0; k < cfg.gen_len; ++k) {
    const double u1 = rng.uniform(-1.0, 1.0);
    const double u2 = rng.uniform(-1.0, 1.0);
    data.rows.push_back({0.1 * k, y1, 0.0, y2, u1, u2, y1, y2});
    const double y1n = 0.7 * y1 + 0.1 * y1p + 0.3 * u1 - 0.1 * u2;
    const double y2n = 0.5 * y2 + 0.2 * y2p + 0.4 * u2;
    y1pp = y1p; y1p = y1; y1 = y1n;
    y2pp = y2p; y2p = y2; y2 = y2n;
  }
  (void)y1pp;
  (void)y2pp;

  const auto models = fit_models(data, cfg, dir.str());
  const ValidationMetrics m = validate_models(data, models, cfg, dir.str());
  CHECK(m.rmse[0] < 1e-8);
  CHECK(m.rmse[1] < 1e-8);
}

TEST_CASE("closed loop tracks the references on the default plant")
{
  ExperimentConfig cfg = fast_config();
  cfg.noise_mult = 0.0;  // noise-free analogue of the tracking experiment
  cfg.steps = 300;
  TempDir dir("loop");
  const CsvTable data = gen_data(cfg, dir.str());
  const auto models = fit_models(data, cfg, dir.str());
  const RunMetrics m = run_closedloop(cfg, models, dir.str());

  CHECK(m.constraint_violations == 0);
  CHECK(m.final_mean_abs_err[0] < 0.5);
  CHECK(m.final_mean_abs_err[1] < 0.5);
  CHECK(std::isfinite(m.max_abs_delta[0]));
  CHECK(std::isfinite(m.max_abs_delta[1]));

  const CsvTable log = read_csv(dir.str() + "/mpc_log.csv");
  CHECK(log.columns ==
        std::vector<std::string>{"k", "y1_meas", "y2_meas", "y1_ref", "y2_ref",
                                 "u1", "u2", "J", "solver_iters", "delta1",
                                 "delta2"});
  const CsvTable trace = read_csv(dir.str() + "/closedloop_trace.csv");
  CHECK(trace.columns == std::vector<std::string>{"t", "x1", "x2", "x3", "u1",
                                                  "u2", "y1", "y2"});
  // Applied inputs never leave the boxes (checked post-hoc from traces).
  for (const auto& row : trace.rows) {
    CHECK(row[4] >= cfg.mpc_u1_min);
    CHECK(row[4] <= cfg.mpc_u1_max);
    CHECK(row[5] >= cfg.mpc_u2_min);
    CHECK(row[5] <= cfg.mpc_u2_max);
  }
  CHECK(fs::exists(dir.str() + "/cost_trace.csv"));
  CHECK(fs::exists(dir.str() + "/timing.json"));
}

TEST_CASE("zero-length closed loop emits empty traces and succeeds")
{
  ExperimentConfig cfg = fast_config();
  cfg.steps = 0;
  TempDir dir("zero");
  const CsvTable data = gen_data(cfg, dir.str());
  const auto models = fit_models(data, cfg, dir.str());
  const RunMetrics m = run_closedloop(cfg, models, dir.str());
  CHECK(m.constraint_violations == 0);
  const CsvTable trace = read_csv(dir.str() + "/closedloop_trace.csv");
  CHECK(trace.rows.empty());
}

TEST_CASE("fitted linearization keeps the near-integrator row sum")
{
  const ExperimentConfig cfg = fast_config();
  TempDir dir("lin");
  const CsvTable data = gen_data(cfg, dir.str());
  const auto models = fit_models(data, cfg, dir.str());
  bool fallback = false;
  const Vector u_ref = learned_reference_input(cfg, models, &fallback);
  for (int m = 0; m < 2; ++m) {
    const double y_ref = m == 0 ? cfg.y1_ref : cfg.y2_ref;
    const auto [a, b] = linearize(models[static_cast<std::size_t>(m)], y_ref,
                                  u_ref, cfg.lin_delta);
    const double row_sum = a.row(0).sum();
    CHECK(std::abs(row_sum - 1.0) < 0.2);
    // Companion structure below the first row, for every model.
    for (int i = 1; i < a.rows(); ++i) {
      CHECK(b(i, 0) == 0.0);
      CHECK(b(i, 1) == 0.0);
      for (int j = 0; j < a.cols(); ++j)
        CHECK(a(i, j) == (j == i - 1 ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("full pipeline is bit-reproducible under one seed")
{
  const ExperimentConfig cfg = fast_config();
  TempDir d1("pipe1"), d2("pipe2");
  run_pipeline(cfg, d1.str());
  run_pipeline(cfg, d2.str());
  CHECK(hash_artifacts(d1.str()) == hash_artifacts(d2.str()));
}

TEST_CASE("training-split error stays below validation error on most seeds")
{
  int wins = 0;
  const int n_seeds = 10;
  for (int s = 0; s < n_seeds; ++s) {
    ExperimentConfig cfg = fast_config();
    cfg.seed = 300 + static_cast<std::uint64_t>(s);
    TempDir dir("split" + std::to_string(s));
    const CsvTable data = gen_data(cfg, dir.str());
    const auto models = fit_models(data, cfg, dir.str());

    // Validation on the held-out continuation.
    const ValidationMetrics held = validate_models(data, models, cfg, dir.str());

    // Validation on the training rows themselves.
    ExperimentConfig on_train = cfg;
    on_train.valid_len = cfg.train_len - cfg.narx.max_lag() - 1;
    on_train.train_len = cfg.narx.max_lag() + 1;
    const ValidationMetrics train =
        validate_models(data, models, on_train, dir.str() + "/t");
    if (train.rmse[0] <= held.rmse[0] + 1e-12 &&
        train.rmse[1] <= held.rmse[1] + 1e-12)
      ++wins;
  }
  CHECK(wins >= static_cast<int>(0.9 * n_seeds) - 1);
}

#ifdef SVBMPC_CLI_PATH
TEST_CASE("cli pipeline is deterministic and respects exit codes")
{
  TempDir d1("cli1"), d2("cli2");
  const std::string cli = SVBMPC_CLI_PATH;
  const auto run = [&](const std::string& args) {
    const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str());
  };

  for (const auto* dir : {&d1, &d2}) {
    const std::string out = dir->str();
    REQUIRE(run("gen-data --seed 42 --out " + out) == 0);
    REQUIRE(run("fit --data " + out + "/data.csv --seed 42 --out " + out) == 0);
    REQUIRE(run("validate --data " + out + "/data.csv --models " + out +
                " --seed 42 --out " + out) == 0);
  }
  CHECK(hash_file(d1.str() + "/data.csv") == hash_file(d2.str() + "/data.csv"));
  CHECK(hash_file(d1.str() + "/model_y1.json") ==
        hash_file(d2.str() + "/model_y1.json"));
  CHECK(hash_file(d1.str() + "/validate_y1.csv") ==
        hash_file(d2.str() + "/validate_y1.csv"));

  // Usage errors exit with 1.
  const int bad = std::system((cli + " fit --data /nonexistent.csv --out " +
                               d1.str() + " >/dev/null 2>&1")
                                  .c_str());
  CHECK(WEXITSTATUS(bad) == 1);
}
#endif
