#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "crossfusor/run_config.hpp"
#include "crossfusor/visualize.hpp"

using namespace crossfusor;
namespace fs = std::filesystem;

namespace {

TEST(RunConfig, DefaultsMirrorModelTable) {
  const RunConfig c = resolve_run_config("", io::Json::object(), nullptr);
  const ModelConfig m = c.model_config();
  EXPECT_EQ(m.to_json(), ModelConfig().to_json());
  EXPECT_EQ(c.horizon_seconds, (std::vector<int>{1, 2, 3, 4, 5}));
  EXPECT_TRUE(c.data.empty());
}

TEST(RunConfig, PrecedenceDefaultsFileFlags) {
  const fs::path file = fs::temp_directory_path() / "crossfusor_cfg_test.json";
  io::write_json(file, {{"epochs", 3}, {"lr", 5e-4}, {"beta-start", 2e-4}, {"data", "from_file"}});
  const RunConfig c = resolve_run_config(file.string(), {{"epochs", 7}}, "from_env");
  EXPECT_EQ(c.epochs, 7);           // flag beats file
  EXPECT_DOUBLE_EQ(c.lr, 5e-4);     // file beats default
  EXPECT_DOUBLE_EQ(c.beta_start, 2e-4);
  EXPECT_EQ(c.batch, 64);           // default
  EXPECT_EQ(c.data, "from_file");   // explicit data beats the environment
  EXPECT_EQ(resolve_run_config("", io::Json::object(), "from_env").data, "from_env");
  fs::remove(file);
}

TEST(RunConfig, RoundTripsThroughItsOwnJson) {
  RunConfig a;
  a.seed = 11;
  a.ablation = "no_cross_attention";
  a.unet_channels = {4, 8};
  RunConfig b;
  b.apply(a.to_json());
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_FALSE(b.model_config().cross_attention);
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error";
  return ErrorKind::invalid_argument;
}

TEST(RunConfig, ValidationFailsFast) {
  EXPECT_EQ(kind_of([] { resolve_run_config("", {{"nonsense", 1}}, nullptr); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { resolve_run_config("", {{"epochs", "many"}}, nullptr); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { resolve_run_config("", {{"ablation", "no_unet"}}, nullptr); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { resolve_run_config("", {{"beta_start", 0.5}, {"beta_end", 0.1}}, nullptr); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { resolve_run_config("", {{"horizon_seconds", {6}}}, nullptr); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { resolve_run_config("/nonexistent/cfg.json", io::Json::object(), nullptr); }),
            ErrorKind::missing_input);
}

struct TraceFixture {
  ModelConfig cfg;
  ParameterSet params;
  data::NormalizationStats norm;
  data::PlatoonWindow window;

  TraceFixture() {
    cfg.gru_hidden = 4;
    cfg.gru_layers = 1;
    cfg.feed_forward = 8;
    cfg.unet_channels = {2, 4};
    cfg.diffusion_steps = 20;
    cfg.beta_start = 1e-3;
    cfg.beta_end = 0.2;
    params = init_parameters(cfg, 4);
    const auto windows = data::window_platoons(data::generate_synthetic(2, 3, data::Scenario::brake), 20).windows;
    norm = data::fit_normalization(windows).stats;
    window = windows[3];
  }
};

TEST(Visualize, FinalStateEqualsEvaluationPrediction) {
  const TraceFixture f;
  const auto trace = trace_denoising(f.cfg, f.params, f.norm, f.window, {0}, 9);
  ASSERT_EQ(trace.frames.size(), 1u);
  const auto pred = predict_feet(f.cfg, f.params, make_schedule(f.cfg), f.norm, f.window, 1, 9);
  EXPECT_EQ(trace.frames[0].x_k_ft, pred);
  for (double v : trace.frames[0].noise_ft) EXPECT_EQ(v, 0.0);
}

TEST(Visualize, StartOfChainIsScaledNoiseAroundAnchor) {
  const TraceFixture f;
  const auto trace = trace_denoising(f.cfg, f.params, f.norm, f.window, {f.cfg.diffusion_steps, 0, 5}, 2);
  ASSERT_EQ(trace.frames.size(), 3u);
  EXPECT_EQ(trace.frames[0].k, f.cfg.diffusion_steps);
  EXPECT_EQ(trace.frames[2].k, 0);
  // x_K = anchor + scale * sigma * z, so the standardized residual is one N(0, 1) draw per frame.
  const SamplingContext ctx = prepare_sampling(f.cfg, f.params, make_input(data::normalize(f.window, f.norm)));
  Rng rng(window_seed(2, f.window.meta));
  const Eigen::VectorXd z = standard_normal(rng, f.cfg.future);
  for (int j = 0; j < f.cfg.future; ++j) {
    const double disp = trace.frames[0].x_k_ft[static_cast<std::size_t>(j)] - trace.anchor_ft;
    EXPECT_NEAR(disp, f.norm.position_scale * ctx.scale.sigma[j] * z[j], 1e-9);
  }
  EXPECT_EQ(trace.sigma2, ctx.scale.sigma2);
}

TEST(Visualize, StepsOutsideRangeAreRejected) {
  const TraceFixture f;
  EXPECT_THROW(trace_denoising(f.cfg, f.params, f.norm, f.window, {21}, 1), Error);
  EXPECT_THROW(trace_denoising(f.cfg, f.params, f.norm, f.window, {-1}, 1), Error);
  EXPECT_THROW(trace_denoising(f.cfg, f.params, f.norm, f.window, {}, 1), Error);
}

// ---------------------------------------------------------------------------
// The built binary

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / ("crossfusor_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  CliRun run(const std::string& args) {
    const fs::path out = root_ / "stdout.txt", err = root_ / "stderr.txt";
    const std::string cmd = std::string("\"") + CROSSFUSOR_CLI + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  static io::Json summary(const CliRun& r) { return io::Json::parse(r.out); }

  static std::vector<std::string> lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  }

  std::string q(const fs::path& p) const { return "\"" + p.string() + "\""; }

  fs::path root_;
};

TEST_F(Cli, SynthThenTrainWritesCheckpointAndLossLog) {
  const CliRun s = run("synth --platoons 2 --seed 3 --out " + q(root_ / "runs"));
  ASSERT_EQ(s.code, 0) << s.err;
  const fs::path data_dir = summary(s).at("run_dir").get<std::string>();
  EXPECT_TRUE(fs::exists(data_dir / "windows.cfa"));
  EXPECT_TRUE(fs::exists(data_dir / "config.json"));

  const CliRun t = run("train --epochs 1 --data " + q(data_dir) + " --out " + q(root_ / "runs"));
  ASSERT_EQ(t.code, 0) << t.err;
  const fs::path run_dir = summary(t).at("run_dir").get<std::string>();
  EXPECT_TRUE(fs::exists(run_dir / "checkpoint" / "manifest.json"));
  EXPECT_TRUE(fs::exists(run_dir / "checkpoint" / "model.cfa"));
  const auto loss = lines(run_dir / "loss.csv");
  ASSERT_EQ(loss.size(), 2u);
  EXPECT_EQ(loss[0], "epoch,steps,mean_loss");
  EXPECT_EQ(loss[1].rfind("1,", 0), 0u);

  // The run directory's config reproduces the checkpoint bit for bit.
  const CliRun again = run("train --config " + q(run_dir / "config.json") + " --out " + q(root_ / "again"));
  ASSERT_EQ(again.code, 0) << again.err;
  const fs::path again_dir = summary(again).at("run_dir").get<std::string>();
  EXPECT_EQ(slurp(run_dir / "checkpoint" / "model.cfa"), slurp(again_dir / "checkpoint" / "model.cfa"));
  io::Json again_cfg = io::read_json(again_dir / "config.json");
  again_cfg["out"] = (root_ / "runs").string();
  EXPECT_EQ(io::read_json(run_dir / "config.json"), again_cfg);
}

TEST_F(Cli, EvalOnCheckpointWithDifferentFutureFails) {
  io::write_json(root_ / "f40.json", {{"future", 40}, {"horizon_seconds", {1, 2, 3, 4}}});
  const CliRun s40 = run("synth --platoons 2 --config " + q(root_ / "f40.json") + " --out " + q(root_ / "d40"));
  ASSERT_EQ(s40.code, 0) << s40.err;
  const CliRun t = run("train --epochs 1 --config " + q(root_ / "f40.json") + " --data " +
                    q(summary(s40).at("run_dir").get<std::string>()) + " --out " + q(root_ / "runs"));
  ASSERT_EQ(t.code, 0) << t.err;
  const CliRun s50 = run("synth --platoons 2 --out " + q(root_ / "d50"));
  ASSERT_EQ(s50.code, 0) << s50.err;
  const CliRun e = run("eval --data " + q(summary(s50).at("run_dir").get<std::string>()) + " --checkpoint " +
                    q(summary(t).at("checkpoint").get<std::string>()) + " --out " + q(root_ / "runs"));
  EXPECT_EQ(e.code, 3);
  const io::Json err = io::Json::parse(e.err);
  EXPECT_EQ(err.at("error"), "config");
  EXPECT_NE(err.at("message").get<std::string>().find("F=50"), std::string::npos);
}

TEST_F(Cli, AblateWritesFourRowFiveHorizonTable) {
  const CliRun s = run("synth --platoons 2 --stride 20 --out " + q(root_ / "runs"));
  ASSERT_EQ(s.code, 0) << s.err;
  const CliRun a = run("ablate --epochs 1 --steps 20 --data " + q(summary(s).at("run_dir").get<std::string>()) +
                    " --out " + q(root_ / "runs"));
  ASSERT_EQ(a.code, 0) << a.err;
  const fs::path dir = summary(a).at("run_dir").get<std::string>();
  const auto table = lines(dir / "ablation_table.csv");
  ASSERT_EQ(table.size(), 5u);
  EXPECT_EQ(table[0], "model,rmse_1s,rmse_2s,rmse_3s,rmse_4s,rmse_5s");
  for (std::size_t i = 1; i < table.size(); ++i) EXPECT_EQ(std::count(table[i].begin(), table[i].end(), ','), 5);
  const io::Json report = io::read_json(dir / "report.json");
  EXPECT_EQ(report.at("instrumentation").at("no_noise_scaling").at("max_abs_sigma2_minus_one").get<double>(), 0.0);
  EXPECT_GT(report.at("instrumentation").at("crossfusor").at("max_abs_sigma2_minus_one").get<double>(), 0.0);
}

TEST_F(Cli, VisualizeExportsTablesAndManifest) {
  const CliRun s = run("synth --platoons 2 --out " + q(root_ / "runs"));
  ASSERT_EQ(s.code, 0) << s.err;
  const std::string data_dir = summary(s).at("run_dir").get<std::string>();
  const CliRun t = run("train --epochs 1 --steps 20 --data " + q(data_dir) + " --out " + q(root_ / "runs"));
  ASSERT_EQ(t.code, 0) << t.err;
  const std::string ck = summary(t).at("checkpoint").get<std::string>();
  const CliRun v = run("visualize --k 20,10,0 --steps 20 --data " + q(data_dir) + " --checkpoint " + q(ck) + " --out " +
                    q(root_ / "runs"));
  ASSERT_EQ(v.code, 0) << v.err;
  const fs::path dir = summary(v).at("run_dir").get<std::string>();
  const io::Json m = io::read_json(dir / "manifest.json");
  EXPECT_EQ(m.at("steps"), io::Json({20, 10, 0}));
  EXPECT_EQ(m.at("sigma2").size(), 50u);
  for (int k : {20, 10, 0}) EXPECT_EQ(lines(dir / ("trajectory_k" + std::to_string(k) + ".csv")).size(), 51u);
  EXPECT_EQ(lines(dir / "noise_magnitude.csv").size(), 4u);

  // k = 0 matches the sample command's single prediction for the same seed.
  const CliRun smp = run("sample --data " + q(data_dir) + " --checkpoint " + q(ck) + " --out " + q(root_ / "runs"));
  ASSERT_EQ(smp.code, 0) << smp.err;
  const auto vis = lines(dir / "trajectory_k0.csv");
  const auto pred = lines(fs::path(summary(smp).at("run_dir").get<std::string>()) / "sample.csv");
  auto col = [](const std::string& line, int i) {
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c <= i; ++c) std::getline(ss, cell, ',');
    return cell;
  };
  for (std::size_t r = 1; r < vis.size(); ++r) EXPECT_EQ(col(vis[r], 2), col(pred[r], 5));

  const CliRun bad = run("visualize --k 21 --data " + q(data_dir) + " --checkpoint " + q(ck) + " --out " + q(root_ / "runs"));
  EXPECT_EQ(bad.code, 2);
}

TEST_F(Cli, ErrorsMapToDistinctExitCodes) {
  const CliRun missing = run("train --data " + q(root_ / "absent") + " --out " + q(root_ / "runs"));
  EXPECT_EQ(missing.code, 4);
  EXPECT_EQ(io::Json::parse(missing.err).at("error"), "missing_input");
  const CliRun bad_cfg = run("synth --lr -1 --out " + q(root_ / "runs"));
  EXPECT_EQ(bad_cfg.code, 3);
  const CliRun bad_flag = run("synth --no-such-flag");
  EXPECT_EQ(bad_flag.code, 2);
  std::ofstream(root_ / "file") << "x";
  const CliRun unwritable = run("synth --platoons 2 --out " + q(root_ / "file" / "sub"));
  EXPECT_EQ(unwritable.code, 5);
  const CliRun no_data = run("train --out " + q(root_ / "runs"));
  EXPECT_EQ(no_data.code, 4);
  EXPECT_FALSE(fs::exists(root_ / "runs"));
}

}  // namespace
