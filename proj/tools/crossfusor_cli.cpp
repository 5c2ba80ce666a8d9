// crossfusor command-line tool: ingest, synth, train, eval, sample, ablate, visualize.
// Every command writes into a fresh timestamped run directory holding the
// resolved config.json, prints a one-line JSON summary on stdout and, on
// failure, a JSON error record on stderr with a per-category exit code.

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "crossfusor/evaluation.hpp"
#include "crossfusor/platoon_data.hpp"
#include "crossfusor/run_config.hpp"
#include "crossfusor/synthetic.hpp"
#include "crossfusor/visualize.hpp"

namespace fs = std::filesystem;
using namespace crossfusor;

namespace {

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument: return 2;
    case ErrorKind::config: return 3;
    case ErrorKind::missing_input: return 4;
    case ErrorKind::io: return 5;
    case ErrorKind::data: return 6;
    case ErrorKind::numerical: return 7;
  }
  return 1;
}

int report_error(const std::string& kind, const std::string& message, int code) {
  std::cerr << io::Json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << std::endl;
  return code;
}

// Flags that overlay the config file. Unset ones leave the file/default value alone.
struct Flags {
  std::string config;
  std::optional<std::string> data, out, ablation;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs, batch, steps, stride, n_samples, platoons;
  std::optional<double> lr, beta_start, beta_end, split_ratio;
  std::optional<long> max_steps;
  std::optional<bool> deterministic;
  std::vector<int> horizon_seconds;
  std::vector<std::string> scenarios;

  io::Json overlay() const {
    io::Json j = io::Json::object();
    auto put = [&](const char* key, const auto& v) {
      if (v) j[key] = *v;
    };
    put("data", data);
    put("out", out);
    put("ablation", ablation);
    put("seed", seed);
    put("epochs", epochs);
    put("batch", batch);
    put("steps", steps);
    put("stride", stride);
    put("n_samples", n_samples);
    put("platoons", platoons);
    put("lr", lr);
    put("beta_start", beta_start);
    put("beta_end", beta_end);
    put("split_ratio", split_ratio);
    put("max_steps", max_steps);
    put("deterministic", deterministic);
    if (!horizon_seconds.empty()) j["horizon_seconds"] = horizon_seconds;
    if (!scenarios.empty()) j["scenarios"] = scenarios;
    return j;
  }
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file (keys mirror flag names)");
  cmd->add_option("--data", f.data, "dataset directory (default: $CROSSFUSOR_DATA_DIR)");
  cmd->add_option("--out", f.out, "root for run directories");
  cmd->add_option("--seed", f.seed);
  cmd->add_option("--epochs", f.epochs);
  cmd->add_option("--batch", f.batch);
  cmd->add_option("--lr", f.lr);
  cmd->add_option("--steps", f.steps, "diffusion steps K");
  cmd->add_option("--beta-start", f.beta_start);
  cmd->add_option("--beta-end", f.beta_end);
  cmd->add_option("--ablation", f.ablation, "full|no_noise_scaling|no_hist_encoding|no_cross_attention");
  cmd->add_option("--horizon-seconds", f.horizon_seconds)->delimiter(',');
  cmd->add_option("--deterministic", f.deterministic, "single-worker bit-reproducible mode (the only mode)");
  cmd->add_option("--stride", f.stride, "window stride in frames");
  cmd->add_option("--split-ratio", f.split_ratio, "training share of platoons");
  cmd->add_option("--max-steps", f.max_steps, "optimizer step limit (0 = none)");
  cmd->add_option("--n-samples", f.n_samples, "sampled trajectories averaged per window");
  cmd->add_option("--platoons", f.platoons, "synth: number of platoons");
  cmd->add_option("--scenarios", f.scenarios, "synth: steady,brake,oscillate")->delimiter(',');
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return s.str();
}

fs::path make_run_dir(const RunConfig& cfg, const std::string& command) {
  const fs::path root(cfg.out);
  std::error_code ec;
  fs::create_directories(root, ec);
  require(!ec && fs::is_directory(root), ErrorKind::io, "cannot create output directory " + root.string());
  const std::string base = command + "-" + timestamp();
  for (int i = 0;; ++i) {
    const fs::path dir = root / (i == 0 ? base : base + "-" + std::to_string(i));
    if (fs::create_directory(dir, ec)) {
      io::write_json(dir / "config.json", cfg.to_json());
      return dir;
    }
    require(!ec, ErrorKind::io, "cannot create run directory " + dir.string() + ": " + ec.message());
  }
}

fs::path data_path(const RunConfig& cfg) {
  require(!cfg.data.empty(), ErrorKind::missing_input,
          std::string("no dataset given: pass --data or set ") + kDataDirEnv);
  fs::path p(cfg.data);
  const char* root = std::getenv(kDataDirEnv);
  if (p.is_relative() && !fs::exists(p) && root != nullptr) p = fs::path(root) / p;
  require(fs::exists(p), ErrorKind::missing_input, "dataset not found: " + p.string());
  return p;
}

data::LoadedDataset load_dataset(const RunConfig& cfg) {
  data::LoadedDataset ds = data::load_windows(data_path(cfg));
  require(!ds.windows.empty(), ErrorKind::data, "dataset has no windows");
  return ds;
}

Checkpoint load_ck(const std::string& dir) {
  require(!dir.empty(), ErrorKind::missing_input, "--checkpoint is required");
  require(fs::exists(dir), ErrorKind::missing_input, "checkpoint not found: " + dir);
  return load_checkpoint(dir);
}

/// Test split of the dataset under the checkpoint's recorded split, or every window.
std::vector<data::PlatoonWindow> eval_windows(const Checkpoint& ck, const data::LoadedDataset& ds, bool all) {
  if (all) return ds.windows;
  const double ratio = ck.extra.value("split_ratio", 0.8);
  const std::uint64_t seed = ck.extra.value("split_seed", ck.train.seed);
  return data::split_train_test(ds.windows, ratio, seed).test;
}

void write_history(const fs::path& path, const data::PlatoonWindow& w) {
  io::CsvWriter csv(path, {"frame", "t_s", "study_ft", "leader_ft", "follower_ft", "study_speed_fps"});
  const int h = w.history();
  for (int i = 0; i < h; ++i) {
    const auto u = static_cast<std::size_t>(i);
    csv.write_row({std::to_string(i - h + 1), io::CsvWriter::num((i - h + 1) / data::kFrameRateHz),
                   io::CsvWriter::num(w.x_stu_his[u]), io::CsvWriter::num(w.x_lea_his[u]),
                   io::CsvWriter::num(w.x_fol_his[u]), io::CsvWriter::num(w.v_stu_his[u])});
  }
}

io::Json meta_json(const data::WindowMeta& m) {
  return {{"platoon_id", m.platoon_id}, {"leader_id", m.leader_id}, {"study_id", m.study_id},
          {"follower_id", m.follower_id}, {"start_frame", m.start_frame}};
}

// ---------------------------------------------------------------------------

io::Json cmd_ingest(const RunConfig& cfg, const std::string& input, bool whitespace, bool no_header) {
  require(!input.empty(), ErrorKind::missing_input, "--input is required");
  std::ifstream in(input);
  require(static_cast<bool>(in), ErrorKind::missing_input, "cannot open trajectory table: " + input);
  data::IngestConfig ic;
  ic.whitespace_delimited = whitespace;
  ic.has_header = !no_header;
  ic.platoon_length = cfg.platoon_length;
  const data::IngestReport rep = data::ingest_ngsim(in, ic);
  require(!rep.platoons.empty(), ErrorKind::data, "no complete platoons found in " + input);
  const auto win = data::window_platoons(rep.platoons, cfg.stride, cfg.window_shape());
  const fs::path dir = make_run_dir(cfg, "ingest");
  data::save_windows(dir, win.windows, {input, cfg.stride, cfg.platoon_length, rep.platoons.size()});
  io::write_json(dir / "ingest_report.json", {{"rows_read", rep.rows_read},
                                               {"rows_rejected", rep.rows_rejected},
                                               {"rejections", rep.rejections},
                                               {"platoons", rep.platoons.size()},
                                               {"trajectories", rep.trajectory_count()},
                                               {"windows", win.windows.size()}});
  return {{"run_dir", dir.string()}, {"platoons", rep.platoons.size()}, {"windows", win.windows.size()}};
}

io::Json cmd_synth(const RunConfig& cfg) {
  data::SynthConfig sc;
  sc.frames = cfg.platoon_length;
  const auto platoons = data::generate_mixed(cfg.platoons, cfg.seed, cfg.scenario_list(), sc);
  const auto win = data::window_platoons(platoons, cfg.stride, cfg.window_shape());
  const fs::path dir = make_run_dir(cfg, "synth");
  data::save_windows(dir, win.windows, {"synthetic", cfg.stride, cfg.platoon_length, platoons.size()});
  return {{"run_dir", dir.string()}, {"platoons", platoons.size()}, {"windows", win.windows.size()}};
}

io::Json cmd_train(const RunConfig& cfg, const std::string& resume_dir) {
  const ModelConfig mc = cfg.model_config();
  const TrainConfig tc = cfg.train_config();
  const auto ds = load_dataset(cfg);
  require(ds.shape.history == mc.history && ds.shape.future == mc.future, ErrorKind::config,
          "dataset windows (H=" + std::to_string(ds.shape.history) + ", F=" + std::to_string(ds.shape.future) +
              ") do not match the configured model (H=" + std::to_string(mc.history) +
              ", F=" + std::to_string(mc.future) + ")");
  const auto split = data::split_train_test(ds.windows, cfg.split_ratio, cfg.seed);

  std::optional<TrainState> resume;
  data::NormalizationStats norm;
  if (!resume_dir.empty()) {
    Checkpoint prev = load_ck(resume_dir);
    require(prev.model.to_json() == mc.to_json(), ErrorKind::config, "resume checkpoint has a different model config");
    norm = prev.normalization;
    resume = std::move(prev.state);
  } else {
    const auto fit = data::fit_normalization(split.train);
    for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';
    norm = fit.stats;
  }
  std::vector<ModelInput> inputs;
  inputs.reserve(split.train.size());
  for (const auto& w : split.train) inputs.push_back(make_input(data::normalize(w, norm)));

  const fs::path dir = make_run_dir(cfg, "train");
  const TrainState state = train(mc, inputs, tc, [](const TrainState& s) {
    const auto& e = s.epochs.back();
    std::cerr << "epoch " << e.epoch << "  steps " << e.steps << "  loss " << e.mean_loss << std::endl;
  }, std::move(resume));

  io::CsvWriter loss(dir / "loss.csv", {"epoch", "steps", "mean_loss"});
  for (const auto& e : state.epochs) loss.write_row({std::to_string(e.epoch), std::to_string(e.steps), io::CsvWriter::num(e.mean_loss)});
  io::CsvWriter steps(dir / "step_loss.csv", {"step", "loss"});
  for (std::size_t i = 0; i < state.step_losses.size(); ++i) steps.write_row({std::to_string(i + 1), io::CsvWriter::num(state.step_losses[i])});

  Checkpoint ck{mc, tc, norm, state, {}};
  ck.extra = {{"dataset", data_path(cfg).string()},
              {"split_ratio", cfg.split_ratio},
              {"split_seed", cfg.seed},
              {"train_platoons", split.train_platoons},
              {"test_platoons", split.test_platoons},
              {"train_windows", split.train.size()},
              {"test_windows", split.test.size()}};
  save_checkpoint(dir / "checkpoint", ck);
  return {{"run_dir", dir.string()},
          {"checkpoint", (dir / "checkpoint").string()},
          {"epochs", state.epoch},
          {"final_loss", state.epochs.empty() ? 0.0 : state.epochs.back().mean_loss}};
}

io::Json cmd_eval(const RunConfig& cfg, const std::string& ck_dir, bool all) {
  const Checkpoint ck = load_ck(ck_dir);
  const auto ds = load_dataset(cfg);
  require(ds.shape.history == ck.model.history && ds.shape.future == ck.model.future, ErrorKind::config,
          "dataset windows (H=" + std::to_string(ds.shape.history) + ", F=" + std::to_string(ds.shape.future) +
              ") do not match the checkpoint (H=" + std::to_string(ck.model.history) +
              ", F=" + std::to_string(ck.model.future) + ")");
  const auto test = eval_windows(ck, ds, all);
  const EvalReport report = evaluate(ck, test, cfg.n_samples, cfg.seed, cfg.horizon_seconds, cfg.cv_config());
  const fs::path dir = make_run_dir(cfg, "eval");
  report.write_csv(dir / "eval.csv");
  report.write_rmse_table(dir / "rmse_table.csv");
  io::write_json(dir / "report.json", report.to_json());
  return {{"run_dir", dir.string()}, {"report", report.to_json()}};
}

io::Json cmd_sample(const RunConfig& cfg, const std::string& ck_dir, int window, bool all) {
  const Checkpoint ck = load_ck(ck_dir);
  const auto ds = load_dataset(cfg);
  const auto windows = eval_windows(ck, ds, all);
  require(ds.shape.future == ck.model.future && ds.shape.history == ck.model.history, ErrorKind::config,
          "dataset window shape does not match the checkpoint");
  require(window >= 0 && window < static_cast<int>(windows.size()), ErrorKind::invalid_argument,
          "window " + std::to_string(window) + " outside [0, " + std::to_string(windows.size()) + ")");
  const auto& w = windows[static_cast<std::size_t>(window)];
  const ModelConfig& mc = ck.model;
  const auto schedule = make_schedule(mc);
  const data::NormalizedWindow nw = data::normalize(w, ck.normalization);
  const ModelInput in = make_input(nw);
  // Same stream as evaluation: sample s here is sample s of predict_feet.
  Rng rng(window_seed(cfg.seed, w.meta));
  std::vector<Eigen::VectorXd> samples;
  for (int s = 0; s < cfg.n_samples; ++s) samples.push_back(sample_future(mc, ck.state.params, schedule, in, rng));

  const fs::path dir = make_run_dir(cfg, "sample");
  std::vector<std::string> header{"frame", "t_s", "truth_ft", "leader_ft", "follower_ft", "mean_ft"};
  for (int s = 0; s < cfg.n_samples; ++s) header.push_back("sample_" + std::to_string(s) + "_ft");
  io::CsvWriter csv(dir / "sample.csv", header);
  for (int j = 0; j < mc.future; ++j) {
    const auto u = static_cast<std::size_t>(j);
    double mean = 0.0;
    std::vector<std::string> cells{std::to_string(j + 1), io::CsvWriter::num((j + 1) / data::kFrameRateHz),
                                   io::CsvWriter::num(w.x_stu_fut[u]), io::CsvWriter::num(w.x_lea_fut[u]),
                                   io::CsvWriter::num(w.x_fol_fut[u]), ""};
    for (const auto& s : samples) {
      const double ft = data::position_to_feet(s[j], nw.anchor, ck.normalization);
      mean += ft;
      cells.push_back(io::CsvWriter::num(ft));
    }
    cells[5] = io::CsvWriter::num(mean / cfg.n_samples);
    csv.write_row(cells);
  }
  write_history(dir / "history.csv", w);
  return {{"run_dir", dir.string()}, {"window", meta_json(w.meta)}, {"samples", cfg.n_samples}};
}

io::Json cmd_ablate(const RunConfig& cfg) {
  const auto ds = load_dataset(cfg);
  RunConfig full = cfg;
  full.ablation = "full";
  const ModelConfig base = full.model_config();
  require(ds.shape.history == base.history && ds.shape.future == base.future, ErrorKind::config,
          "dataset window shape does not match the configured model");
  const auto split = data::split_train_test(ds.windows, cfg.split_ratio, cfg.seed);
  const auto fit = data::fit_normalization(split.train);
  std::vector<ModelInput> inputs;
  for (const auto& w : split.train) inputs.push_back(make_input(data::normalize(w, fit.stats)));

  struct Probe {
    long draws = 0;
    double max_dev_from_one = 0.0;
  };
  std::map<std::string, Probe> probes;
  const fs::path dir = make_run_dir(cfg, "ablate");
  const AblationResult r = run_ablations(
      base, full.train_config(), inputs, fit.stats, split.test, cfg.n_samples, cfg.horizon_seconds,
      [&](const std::string& v, const Eigen::VectorXd& s2) {
        Probe& p = probes[v];
        ++p.draws;
        p.max_dev_from_one = std::max(p.max_dev_from_one, (s2.array() - 1.0).abs().maxCoeff());
      },
      [](const std::string& v) { std::cerr << "variant " << v << std::endl; });

  r.report.write_csv(dir / "ablation.csv");
  r.report.write_rmse_table(dir / "ablation_table.csv");
  io::Json inst = io::Json::object();
  for (const auto& [v, p] : probes) inst[v] = {{"sigma2_draws", p.draws}, {"max_abs_sigma2_minus_one", p.max_dev_from_one}};
  io::Json j = r.report.to_json();
  j["instrumentation"] = inst;
  io::write_json(dir / "report.json", j);
  for (const auto& row : r.report.rows) {
    if (row.status != "ok") std::cerr << "warning: variant " << row.model << " " << row.status << '\n';
  }
  return {{"run_dir", dir.string()}, {"report", j}};
}

io::Json cmd_visualize(const RunConfig& cfg, const std::string& ck_dir, int window, std::vector<int> ks, bool all) {
  const Checkpoint ck = load_ck(ck_dir);
  const ModelConfig& mc = ck.model;
  const int K = mc.diffusion_steps;
  if (ks.empty()) ks = {K, 3 * K / 4, K / 2, K / 4, 0};
  for (int k : ks) {
    require(k >= 0 && k <= K, ErrorKind::invalid_argument,
            "step " + std::to_string(k) + " outside [0, " + std::to_string(K) + "]");
  }
  const auto ds = load_dataset(cfg);
  require(ds.shape.future == mc.future && ds.shape.history == mc.history, ErrorKind::config,
          "dataset window shape does not match the checkpoint");
  const auto windows = eval_windows(ck, ds, all);
  require(window >= 0 && window < static_cast<int>(windows.size()), ErrorKind::invalid_argument,
          "window " + std::to_string(window) + " outside [0, " + std::to_string(windows.size()) + ")");
  const auto& w = windows[static_cast<std::size_t>(window)];
  const DenoisingTrace trace = trace_denoising(mc, ck.state.params, ck.normalization, w, ks, cfg.seed);

  const fs::path dir = make_run_dir(cfg, "visualize");
  io::Json files = io::Json::array();
  std::vector<std::string> heat_header{"k"};
  for (int j = 1; j <= mc.future; ++j) heat_header.push_back("f" + std::to_string(j));
  io::CsvWriter heat(dir / "noise_magnitude.csv", heat_header);
  for (const auto& f : trace.frames) {
    const std::string name = "trajectory_k" + std::to_string(f.k) + ".csv";
    io::CsvWriter csv(dir / name, {"frame", "t_s", "x_k_ft", "x_k_displacement_ft", "x0_hat_ft", "noise_magnitude_ft",
                                   "truth_ft", "leader_ft", "follower_ft"});
    std::vector<std::string> heat_row{std::to_string(f.k)};
    for (int j = 0; j < mc.future; ++j) {
      const auto u = static_cast<std::size_t>(j);
      csv.write_row({std::to_string(j + 1), io::CsvWriter::num((j + 1) / data::kFrameRateHz),
                     io::CsvWriter::num(f.x_k_ft[u]), io::CsvWriter::num(f.x_k_ft[u] - trace.anchor_ft),
                     io::CsvWriter::num(f.x0_hat_ft[u]), io::CsvWriter::num(f.noise_ft[u]),
                     io::CsvWriter::num(w.x_stu_fut[u]), io::CsvWriter::num(w.x_lea_fut[u]),
                     io::CsvWriter::num(w.x_fol_fut[u])});
      heat_row.push_back(io::CsvWriter::num(f.noise_ft[u]));
    }
    heat.write_row(heat_row);
    files.push_back({{"k", f.k}, {"file", name}});
  }
  write_history(dir / "history.csv", w);
  std::vector<int> ks_out;
  for (const auto& f : trace.frames) ks_out.push_back(f.k);
  const io::Json manifest = {{"format", "crossfusor-denoising"},
                             {"diffusion_steps", K},
                             {"steps", ks_out},
                             {"seed", cfg.seed},
                             {"window_index", window},
                             {"window", meta_json(w.meta)},
                             {"anchor_ft", trace.anchor_ft},
                             {"position_scale_ft", ck.normalization.position_scale},
                             {"sigma2", std::vector<double>(trace.sigma2.data(), trace.sigma2.data() + trace.sigma2.size())},
                             {"mean_noise_magnitude_ft", mean_noise_magnitude(trace)},
                             {"trajectories", files},
                             {"noise_magnitude", "noise_magnitude.csv"},
                             {"history", "history.csv"},
                             {"config_hash", ck.hash()}};
  io::write_json(dir / "manifest.json", manifest);
  return {{"run_dir", dir.string()}, {"steps", ks_out}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crossfusor: conditional diffusion car-following trajectory prediction"};
  app.require_subcommand(1);

  Flags flags;
  std::string input, checkpoint, resume;
  bool whitespace = false, no_header = false, all_windows = false;
  int window = 0;
  std::vector<int> ks;

  auto* ingest = app.add_subcommand("ingest", "NGSIM trajectory table -> platoon windows");
  ingest->add_option("--input", input, "trajectory table (CSV, or whitespace-separated with --whitespace)");
  ingest->add_flag("--whitespace", whitespace, "columns separated by whitespace");
  ingest->add_flag("--no-header", no_header, "table has no header row; columns are indices");
  auto* synth = app.add_subcommand("synth", "IDM-simulated platoons -> windows");
  auto* train_cmd = app.add_subcommand("train", "train a model on a window dataset");
  train_cmd->add_option("--resume", resume, "continue from this checkpoint directory");
  auto* eval_cmd = app.add_subcommand("eval", "RMSE/FDE/ADE per horizon against the CV baseline");
  auto* sample_cmd = app.add_subcommand("sample", "sample predicted futures for one window");
  auto* ablate = app.add_subcommand("ablate", "train and evaluate the four ablation variants");
  auto* visualize = app.add_subcommand("visualize", "export intermediate denoising states for one window");
  for (auto* c : {ingest, synth, train_cmd, eval_cmd, sample_cmd, ablate, visualize}) add_common(c, flags);
  for (auto* c : {eval_cmd, sample_cmd, visualize}) {
    c->add_option("--checkpoint", checkpoint, "checkpoint directory");
    c->add_flag("--all-windows", all_windows, "use every window instead of the checkpoint's test split");
  }
  for (auto* c : {sample_cmd, visualize}) c->add_option("--window", window, "index into the evaluated windows");
  visualize->add_option("--k", ks, "diffusion steps to export (default K,3K/4,K/2,K/4,0)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("invalid_argument", e.what(), exit_code(ErrorKind::invalid_argument));
  }

  try {
    const RunConfig cfg = resolve_run_config(flags.config, flags.overlay());
    io::Json summary;
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "ingest") summary = cmd_ingest(cfg, input, whitespace, no_header);
    if (name == "synth") summary = cmd_synth(cfg);
    if (name == "train") summary = cmd_train(cfg, resume);
    if (name == "eval") summary = cmd_eval(cfg, checkpoint, all_windows);
    if (name == "sample") summary = cmd_sample(cfg, checkpoint, window, all_windows);
    if (name == "ablate") summary = cmd_ablate(cfg);
    if (name == "visualize") summary = cmd_visualize(cfg, checkpoint, window, ks, all_windows);
    summary["command"] = name;
    std::cout << summary.dump() << std::endl;
    return 0;
  } catch (const Error& e) {
    return report_error(to_string(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
}
