#pragma once

// Resolved command-line configuration. Precedence: defaults < JSON file < flags.
// Keys mirror the flag names with '-' written as '_' (both spellings are accepted).

#include <cstdlib>
#include <set>
#include <string>
#include <vector>

#include "crossfusor/cv_baseline.hpp"
#include "crossfusor/evaluation.hpp"
#include "crossfusor/synthetic.hpp"

namespace crossfusor {

inline constexpr const char* kDataDirEnv = "CROSSFUSOR_DATA_DIR";

struct RunConfig {
  std::string data;
  std::string out = "runs";
  std::uint64_t seed = 0;
  int epochs = 10;
  int batch = 64;
  double lr = 1e-3;
  int steps = 200;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::string ablation = "full";
  std::vector<int> horizon_seconds = default_horizons_s();
  bool deterministic = true;

  // Architecture; steps/betas/ablation above complete the ModelConfig.
  int history = data::kHistoryFrames;
  int future = data::kFutureFrames;
  int gru_hidden = 50;
  int gru_layers = 2;
  int heads = 5;
  int feed_forward = 100;
  std::vector<int> unet_channels{8, 16, 32, 64, 128};

  double weight_decay = 0.01;
  double max_grad_norm = 0.0;
  long max_steps = 0;
  bool stop_gradient_noise_scale = false;
  bool cosine_decay = false;

  double split_ratio = 0.8;
  int stride = data::kDefaultStride;
  int platoon_length = data::kDefaultPlatoonFrames;
  int n_samples = 1;

  // synth
  int platoons = 100;
  std::vector<std::string> scenarios{"brake", "oscillate"};

  // CV baseline Kalman noise
  double cv_accel_noise = 1.0;
  double cv_position_noise = 1.0;
  double cv_speed_noise = 1.0;

  static const std::vector<std::string>& ablation_names() {
    static const std::vector<std::string> n = {"full", "no_noise_scaling", "no_hist_encoding", "no_cross_attention"};
    return n;
  }

  ModelConfig model_config() const {
    ModelConfig m;
    m.history = history;
    m.future = future;
    m.gru_hidden = gru_hidden;
    m.gru_layers = gru_layers;
    m.heads = heads;
    m.feed_forward = feed_forward;
    m.unet_channels = unet_channels;
    m.diffusion_steps = steps;
    m.beta_start = beta_start;
    m.beta_end = beta_end;
    m.noise_scaling = ablation != "no_noise_scaling";
    m.history_encoding = ablation != "no_hist_encoding";
    m.cross_attention = ablation != "no_cross_attention";
    return m;
  }

  TrainConfig train_config() const {
    TrainConfig t;
    t.lr = lr;
    t.batch = batch;
    t.epochs = epochs;
    t.seed = seed;
    t.weight_decay = weight_decay;
    t.max_grad_norm = max_grad_norm;
    t.max_steps = max_steps;
    t.stop_gradient_noise_scale = stop_gradient_noise_scale;
    t.cosine_decay = cosine_decay;
    return t;
  }

  baseline::CvKalmanConfig cv_config() const {
    baseline::CvKalmanConfig c;
    c.accel_noise = cv_accel_noise;
    c.position_noise = cv_position_noise;
    c.speed_noise = cv_speed_noise;
    return c;
  }

  data::WindowShape window_shape() const { return {history, future}; }

  std::vector<data::Scenario> scenario_list() const {
    std::vector<data::Scenario> out;
    for (const auto& s : scenarios) out.push_back(data::parse_scenario(s));
    return out;
  }

  void validate() const {
    bool known = false;
    for (const auto& n : ablation_names()) known = known || n == ablation;
    require(known, ErrorKind::config, "unknown ablation '" + ablation + "'");
    model_config().validate();
    train_config().validate();
    require(!horizon_seconds.empty(), ErrorKind::config, "horizon_seconds is empty");
    horizon_frames(horizon_seconds, future);
    require(split_ratio > 0 && split_ratio < 1, ErrorKind::config, "split_ratio must lie in (0, 1)");
    require(stride >= 1, ErrorKind::config, "stride must be >= 1");
    require(platoon_length >= history + future, ErrorKind::config, "platoon_length shorter than one window");
    require(n_samples >= 1, ErrorKind::config, "n_samples must be >= 1");
    require(platoons >= 1, ErrorKind::config, "platoons must be >= 1");
    require(!scenarios.empty(), ErrorKind::config, "scenarios is empty");
    for (const auto& s : scenarios) {
      try {
        data::parse_scenario(s);
      } catch (const Error& e) {
        fail(ErrorKind::config, e.what());
      }
    }
    require(cv_accel_noise > 0 && cv_position_noise > 0 && cv_speed_noise > 0, ErrorKind::config,
            "CV noise parameters must be positive");
  }

  io::Json to_json() const {
    return {{"data", data},
            {"out", out},
            {"seed", seed},
            {"epochs", epochs},
            {"batch", batch},
            {"lr", lr},
            {"steps", steps},
            {"beta_start", beta_start},
            {"beta_end", beta_end},
            {"ablation", ablation},
            {"horizon_seconds", horizon_seconds},
            {"deterministic", deterministic},
            {"history", history},
            {"future", future},
            {"gru_hidden", gru_hidden},
            {"gru_layers", gru_layers},
            {"heads", heads},
            {"feed_forward", feed_forward},
            {"unet_channels", unet_channels},
            {"weight_decay", weight_decay},
            {"max_grad_norm", max_grad_norm},
            {"max_steps", max_steps},
            {"stop_gradient_noise_scale", stop_gradient_noise_scale},
            {"cosine_decay", cosine_decay},
            {"split_ratio", split_ratio},
            {"stride", stride},
            {"platoon_length", platoon_length},
            {"n_samples", n_samples},
            {"platoons", platoons},
            {"scenarios", scenarios},
            {"cv_accel_noise", cv_accel_noise},
            {"cv_position_noise", cv_position_noise},
            {"cv_speed_noise", cv_speed_noise}};
  }

  /// Overlays every key of `j`. Unknown keys and ill-typed values are config errors.
  void apply(const io::Json& j) {
    require(j.is_object(), ErrorKind::config, "configuration must be a JSON object");
    const io::Json known = to_json();
    io::Json merged = known;
    for (const auto& [raw, value] : j.items()) {
      std::string key = raw;
      for (char& ch : key) {
        if (ch == '-') ch = '_';
      }
      require(known.contains(key), ErrorKind::config, "unknown configuration key '" + raw + "'");
      merged[key] = value;
    }
    try {
      RunConfig r;
      r.data = merged.at("data").get<std::string>();
      r.out = merged.at("out").get<std::string>();
      r.seed = merged.at("seed").get<std::uint64_t>();
      r.epochs = merged.at("epochs").get<int>();
      r.batch = merged.at("batch").get<int>();
      r.lr = merged.at("lr").get<double>();
      r.steps = merged.at("steps").get<int>();
      r.beta_start = merged.at("beta_start").get<double>();
      r.beta_end = merged.at("beta_end").get<double>();
      r.ablation = merged.at("ablation").get<std::string>();
      r.horizon_seconds = merged.at("horizon_seconds").get<std::vector<int>>();
      r.deterministic = merged.at("deterministic").get<bool>();
      r.history = merged.at("history").get<int>();
      r.future = merged.at("future").get<int>();
      r.gru_hidden = merged.at("gru_hidden").get<int>();
      r.gru_layers = merged.at("gru_layers").get<int>();
      r.heads = merged.at("heads").get<int>();
      r.feed_forward = merged.at("feed_forward").get<int>();
      r.unet_channels = merged.at("unet_channels").get<std::vector<int>>();
      r.weight_decay = merged.at("weight_decay").get<double>();
      r.max_grad_norm = merged.at("max_grad_norm").get<double>();
      r.max_steps = merged.at("max_steps").get<long>();
      r.stop_gradient_noise_scale = merged.at("stop_gradient_noise_scale").get<bool>();
      r.cosine_decay = merged.at("cosine_decay").get<bool>();
      r.split_ratio = merged.at("split_ratio").get<double>();
      r.stride = merged.at("stride").get<int>();
      r.platoon_length = merged.at("platoon_length").get<int>();
      r.n_samples = merged.at("n_samples").get<int>();
      r.platoons = merged.at("platoons").get<int>();
      r.scenarios = merged.at("scenarios").get<std::vector<std::string>>();
      r.cv_accel_noise = merged.at("cv_accel_noise").get<double>();
      r.cv_position_noise = merged.at("cv_position_noise").get<double>();
      r.cv_speed_noise = merged.at("cv_speed_noise").get<double>();
      *this = std::move(r);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::config, std::string("ill-typed configuration value: ") + e.what());
    }
  }
};

/// defaults < file < flags, then the data-root default from the environment, then validation.
inline RunConfig resolve_run_config(const std::string& config_path, const io::Json& flag_overlay,
                                    const char* data_dir_env = std::getenv(kDataDirEnv)) {
  RunConfig cfg;
  if (!config_path.empty()) {
    require(std::filesystem::exists(config_path), ErrorKind::missing_input, "config file not found: " + config_path);
    cfg.apply(io::read_json(config_path));
  }
  cfg.apply(flag_overlay);
  if (cfg.data.empty() && data_dir_env != nullptr && *data_dir_env != '\0') cfg.data = data_dir_env;
  cfg.validate();
  return cfg;
}

}  // namespace crossfusor
