#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "crossfusor/array_io.hpp"
#include "crossfusor/cv_baseline.hpp"
#include "crossfusor/metrics.hpp"
#include "crossfusor/model.hpp"
#include "crossfusor/training.hpp"

namespace crossfusor {

inline const std::vector<int>& default_horizons_s() {
  static const std::vector<int> h = {1, 2, 3, 4, 5};
  return h;
}

struct EvalRow {
  std::string model;
  std::vector<metrics::HorizonMetrics> metrics;  // one per horizon
  std::string status = "ok";
};

struct EvalReport {
  std::vector<int> horizons_s;
  std::vector<EvalRow> rows;
  std::size_t sample_count = 0;
  std::string config_hash;

  const EvalRow& row(const std::string& model) const {
    for (const auto& r : rows) {
      if (r.model == model) return r;
    }
    fail(ErrorKind::invalid_argument, "no report row for '" + model + "'");
  }

  /// Long format: one line per (model, horizon).
  void write_csv(const std::filesystem::path& path) const {
    io::CsvWriter csv(path, {"model", "horizon_s", "rmse_ft", "fde_ft", "ade_ft", "samples", "status"});
    for (const auto& r : rows) {
      for (std::size_t h = 0; h < horizons_s.size(); ++h) {
        const auto& m = r.metrics[h];
        csv.write_row({r.model, std::to_string(horizons_s[h]), io::CsvWriter::num(m.rmse), io::CsvWriter::num(m.fde),
                       io::CsvWriter::num(m.ade), std::to_string(sample_count), r.status});
      }
    }
  }

  /// Wide format shaped like an RMSE table: one line per model, one column per horizon.
  void write_rmse_table(const std::filesystem::path& path) const {
    std::vector<std::string> header{"model"};
    for (int h : horizons_s) header.push_back("rmse_" + std::to_string(h) + "s");
    io::CsvWriter csv(path, header);
    for (const auto& r : rows) {
      std::vector<std::string> cells{r.model};
      for (const auto& m : r.metrics) cells.push_back(io::CsvWriter::num(m.rmse));
      csv.write_row(cells);
    }
  }

  io::Json to_json() const {
    io::Json rows_json = io::Json::array();
    for (const auto& r : rows) {
      io::Json per = io::Json::array();
      for (std::size_t h = 0; h < horizons_s.size(); ++h) {
        const auto& m = r.metrics[h];
        auto num = [](double v) { return std::isfinite(v) ? io::Json(v) : io::Json(nullptr); };
        per.push_back({{"horizon_s", horizons_s[h]}, {"rmse", num(m.rmse)}, {"fde", num(m.fde)}, {"ade", num(m.ade)}});
      }
      rows_json.push_back({{"model", r.model}, {"status", r.status}, {"metrics", per}});
    }
    return {{"horizons_s", horizons_s}, {"samples", sample_count}, {"config_hash", config_hash}, {"rows", rows_json},
            {"units", "ft"}};
  }
};

inline std::vector<int> horizon_frames(const std::vector<int>& horizons_s, int future) {
  std::vector<int> frames;
  for (int h : horizons_s) {
    const int n = static_cast<int>(std::lround(h * data::kFrameRateHz));
    require(h >= 1 && n <= future, ErrorKind::config,
            "horizon " + std::to_string(h) + " s exceeds the " + std::to_string(future) + "-frame future");
    frames.push_back(n);
  }
  return frames;
}

/// Sampler seed tied to the window's identity, so reordering the test set leaves metrics unchanged.
inline std::uint64_t window_seed(std::uint64_t seed, const data::WindowMeta& m) {
  return derive_seed(seed, (static_cast<std::uint64_t>(static_cast<std::uint32_t>(m.platoon_id)) << 32) |
                               static_cast<std::uint32_t>(m.start_frame));
}

/// Predicted future in feet for one window; with n_samples > 1 the mean of the samples.
inline std::vector<double> predict_feet(const ModelConfig& cfg, const ParameterSet& params,
                                        const diffusion::DiffusionSchedule& schedule,
                                        const data::NormalizationStats& norm, const data::PlatoonWindow& w,
                                        int n_samples, std::uint64_t seed) {
  require(n_samples >= 1, ErrorKind::config, "n_samples must be >= 1");
  const data::NormalizedWindow nw = data::normalize(w, norm);
  const ModelInput in = make_input(nw);
  const SamplingContext ctx = prepare_sampling(cfg, params, in);
  const auto predictor = make_noise_predictor(cfg, params, ctx.c);
  Rng rng(window_seed(seed, w.meta));
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(cfg.future);
  for (int s = 0; s < n_samples; ++s) mean += diffusion::sample_trajectory(ctx.scale, schedule, predictor, rng);
  mean /= n_samples;
  std::vector<double> out(static_cast<std::size_t>(cfg.future));
  for (int i = 0; i < cfg.future; ++i) out[static_cast<std::size_t>(i)] = data::position_to_feet(mean[i], nw.anchor, norm);
  return out;
}

inline EvalRow evaluate_model(const std::string& name, const ModelConfig& cfg, const ParameterSet& params,
                              const data::NormalizationStats& norm, const std::vector<data::PlatoonWindow>& test,
                              int n_samples, std::uint64_t seed, const std::vector<int>& horizons_s) {
  require(!test.empty(), ErrorKind::data, "test split is empty");
  const auto schedule = make_schedule(cfg);
  metrics::HorizonAccumulator acc(horizon_frames(horizons_s, cfg.future));
  for (const auto& w : test) {
    const auto pred = predict_feet(cfg, params, schedule, norm, w, n_samples, seed);
    acc.add(w.x_stu_fut, pred);
  }
  return {name, acc.result(), "ok"};
}

inline EvalRow evaluate_cv(const std::vector<data::PlatoonWindow>& test, const std::vector<int>& horizons_s,
                           const baseline::CvKalmanConfig& kf = {}) {
  require(!test.empty(), ErrorKind::data, "test split is empty");
  const int future = test.front().future();
  metrics::HorizonAccumulator acc(horizon_frames(horizons_s, future));
  for (const auto& w : test) acc.add(w.x_stu_fut, baseline::cv_baseline(w, future, kf));
  return {"cv", acc.result(), "ok"};
}

/// Model row plus the CV baseline row.
inline EvalReport evaluate(const Checkpoint& ck, const std::vector<data::PlatoonWindow>& test, int n_samples,
                           std::uint64_t seed, const std::vector<int>& horizons_s = default_horizons_s(),
                           const baseline::CvKalmanConfig& kf = {}) {
  require(!test.empty(), ErrorKind::data, "test split is empty");
  require(test.front().future() == ck.model.future && test.front().history() == ck.model.history, ErrorKind::config,
          "dataset windows (H=" + std::to_string(test.front().history()) + ", F=" +
              std::to_string(test.front().future()) + ") do not match the checkpoint (H=" +
              std::to_string(ck.model.history) + ", F=" + std::to_string(ck.model.future) + ")");
  EvalReport report;
  report.horizons_s = horizons_s;
  report.sample_count = test.size();
  report.config_hash = ck.hash();
  report.rows.push_back(evaluate_model(ck.model.variant_name(), ck.model, ck.state.params, ck.normalization, test,
                                       n_samples, seed, horizons_s));
  report.rows.push_back(evaluate_cv(test, horizons_s, kf));
  return report;
}

// ---------------------------------------------------------------------------
// Ablations

struct AblationVariant {
  std::string name;
  bool noise_scaling = true;
  bool history_encoding = true;
  bool cross_attention = true;
};

inline const std::vector<AblationVariant>& ablation_variants() {
  static const std::vector<AblationVariant> v = {
      {"crossfusor", true, true, true},
      {"no_noise_scaling", false, true, true},
      {"no_hist_encoding", true, false, true},
      {"no_cross_attention", true, true, false},
  };
  return v;
}

inline ModelConfig apply_variant(ModelConfig cfg, const AblationVariant& v) {
  cfg.noise_scaling = v.noise_scaling;
  cfg.history_encoding = v.history_encoding;
  cfg.cross_attention = v.cross_attention;
  return cfg;
}

/// Receives every sigma2 vector a variant uses during training.
using NoiseScaleProbe = std::function<void(const std::string& variant, const Eigen::VectorXd& sigma2)>;

struct AblationResult {
  EvalReport report;
  std::vector<TrainState> states;  // one per variant; empty params if the variant failed
};

/// Trains and evaluates every variant on the same data and seed. A failing
/// variant yields a row with status "failed: ..." and NaN metrics.
inline AblationResult run_ablations(const ModelConfig& base, const TrainConfig& tc,
                                    const std::vector<ModelInput>& train_inputs,
                                    const data::NormalizationStats& norm,
                                    const std::vector<data::PlatoonWindow>& test, int n_samples,
                                    const std::vector<int>& horizons_s = default_horizons_s(),
                                    const NoiseScaleProbe& probe = {},
                                    const std::function<void(const std::string&)>& progress = {}) {
  AblationResult result;
  result.report.horizons_s = horizons_s;
  result.report.sample_count = test.size();
  result.report.config_hash = config_hash(base, tc);
  for (const auto& v : ablation_variants()) {
    if (progress) progress(v.name);
    const ModelConfig cfg = apply_variant(base, v);
    try {
      ModelHooks hooks;
      if (probe) hooks.on_noise_scale = [&probe, &v](const Eigen::VectorXd& s2) { probe(v.name, s2); };
      TrainState state = train(cfg, train_inputs, tc, {}, std::nullopt, hooks);
      EvalRow row = evaluate_model(v.name, cfg, state.params, norm, test, n_samples, tc.seed, horizons_s);
      result.report.rows.push_back(std::move(row));
      result.states.push_back(std::move(state));
    } catch (const std::exception& e) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      result.report.rows.push_back(
          {v.name, std::vector<metrics::HorizonMetrics>(horizons_s.size(), {nan, nan, nan}), std::string("failed: ") + e.what()});
      result.states.emplace_back();
    }
  }
  return result;
}

}  // namespace crossfusor
