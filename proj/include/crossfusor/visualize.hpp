#pragma once

// Intermediate states of one sampling chain, for denoising plots.
// The chain is seeded exactly like evaluation, so the k = 0 state is the
// prediction evaluate() scores for the same seed.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "crossfusor/evaluation.hpp"

namespace crossfusor {

struct DenoisingFrame {
  int k = 0;
  std::vector<double> x_k_ft;       // denormalized trajectory
  std::vector<double> x0_hat_ft;    // per-step denoised estimate; equals x_k at k = 0
  std::vector<double> noise_ft;     // |x_k - x0_hat|, feet
};

struct DenoisingTrace {
  Eigen::VectorXd sigma2;
  double anchor_ft = 0.0;
  std::vector<DenoisingFrame> frames;  // ordered by descending k
};

inline DenoisingTrace trace_denoising(const ModelConfig& cfg, const ParameterSet& params,
                                      const data::NormalizationStats& norm, const data::PlatoonWindow& w,
                                      std::vector<int> ks, std::uint64_t seed) {
  const int K = cfg.diffusion_steps;
  require(!ks.empty(), ErrorKind::invalid_argument, "no diffusion steps requested");
  for (int k : ks) {
    require(k >= 0 && k <= K, ErrorKind::invalid_argument,
            "step " + std::to_string(k) + " outside [0, " + std::to_string(K) + "]");
  }
  std::sort(ks.begin(), ks.end(), std::greater<>());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  const data::NormalizedWindow nw = data::normalize(w, norm);
  const SamplingContext ctx = prepare_sampling(cfg, params, make_input(nw));
  const auto schedule = make_schedule(cfg);
  DenoisingTrace trace;
  trace.sigma2 = ctx.scale.sigma2;
  trace.anchor_ft = nw.anchor;

  auto feet = [&](const Eigen::VectorXd& v) {
    std::vector<double> out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = data::position_to_feet(v[i], nw.anchor, norm);
    return out;
  };
  std::map<int, DenoisingFrame> captured;
  auto observe = [&](int k, const Eigen::VectorXd& x_k, const Eigen::VectorXd& eps_hat) {
    if (std::find(ks.begin(), ks.end(), k) == ks.end()) return;
    const Eigen::VectorXd x0 = k == 0 ? x_k : diffusion::predict_x0(x_k, k, eps_hat, schedule);
    DenoisingFrame f;
    f.k = k;
    f.x_k_ft = feet(x_k);
    f.x0_hat_ft = feet(x0);
    f.noise_ft.resize(f.x_k_ft.size());
    for (Eigen::Index i = 0; i < x_k.size(); ++i) f.noise_ft[static_cast<std::size_t>(i)] = std::abs(x_k[i] - x0[i]) * norm.position_scale;
    captured[k] = std::move(f);
  };
  Rng rng(window_seed(seed, w.meta));
  diffusion::sample_trajectory(ctx.scale, schedule, make_noise_predictor(cfg, params, ctx.c), rng, observe);
  for (int k : ks) trace.frames.push_back(std::move(captured.at(k)));
  return trace;
}

/// Mean noise magnitude per frame, in the trace's k order.
inline std::vector<double> mean_noise_magnitude(const DenoisingTrace& t) {
  std::vector<double> out;
  for (const auto& f : t.frames) {
    double s = 0.0;
    for (double v : f.noise_ft) s += v;
    out.push_back(f.noise_ft.empty() ? 0.0 : s / static_cast<double>(f.noise_ft.size()));
  }
  return out;
}

}  // namespace crossfusor
