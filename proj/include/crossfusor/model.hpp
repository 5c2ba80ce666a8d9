#pragma once

// Full conditional diffusion model: history encoder -> noise scale and query,
// leader/follower encoders -> cross-attention context, U-Net noise predictor.

#include <functional>
#include <string>
#include <vector>

#include "crossfusor/context_encoder.hpp"
#include "crossfusor/denoiser.hpp"
#include "crossfusor/diffusion.hpp"
#include "crossfusor/history_encoder.hpp"
#include "crossfusor/model_config.hpp"
#include "crossfusor/parameters.hpp"

namespace crossfusor {

inline history::EncoderShape encoder_shape(const ModelConfig& c) {
  return {c.history, 2, c.gru_hidden, c.gru_layers, c.d_model()};
}

inline context::ContextShape context_shape(const ModelConfig& c) {
  return {c.gru_hidden, c.gru_layers, c.d_model(), c.heads, c.feed_forward};
}

inline denoiser::UNetShape unet_shape(const ModelConfig& c) { return {c.future, c.unet_channels, c.d_model()}; }

inline diffusion::DiffusionSchedule make_schedule(const ModelConfig& c) {
  return diffusion::DiffusionSchedule(c.diffusion_steps, c.beta_start, c.beta_end);
}

inline ParameterSet init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParameterSet ps;
  Rng rng = make_rng(seed, 0x1417);
  if (cfg.history_encoding) {
    history::add_parameters(ps, "hist", encoder_shape(cfg), rng);
  } else {
    history::add_linear_parameters(ps, "hist", encoder_shape(cfg), rng);
  }
  context::add_stream_parameters(ps, "ctx", context_shape(cfg), rng);
  if (cfg.cross_attention) {
    context::add_attention_parameters(ps, "ctx", context_shape(cfg), rng);
  } else {
    context::add_linear_context_parameters(ps, "ctx", context_shape(cfg), rng);
  }
  denoiser::add_parameters(ps, "unet", unet_shape(cfg), rng);
  return ps;
}

/// Test and instrumentation hooks. Empty hooks leave the model untouched.
struct ModelHooks {
  /// Observes the per-dimension noise variance used for each sample.
  std::function<void(const Eigen::VectorXd& sigma2)> on_noise_scale;
  /// Replaces the U-Net. Receives the true scaled noise (training only; empty at sampling).
  std::function<ad::Var(ad::Tape&, const ad::Var& x_k, int k, const ad::Var& c, const Eigen::VectorXd& eps_true)>
      denoiser_override;
  /// Treat sigma as a constant when differentiating the loss.
  bool stop_gradient_noise_scale = false;
};

struct Conditioning {
  ad::Var z_stu_his;  // T x D
  ad::Var sigma;      // 1 x D
  ad::Var c;          // T x D
};

inline Conditioning condition(ParamBinder& p, const ModelConfig& cfg, const ModelInput& in, const ModelHooks& hooks,
                              std::vector<Matrix>* attention = nullptr) {
  ad::Tape& t = p.tape();
  require(in.study_history.rows() == cfg.history, ErrorKind::invalid_argument,
          "history length " + std::to_string(in.study_history.rows()) + " does not match model (" +
              std::to_string(cfg.history) + ")");
  Conditioning out;
  const ad::Var hist = t.constant(in.study_history);
  out.z_stu_his = cfg.history_encoding ? history::encode(p, "hist", hist, cfg.gru_layers).z_stu_his
                                       : history::encode_linear(p, "hist", hist);
  if (cfg.noise_scaling) {
    out.sigma = diffusion::noise_sigma(out.z_stu_his);
    if (hooks.stop_gradient_noise_scale) out.sigma = ad::detach(out.sigma);
  } else {
    out.sigma = t.constant(Matrix::Ones(1, cfg.d_model()));
  }
  if (hooks.on_noise_scale) {
    const Eigen::VectorXd s = out.sigma.value().row(0).transpose();
    hooks.on_noise_scale(s.cwiseProduct(s));
  }
  out.c = context::encode(p, "ctx", in, out.z_stu_his, context_shape(cfg), cfg.cross_attention, attention).c;
  return out;
}

/// Simplified objective for one window: mean_d (eps - eps_hat(x_k, k, c))^2 with
/// eps = sigma * eps0 and x_k = sqrt(abar_k) x0 + sqrt(1 - abar_k) eps.
inline ad::Var noise_prediction_loss(ParamBinder& p, const ModelConfig& cfg,
                                     const diffusion::DiffusionSchedule& schedule, const ModelInput& in, int k,
                                     const Eigen::VectorXd& eps0, const ModelHooks& hooks = {}) {
  ad::Tape& t = p.tape();
  require(in.future.size() == cfg.future, ErrorKind::invalid_argument,
          "future length " + std::to_string(in.future.size()) + " does not match model (" +
              std::to_string(cfg.future) + ")");
  const Conditioning cond = condition(p, cfg, in, hooks);
  const ad::Var eps = ad::mul(cond.sigma, t.constant(eps0.transpose()));
  const double ab = schedule.alpha_bar(k);
  const ad::Var x0 = t.constant(in.future.transpose());
  const ad::Var x_k = ad::add(ad::scale(x0, std::sqrt(ab)), ad::scale(eps, std::sqrt(1.0 - ab)));
  const ad::Var eps_hat = hooks.denoiser_override
                              ? hooks.denoiser_override(t, x_k, k, cond.c, eps.value().row(0).transpose())
                              : denoiser::predict_noise(p, "unet", unet_shape(cfg), x_k, k, cond.c);
  return ad::mean_all(ad::square(ad::sub(eps, eps_hat)));
}

/// Encoder outputs needed by the sampler, evaluated once per window.
struct SamplingContext {
  diffusion::NoiseScale scale;
  Matrix c;
  Matrix z_stu_his;
};

inline SamplingContext prepare_sampling(const ModelConfig& cfg, const ParameterSet& params, const ModelInput& in,
                                        const ModelHooks& hooks = {}) {
  ad::Tape tape;
  ParamBinder p(tape, params, false);
  const Conditioning cond = condition(p, cfg, in, hooks);
  SamplingContext ctx;
  ctx.z_stu_his = cond.z_stu_his.value();
  ctx.c = cond.c.value();
  if (cfg.noise_scaling) {
    ctx.scale = diffusion::compute_noise_scale(ctx.z_stu_his);
  } else {
    ctx.scale = diffusion::NoiseScale::isotropic(cfg.d_model());
  }
  return ctx;
}

inline diffusion::NoisePredictor make_noise_predictor(const ModelConfig& cfg, const ParameterSet& params,
                                                      const Matrix& c) {
  return [&cfg, &params, &c](const Eigen::VectorXd& x_k, int k) {
    ad::Tape tape;
    ParamBinder p(tape, params, false);
    const ad::Var eps_hat = denoiser::predict_noise(p, "unet", unet_shape(cfg), tape.constant(x_k.transpose()), k,
                                                    tape.external(c, false));
    return Eigen::VectorXd(eps_hat.value().row(0).transpose());
  };
}

/// One sampled future in normalized position units.
inline Eigen::VectorXd sample_future(const ModelConfig& cfg, const ParameterSet& params,
                                     const diffusion::DiffusionSchedule& schedule, const ModelInput& in, Rng& rng,
                                     const diffusion::SamplerObserver& observe = {}) {
  const SamplingContext ctx = prepare_sampling(cfg, params, in);
  return diffusion::sample_trajectory(ctx.scale, schedule, make_noise_predictor(cfg, params, ctx.c), rng, observe);
}

}  // namespace crossfusor
