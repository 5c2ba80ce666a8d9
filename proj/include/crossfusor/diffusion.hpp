#pragma once

// History-scaled DDPM: noise is drawn from N(0, diag(sigma2)) instead of
// N(0, I) in both the forward and the reverse chain. With sigma2 = 1 every
// routine here reduces to the plain DDPM update.
//
// Steps are 1-based: k in [1, K].

#include <cmath>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "crossfusor/autodiff.hpp"
#include "crossfusor/errors.hpp"
#include "crossfusor/random.hpp"

namespace crossfusor::diffusion {

using Vector = Eigen::VectorXd;

class DiffusionSchedule {
 public:
  /// Linear beta ramp from beta_start (k = 1) to beta_end (k = K).
  DiffusionSchedule(int steps = 200, double beta_start = 1e-4, double beta_end = 0.02) {
    require(steps >= 2, ErrorKind::config, "diffusion needs at least 2 steps");
    require(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0, ErrorKind::config,
            "need 0 < beta_start < beta_end < 1");
    beta_.resize(steps);
    alpha_.resize(steps);
    alpha_bar_.resize(steps);
    double prod = 1.0;
    for (int i = 0; i < steps; ++i) {
      beta_[i] = beta_start + (beta_end - beta_start) * static_cast<double>(i) / static_cast<double>(steps - 1);
      alpha_[i] = 1.0 - beta_[i];
      prod *= alpha_[i];
      alpha_bar_[i] = prod;
    }
  }

  int steps() const { return static_cast<int>(beta_.size()); }
  double beta(int k) const { return beta_[index(k)]; }
  double alpha(int k) const { return alpha_[index(k)]; }
  double alpha_bar(int k) const { return alpha_bar_[index(k)]; }

  void check_step(int k) const {
    require(k >= 1 && k <= steps(), ErrorKind::invalid_argument,
            "diffusion step " + std::to_string(k) + " outside [1, " + std::to_string(steps()) + "]");
  }

 private:
  Eigen::Index index(int k) const {
    check_step(k);
    return k - 1;
  }

  Vector beta_, alpha_, alpha_bar_;
};

/// Per-dimension noise variance sigma2 = softplus(mu), mu the time-mean of the history encoding.
struct NoiseScale {
  Vector mu;
  Vector sigma2;
  Vector sigma;

  static NoiseScale from_mean(const Vector& mu) {
    NoiseScale s;
    s.mu = mu;
    s.sigma2 = mu.unaryExpr([](double x) { return ad::detail::softplus(x); });
    s.sigma = s.sigma2.cwiseSqrt();
    return s;
  }

  /// Unit variance in every dimension; the plain-DDPM special case.
  static NoiseScale isotropic(Eigen::Index dim) {
    NoiseScale s;
    s.mu = Vector::Constant(dim, std::numeric_limits<double>::infinity());
    s.sigma2 = Vector::Ones(dim);
    s.sigma = Vector::Ones(dim);
    return s;
  }

  Eigen::Index dim() const { return sigma.size(); }
};

/// z_stu_his: T x D encoding -> NoiseScale over D.
inline NoiseScale compute_noise_scale(const Eigen::MatrixXd& z_stu_his) {
  require(z_stu_his.allFinite(), ErrorKind::numerical, "non-finite history encoding");
  return NoiseScale::from_mean(z_stu_his.colwise().mean().transpose());
}

/// Differentiable version used in training; returns sigma as a 1 x D row.
inline ad::Var noise_sigma(const ad::Var& z_stu_his) { return ad::sqrt(ad::softplus(ad::mean_rows(z_stu_his))); }

inline Vector sample_scaled_noise(const NoiseScale& scale, Rng& rng) {
  return scale.sigma.cwiseProduct(standard_normal(rng, scale.dim()));
}

/// x_k = sqrt(alpha_k) x_{k-1} + sqrt(beta_k) eps, eps ~ N(0, diag(sigma2)).
inline Vector forward_step(const Vector& x_prev, int k, const DiffusionSchedule& schedule, const NoiseScale& scale,
                           Rng& rng) {
  schedule.check_step(k);
  const Vector eps = sample_scaled_noise(scale, rng);
  return std::sqrt(schedule.alpha(k)) * x_prev + std::sqrt(schedule.beta(k)) * eps;
}

/// x_k = sqrt(abar_k) x_0 + sqrt(1 - abar_k) eps for a given scaled eps.
inline Vector forward_closed_form_with(const Vector& x0, int k, const DiffusionSchedule& schedule, const Vector& eps) {
  schedule.check_step(k);
  const double ab = schedule.alpha_bar(k);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

inline Vector forward_closed_form(const Vector& x0, int k, const DiffusionSchedule& schedule, const NoiseScale& scale,
                                  Rng& rng) {
  schedule.check_step(k);
  return forward_closed_form_with(x0, k, schedule, sample_scaled_noise(scale, rng));
}

/// Mean of p(x_{k-1} | x_k) in the eps-prediction parameterization.
inline Vector reverse_mean(const Vector& x_k, int k, const Vector& eps_hat, const DiffusionSchedule& schedule) {
  schedule.check_step(k);
  const double coef = schedule.beta(k) / std::sqrt(1.0 - schedule.alpha_bar(k));
  return (x_k - coef * eps_hat) / std::sqrt(schedule.alpha(k));
}

/// One ancestral step. Variance is fixed at beta_k diag(sigma2); no noise at k = 1.
inline Vector reverse_step(const Vector& x_k, int k, const Vector& eps_hat, const DiffusionSchedule& schedule,
                           const NoiseScale& scale, Rng& rng) {
  Vector mean = reverse_mean(x_k, k, eps_hat, schedule);
  if (k == 1) return mean;
  const Vector z = standard_normal(rng, x_k.size());
  return mean + std::sqrt(schedule.beta(k)) * scale.sigma.cwiseProduct(z);
}

/// Estimate of x_0 implied by x_k and a noise prediction.
inline Vector predict_x0(const Vector& x_k, int k, const Vector& eps_hat, const DiffusionSchedule& schedule) {
  const double ab = schedule.alpha_bar(k);
  return (x_k - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab);
}

using NoisePredictor = std::function<Vector(const Vector& x_k, int k)>;

/// Called with (k, x_k, eps_hat) before each reverse step and with (0, x_0, {}) at the end.
using SamplerObserver = std::function<void(int k, const Vector& x_k, const Vector& eps_hat)>;

/// Ancestral sampling from x_K ~ N(0, diag(sigma2)) down to x_0.
inline Vector sample_trajectory(const NoiseScale& scale, const DiffusionSchedule& schedule,
                                const NoisePredictor& denoiser, Rng& rng, const SamplerObserver& observe = {}) {
  Vector x = sample_scaled_noise(scale, rng);
  for (int k = schedule.steps(); k >= 1; --k) {
    const Vector eps_hat = denoiser(x, k);
    require(eps_hat.allFinite(), ErrorKind::numerical,
            "non-finite noise prediction at diffusion step " + std::to_string(k));
    if (observe) observe(k, x, eps_hat);
    x = reverse_step(x, k, eps_hat, schedule, scale, rng);
    require(x.allFinite(), ErrorKind::numerical, "non-finite sample at diffusion step " + std::to_string(k - 1));
  }
  if (observe) observe(0, x, Vector());
  return x;
}

}  // namespace crossfusor::diffusion
