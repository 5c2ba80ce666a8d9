#pragma once

// Constant-velocity Kalman filter baseline. State (x, v); both position and
// speed are measured each frame; white-acceleration process noise.

#include <vector>

#include <Eigen/Dense>

#include "crossfusor/errors.hpp"
#include "crossfusor/platoon_data.hpp"

namespace crossfusor::baseline {

struct CvKalmanConfig {
  double accel_noise = 1.0;     // q, ft^2/s^3
  double position_noise = 1.0;  // ft^2
  double speed_noise = 1.0;     // ft^2/s^2
  double dt = 1.0 / data::kFrameRateHz;
};

/// Filters the study vehicle's history and extrapolates `future` frames.
inline std::vector<double> cv_baseline(const data::PlatoonWindow& w, int future, const CvKalmanConfig& cfg = {}) {
  require(!w.x_stu_his.empty() && w.x_stu_his.size() == w.v_stu_his.size(), ErrorKind::invalid_argument,
          "window history is empty or inconsistent");
  const double dt = cfg.dt;
  Eigen::Matrix2d f;
  f << 1.0, dt, 0.0, 1.0;
  Eigen::Matrix2d q;
  q << dt * dt * dt / 3.0, dt * dt / 2.0, dt * dt / 2.0, dt;
  q *= cfg.accel_noise;
  const Eigen::Matrix2d r = Eigen::Vector2d(cfg.position_noise, cfg.speed_noise).asDiagonal();

  Eigen::Vector2d s(w.x_stu_his.front(), w.v_stu_his.front());
  Eigen::Matrix2d p = r;
  for (std::size_t t = 1; t < w.x_stu_his.size(); ++t) {
    s = f * s;
    p = f * p * f.transpose() + q;
    const Eigen::Vector2d z(w.x_stu_his[t], w.v_stu_his[t]);
    const Eigen::Matrix2d k = p * (p + r).inverse();
    s += k * (z - s);
    p = (Eigen::Matrix2d::Identity() - k) * p;
  }
  std::vector<double> pred(static_cast<std::size_t>(future));
  for (int j = 0; j < future; ++j) pred[static_cast<std::size_t>(j)] = s[0] + s[1] * dt * (j + 1);
  return pred;
}

}  // namespace crossfusor::baseline
