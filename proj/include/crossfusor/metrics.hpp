#pragma once

// Displacement metrics over a prediction horizon of n frames (frames 1..n of
// the future). All values in feet.
//
//   RMSE = sqrt(mean_i (x_i - xhat_i)^2)
//   FDE  = |x_n - xhat_n|
//   ADE  = mean_i |x_i - xhat_i|

#include <cmath>
#include <span>
#include <vector>

#include "crossfusor/errors.hpp"

namespace crossfusor::metrics {

struct HorizonMetrics {
  double rmse = 0.0;
  double fde = 0.0;
  double ade = 0.0;
};

namespace detail {

inline void check(std::span<const double> truth, std::span<const double> pred, std::size_t frames) {
  require(frames >= 1 && truth.size() >= frames && pred.size() >= frames, ErrorKind::invalid_argument,
          "horizon longer than the trajectories");
}

}  // namespace detail

inline double rmse(std::span<const double> truth, std::span<const double> pred, std::size_t frames) {
  detail::check(truth, pred, frames);
  double sq = 0.0;
  for (std::size_t i = 0; i < frames; ++i) sq += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  return std::sqrt(sq / static_cast<double>(frames));
}

inline double fde(std::span<const double> truth, std::span<const double> pred, std::size_t frames) {
  detail::check(truth, pred, frames);
  return std::abs(truth[frames - 1] - pred[frames - 1]);
}

inline double ade(std::span<const double> truth, std::span<const double> pred, std::size_t frames) {
  detail::check(truth, pred, frames);
  double sum = 0.0;
  for (std::size_t i = 0; i < frames; ++i) sum += std::abs(truth[i] - pred[i]);
  return sum / static_cast<double>(frames);
}

/// Aggregates windows: RMSE is the root of the mean squared error over all
/// windows and frames; FDE and ADE are means over windows.
class HorizonAccumulator {
 public:
  explicit HorizonAccumulator(std::vector<int> horizon_frames) : frames_(std::move(horizon_frames)) {
    sq_.assign(frames_.size(), 0.0);
    fde_.assign(frames_.size(), 0.0);
    ade_.assign(frames_.size(), 0.0);
  }

  void add(std::span<const double> truth, std::span<const double> pred) {
    for (std::size_t h = 0; h < frames_.size(); ++h) {
      const auto n = static_cast<std::size_t>(frames_[h]);
      const double r = rmse(truth, pred, n);
      sq_[h] += r * r;
      fde_[h] += fde(truth, pred, n);
      ade_[h] += ade(truth, pred, n);
    }
    ++count_;
  }

  std::size_t count() const { return count_; }

  std::vector<HorizonMetrics> result() const {
    require(count_ > 0, ErrorKind::data, "no windows accumulated");
    std::vector<HorizonMetrics> out(frames_.size());
    const double n = static_cast<double>(count_);
    for (std::size_t h = 0; h < frames_.size(); ++h) {
      out[h] = {std::sqrt(sq_[h] / n), fde_[h] / n, ade_[h] / n};
    }
    return out;
  }

 private:
  std::vector<int> frames_;
  std::vector<double> sq_, fde_, ade_;
  std::size_t count_ = 0;
};

}  // namespace crossfusor::metrics
