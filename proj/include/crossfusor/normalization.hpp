#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "crossfusor/array_io.hpp"
#include "crossfusor/errors.hpp"
#include "crossfusor/platoon_data.hpp"

namespace crossfusor::data {

/// Per-channel affine maps fitted on the training split.
///
/// Positions (history of all three vehicles and the study vehicle's future)
/// are first anchored at the study vehicle's last history position, then
/// divided by their RMS; the shift stays 0 so the anchor maps to exactly 0.
/// Speeds and gaps are standardized to zero mean, unit variance.
struct NormalizationStats {
  double position_scale = 1.0;
  double speed_shift = 0.0;
  double speed_scale = 1.0;
  double gap_shift = 0.0;
  double gap_scale = 1.0;

  io::Json to_json() const {
    return {{"position_shift", 0.0},      {"position_scale", position_scale}, {"speed_shift", speed_shift},
            {"speed_scale", speed_scale}, {"gap_shift", gap_shift},           {"gap_scale", gap_scale}};
  }

  static NormalizationStats from_json(const io::Json& j) {
    NormalizationStats s;
    s.position_scale = j.at("position_scale").get<double>();
    s.speed_shift = j.at("speed_shift").get<double>();
    s.speed_scale = j.at("speed_scale").get<double>();
    s.gap_shift = j.at("gap_shift").get<double>();
    s.gap_scale = j.at("gap_scale").get<double>();
    require(s.position_scale > 0 && s.speed_scale > 0 && s.gap_scale > 0, ErrorKind::config,
            "normalization scales must be positive");
    return s;
  }
};

struct NormalizationFit {
  NormalizationStats stats;
  std::vector<std::string> warnings;
};

inline NormalizationFit fit_normalization(const std::vector<PlatoonWindow>& train) {
  require(!train.empty(), ErrorKind::data, "cannot fit normalization on an empty training split");
  double pos_sq = 0.0;
  double pos_n = 0.0;
  double spd_sum = 0.0, spd_sq = 0.0, spd_n = 0.0;
  double gap_sum = 0.0, gap_sq = 0.0, gap_n = 0.0;
  for (const auto& w : train) {
    const double anchor = w.x_stu_his.back();
    for (const auto* v : {&w.x_lea_his, &w.x_stu_his, &w.x_fol_his, &w.x_stu_fut}) {
      for (double x : *v) {
        pos_sq += (x - anchor) * (x - anchor);
        pos_n += 1.0;
      }
    }
    for (const auto* v : {&w.v_lea_his, &w.v_stu_his, &w.v_fol_his}) {
      for (double x : *v) {
        spd_sum += x;
        spd_sq += x * x;
        spd_n += 1.0;
      }
    }
    for (const auto* v : {&w.dx1_his, &w.dx2_his}) {
      for (double x : *v) {
        gap_sum += x;
        gap_sq += x * x;
        gap_n += 1.0;
      }
    }
  }
  NormalizationFit fit;
  auto clamp_scale = [&](double scale, const char* channel) {
    if (!(scale > 1e-12) || !std::isfinite(scale)) {
      fit.warnings.push_back(std::string("zero-variance ") + channel + " channel; scale clamped to 1");
      return 1.0;
    }
    return scale;
  };
  fit.stats.position_scale = clamp_scale(std::sqrt(pos_sq / pos_n), "position");
  fit.stats.speed_shift = spd_sum / spd_n;
  fit.stats.speed_scale =
      clamp_scale(std::sqrt(std::max(0.0, spd_sq / spd_n - fit.stats.speed_shift * fit.stats.speed_shift)), "speed");
  fit.stats.gap_shift = gap_sum / gap_n;
  fit.stats.gap_scale =
      clamp_scale(std::sqrt(std::max(0.0, gap_sq / gap_n - fit.stats.gap_shift * fit.stats.gap_shift)), "gap");
  return fit;
}

/// A window in model units plus the anchor needed to return to feet.
struct NormalizedWindow {
  PlatoonWindow values;  // same layout, normalized entries
  double anchor = 0.0;   // ft, the study vehicle's last history position
};

inline NormalizedWindow normalize(const PlatoonWindow& w, const NormalizationStats& s) {
  NormalizedWindow out;
  out.anchor = w.x_stu_his.back();
  out.values = w;
  auto pos = [&](std::vector<double>& v) {
    for (double& x : v) x = (x - out.anchor) / s.position_scale;
  };
  auto spd = [&](std::vector<double>& v) {
    for (double& x : v) x = (x - s.speed_shift) / s.speed_scale;
  };
  auto gap = [&](std::vector<double>& v) {
    for (double& x : v) x = (x - s.gap_shift) / s.gap_scale;
  };
  PlatoonWindow& n = out.values;
  pos(n.x_lea_his), pos(n.x_stu_his), pos(n.x_fol_his), pos(n.x_stu_fut), pos(n.x_lea_fut), pos(n.x_fol_fut);
  spd(n.v_lea_his), spd(n.v_stu_his), spd(n.v_fol_his);
  gap(n.dx1_his), gap(n.dx2_his);
  return out;
}

inline double position_to_feet(double normalized, double anchor, const NormalizationStats& s) {
  return normalized * s.position_scale + anchor;
}

inline PlatoonWindow denormalize(const NormalizedWindow& nw, const NormalizationStats& s) {
  PlatoonWindow w = nw.values;
  auto pos = [&](std::vector<double>& v) {
    for (double& x : v) x = position_to_feet(x, nw.anchor, s);
  };
  auto spd = [&](std::vector<double>& v) {
    for (double& x : v) x = x * s.speed_scale + s.speed_shift;
  };
  auto gap = [&](std::vector<double>& v) {
    for (double& x : v) x = x * s.gap_scale + s.gap_shift;
  };
  pos(w.x_lea_his), pos(w.x_stu_his), pos(w.x_fol_his), pos(w.x_stu_fut), pos(w.x_lea_fut), pos(w.x_fol_fut);
  spd(w.v_lea_his), spd(w.v_stu_his), spd(w.v_fol_his);
  gap(w.dx1_his), gap(w.dx2_his);
  return w;
}

}  // namespace crossfusor::data
