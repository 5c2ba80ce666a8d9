#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crossfusor/array_io.hpp"
#include "crossfusor/errors.hpp"
#include "crossfusor/normalization.hpp"

namespace crossfusor {

/// Architecture and diffusion hyperparameters. Defaults mirror the reference
/// configuration: 2-layer GRUs of width 50, 5 heads at embedding size 50,
/// feed-forward 100, U-Net channels (8, 16, 32, 64, 128), K = 200 linear betas
/// from 1e-4 to 0.02.
struct ModelConfig {
  int history = 30;
  int future = 50;
  int gru_hidden = 50;
  int gru_layers = 2;
  int heads = 5;
  int feed_forward = 100;
  std::vector<int> unet_channels{8, 16, 32, 64, 128};
  int diffusion_steps = 200;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  // Ablation switches; all on for the full model.
  bool noise_scaling = true;
  bool history_encoding = true;
  bool cross_attention = true;

  /// Embedding width of the encoders and the cross-attention block. Tied to the
  /// future length so the noise scale has one entry per predicted frame.
  int d_model() const { return future; }

  void validate() const {
    require(history >= 2 && future >= 2, ErrorKind::config, "history and future must be >= 2 frames");
    require(gru_hidden >= 1 && gru_layers >= 1, ErrorKind::config, "GRU width and depth must be positive");
    require(heads >= 1 && d_model() % heads == 0, ErrorKind::config,
            "embedding size " + std::to_string(d_model()) + " not divisible by " + std::to_string(heads) + " heads");
    require(feed_forward >= 1, ErrorKind::config, "feed-forward width must be positive");
    require(unet_channels.size() >= 2, ErrorKind::config, "U-Net needs at least two channel levels");
    for (int c : unet_channels) require(c >= 1, ErrorKind::config, "U-Net channels must be positive");
    require(diffusion_steps >= 2, ErrorKind::config, "diffusion needs at least 2 steps");
    require(beta_start > 0 && beta_start < beta_end && beta_end < 1, ErrorKind::config,
            "need 0 < beta_start < beta_end < 1");
  }

  std::string variant_name() const {
    if (noise_scaling && history_encoding && cross_attention) return "crossfusor";
    std::string name = "crossfusor";
    if (!noise_scaling) name += "-no_noise_scaling";
    if (!history_encoding) name += "-no_hist_encoding";
    if (!cross_attention) name += "-no_cross_attention";
    return name;
  }

  io::Json to_json() const {
    return {{"history", history},
            {"future", future},
            {"gru_hidden", gru_hidden},
            {"gru_layers", gru_layers},
            {"heads", heads},
            {"feed_forward", feed_forward},
            {"unet_channels", unet_channels},
            {"diffusion_steps", diffusion_steps},
            {"beta_start", beta_start},
            {"beta_end", beta_end},
            {"noise_scaling", noise_scaling},
            {"history_encoding", history_encoding},
            {"cross_attention", cross_attention}};
  }

  static ModelConfig from_json(const io::Json& j) {
    ModelConfig c;
    c.history = j.value("history", c.history);
    c.future = j.value("future", c.future);
    c.gru_hidden = j.value("gru_hidden", c.gru_hidden);
    c.gru_layers = j.value("gru_layers", c.gru_layers);
    c.heads = j.value("heads", c.heads);
    c.feed_forward = j.value("feed_forward", c.feed_forward);
    c.unet_channels = j.value("unet_channels", c.unet_channels);
    c.diffusion_steps = j.value("diffusion_steps", c.diffusion_steps);
    c.beta_start = j.value("beta_start", c.beta_start);
    c.beta_end = j.value("beta_end", c.beta_end);
    c.noise_scaling = j.value("noise_scaling", c.noise_scaling);
    c.history_encoding = j.value("history_encoding", c.history_encoding);
    c.cross_attention = j.value("cross_attention", c.cross_attention);
    c.validate();
    return c;
  }
};

/// Normalized window laid out as model tensors.
struct ModelInput {
  Eigen::MatrixXd study_history;  // H x 2: position, speed
  Eigen::MatrixXd leader_position, leader_speed, leader_gap;        // H x 1; gap = leader - study
  Eigen::MatrixXd follower_position, follower_speed, follower_gap;  // H x 1; gap = study - follower
  Eigen::VectorXd future;                                           // F, empty at inference
  double anchor = 0.0;
};

inline ModelInput make_input(const data::NormalizedWindow& nw) {
  const data::PlatoonWindow& w = nw.values;
  const auto h = static_cast<Eigen::Index>(w.x_stu_his.size());
  auto column = [h](const std::vector<double>& v) {
    Eigen::MatrixXd m(h, 1);
    for (Eigen::Index t = 0; t < h; ++t) m(t, 0) = v[static_cast<std::size_t>(t)];
    return m;
  };
  ModelInput in;
  in.study_history.resize(h, 2);
  in.study_history.col(0) = column(w.x_stu_his);
  in.study_history.col(1) = column(w.v_stu_his);
  in.leader_position = column(w.x_lea_his);
  in.leader_speed = column(w.v_lea_his);
  in.leader_gap = column(w.dx1_his);
  in.follower_position = column(w.x_fol_his);
  in.follower_speed = column(w.v_fol_his);
  in.follower_gap = column(w.dx2_his);
  in.future = Eigen::Map<const Eigen::VectorXd>(w.x_stu_fut.data(), static_cast<Eigen::Index>(w.x_stu_fut.size()));
  in.anchor = nw.anchor;
  return in;
}

}  // namespace crossfusor
