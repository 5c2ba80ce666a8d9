#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "crossfusor/array_io.hpp"
#include "crossfusor/model.hpp"
#include "crossfusor/normalization.hpp"

namespace crossfusor {

struct TrainConfig {
  double lr = 1e-3;
  int batch = 64;
  int epochs = 10;
  std::uint64_t seed = 0;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double max_grad_norm = 0.0;  // 0 disables clipping
  long max_steps = 0;          // 0 = no limit
  bool stop_gradient_noise_scale = false;
  bool cosine_decay = false;  // lr * (1 + cos(pi * step / total_steps)) / 2

  void validate() const {
    require(lr > 0.0, ErrorKind::config, "learning rate must be positive");
    require(batch >= 1, ErrorKind::config, "batch size must be >= 1");
    require(epochs >= 1, ErrorKind::config, "epochs must be >= 1");
    require(weight_decay >= 0.0 && max_grad_norm >= 0.0 && max_steps >= 0, ErrorKind::config,
            "weight decay, gradient clip and step limit must be non-negative");
  }

  io::Json to_json() const {
    return {{"lr", lr},
            {"batch", batch},
            {"epochs", epochs},
            {"seed", seed},
            {"weight_decay", weight_decay},
            {"beta1", beta1},
            {"beta2", beta2},
            {"adam_eps", adam_eps},
            {"max_grad_norm", max_grad_norm},
            {"max_steps", max_steps},
            {"stop_gradient_noise_scale", stop_gradient_noise_scale},
            {"cosine_decay", cosine_decay}};
  }

  static TrainConfig from_json(const io::Json& j) {
    TrainConfig c;
    c.lr = j.value("lr", c.lr);
    c.batch = j.value("batch", c.batch);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.stop_gradient_noise_scale = j.value("stop_gradient_noise_scale", c.stop_gradient_noise_scale);
    c.cosine_decay = j.value("cosine_decay", c.cosine_decay);
    c.validate();
    return c;
  }
};

/// Diffusion step and unit noise drawn for one training element.
struct NoiseDraw {
  int k = 1;
  Eigen::VectorXd eps0;
};

inline std::vector<NoiseDraw> draw_noise(Rng& rng, std::size_t count, const ModelConfig& cfg) {
  std::vector<NoiseDraw> draws(count);
  for (auto& d : draws) {
    d.k = uniform_int(rng, 1, cfg.diffusion_steps);
    d.eps0 = standard_normal(rng, cfg.future);
  }
  return draws;
}

struct StepResult {
  double loss = 0.0;
  ParameterSet grads;
};

/// Batch loss (mean over elements of the per-element noise MSE) and its gradient
/// with respect to every parameter.
inline StepResult training_step(const ModelConfig& cfg, const ParameterSet& params,
                                const std::vector<const ModelInput*>& batch, const std::vector<NoiseDraw>& draws,
                                const diffusion::DiffusionSchedule& schedule, const ModelHooks& hooks = {}) {
  require(!batch.empty() && batch.size() == draws.size(), ErrorKind::invalid_argument,
          "batch and noise draws must be non-empty and equally sized");
  StepResult out;
  out.grads = params.zeros_like();
  const double weight = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ad::Tape tape;
    ParamBinder p(tape, params, true);
    const ad::Var loss = noise_prediction_loss(p, cfg, schedule, *batch[i], draws[i].k, draws[i].eps0, hooks);
    if (!std::isfinite(loss.scalar())) {
      fail(ErrorKind::numerical, "non-finite loss at batch element " + std::to_string(i) + " (diffusion step " +
                                     std::to_string(draws[i].k) + ")");
    }
    out.loss += weight * loss.scalar();
    tape.backward(loss, weight);
    p.accumulate_gradients(out.grads);
  }
  return out;
}

inline StepResult training_step(const ModelConfig& cfg, const ParameterSet& params,
                                const std::vector<const ModelInput*>& batch,
                                const diffusion::DiffusionSchedule& schedule, Rng& rng, const ModelHooks& hooks = {}) {
  return training_step(cfg, params, batch, draw_noise(rng, batch.size(), cfg), schedule, hooks);
}

/// Adam with decoupled weight decay.
struct AdamW {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  long step = 0;
  ParameterSet m;
  ParameterSet v;

  static AdamW from(const TrainConfig& c, const ParameterSet& params) {
    AdamW opt;
    opt.lr = c.lr;
    opt.beta1 = c.beta1;
    opt.beta2 = c.beta2;
    opt.eps = c.adam_eps;
    opt.weight_decay = c.weight_decay;
    opt.m = params.zeros_like();
    opt.v = params.zeros_like();
    return opt;
  }

  void update(ParameterSet& params, const ParameterSet& grads) {
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (auto& [name, p] : params) {
      const Matrix& g = grads.at(name);
      Matrix& mm = m.at(name);
      Matrix& vv = v.at(name);
      p *= 1.0 - lr * weight_decay;
      mm = beta1 * mm + (1.0 - beta1) * g;
      vv = beta2 * vv + (1.0 - beta2) * g.cwiseProduct(g);
      p.array() -= lr * (mm.array() / bc1) / ((vv.array() / bc2).sqrt() + eps);
    }
  }
};

inline double global_norm(const ParameterSet& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

struct EpochLog {
  int epoch = 0;
  long steps = 0;
  double mean_loss = 0.0;
};

struct TrainState {
  ParameterSet params;
  AdamW optimizer;
  int epoch = 0;  // completed epochs
  std::vector<EpochLog> epochs;
  std::vector<double> step_losses;
};

using EpochCallback = std::function<void(const TrainState&)>;

/// Epoch loop with seeded shuffling. Every epoch derives its own RNG stream from
/// (seed, epoch), so resuming from a checkpoint continues the same sequence.
inline TrainState train(const ModelConfig& cfg, const std::vector<ModelInput>& data, const TrainConfig& tc,
                        const EpochCallback& on_epoch = {}, std::optional<TrainState> resume = std::nullopt,
                        const ModelHooks& base_hooks = {}) {
  cfg.validate();
  tc.validate();
  require(!data.empty(), ErrorKind::data, "training split is empty");
  const diffusion::DiffusionSchedule schedule = make_schedule(cfg);
  ModelHooks hooks = base_hooks;
  hooks.stop_gradient_noise_scale = hooks.stop_gradient_noise_scale || tc.stop_gradient_noise_scale;

  TrainState state;
  if (resume) {
    state = std::move(*resume);
  } else {
    state.params = init_parameters(cfg, tc.seed);
    state.optimizer = AdamW::from(tc, state.params);
  }

  std::vector<std::size_t> order(data.size());
  const long per_epoch = static_cast<long>((data.size() + static_cast<std::size_t>(tc.batch) - 1) / static_cast<std::size_t>(tc.batch));
  const long total_steps = tc.max_steps > 0 ? std::min(tc.max_steps, per_epoch * tc.epochs) : per_epoch * tc.epochs;
  for (int epoch = state.epoch; epoch < tc.epochs; ++epoch) {
    if (tc.max_steps > 0 && state.optimizer.step >= tc.max_steps) break;
    Rng rng = make_rng(tc.seed, 0x7000 + static_cast<std::uint64_t>(epoch));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    long steps = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch)) {
      if (tc.max_steps > 0 && state.optimizer.step >= tc.max_steps) break;
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch));
      std::vector<const ModelInput*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&data[order[i]]);
      StepResult r = training_step(cfg, state.params, batch, schedule, rng, hooks);
      if (tc.max_grad_norm > 0.0) {
        const double norm = global_norm(r.grads);
        if (norm > tc.max_grad_norm) {
          for (auto& [name, g] : r.grads) g *= tc.max_grad_norm / norm;
        }
      }
      if (tc.cosine_decay) {
        const double progress = static_cast<double>(state.optimizer.step) / static_cast<double>(total_steps);
        state.optimizer.lr = tc.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
      }
      state.optimizer.update(state.params, r.grads);
      require(state.params.all_finite(), ErrorKind::numerical,
              "parameters became non-finite at optimizer step " + std::to_string(state.optimizer.step));
      state.step_losses.push_back(r.loss);
      loss_sum += r.loss;
      ++steps;
    }
    state.epoch = epoch + 1;
    state.epochs.push_back({epoch + 1, steps, steps ? loss_sum / static_cast<double>(steps) : 0.0});
    if (on_epoch) on_epoch(state);
  }
  return state;
}

// ---------------------------------------------------------------------------
// Checkpoints: <dir>/model.cfa (parameters + optimizer moments) and
// <dir>/manifest.json (format version, config hash, epoch, loss, configs).

inline constexpr int kCheckpointFormatVersion = 1;

/// FNV-1a 64-bit, hex encoded.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return out;
}

inline std::string config_hash(const ModelConfig& m, const TrainConfig& t) {
  return fnv1a_hex(io::Json{{"model", m.to_json()}, {"train", t.to_json()}}.dump());
}

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  data::NormalizationStats normalization;
  TrainState state;
  io::Json extra = io::Json::object();  // split membership, data provenance

  std::string hash() const { return config_hash(model, train); }
};

inline void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorKind::io, "cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  io::NamedArrays arrays;
  for (const auto& [name, m] : ck.state.params) arrays["param/" + name] = m;
  for (const auto& [name, m] : ck.state.optimizer.m) arrays["adam_m/" + name] = m;
  for (const auto& [name, m] : ck.state.optimizer.v) arrays["adam_v/" + name] = m;
  // Write to a temporary name first so a failed write never clobbers the previous checkpoint.
  const auto tmp = dir / "model.cfa.tmp";
  io::write_arrays(tmp, arrays);
  std::filesystem::rename(tmp, dir / "model.cfa", ec);
  require(!ec, ErrorKind::io, "cannot finalize checkpoint in " + dir.string() + ": " + ec.message());

  io::Json epochs = io::Json::array();
  for (const auto& e : ck.state.epochs) epochs.push_back({{"epoch", e.epoch}, {"steps", e.steps}, {"loss", e.mean_loss}});
  const io::Json manifest = {
      {"format", "crossfusor-checkpoint"},
      {"format_version", kCheckpointFormatVersion},
      {"config_hash", ck.hash()},
      {"epoch", ck.state.epoch},
      {"optimizer_step", ck.state.optimizer.step},
      {"loss", ck.state.epochs.empty() ? 0.0 : ck.state.epochs.back().mean_loss},
      {"epochs", epochs},
      {"model", ck.model.to_json()},
      {"train", ck.train.to_json()},
      {"normalization", ck.normalization.to_json()},
      {"extra", ck.extra},
  };
  io::write_json(dir / "manifest.json", manifest);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  require(std::filesystem::exists(dir / "manifest.json"), ErrorKind::missing_input,
          "no checkpoint manifest under " + dir.string());
  const io::Json manifest = io::read_json(dir / "manifest.json");
  const int version = manifest.value("format_version", 0);
  require(version >= 1, ErrorKind::config, "unsupported checkpoint format version " + std::to_string(version));
  Checkpoint ck;
  try {
    ck.model = ModelConfig::from_json(manifest.at("model"));
    ck.train = TrainConfig::from_json(manifest.at("train"));
    ck.normalization = data::NormalizationStats::from_json(manifest.at("normalization"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, "malformed checkpoint manifest: " + std::string(e.what()));
  }
  ck.extra = manifest.value("extra", io::Json::object());
  ck.state.epoch = manifest.value("epoch", 0);
  for (const auto& e : manifest.value("epochs", io::Json::array())) {
    ck.state.epochs.push_back({e.at("epoch").get<int>(), e.at("steps").get<long>(), e.at("loss").get<double>()});
  }
  const io::NamedArrays arrays = io::read_arrays(dir / "model.cfa");
  ck.state.optimizer = AdamW::from(ck.train, ParameterSet());
  ck.state.optimizer.step = manifest.value("optimizer_step", 0L);
  for (const auto& [key, m] : arrays) {
    const auto slash = key.find('/');
    const std::string group = key.substr(0, slash), name = key.substr(slash + 1);
    if (group == "param") ck.state.params.add(name, m);
    if (group == "adam_m") ck.state.optimizer.m.add(name, m);
    if (group == "adam_v") ck.state.optimizer.v.add(name, m);
  }
  // Structural check against a freshly built parameter set.
  const ParameterSet reference = init_parameters(ck.model, 0);
  for (const auto& [name, m] : reference) {
    require(ck.state.params.contains(name), ErrorKind::config, "checkpoint lacks parameter '" + name + "'");
    const Matrix& got = ck.state.params.at(name);
    require(got.rows() == m.rows() && got.cols() == m.cols(), ErrorKind::config,
            "checkpoint parameter '" + name + "' has the wrong shape");
  }
  require(ck.state.params.size() == reference.size(), ErrorKind::config, "checkpoint has unexpected parameters");
  return ck;
}

}  // namespace crossfusor
