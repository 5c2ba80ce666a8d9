#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "crossfusor/autodiff.hpp"
#include "crossfusor/errors.hpp"
#include "crossfusor/random.hpp"

namespace crossfusor {

using ad::Matrix;

/// Named learnable arrays. Names are hierarchical ("hist.gru.l0.w_ih") and
/// iteration order is lexicographic, which keeps checkpoints and optimizer
/// sweeps deterministic.
class ParameterSet {
 public:
  using Storage = std::map<std::string, Matrix>;

  Matrix& add(const std::string& name, Matrix value) {
    auto [it, inserted] = params_.emplace(name, std::move(value));
    require(inserted, ErrorKind::invalid_argument, "duplicate parameter '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  const Matrix& at(const std::string& name) const {
    auto it = params_.find(name);
    require(it != params_.end(), ErrorKind::invalid_argument, "unknown parameter '" + name + "'");
    return it->second;
  }

  Matrix& at(const std::string& name) {
    auto it = params_.find(name);
    require(it != params_.end(), ErrorKind::invalid_argument, "unknown parameter '" + name + "'");
    return it->second;
  }

  /// True when any parameter name starts with `prefix`.
  bool has_prefix(const std::string& prefix) const {
    auto it = params_.lower_bound(prefix);
    return it != params_.end() && it->first.compare(0, prefix.size(), prefix) == 0;
  }

  std::size_t size() const { return params_.size(); }
  bool empty() const { return params_.empty(); }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& [name, m] : params_) n += static_cast<std::size_t>(m.size());
    return n;
  }

  ParameterSet zeros_like() const {
    ParameterSet out;
    for (const auto& [name, m] : params_) out.add(name, Matrix::Zero(m.rows(), m.cols()));
    return out;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& kv : params_) out.push_back(kv.first);
    return out;
  }

  bool all_finite() const {
    for (const auto& [name, m] : params_) {
      if (!m.allFinite()) return false;
    }
    return true;
  }

  Storage::iterator begin() { return params_.begin(); }
  Storage::iterator end() { return params_.end(); }
  Storage::const_iterator begin() const { return params_.begin(); }
  Storage::const_iterator end() const { return params_.end(); }

  bool operator==(const ParameterSet& other) const {
    if (params_.size() != other.params_.size()) return false;
    auto a = params_.begin();
    auto b = other.params_.begin();
    for (; a != params_.end(); ++a, ++b) {
      if (a->first != b->first || a->second.rows() != b->second.rows() || a->second.cols() != b->second.cols() ||
          a->second != b->second) {
        return false;
      }
    }
    return true;
  }

 private:
  Storage params_;
};

/// Binds parameters into a tape on first use and collects their gradients.
class ParamBinder {
 public:
  ParamBinder(ad::Tape& tape, const ParameterSet& params, bool trainable)
      : tape_(tape), params_(params), trainable_(trainable) {}

  ad::Var operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    ad::Var v = tape_.external(params_.at(name), trainable_);
    bound_.emplace(name, v);
    return v;
  }

  ad::Tape& tape() { return tape_; }
  const ParameterSet& parameters() const { return params_; }
  bool trainable() const { return trainable_; }

  /// Adds d(root)/d(param) into `grads` for every parameter reached by the last backward sweep.
  void accumulate_gradients(ParameterSet& grads) const {
    for (const auto& [name, var] : bound_) {
      if (tape_.has_gradient(var)) grads.at(name) += tape_.gradient(var);
    }
  }

 private:
  ad::Tape& tape_;
  const ParameterSet& params_;
  bool trainable_;
  std::map<std::string, ad::Var> bound_;
};

namespace init {

/// Uniform(-bound, bound) with bound = 1/sqrt(fan_in), the usual default for
/// linear, recurrent and convolutional weights.
inline Matrix uniform_fan_in(Rng& rng, Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = uniform(rng, -bound, bound);
  }
  return m;
}

}  // namespace init

/// Dense layer y = x W + b with W: in x out and b: 1 x out.
inline void add_linear(ParameterSet& ps, const std::string& prefix, Eigen::Index in, Eigen::Index out, Rng& rng) {
  ps.add(prefix + ".w", init::uniform_fan_in(rng, in, out, in));
  ps.add(prefix + ".b", init::uniform_fan_in(rng, 1, out, in));
}

inline ad::Var linear(ParamBinder& p, const std::string& prefix, const ad::Var& x) {
  return ad::add_row(ad::matmul(x, p(prefix + ".w")), p(prefix + ".b"));
}

/// Stacked GRU; layer l reads the previous layer's hidden sequence.
inline void add_gru(ParameterSet& ps, const std::string& prefix, Eigen::Index input, Eigen::Index hidden, int layers,
                    Rng& rng) {
  for (int l = 0; l < layers; ++l) {
    const Eigen::Index in = l == 0 ? input : hidden;
    const std::string base = prefix + ".l" + std::to_string(l);
    ps.add(base + ".w_ih", init::uniform_fan_in(rng, in, 3 * hidden, hidden));
    ps.add(base + ".w_hh", init::uniform_fan_in(rng, hidden, 3 * hidden, hidden));
    ps.add(base + ".b_ih", init::uniform_fan_in(rng, 1, 3 * hidden, hidden));
    ps.add(base + ".b_hh", init::uniform_fan_in(rng, 1, 3 * hidden, hidden));
  }
}

inline ad::Var gru(ParamBinder& p, const std::string& prefix, ad::Var x, int layers) {
  for (int l = 0; l < layers; ++l) {
    const std::string base = prefix + ".l" + std::to_string(l);
    x = ad::gru_sequence(x, p(base + ".w_ih"), p(base + ".w_hh"), p(base + ".b_ih"), p(base + ".b_hh"));
  }
  return x;
}

inline void add_layer_norm(ParameterSet& ps, const std::string& prefix, Eigen::Index width) {
  ps.add(prefix + ".gamma", Matrix::Ones(1, width));
  ps.add(prefix + ".beta", Matrix::Zero(1, width));
}

inline constexpr double kLayerNormEps = 1e-9;

inline ad::Var layer_norm(ParamBinder& p, const std::string& prefix, const ad::Var& x) {
  return ad::layer_norm_rows(x, p(prefix + ".gamma"), p(prefix + ".beta"), kLayerNormEps);
}

}  // namespace crossfusor
