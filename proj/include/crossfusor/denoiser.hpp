#pragma once

// 1-D U-Net noise predictor eps_hat(x_k, k, c).
//
// The noisy future (length L) is a 1-channel signal. Each level applies
// conv -> FiLM -> SiLU, where FiLM is a per-channel (1 + scale, shift) pair
// computed from cond = SiLU(Lin(step_embedding(k))) + mean_t(c).
// Downsampling is a stride-2 conv (ceil lengths: 50 -> 25 -> 13 -> 7 -> 4);
// upsampling repeats samples, crops to the skip length and concatenates the skip.

#include <cmath>
#include <string>
#include <vector>

#include "crossfusor/autodiff.hpp"
#include "crossfusor/errors.hpp"
#include "crossfusor/parameters.hpp"

namespace crossfusor::denoiser {

inline constexpr int kKernel = 3;

struct UNetShape {
  int length = 50;
  std::vector<int> channels{8, 16, 32, 64, 128};
  int cond_dim = 50;

  int levels() const { return static_cast<int>(channels.size()); }

  /// Signal length at each level.
  std::vector<int> lengths() const {
    std::vector<int> out{length};
    for (int i = 1; i < levels(); ++i) out.push_back((out.back() + 1) / 2);
    return out;
  }
};

namespace detail {

inline void add_conv(ParameterSet& ps, const std::string& name, int c_in, int c_out, int kernel, Rng& rng) {
  ps.add(name + ".w", init::uniform_fan_in(rng, c_out, c_in * kernel, c_in * kernel));
  ps.add(name + ".b", init::uniform_fan_in(rng, c_out, 1, c_in * kernel));
}

inline ad::Var conv(ParamBinder& p, const std::string& name, const ad::Var& x, int kernel, int stride) {
  return ad::conv1d(x, p(name + ".w"), p(name + ".b"), kernel, stride, kernel / 2);
}

inline ad::Var film_block(ParamBinder& p, const std::string& name, const ad::Var& x, const ad::Var& cond) {
  const ad::Var h = conv(p, name + ".conv", x, kKernel, 1);
  const ad::Index c = h.rows();
  const ad::Var mod = ad::transpose(linear(p, name + ".film", cond));  // 2C x 1
  const ad::Var gain = ad::add_scalar(ad::slice_rows(mod, 0, c), 1.0);
  const ad::Var shift = ad::slice_rows(mod, c, c);
  return ad::silu(ad::add_col(ad::mul_col(h, gain), shift));
}

inline void add_film_block(ParameterSet& ps, const std::string& name, int c_in, int c_out, int cond_dim, Rng& rng) {
  add_conv(ps, name + ".conv", c_in, c_out, kKernel, rng);
  add_linear(ps, name + ".film", cond_dim, 2 * c_out, rng);
}

}  // namespace detail

inline void add_parameters(ParameterSet& ps, const std::string& prefix, const UNetShape& s, Rng& rng) {
  const auto& ch = s.channels;
  const int n = s.levels();
  add_linear(ps, prefix + ".time", s.cond_dim, s.cond_dim, rng);
  detail::add_conv(ps, prefix + ".lift", 1, ch[0], kKernel, rng);
  for (int i = 0; i + 1 < n; ++i) {
    const std::string base = prefix + ".down" + std::to_string(i);
    detail::add_film_block(ps, base, ch[i], ch[i], s.cond_dim, rng);
    detail::add_conv(ps, base + ".pool", ch[i], ch[i + 1], kKernel, rng);
  }
  detail::add_film_block(ps, prefix + ".mid", ch[n - 1], ch[n - 1], s.cond_dim, rng);
  for (int i = n - 2; i >= 0; --i) {
    const std::string base = prefix + ".up" + std::to_string(i);
    detail::add_conv(ps, base + ".reduce", ch[i + 1], ch[i], kKernel, rng);
    detail::add_film_block(ps, base, 2 * ch[i], ch[i], s.cond_dim, rng);
  }
  detail::add_conv(ps, prefix + ".head", ch[0], 1, 1, rng);
}

/// Interleaved sin/cos of k at geometric frequencies 10000^(-2i/dim).
inline Matrix step_embedding(int k, int dim) {
  Matrix e(1, dim);
  for (int i = 0; i < dim; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
    e(0, i) = (i % 2 == 0) ? std::sin(k * freq) : std::cos(k * freq);
  }
  return e;
}

/// Time-mean of the context: (T x D) -> (1 x D).
inline ad::Var pool_context(const ad::Var& c) { return ad::mean_rows(c); }

inline Matrix pool_context(const Matrix& c) { return c.colwise().mean(); }

/// x_k: 1 x L row, c: T x D context. Returns eps_hat as a 1 x L row.
inline ad::Var predict_noise(ParamBinder& p, const std::string& prefix, const UNetShape& s, const ad::Var& x_k, int k,
                             const ad::Var& c) {
  require(x_k.rows() == 1 && x_k.cols() == s.length, ErrorKind::invalid_argument,
          "denoiser built for length " + std::to_string(s.length) + " got " + std::to_string(x_k.cols()));
  require(c.cols() == s.cond_dim, ErrorKind::invalid_argument, "context width does not match the denoiser");
  require(x_k.value().allFinite() && c.value().allFinite(), ErrorKind::numerical, "non-finite denoiser input");

  ad::Tape& t = p.tape();
  const int n = s.levels();
  const std::vector<int> lengths = s.lengths();

  const ad::Var step = t.constant(step_embedding(k, s.cond_dim));
  const ad::Var cond = ad::add(ad::silu(linear(p, prefix + ".time", step)), pool_context(c));

  ad::Var h = detail::conv(p, prefix + ".lift", x_k, kKernel, 1);
  std::vector<ad::Var> skips;
  for (int i = 0; i + 1 < n; ++i) {
    const std::string base = prefix + ".down" + std::to_string(i);
    h = detail::film_block(p, base, h, cond);
    skips.push_back(h);
    h = detail::conv(p, base + ".pool", h, kKernel, 2);
  }
  h = detail::film_block(p, prefix + ".mid", h, cond);
  for (int i = n - 2; i >= 0; --i) {
    const std::string base = prefix + ".up" + std::to_string(i);
    h = ad::upsample2(h, lengths[static_cast<std::size_t>(i)]);
    h = detail::conv(p, base + ".reduce", h, kKernel, 1);
    h = ad::concat_rows({h, skips[static_cast<std::size_t>(i)]});
    h = detail::film_block(p, base, h, cond);
  }
  return detail::conv(p, prefix + ".head", h, 1, 1);
}

}  // namespace crossfusor::denoiser
