#pragma once

// Study-vehicle history encoder:
//
//   (position, speed) -> stacked GRU -> location attention -> linear
//     -> DFT along time -> [Re | Im] -> linear -> z_stu_his  (T x d_model)
//
// The location attention re-weights time steps per feature channel:
//   w1 = softmax_time((z_gru * w0) W + b),  z_loc = w1 * z_gru.

#include <string>

#include "crossfusor/autodiff.hpp"
#include "crossfusor/errors.hpp"
#include "crossfusor/parameters.hpp"

namespace crossfusor::history {

struct EncoderShape {
  int history = 30;
  int input = 2;
  int hidden = 50;
  int layers = 2;
  int d_model = 50;
};

inline void add_parameters(ParameterSet& ps, const std::string& prefix, const EncoderShape& s, Rng& rng) {
  add_gru(ps, prefix + ".gru", s.input, s.hidden, s.layers, rng);
  add_linear(ps, prefix + ".loc", s.hidden, s.hidden, rng);
  ps.add(prefix + ".loc.w0", Matrix::Ones(s.history, s.hidden));
  add_linear(ps, prefix + ".proj", s.hidden, s.d_model, rng);
  add_linear(ps, prefix + ".fft_proj", 2 * s.d_model, s.d_model, rng);
}

inline ad::Var gru_encode(ParamBinder& p, const std::string& prefix, const ad::Var& input, int layers) {
  require(input.value().allFinite(), ErrorKind::numerical, "non-finite history input");
  return gru(p, prefix + ".gru", input, layers);
}

struct LocationAttention {
  ad::Var weights;  // w1, columns sum to 1
  ad::Var z_loc;
};

inline LocationAttention location_attention(ParamBinder& p, const std::string& prefix, const ad::Var& z_gru) {
  const ad::Var logits = linear(p, prefix + ".loc", ad::mul(z_gru, p(prefix + ".loc.w0")));
  const ad::Var w1 = ad::softmax_cols(logits);
  return {w1, ad::mul(w1, z_gru)};
}

inline ad::Var project_weighted(ParamBinder& p, const std::string& prefix, const ad::Var& z_loc) {
  return linear(p, prefix + ".proj", z_loc);
}

/// Unnormalized DFT along time per channel; T x 2D with [Re | Im].
inline ad::Var fft_embed(const ad::Var& z_gru_prime) { return ad::dft_time(z_gru_prime); }

inline ad::Var finalize_encoding(ParamBinder& p, const std::string& prefix, const ad::Var& z_fft) {
  return linear(p, prefix + ".fft_proj", z_fft);
}

struct EncodedHistoryVars {
  ad::Var z_gru;
  ad::Var w1;
  ad::Var z_loc;
  ad::Var z_gru_prime;
  ad::Var z_fft;
  ad::Var z_stu_his;
};

inline EncodedHistoryVars encode(ParamBinder& p, const std::string& prefix, const ad::Var& input, int layers) {
  EncodedHistoryVars e;
  e.z_gru = gru_encode(p, prefix, input, layers);
  const LocationAttention att = location_attention(p, prefix, e.z_gru);
  e.w1 = att.weights;
  e.z_loc = att.z_loc;
  e.z_gru_prime = project_weighted(p, prefix, e.z_loc);
  e.z_fft = fft_embed(e.z_gru_prime);
  e.z_stu_his = finalize_encoding(p, prefix, e.z_fft);
  return e;
}

/// Value snapshot of every encoder stage.
struct EncodedHistory {
  Matrix z_gru;
  Matrix z_loc;
  Matrix z_gru_prime;
  Matrix z_fft_real;
  Matrix z_fft_imag;
  Matrix z_stu_his;

  static EncodedHistory from(const EncodedHistoryVars& v) {
    const auto d = v.z_gru_prime.cols();
    return {v.z_gru.value(),         v.z_loc.value(),          v.z_gru_prime.value(),
            v.z_fft.value().leftCols(d), v.z_fft.value().rightCols(d), v.z_stu_his.value()};
  }
};

/// Ablation path: the history is mapped to the embedding by one per-step linear layer.
inline void add_linear_parameters(ParameterSet& ps, const std::string& prefix, const EncoderShape& s, Rng& rng) {
  add_linear(ps, prefix + ".linear", s.input, s.d_model, rng);
}

inline ad::Var encode_linear(ParamBinder& p, const std::string& prefix, const ad::Var& input) {
  require(input.value().allFinite(), ErrorKind::numerical, "non-finite history input");
  return linear(p, prefix + ".linear", input);
}

}  // namespace crossfusor::history
