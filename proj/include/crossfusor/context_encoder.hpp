#pragma once

// Car-following interaction encoder.
//
// Q is the study vehicle's history encoding. K (leader) and V (follower) are
// built from three streams each (position, speed, gap): GRU -> linear per
// stream, concatenated along features with the streams interleaved
// ([a0 b0 c0 a1 b1 c1 ...]) and mean-pooled over each group of 3 adjacent
// features back to d_model. A single post-norm cross-attention
// transformer block then produces the denoiser context c:
//
//   u = LN(Q + MHA(Q, K, V)),  c = LN(u + FFN(u))

#include <cmath>
#include <string>
#include <vector>

#include "crossfusor/autodiff.hpp"
#include "crossfusor/model_config.hpp"
#include "crossfusor/parameters.hpp"

namespace crossfusor::context {

struct ContextShape {
  int hidden = 50;
  int layers = 2;
  int d_model = 50;
  int heads = 5;
  int feed_forward = 100;
};

inline const std::vector<std::string>& stream_names() {
  static const std::vector<std::string> names = {"lea.pos", "lea.spd", "lea.gap", "fol.pos", "fol.spd", "fol.gap"};
  return names;
}

inline void add_stream_parameters(ParameterSet& ps, const std::string& prefix, const ContextShape& s, Rng& rng) {
  for (const auto& stream : stream_names()) {
    add_gru(ps, prefix + "." + stream + ".gru", 1, s.hidden, s.layers, rng);
    add_linear(ps, prefix + "." + stream + ".lin", s.hidden, s.d_model, rng);
  }
}

inline void add_attention_parameters(ParameterSet& ps, const std::string& prefix, const ContextShape& s, Rng& rng) {
  const int head_width = s.d_model / s.heads;
  for (int h = 0; h < s.heads; ++h) {
    const std::string base = prefix + ".attn.h" + std::to_string(h);
    ps.add(base + ".w_q", init::uniform_fan_in(rng, s.d_model, head_width, s.d_model));
    ps.add(base + ".w_k", init::uniform_fan_in(rng, s.d_model, head_width, s.d_model));
    ps.add(base + ".w_v", init::uniform_fan_in(rng, s.d_model, head_width, s.d_model));
  }
  ps.add(prefix + ".attn.w_out", init::uniform_fan_in(rng, s.d_model, s.d_model, s.d_model));
  add_layer_norm(ps, prefix + ".ln1", s.d_model);
  add_linear(ps, prefix + ".ff1", s.d_model, s.feed_forward, rng);
  add_linear(ps, prefix + ".ff2", s.feed_forward, s.d_model, rng);
  add_layer_norm(ps, prefix + ".ln2", s.d_model);
}

/// Ablation path: c = [Q | K | V] W + b, no attention.
inline void add_linear_context_parameters(ParameterSet& ps, const std::string& prefix, const ContextShape& s,
                                          Rng& rng) {
  add_linear(ps, prefix + ".linear", 3 * s.d_model, s.d_model, rng);
}

/// Q = z_stu_his. Tape values are immutable, so the handle itself is the query.
inline ad::Var build_query(const ad::Var& z_stu_his) { return z_stu_his; }

inline Matrix build_query(const Matrix& z_stu_his) { return z_stu_his; }

struct KeyValue {
  ad::Var key;
  ad::Var value;
};

/// Pool(Concat(Lin(GRU(a)), Lin(GRU(b)), Lin(GRU(c)))) for one vehicle.
inline ad::Var encode_vehicle(ParamBinder& p, const std::string& prefix, const std::string& vehicle,
                              const std::vector<ad::Var>& streams, int layers) {
  static const char* kinds[] = {"pos", "spd", "gap"};
  std::vector<ad::Var> parts;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    require(streams[i].value().allFinite(), ErrorKind::numerical, "non-finite " + vehicle + " history input");
    const std::string base = prefix + "." + vehicle + "." + kinds[i];
    parts.push_back(linear(p, base + ".lin", gru(p, base + ".gru", streams[i], layers)));
  }
  // Group j of the interleaved concat holds feature j of every stream, so the
  // pooled output is the per-feature mean across streams.
  ad::Var sum = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) sum = ad::add(sum, parts[i]);
  return ad::scale(sum, 1.0 / static_cast<double>(parts.size()));
}

inline KeyValue build_key_value(ParamBinder& p, const std::string& prefix, const ModelInput& in, int layers) {
  ad::Tape& t = p.tape();
  KeyValue kv;
  kv.key = encode_vehicle(p, prefix, "lea",
                          {t.constant(in.leader_position), t.constant(in.leader_speed), t.constant(in.leader_gap)},
                          layers);
  kv.value = encode_vehicle(
      p, prefix, "fol", {t.constant(in.follower_position), t.constant(in.follower_speed), t.constant(in.follower_gap)},
      layers);
  return kv;
}

/// head_i = softmax((Q Wq_i)(K Wk_i)^T / sqrt(d_head)) (V Wv_i); z = [head_1 .. head_h] W_out.
/// When `attention` is given it receives each head's attention matrix (queries x keys).
inline ad::Var multi_head_cross_attention(ParamBinder& p, const std::string& prefix, const ad::Var& q,
                                          const ad::Var& k, const ad::Var& v, int heads,
                                          std::vector<Matrix>* attention = nullptr) {
  std::vector<ad::Var> outputs;
  for (int h = 0; h < heads; ++h) {
    const std::string base = prefix + ".attn.h" + std::to_string(h);
    const ad::Var qh = ad::matmul(q, p(base + ".w_q"));
    const ad::Var kh = ad::matmul(k, p(base + ".w_k"));
    const ad::Var vh = ad::matmul(v, p(base + ".w_v"));
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(qh.cols()));
    const ad::Var weights = ad::softmax_rows(ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt));
    if (attention) attention->push_back(weights.value());
    outputs.push_back(ad::matmul(weights, vh));
  }
  const ad::Var cat = outputs.size() == 1 ? outputs.front() : ad::concat_cols(outputs);
  return ad::matmul(cat, p(prefix + ".attn.w_out"));
}

inline ad::Var feed_forward(ParamBinder& p, const std::string& prefix, const ad::Var& u) {
  return linear(p, prefix + ".ff2", ad::silu(linear(p, prefix + ".ff1", u)));
}

inline ad::Var transformer_block(ParamBinder& p, const std::string& prefix, const ad::Var& z_mca, const ad::Var& q) {
  const ad::Var u = layer_norm(p, prefix + ".ln1", ad::add(q, z_mca));
  return layer_norm(p, prefix + ".ln2", ad::add(u, feed_forward(p, prefix, u)));
}

struct ContextVars {
  ad::Var query;
  ad::Var key;
  ad::Var value;
  ad::Var z_mca;  // invalid in the linear-context ablation
  ad::Var c;
};

inline ContextVars encode(ParamBinder& p, const std::string& prefix, const ModelInput& in, const ad::Var& z_stu_his,
                          const ContextShape& s, bool cross_attention, std::vector<Matrix>* attention = nullptr) {
  ContextVars out;
  out.query = build_query(z_stu_his);
  const KeyValue kv = build_key_value(p, prefix, in, s.layers);
  out.key = kv.key;
  out.value = kv.value;
  if (cross_attention) {
    out.z_mca = multi_head_cross_attention(p, prefix, out.query, out.key, out.value, s.heads, attention);
    out.c = transformer_block(p, prefix, out.z_mca, out.query);
  } else {
    out.c = linear(p, prefix + ".linear", ad::concat_cols({out.query, out.key, out.value}));
  }
  return out;
}

}  // namespace crossfusor::context
