#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "crossfusor/context_encoder.hpp"
#include "test_support.hpp"

using namespace crossfusor;
using crossfusor::testing::gaussian;
using crossfusor::testing::parameter_gradient_errors;
using crossfusor::testing::random_input;

namespace {

ParameterSet context_params(const context::ContextShape& s, std::uint64_t seed, bool attention = true) {
  ParameterSet ps;
  Rng rng = make_rng(seed, 0);
  context::add_stream_parameters(ps, "ctx", s, rng);
  if (attention) {
    context::add_attention_parameters(ps, "ctx", s, rng);
  } else {
    context::add_linear_context_parameters(ps, "ctx", s, rng);
  }
  return ps;
}

Matrix softmax_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double m = x.row(i).maxCoeff(), sum = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) sum += std::exp(x(i, j) - m);
    for (Eigen::Index j = 0; j < x.cols(); ++j) out(i, j) = std::exp(x(i, j) - m) / sum;
  }
  return out;
}

Matrix layer_norm_rows(const Matrix& x, const Matrix& gamma, const Matrix& beta) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mean = 0.0, var = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) mean += x(i, j);
    mean /= static_cast<double>(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= static_cast<double>(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      out(i, j) = (x(i, j) - mean) / std::sqrt(var + kLayerNormEps) * gamma(0, j) + beta(0, j);
    }
  }
  return out;
}

/// Dense per-head attention straight from the formula.
Matrix attention_oracle(const ParameterSet& ps, const Matrix& q, const Matrix& k, const Matrix& v, int heads) {
  std::vector<Matrix> outs;
  Eigen::Index width = 0;
  for (int h = 0; h < heads; ++h) {
    const std::string base = "ctx.attn.h" + std::to_string(h);
    const Matrix qh = q * ps.at(base + ".w_q"), kh = k * ps.at(base + ".w_k"), vh = v * ps.at(base + ".w_v");
    outs.push_back(softmax_rows(qh * kh.transpose() / std::sqrt(static_cast<double>(qh.cols()))) * vh);
    width += vh.cols();
  }
  Matrix cat(q.rows(), width);
  Eigen::Index col = 0;
  for (const auto& o : outs) {
    cat.middleCols(col, o.cols()) = o;
    col += o.cols();
  }
  return cat * ps.at("ctx.attn.w_out");
}

Matrix mha(const ParameterSet& ps, const Matrix& q, const Matrix& k, const Matrix& v, int heads,
           std::vector<Matrix>* attn = nullptr) {
  ad::Tape t;
  ParamBinder p(t, ps, false);
  return context::multi_head_cross_attention(p, "ctx", t.constant(q), t.constant(k), t.constant(v), heads, attn)
      .value();
}

TEST(Query, IsValueCopyOfEncoding) {
  Matrix z = gaussian(30, 50, 1);
  const Matrix q = context::build_query(z);
  EXPECT_EQ(q, z);
  EXPECT_EQ(q.rows(), 30);
  EXPECT_EQ(q.cols(), 50);
  z(3, 4) += 1.0;
  EXPECT_NE(q(3, 4), z(3, 4));

  ad::Tape t;
  const ad::Var zv = t.constant(gaussian(30, 50, 2));
  EXPECT_EQ(context::build_query(zv).value(), zv.value());
}

TEST(KeyValue, IdenticalStreamsPoolToCommonOutput) {
  context::ContextShape s{6, 2, 10, 2, 20};
  ParameterSet ps = context_params(s, 3);
  for (const char* kind : {"spd", "gap"}) {
    for (const auto& suffix : {".gru.l0.w_ih", ".gru.l0.w_hh", ".gru.l0.b_ih", ".gru.l0.b_hh", ".gru.l1.w_ih",
                               ".gru.l1.w_hh", ".gru.l1.b_ih", ".gru.l1.b_hh", ".lin.w", ".lin.b"}) {
      ps.at(std::string("ctx.lea.") + kind + suffix) = ps.at(std::string("ctx.lea.pos") + suffix);
    }
  }
  ModelInput in = random_input(30, 10, 4);
  in.leader_speed = in.leader_position;
  in.leader_gap = in.leader_position;
  ad::Tape t;
  ParamBinder p(t, ps, false);
  const auto kv = context::build_key_value(p, "ctx", in, s.layers);
  const Matrix single = linear(p, "ctx.lea.pos.lin", gru(p, "ctx.lea.pos.gru", t.constant(in.leader_position), 2)).value();
  EXPECT_LT((kv.key.value() - single).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(KeyValue, ZeroParametersGiveBiasConstants) {
  context::ContextShape s{6, 2, 10, 2, 20};
  ParameterSet ps = context_params(s, 5);
  for (auto& [name, m] : ps) {
    if (name.find(".gru.") != std::string::npos || name.find(".lin.w") != std::string::npos) m.setZero();
  }
  const ModelInput in = random_input(30, 10, 6);
  ad::Tape t;
  ParamBinder p(t, ps, false);
  const auto kv = context::build_key_value(p, "ctx", in, s.layers);
  auto pooled_bias = [&](const std::string& veh) {
    return Matrix((ps.at("ctx." + veh + ".pos.lin.b") + ps.at("ctx." + veh + ".spd.lin.b") +
                   ps.at("ctx." + veh + ".gap.lin.b")) /
                  3.0);
  };
  const Matrix kb = pooled_bias("lea"), vb = pooled_bias("fol");
  for (Eigen::Index r = 0; r < 30; ++r) {
    EXPECT_LT((kv.key.value().row(r) - kb).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((kv.value.value().row(r) - vb).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(KeyValue, ToyCaseMatchesConcatGroupMeanOracle) {
  // H = 4, width 6, groups of 3.
  context::ContextShape s{5, 1, 6, 2, 8};
  const ParameterSet ps = context_params(s, 7);
  const ModelInput in = random_input(4, 6, 8);
  ad::Tape t;
  ParamBinder p(t, ps, false);
  const auto kv = context::build_key_value(p, "ctx", in, s.layers);
  auto oracle = [&](const std::string& veh, const std::vector<const Matrix*>& streams) {
    const char* kinds[] = {"pos", "spd", "gap"};
    std::vector<Matrix> outs;
    for (int i = 0; i < 3; ++i) {
      const std::string base = "ctx." + veh + "." + kinds[i];
      outs.push_back(linear(p, base + ".lin", gru(p, base + ".gru", t.constant(*streams[i]), 1)).value());
    }
    // Interleaved concat: column 3j + i is feature j of stream i.
    Matrix cat(4, 18);
    for (int j = 0; j < 6; ++j) {
      for (int i = 0; i < 3; ++i) cat.col(3 * j + i) = outs[static_cast<std::size_t>(i)].col(j);
    }
    Matrix pooled(4, 6);
    for (int r = 0; r < 4; ++r) {
      for (int j = 0; j < 6; ++j) pooled(r, j) = (cat(r, 3 * j) + cat(r, 3 * j + 1) + cat(r, 3 * j + 2)) / 3.0;
    }
    return pooled;
  };
  EXPECT_LT((kv.key.value() - oracle("lea", {&in.leader_position, &in.leader_speed, &in.leader_gap})).cwiseAbs().maxCoeff(),
            1e-12);
  EXPECT_LT(
      (kv.value.value() - oracle("fol", {&in.follower_position, &in.follower_speed, &in.follower_gap})).cwiseAbs().maxCoeff(),
      1e-12);
}

TEST(KeyValue, RejectsNonFinite) {
  context::ContextShape s{4, 1, 6, 2, 8};
  const ParameterSet ps = context_params(s, 9);
  ModelInput in = random_input(5, 6, 9);
  in.follower_gap(2, 0) = std::numeric_limits<double>::infinity();
  ad::Tape t;
  ParamBinder p(t, ps, false);
  EXPECT_THROW(context::build_key_value(p, "ctx", in, 1), Error);
}

TEST(CrossAttention, IdenticalKeysGiveUniformWeights) {
  context::ContextShape s{4, 1, 6, 1, 8};
  ParameterSet ps = context_params(s, 10);
  ps.at("ctx.attn.h0.w_q").setIdentity();
  ps.at("ctx.attn.h0.w_k").setIdentity();
  ps.at("ctx.attn.h0.w_v").setIdentity();
  ps.at("ctx.attn.w_out").setIdentity();
  const Matrix q = gaussian(30, 6, 11);
  const Matrix k = gaussian(1, 6, 12).replicate(30, 1);
  const Matrix v = gaussian(30, 6, 13);
  std::vector<Matrix> attn;
  const Matrix z = mha(ps, q, k, v, 1, &attn);
  EXPECT_LT((attn.at(0).array() - 1.0 / 30.0).abs().maxCoeff(), 1e-15);
  const Matrix col_mean = v.colwise().mean();
  for (Eigen::Index r = 0; r < 30; ++r) EXPECT_LT((z.row(r) - col_mean).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CrossAttention, ZeroValueProjectionGivesZero) {
  context::ContextShape s{4, 1, 10, 5, 8};
  ParameterSet ps = context_params(s, 14);
  for (int h = 0; h < 5; ++h) ps.at("ctx.attn.h" + std::to_string(h) + ".w_v").setZero();
  EXPECT_EQ(mha(ps, gaussian(30, 10, 15), gaussian(30, 10, 16), gaussian(30, 10, 17), 5).cwiseAbs().maxCoeff(), 0.0);
}

TEST(CrossAttention, ToyCaseMatchesDenseOracle) {
  context::ContextShape s{4, 1, 4, 2, 8};
  const ParameterSet ps = context_params(s, 18);
  const Matrix q = gaussian(4, 4, 19), k = gaussian(4, 4, 20), v = gaussian(4, 4, 21);
  EXPECT_LT((mha(ps, q, k, v, 2) - attention_oracle(ps, q, k, v, 2)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(CrossAttention, RowsAreDistributions) {
  context::ContextShape s{4, 1, 50, 5, 100};
  const ParameterSet ps = context_params(s, 22);
  std::vector<Matrix> attn;
  mha(ps, 3.0 * gaussian(30, 50, 23), 3.0 * gaussian(30, 50, 24), gaussian(30, 50, 25), 5, &attn);
  ASSERT_EQ(attn.size(), 5u);
  for (const auto& a : attn) {
    EXPECT_EQ(a.rows(), 30);
    EXPECT_EQ(a.cols(), 30);
    EXPECT_GE(a.minCoeff(), 0.0);
    for (Eigen::Index r = 0; r < a.rows(); ++r) EXPECT_NEAR(a.row(r).sum(), 1.0, 1e-6);
  }
}

TEST(CrossAttention, InvariantToJointKeyValuePermutation) {
  context::ContextShape s{4, 1, 50, 5, 100};
  const ParameterSet ps = context_params(s, 26);
  const Matrix q = gaussian(30, 50, 27), k = gaussian(30, 50, 28), v = gaussian(30, 50, 29);
  std::vector<int> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(30);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix kp(30, 50), vp(30, 50);
  for (int i = 0; i < 30; ++i) {
    kp.row(i) = k.row(perm[static_cast<std::size_t>(i)]);
    vp.row(i) = v.row(perm[static_cast<std::size_t>(i)]);
  }
  EXPECT_LT((mha(ps, q, k, v, 5) - mha(ps, q, kp, vp, 5)).cwiseAbs().maxCoeff(), 1e-10);
}

Matrix block(const ParameterSet& ps, const Matrix& z_mca, const Matrix& q) {
  ad::Tape t;
  ParamBinder p(t, ps, false);
  return context::transformer_block(p, "ctx", t.constant(z_mca), t.constant(q)).value();
}

TEST(TransformerBlock, ResidualOnlyPath) {
  context::ContextShape s{4, 1, 10, 2, 20};
  ParameterSet ps = context_params(s, 31);
  ps.at("ctx.ff2.w").setZero();
  ps.at("ctx.ff2.b").setZero();
  ps.at("ctx.ln1.gamma") = gaussian(1, 10, 32);
  ps.at("ctx.ln1.beta") = gaussian(1, 10, 33);
  const Matrix q = gaussian(30, 10, 34);
  const Matrix want = layer_norm_rows(layer_norm_rows(q, ps.at("ctx.ln1.gamma"), ps.at("ctx.ln1.beta")),
                                      ps.at("ctx.ln2.gamma"), ps.at("ctx.ln2.beta"));
  EXPECT_LT((block(ps, Matrix::Zero(30, 10), q) - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TransformerBlock, LayerNormRowsStandardized) {
  context::ContextShape s{4, 1, 10, 2, 20};
  const ParameterSet ps = context_params(s, 35);  // unit gamma, zero beta
  const Matrix c = block(ps, gaussian(30, 10, 36), 4.0 * gaussian(30, 10, 37));
  for (Eigen::Index r = 0; r < c.rows(); ++r) {
    const double mean = c.row(r).mean();
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR((c.row(r).array() - mean).square().mean(), 1.0, 1e-6);
  }
}

TEST(TransformerBlock, ToyCaseMatchesComposedOracle) {
  context::ContextShape s{4, 1, 4, 2, 6};
  ParameterSet ps = context_params(s, 38);
  for (const char* ln : {"ctx.ln1", "ctx.ln2"}) {
    ps.at(std::string(ln) + ".gamma") = gaussian(1, 4, 39);
    ps.at(std::string(ln) + ".beta") = gaussian(1, 4, 40);
  }
  const Matrix z = gaussian(4, 4, 41), q = gaussian(4, 4, 42);
  const Matrix u = layer_norm_rows(q + z, ps.at("ctx.ln1.gamma"), ps.at("ctx.ln1.beta"));
  Matrix hidden = u * ps.at("ctx.ff1.w") + ps.at("ctx.ff1.b").replicate(4, 1);
  hidden = hidden.unaryExpr([](double x) { return x / (1.0 + std::exp(-x)); });
  const Matrix ff = hidden * ps.at("ctx.ff2.w") + ps.at("ctx.ff2.b").replicate(4, 1);
  const Matrix want = layer_norm_rows(u + ff, ps.at("ctx.ln2.gamma"), ps.at("ctx.ln2.beta"));
  EXPECT_LT((block(ps, z, q) - want).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Encode, LinearAblationHasNoAttention) {
  context::ContextShape s{4, 1, 10, 2, 20};
  const ParameterSet ps = context_params(s, 43, false);
  EXPECT_FALSE(ps.has_prefix("ctx.attn"));
  EXPECT_TRUE(ps.contains("ctx.linear.w"));
  EXPECT_EQ(ps.at("ctx.linear.w").rows(), 30);
  ad::Tape t;
  ParamBinder p(t, ps, false);
  const ModelInput in = random_input(7, 10, 44);
  const auto out = context::encode(p, "ctx", in, t.constant(gaussian(7, 10, 45)), s, false);
  EXPECT_EQ(out.c.rows(), 7);
  EXPECT_EQ(out.c.cols(), 10);
}

TEST(Encode, GradientMatchesFiniteDifferences) {
  context::ContextShape s{3, 1, 4, 2, 5};
  const ParameterSet ps = context_params(s, 46);
  const ModelInput in = random_input(4, 4, 47);
  const Matrix z = gaussian(4, 4, 48), w = gaussian(4, 4, 49);
  const auto errors = parameter_gradient_errors(ps, [&](ParamBinder& p) {
    const auto out = context::encode(p, "ctx", in, p.tape().constant(z), s, true);
    return ad::sum_all(ad::mul(out.c, p.tape().constant(w)));
  });
  EXPECT_EQ(errors.size(), ps.size());
  for (const auto& [name, err] : errors) EXPECT_LT(err, 1e-4) << name;
}

}  // namespace
