#include <gtest/gtest.h>

#include <random>

#include "crossfusor/fft.hpp"
#include "crossfusor/history_encoder.hpp"
#include "test_support.hpp"

using namespace crossfusor;
using crossfusor::testing::direct_dft;
using crossfusor::testing::parameter_gradient_errors;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

ParameterSet encoder_params(const history::EncoderShape& s, std::uint64_t seed) {
  ParameterSet ps;
  Rng rng = make_rng(seed, 0);
  history::add_parameters(ps, "hist", s, rng);
  return ps;
}

Matrix random_input(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng = make_rng(seed, 1);
  Eigen::VectorXd v = standard_normal(rng, static_cast<std::size_t>(rows * cols));
  return Eigen::Map<Matrix>(v.data(), rows, cols);
}

TEST(GruEncode, ZeroWeightsZeroInputGiveZero) {
  history::EncoderShape s;
  ParameterSet ps = encoder_params(s, 1);
  for (auto& [name, m] : ps) {
    if (name.find(".gru.") != std::string::npos) m.setZero();
  }
  ad::Tape t;
  ParamBinder p(t, ps, false);
  const Matrix z = history::gru_encode(p, "hist", t.constant(Matrix::Zero(30, 2)), 2).value();
  EXPECT_EQ(z.rows(), 30);
  EXPECT_EQ(z.cols(), 50);
  EXPECT_EQ(z.cwiseAbs().maxCoeff(), 0.0);
}

TEST(GruEncode, ScalarCellMatchesHandComputation) {
  // One input, one hidden unit, one step: gates in (r, z, n) column order.
  ParameterSet ps;
  ps.add("g.gru.l0.w_ih", (Matrix(1, 3) << 0.7, -0.4, 1.3).finished());
  ps.add("g.gru.l0.w_hh", (Matrix(1, 3) << 0.2, 0.9, -0.6).finished());
  ps.add("g.gru.l0.b_ih", (Matrix(1, 3) << 0.1, 0.05, -0.2).finished());
  ps.add("g.gru.l0.b_hh", (Matrix(1, 3) << -0.3, 0.15, 0.25).finished());
  const double x = 0.8;
  const double h0 = 0.0;
  const double r = sigmoid(0.7 * x + 0.1 + 0.2 * h0 - 0.3);
  const double z = sigmoid(-0.4 * x + 0.05 + 0.9 * h0 + 0.15);
  const double n = std::tanh(1.3 * x - 0.2 + r * (-0.6 * h0 + 0.25));
  const double h1 = (1.0 - z) * n + z * h0;

  ad::Tape t;
  ParamBinder p(t, ps, false);
  EXPECT_NEAR(history::gru_encode(p, "g", t.constant(Matrix::Constant(1, 1, x)), 1).value()(0, 0), h1, 1e-10);

  // Second step feeds h1 back through the recurrent weights.
  const double x2 = -0.5;
  const double r2 = sigmoid(0.7 * x2 + 0.1 + 0.2 * h1 - 0.3);
  const double z2 = sigmoid(-0.4 * x2 + 0.05 + 0.9 * h1 + 0.15);
  const double n2 = std::tanh(1.3 * x2 - 0.2 + r2 * (-0.6 * h1 + 0.25));
  const double h2 = (1.0 - z2) * n2 + z2 * h1;
  ad::Tape t2;
  ParamBinder p2(t2, ps, false);
  const Matrix seq = history::gru_encode(p2, "g", t2.constant((Matrix(2, 1) << x, x2).finished()), 1).value();
  EXPECT_NEAR(seq(1, 0), h2, 1e-10);
}

TEST(GruEncode, IndependentAcrossSequences) {
  history::EncoderShape s;
  const ParameterSet ps = encoder_params(s, 2);
  std::vector<Matrix> inputs = {random_input(30, 2, 1), random_input(30, 2, 2), random_input(30, 2, 3)};
  auto run = [&](const Matrix& in) {
    ad::Tape t;
    ParamBinder p(t, ps, false);
    return Matrix(history::gru_encode(p, "hist", t.constant(in), 2).value());
  };
  std::vector<Matrix> forward, reverse;
  for (const auto& in : inputs) forward.push_back(run(in));
  for (auto it = inputs.rbegin(); it != inputs.rend(); ++it) reverse.push_back(run(*it));
  for (std::size_t i = 0; i < inputs.size(); ++i) EXPECT_EQ(forward[i], reverse[inputs.size() - 1 - i]);
}

TEST(GruEncode, RejectsNonFiniteInput) {
  const ParameterSet ps = encoder_params({}, 3);
  ad::Tape t;
  ParamBinder p(t, ps, false);
  Matrix in = Matrix::Zero(30, 2);
  in(4, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    history::gru_encode(p, "hist", t.constant(in), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numerical);
  }
}

TEST(LocationAttention, ZeroLogitsGiveUniformWeights) {
  ParameterSet ps = encoder_params({}, 4);
  ps.at("hist.loc.w").setZero();
  ps.at("hist.loc.b").setZero();
  const Matrix z = random_input(30, 50, 4);
  ad::Tape t;
  ParamBinder p(t, ps, false);
  const auto att = history::location_attention(p, "hist", t.constant(z));
  EXPECT_LT((att.weights.value().array() - 1.0 / 30.0).abs().maxCoeff(), 1e-15);
  EXPECT_LT((att.z_loc.value() - z / 30.0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(LocationAttention, ChannelShiftInvariance) {
  ParameterSet ps = encoder_params({}, 5);
  const Matrix z = random_input(30, 50, 5);
  auto weights = [&](const ParameterSet& params) {
    ad::Tape t;
    ParamBinder p(t, params, false);
    return Matrix(history::location_attention(p, "hist", t.constant(z)).weights.value());
  };
  const Matrix before = weights(ps);
  ps.at("hist.loc.b")(0, 7) += 3.25;  // shifts every logit of channel 7
  const Matrix after = weights(ps);
  EXPECT_LT((before - after).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(LocationAttention, ToyCaseMatchesElementwiseOracle) {
  // 4 steps, 3 channels.
  ParameterSet ps;
  Rng rng = make_rng(6, 0);
  history::EncoderShape s{4, 2, 3, 1, 3};
  history::add_parameters(ps, "hist", s, rng);
  ps.at("hist.loc.w0") = random_input(4, 3, 7);
  const Matrix z = random_input(4, 3, 8);
  const Matrix& W = ps.at("hist.loc.w");
  const Matrix& b = ps.at("hist.loc.b");
  const Matrix& w0 = ps.at("hist.loc.w0");

  Matrix logits(4, 3);
  for (int t = 0; t < 4; ++t) {
    for (int d = 0; d < 3; ++d) {
      double acc = b(0, d);
      for (int j = 0; j < 3; ++j) acc += z(t, j) * w0(t, j) * W(j, d);
      logits(t, d) = acc;
    }
  }
  Matrix w1(4, 3), zloc(4, 3);
  for (int d = 0; d < 3; ++d) {
    double denom = 0.0;
    for (int t = 0; t < 4; ++t) denom += std::exp(logits(t, d));
    for (int t = 0; t < 4; ++t) {
      w1(t, d) = std::exp(logits(t, d)) / denom;
      zloc(t, d) = w1(t, d) * z(t, d);
    }
  }
  ad::Tape t;
  ParamBinder p(t, ps, false);
  const auto att = history::location_attention(p, "hist", t.constant(z));
  EXPECT_LT((att.weights.value() - w1).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((att.z_loc.value() - zloc).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LocationAttention, WeightsFormDistributionPerChannel) {
  const ParameterSet ps = encoder_params({}, 9);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ad::Tape t;
    ParamBinder p(t, ps, false);
    const Matrix w = history::location_attention(p, "hist", t.constant(5.0 * random_input(30, 50, seed))).weights.value();
    EXPECT_GE(w.minCoeff(), 0.0);
    for (Eigen::Index d = 0; d < w.cols(); ++d) EXPECT_NEAR(w.col(d).sum(), 1.0, 1e-6);
  }
}

TEST(ProjectWeighted, IdentityZeroAndOracle) {
  ParameterSet ps = encoder_params({}, 10);
  const Matrix z = random_input(30, 50, 10);
  auto run = [&]() {
    ad::Tape t;
    ParamBinder p(t, ps, false);
    return Matrix(history::project_weighted(p, "hist", t.constant(z)).value());
  };
  const Matrix oracle = z * ps.at("hist.proj.w") + ps.at("hist.proj.b").replicate(30, 1);
  EXPECT_LT((run() - oracle).cwiseAbs().maxCoeff(), 1e-12);

  ps.at("hist.proj.w").setIdentity();
  ps.at("hist.proj.b").setZero();
  EXPECT_EQ(run(), z);

  ps.at("hist.proj.w").setZero();
  ps.at("hist.proj.b") = random_input(1, 50, 11);
  const Matrix rows = run();
  for (Eigen::Index t = 0; t < rows.rows(); ++t) EXPECT_EQ(rows.row(t), ps.at("hist.proj.b"));
}

Matrix fft_of(const Matrix& x) {
  ad::Tape t;
  return history::fft_embed(t.constant(x)).value();
}

TEST(FftEmbed, ConstantSequenceIsDcOnly) {
  const Matrix out = fft_of(Matrix::Constant(30, 4, 2.5));
  for (Eigen::Index d = 0; d < 4; ++d) {
    EXPECT_NEAR(out(0, d), 75.0, 1e-9);
    EXPECT_NEAR(out(0, 4 + d), 0.0, 1e-9);
    for (Eigen::Index i = 1; i < 30; ++i) {
      EXPECT_NEAR(out(i, d), 0.0, 1e-9);
      EXPECT_NEAR(out(i, 4 + d), 0.0, 1e-9);
    }
  }
}

TEST(FftEmbed, ImpulseHasFlatSpectrum) {
  Matrix x = Matrix::Zero(30, 3);
  x.row(0).setOnes();
  const Matrix out = fft_of(x);
  EXPECT_LT((out.leftCols(3).array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_LT(out.rightCols(3).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FftEmbed, MatchesDirectDftWithSymmetryAndParseval) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix x = random_input(30, 5, 100 + seed);
    const Matrix out = fft_of(x);
    const auto [re, im] = direct_dft(x);
    EXPECT_LT((out.leftCols(5) - re).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((out.rightCols(5) - im).cwiseAbs().maxCoeff(), 1e-9);
    for (Eigen::Index i = 1; i < 30; ++i) {
      EXPECT_LT((out.row(i).leftCols(5) - out.row(30 - i).leftCols(5)).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_LT((out.row(i).rightCols(5) + out.row(30 - i).rightCols(5)).cwiseAbs().maxCoeff(), 1e-9);
    }
    const double energy = out.squaredNorm();
    EXPECT_NEAR(energy / (30.0 * x.squaredNorm()), 1.0, 1e-6);
  }
}

TEST(FinalizeEncoding, ZeroSpectrumGivesBias) {
  const ParameterSet ps = encoder_params({}, 12);
  ad::Tape t;
  ParamBinder p(t, ps, false);
  const Matrix out = history::finalize_encoding(p, "hist", t.constant(Matrix::Zero(30, 100))).value();
  for (Eigen::Index r = 0; r < 30; ++r) EXPECT_EQ(out.row(r), ps.at("hist.fft_proj.b"));
}

TEST(FinalizeEncoding, RealSpectrumThroughImaginarySelectorIsZero) {
  ParameterSet ps = encoder_params({}, 13);
  Matrix& w = ps.at("hist.fft_proj.w");
  w.setZero();
  w.bottomRows(50) = random_input(50, 50, 13);
  ps.at("hist.fft_proj.b").setZero();
  Matrix spectrum = Matrix::Zero(30, 100);
  spectrum.leftCols(50) = random_input(30, 50, 14);
  ad::Tape t;
  ParamBinder p(t, ps, false);
  EXPECT_EQ(history::finalize_encoding(p, "hist", t.constant(spectrum)).value().cwiseAbs().maxCoeff(), 0.0);
}

TEST(FinalizeEncoding, MatchesConcatMatmulOracle) {
  const ParameterSet ps = encoder_params({}, 15);
  const Matrix re = random_input(30, 50, 15), im = random_input(30, 50, 16);
  Matrix cat(30, 100);
  cat << re, im;
  const Matrix oracle = cat * ps.at("hist.fft_proj.w") + ps.at("hist.fft_proj.b").replicate(30, 1);
  ad::Tape t;
  ParamBinder p(t, ps, false);
  EXPECT_LT((history::finalize_encoding(p, "hist", t.constant(cat)).value() - oracle).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Encode, StagesFiniteWithExpectedShapes) {
  const ParameterSet ps = encoder_params({}, 17);
  ad::Tape t;
  ParamBinder p(t, ps, false);
  const auto enc = history::EncodedHistory::from(history::encode(p, "hist", t.constant(random_input(30, 2, 17)), 2));
  for (const Matrix* m : {&enc.z_gru, &enc.z_loc, &enc.z_gru_prime, &enc.z_fft_real, &enc.z_fft_imag, &enc.z_stu_his}) {
    EXPECT_EQ(m->rows(), 30);
    EXPECT_EQ(m->cols(), 50);
    EXPECT_TRUE(m->allFinite());
  }
  EXPECT_EQ(ps.at("hist.loc.w0"), Matrix::Ones(30, 50));
}

TEST(Encode, GradientMatchesFiniteDifferences) {
  // 4 frames, 3 units.
  history::EncoderShape s{4, 2, 3, 2, 3};
  ParameterSet ps = encoder_params(s, 18);
  ps.at("hist.loc.w0") = Matrix::Ones(4, 3) + 0.3 * random_input(4, 3, 19);
  const Matrix in = random_input(4, 2, 20);
  const Matrix weights = random_input(4, 3, 21);
  const auto errors = parameter_gradient_errors(ps, [&](ParamBinder& p) {
    const ad::Var z = history::encode(p, "hist", p.tape().constant(in), s.layers).z_stu_his;
    return ad::sum_all(ad::mul(ad::tanh(z), p.tape().constant(weights)));
  });
  EXPECT_EQ(errors.size(), ps.size());
  for (const auto& [name, err] : errors) EXPECT_LT(err, 1e-4) << name;
}

}  // namespace
