// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "jar/error.hpp"
#include "jar/refiner_net.hpp"
#include "jar/trainer.hpp"

namespace jar {
namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;

GruParams zero_gru(int in, int H) {
  GruParams p;
  p.W_z = p.W_r = p.W_h = MatrixXd::Zero(in, H);
  p.U_z = p.U_r = p.U_h = MatrixXd::Zero(H, H);
  p.b_z = p.b_r = p.b_h = RowVectorXd::Zero(H);
  return p;
}

GruParams random_gru(int in, int H, std::mt19937_64& rng, double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  auto mat = [&](int r, int c) { return MatrixXd(MatrixXd::NullaryExpr(r, c, [&] { return u(rng); })); };
  GruParams p;
  p.W_z = mat(in, H);
  p.W_r = mat(in, H);
  p.W_h = mat(in, H);
  p.U_z = mat(H, H);
  p.U_r = mat(H, H);
  p.U_h = mat(H, H);
  p.b_z = mat(1, H);
  p.b_r = mat(1, H);
  p.b_h = mat(1, H);
  return p;
}

RefinerModel random_model(const RefinerHyper& hyper, std::uint64_t seed, double scale) {
  RefinerModel m(hyper);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : m.params()) v = u(rng);
  return m;
}

std::vector<double> smooth_window(int L, double phase, double offset) {
  std::vector<double> w(static_cast<std::size_t>(L));
  for (int t = 0; t < L; ++t) w[static_cast<std::size_t>(t)] = offset + 0.4 * std::sin(0.21 * t + phase);
  return w;
}

TEST(GruCell, ZeroParamsHalveTheState) {
  const auto p = zero_gru(3, 4);
  const RowVectorXd h0 = (RowVectorXd(4) << 0.3, -1.2, 2.0, 0.0).finished();
  const RowVectorXd x = (RowVectorXd(3) << 5.0, -2.0, 1.0).finished();
  const RowVectorXd h = gru_cell_forward(x, h0, p);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(h(i), 0.5 * h0(i));
}

TEST(GruCell, ZeroInputAndStateWithZeroBiasesGiveZero) {
  std::mt19937_64 rng(3);
  auto p = random_gru(2, 3, rng);
  p.b_z.setZero();
  p.b_r.setZero();
  p.b_h.setZero();
  const RowVectorXd h = gru_cell_forward(RowVectorXd::Zero(2), RowVectorXd::Zero(3), p);
  EXPECT_EQ(h, RowVectorXd::Zero(3));
}

TEST(GruCell, MatchesHandEvaluationForTwoUnits) {
  GruParams p;
  p.W_z = (MatrixXd(1, 2) << 0.5, -0.25).finished();
  p.W_r = (MatrixXd(1, 2) << 0.1, 0.4).finished();
  p.W_h = (MatrixXd(1, 2) << -0.3, 0.8).finished();
  p.U_z = (MatrixXd(2, 2) << 0.2, 0.0, -0.1, 0.3).finished();
  p.U_r = (MatrixXd(2, 2) << 0.05, 0.15, 0.25, -0.2).finished();
  p.U_h = (MatrixXd(2, 2) << 0.6, -0.4, 0.1, 0.2).finished();
  p.b_z = (RowVectorXd(2) << 0.1, -0.1).finished();
  p.b_r = (RowVectorXd(2) << 0.0, 0.2).finished();
  p.b_h = (RowVectorXd(2) << -0.05, 0.05).finished();
  const double x = 0.7;
  const double h0[2] = {0.2, -0.5};

  auto sig = [](double a) { return 1.0 / (1.0 + std::exp(-a)); };
  double z[2], r[2], hh[2], expect[2];
  for (int j = 0; j < 2; ++j) {
    z[j] = sig(x * p.W_z(0, j) + h0[0] * p.U_z(0, j) + h0[1] * p.U_z(1, j) + p.b_z(j));
    r[j] = sig(x * p.W_r(0, j) + h0[0] * p.U_r(0, j) + h0[1] * p.U_r(1, j) + p.b_r(j));
  }
  for (int j = 0; j < 2; ++j) {
    hh[j] = std::tanh(x * p.W_h(0, j) + r[0] * h0[0] * p.U_h(0, j) + r[1] * h0[1] * p.U_h(1, j) + p.b_h(j));
    expect[j] = (1.0 - z[j]) * h0[j] + z[j] * hh[j];
  }
  const RowVectorXd h = gru_cell_forward((RowVectorXd(1) << x).finished(),
                                         (RowVectorXd(2) << h0[0], h0[1]).finished(), p);
  EXPECT_NEAR(h(0), expect[0], 1e-12);
  EXPECT_NEAR(h(1), expect[1], 1e-12);
}

TEST(GruCell, ShapeErrorNamesTheTensor) {
  auto p = zero_gru(2, 3);
  p.U_r = MatrixXd::Zero(3, 2);
  try {
    gru_cell_forward(RowVectorXd::Zero(2), RowVectorXd::Zero(3), p);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("U_r"), std::string::npos);
  }
}

TEST(BiGru, ZeroParamsGiveZeroOutput) {
  BiGruParams p{zero_gru(1, 4), zero_gru(1, 4)};
  const MatrixXd seq = MatrixXd::Random(7, 1);
  EXPECT_EQ(bigru_layer_forward(seq, p), MatrixXd::Zero(7, 8));
}

TEST(BiGru, MatchesStepwiseCellComposition) {
  std::mt19937_64 rng(11);
  BiGruParams p{random_gru(2, 2, rng), random_gru(2, 2, rng)};
  const MatrixXd seq = (MatrixXd(3, 2) << 0.3, -0.1, 0.8, 0.4, -0.6, 0.2).finished();
  const MatrixXd out = bigru_layer_forward(seq, p);
  RowVectorXd hf = RowVectorXd::Zero(2), hb = RowVectorXd::Zero(2);
  for (int t = 0; t < 3; ++t) {
    hf = gru_cell_forward(seq.row(t), hf, p.fwd);
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(out(t, j), hf(j), 1e-12);
  }
  for (int t = 2; t >= 0; --t) {
    hb = gru_cell_forward(seq.row(t), hb, p.bwd);
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(out(t, 2 + j), hb(j), 1e-12);
  }
}

TEST(BiGru, TimeReversalSwapsHalves) {
  std::mt19937_64 rng(5);
  BiGruParams p{random_gru(3, 4, rng), random_gru(3, 4, rng)};
  const MatrixXd seq = MatrixXd::Random(9, 3);
  const MatrixXd reversed = seq.colwise().reverse();
  const MatrixXd out = bigru_layer_forward(seq, p);
  const MatrixXd out_rev = bigru_layer_forward(reversed, BiGruParams{p.bwd, p.fwd});
  for (int t = 0; t < 9; ++t) {
    for (int j = 0; j < 4; ++j) {
      EXPECT_NEAR(out_rev(8 - t, j), out(t, 4 + j), 1e-14);
      EXPECT_NEAR(out_rev(8 - t, 4 + j), out(t, j), 1e-14);
    }
  }
}

TEST(Attention, IdenticalStatesGiveUniformWeights) {
  AttentionParams p{MatrixXd::Random(4, 3), MatrixXd::Random(4, 3)};
  const RowVectorXd h = (RowVectorXd(4) << 0.2, -0.7, 1.1, 0.4).finished();
  const auto out = attention_head(h.replicate(6, 1), p);
  for (int t = 0; t < 6; ++t) EXPECT_NEAR(out.alpha(t), 1.0 / 6.0, 1e-15);
  EXPECT_LE((out.context - h).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(out.features.cols(), 8);
}

TEST(Attention, SingleStepHasUnitWeight) {
  AttentionParams p{MatrixXd::Random(4, 2), MatrixXd::Random(4, 2)};
  const MatrixXd h = MatrixXd::Random(1, 4);
  const auto out = attention_head(h, p);
  EXPECT_EQ(out.alpha(0), 1.0);
  EXPECT_EQ(out.context, h.row(0));
}

TEST(Attention, MatchesHandSoftmaxForTwoSteps) {
  AttentionParams p;
  p.W_q = (MatrixXd(2, 1) << 1.0, 0.5).finished();
  p.W_k = (MatrixXd(2, 1) << -0.5, 2.0).finished();
  const MatrixXd h = (MatrixXd(2, 2) << 0.4, 0.2, -0.6, 1.0).finished();
  // mean h = (-0.1, 0.6); q = -0.1 + 0.3 = 0.2; k = (-0.2 + 0.4, 0.3 + 2.0) = (0.2, 2.3)
  const double s0 = 0.2 * 0.2, s1 = 0.2 * 2.3;
  const double a0 = std::exp(s0) / (std::exp(s0) + std::exp(s1));
  const auto out = attention_head(h, p);
  EXPECT_NEAR(out.alpha(0), a0, 1e-12);
  EXPECT_NEAR(out.alpha(1), 1.0 - a0, 1e-12);
  EXPECT_NEAR(out.context(0), a0 * 0.4 + (1 - a0) * -0.6, 1e-12);
  EXPECT_NEAR(out.context(1), a0 * 0.2 + (1 - a0) * 1.0, 1e-12);
}

TEST(Attention, WeightsFormADistribution) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    AttentionParams p{MatrixXd::NullaryExpr(6, 4, [&] { return n(rng); }),
                      MatrixXd::NullaryExpr(6, 4, [&] { return n(rng); })};
    const MatrixXd h = MatrixXd::NullaryExpr(15, 6, [&] { return n(rng); });
    const auto out = attention_head(h, p);
    EXPECT_GE(out.alpha.minCoeff(), 0.0);
    EXPECT_NEAR(out.alpha.sum(), 1.0, 1e-12);
  }
}

TEST(Refiner, LayoutNamesAndShapes) {
  const RefinerModel m(RefinerHyper{64, 32, 100});
  EXPECT_EQ(m.tensors().size(), 2u * 2u * 9u + 4u);
  EXPECT_EQ(m.info("l0.fwd.W_z").rows, 1u);
  EXPECT_EQ(m.info("l1.bwd.W_h").rows, 128u);
  EXPECT_EQ(m.info("l1.bwd.U_r").cols, 64u);
  EXPECT_EQ(m.info("att.W_k").cols, 32u);
  EXPECT_EQ(m.info("head.W_o").rows, 256u);
  EXPECT_THROW(m.info("nope"), ShapeError);
}

TEST(Refiner, ZeroModelIsTheIdentity) {
  const RefinerModel m(RefinerHyper{8, 4, 30});
  const auto x = smooth_window(30, 0.3, 1.2);
  EXPECT_EQ(refine_window(x, m), x);
}

TEST(Refiner, DeterministicAndShiftInvariant) {
  const RefinerModel m = random_model({8, 4, 40}, 21, 0.3);
  const auto x = smooth_window(40, 1.0, -0.4);
  const auto a = refine_window(x, m);
  const auto b = refine_window(x, m);
  EXPECT_EQ(a, b);
  for (double c : {0.5, -2.0, 3.14159}) {
    std::vector<double> shifted(x);
    for (double& v : shifted) v += c;
    const auto out = refine_window(shifted, m);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(out[i], a[i] + c, 1e-12);
  }
}

TEST(Refiner, WrongWindowLengthIsAShapeError) {
  const RefinerModel m(RefinerHyper{4, 2, 20});
  EXPECT_THROW(refine_window(std::vector<double>(19, 0.0), m), ShapeError);
}

TEST(Refiner, BatchMatchesSingleWindows) {
  const RefinerModel m = random_model({8, 4, 25}, 4, 0.3);
  MatrixXd x(25, 3);
  for (int b = 0; b < 3; ++b) {
    const auto w = smooth_window(25, b, 0.1 * b);
    x.col(b) = Eigen::Map<const Eigen::VectorXd>(w.data(), 25);
  }
  const MatrixXd out = refine_batch(x, m);
  for (int b = 0; b < 3; ++b) {
    const std::vector<double> w(x.col(b).data(), x.col(b).data() + 25);
    const auto single = refine_window(w, m);
    for (int t = 0; t < 25; ++t) EXPECT_NEAR(out(t, b), single[static_cast<std::size_t>(t)], 1e-13);
  }
}

TEST(MseLoss, EvaluatesTheMeanSquare) {
  EXPECT_EQ(mse_loss(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 2.0}), 0.0);
  EXPECT_DOUBLE_EQ(mse_loss(std::vector<double>{1.5, 2.5, 0.5}, std::vector<double>{1.0, 2.0, 0.0}), 0.25);
  EXPECT_DOUBLE_EQ(mse_loss(std::vector<double>{1.0, 3.0}, std::vector<double>{2.0, 5.0}), 2.5);
  EXPECT_THROW(mse_loss(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), ShapeError);
}

std::vector<SamplePair> gradient_batch(int L, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.2);
  std::vector<SamplePair> batch;
  for (int i = 0; i < count; ++i) {
    SamplePair s;
    s.truth = smooth_window(L, 0.7 * i, 0.3 * i);
    s.noisy = s.truth;
    for (double& v : s.noisy) v += n(rng);
    batch.push_back(std::move(s));
  }
  return batch;
}

TEST(Gradients, MatchCentralFiniteDifferences) {
  const RefinerModel model = random_model({8, 4, 20}, 77, 0.4);
  const auto batch = gradient_batch(20, 3, 8);
  const auto analytic = param_gradients(batch, model);

  auto loss_at = [&](const RefinerModel& m) {
    double sum = 0.0;
    for (const auto& s : batch) sum += mse_loss(refine_window(s.noisy, m), s.truth);
    return sum / static_cast<double>(batch.size());
  };
  EXPECT_NEAR(analytic.loss, loss_at(model), 1e-14);

  const double h = 1e-6;
  double worst = 0.0;
  std::string worst_name;
  RefinerModel probe = model;
  for (const auto& t : model.tensors()) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::size_t k = t.offset + i;
      probe.params()[k] = model.params()[k] + h;
      const double up = loss_at(probe);
      probe.params()[k] = model.params()[k] - h;
      const double down = loss_at(probe);
      probe.params()[k] = model.params()[k];
      const double fd = (up - down) / (2.0 * h);
      const double g = analytic.gradient.params()[k];
      const double rel = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-6});
      if (rel > worst) {
        worst = rel;
        worst_name = t.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  EXPECT_LE(worst, 1e-4) << "worst component " << worst_name;
}

TEST(Gradients, ZeroResidualGivesZeroHeadBiasGradient) {
  const RefinerModel model = random_model({8, 4, 20}, 3, 0.3);
  auto batch = gradient_batch(20, 4, 2);
  MatrixXd x(20, 4);
  for (int b = 0; b < 4; ++b) x.col(b) = Eigen::Map<const Eigen::VectorXd>(batch[b].noisy.data(), 20);
  const MatrixXd pred = refine_batch(x, model);
  for (int b = 0; b < 4; ++b) batch[b].truth.assign(pred.col(b).data(), pred.col(b).data() + 20);
  const auto g = param_gradients(batch, model);
  EXPECT_EQ(g.loss, 0.0);
  EXPECT_EQ(g.gradient.tensor("head.b_o")[0], 0.0);
}

TEST(Gradients, DuplicatedBatchGivesTheSameGradient) {
  const RefinerModel model = random_model({8, 4, 20}, 5, 0.3);
  const auto batch = gradient_batch(20, 3, 6);
  std::vector<SamplePair> doubled;
  for (const auto& s : batch) {
    doubled.push_back(s);
    doubled.push_back(s);
  }
  const auto a = param_gradients(batch, model);
  const auto b = param_gradients(doubled, model);
  EXPECT_NEAR(a.loss, b.loss, 1e-15);
  for (std::size_t k = 0; k < a.gradient.params().size(); ++k) {
    const double x = a.gradient.params()[k], y = b.gradient.params()[k];
    EXPECT_NEAR(x, y, 1e-12 * std::max(1.0, std::abs(x)));
  }
}

TEST(Gradients, OverflowNamesTheTensor) {
  RefinerModel model = random_model({4, 2, 10}, 1, 0.3);
  for (double& v : model.tensor("head.W_o")) v = 1e300;
  const auto batch = gradient_batch(10, 2, 1);
  try {
    param_gradients(batch, model);
    FAIL() << "expected NumericOverflowError";
  } catch (const NumericOverflowError& e) {
    EXPECT_NE(std::string(e.what()).find("tensor '"), std::string::npos);
  }
}

TEST(Gradients, EmptyBatchIsAShapeError) {
  const RefinerModel model(RefinerHyper{4, 2, 10});
  EXPECT_THROW(param_gradients({}, model), ShapeError);
}

class ModelFile : public ::testing::Test {
 protected:
  std::filesystem::path dir = std::filesystem::temp_directory_path() / "jar_model_test";
  void SetUp() override { std::filesystem::create_directories(dir); }
  void TearDown() override { std::filesystem::remove_all(dir); }
};

TEST_F(ModelFile, RoundtripIsBitExact) {
  const RefinerModel m = initialise_model({64, 32, 100}, 99);
  save_model(m, dir / "m.jarm");
  const RefinerModel back = load_model(dir / "m.jarm");
  EXPECT_EQ(back.hidden(), 64);
  EXPECT_EQ(back.attention(), 32);
  EXPECT_EQ(back.window(), 100);
  ASSERT_EQ(back.params().size(), m.params().size());
  EXPECT_EQ(std::memcmp(back.params().data(), m.params().data(), m.params().size() * sizeof(double)), 0);
}

TEST_F(ModelFile, TruncatedFileIsCorrupt) {
  save_model(initialise_model({8, 4, 20}, 1), dir / "m.jarm");
  const auto size = std::filesystem::file_size(dir / "m.jarm");
  std::filesystem::resize_file(dir / "m.jarm", size - 13);
  EXPECT_THROW(load_model(dir / "m.jarm"), CorruptModelError);
}

TEST_F(ModelFile, BadMagicIsAFormatError) {
  std::ofstream(dir / "bad.jarm", std::ios::binary) << "NOPE and more bytes";
  EXPECT_THROW(load_model(dir / "bad.jarm"), FormatError);
}

TEST_F(ModelFile, FutureVersionIsAFormatError) {
  save_model(RefinerModel(RefinerHyper{4, 2, 10}), dir / "m.jarm");
  std::fstream f(dir / "m.jarm", std::ios::binary | std::ios::in | std::ios::out);
  f.seekp(4);
  const char v[4] = {7, 0, 0, 0};
  f.write(v, 4);
  f.close();
  EXPECT_THROW(load_model(dir / "m.jarm"), FormatError);
}

TEST_F(ModelFile, InconsistentShapeTableIsCorrupt) {
  save_model(RefinerModel(RefinerHyper{4, 2, 10}), dir / "m.jarm");
  std::fstream f(dir / "m.jarm", std::ios::binary | std::ios::in | std::ios::out);
  f.seekp(8);  // H
  const char v[4] = {5, 0, 0, 0};
  f.write(v, 4);
  f.close();
  EXPECT_THROW(load_model(dir / "m.jarm"), CorruptModelError);
}

TEST(Initialisation, FanInBoundsAndIdentityHead) {
  const RefinerModel m = initialise_model({16, 8, 50}, 4);
  for (const auto& t : m.tensors()) {
    const auto v = m.tensor(t.name);
    if (t.rank == 1 || t.name.rfind("head.", 0) == 0) {
      for (double x : v) EXPECT_EQ(x, 0.0) << t.name;
    } else {
      const double bound = 1.0 / std::sqrt(static_cast<double>(t.rows));
      for (double x : v) EXPECT_LE(std::abs(x), bound) << t.name;
    }
  }
  const auto x = smooth_window(50, 0.0, 0.5);
  EXPECT_EQ(refine_window(x, m), x);
  EXPECT_EQ(initialise_model({16, 8, 50}, 4), m);
}

}  // namespace
}  // namespace jar
