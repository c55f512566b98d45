// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "jar/error.hpp"
#include "jar/noise.hpp"

namespace jar {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::vector<double> ramp(std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = 0.01 * double(i);
  return t;
}

TEST(NoiseSpec, DefaultsInRadians) {
  const NoiseSpec s = NoiseSpec::defaults();
  EXPECT_DOUBLE_EQ(s.jitter_sigma_hi, 15.0 * kDeg);
  EXPECT_DOUBLE_EQ(s.outlier_sigma_max, 45.0 * kDeg);
  EXPECT_EQ(s.outlier_fraction, 0.05);
  EXPECT_EQ(s.secondary_sigma, 2.0);
  EXPECT_EQ(s.secondary_max, 5);
}

TEST(NoiseSpec, Validation) {
  NoiseSpec s;
  s.outlier_fraction = 1.5;
  EXPECT_THROW(s.validate(), InvalidInputError);
  s = {};
  s.jitter_sigma_lo = 0.2;
  s.jitter_sigma_hi = 0.1;
  EXPECT_THROW(s.validate(), InvalidInputError);
  s = {};
  s.outlier_sigma_max = -1.0;
  EXPECT_THROW(s.validate(), InvalidInputError);
}

TEST(InjectNoise, SilentSpecIsIdentity) {
  NoiseSpec s;
  s.outlier_fraction = 0.0;
  Rng rng(1);
  const auto truth = ramp(100);
  const NoisyWindow w = inject_noise(truth, s, rng);
  EXPECT_EQ(w.noisy, truth);
  EXPECT_TRUE(w.primary_frames.empty());
  EXPECT_THROW(inject_noise(std::vector<double>{}, s, rng), InvalidInputError);
}

TEST(InjectNoise, PrimaryCount) {
  EXPECT_EQ(primary_outlier_count(0.05, 200), 10u);
  EXPECT_EQ(primary_outlier_count(0.05, 100), 5u);
  EXPECT_EQ(primary_outlier_count(0.05, 30), 2u);
  EXPECT_EQ(primary_outlier_count(0.0, 100), 0u);
  EXPECT_EQ(primary_outlier_count(1.0, 7), 7u);
  Rng rng(2);
  const NoisyWindow w = inject_noise(ramp(200), NoiseSpec::defaults(), rng);
  ASSERT_EQ(w.primary_frames.size(), 10u);
  for (std::size_t k = 1; k < w.primary_frames.size(); ++k)
    EXPECT_LT(w.primary_frames[k - 1], w.primary_frames[k]);
  for (std::size_t p : w.primary_frames) EXPECT_EQ(w.perturbed[p], 1);
  EXPECT_EQ(w.noisy.size(), 200u);
}

TEST(InjectNoise, Deterministic) {
  Rng a(55), b(55);
  const auto truth = ramp(100);
  const NoisyWindow x = inject_noise(truth, NoiseSpec::defaults(), a);
  const NoisyWindow y = inject_noise(truth, NoiseSpec::defaults(), b);
  EXPECT_EQ(x.noisy, y.noisy);
  EXPECT_EQ(x.primary_frames, y.primary_frames);
}

TEST(InjectNoise, JitterStandardDeviation) {
  NoiseSpec s;
  s.jitter_sigma_lo = 0.1;
  s.jitter_sigma_hi = 0.1;
  s.outlier_fraction = 0.0;
  Rng rng(17);
  const auto truth = ramp(100);
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (int i = 0; i < 10000; ++i) {
    const NoisyWindow w = inject_noise(truth, s, rng);
    EXPECT_EQ(w.jitter_sigma, 0.1);
    for (std::size_t k = 0; k < truth.size(); ++k) {
      const double d = w.noisy[k] - truth[k];
      sum += d;
      sq += d * d;
      ++n;
    }
  }
  const double mean = sum / double(n);
  const double sd = std::sqrt(sq / double(n) - mean * mean);
  EXPECT_GE(sd, 0.097);
  EXPECT_LE(sd, 0.103);
  EXPECT_LE(std::abs(mean), 3 * 0.1 / std::sqrt(double(n)));
}

TEST(InjectNoise, CleanFramesCarryOnlyJitter) {
  NoiseSpec s = NoiseSpec::defaults();
  s.jitter_sigma_lo = 0.05;
  s.jitter_sigma_hi = 0.05;
  Rng rng(23);
  const auto truth = ramp(100);
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (int i = 0; i < 10000; ++i) {
    const NoisyWindow w = inject_noise(truth, s, rng);
    for (std::size_t k = 0; k < truth.size(); ++k) {
      if (w.perturbed[k]) continue;
      const double d = w.noisy[k] - truth[k];
      sum += d;
      sq += d * d;
      ++n;
    }
  }
  const double mean = sum / double(n), var = sq / double(n) - mean * mean;
  const double se_mean = 0.05 / std::sqrt(double(n));
  const double se_var = 0.05 * 0.05 * std::sqrt(2.0 / double(n));
  EXPECT_LE(std::abs(mean), 3 * se_mean);
  EXPECT_LE(std::abs(var - 0.0025), 3 * se_var);
}

TEST(InjectNoise, SecondaryFramesDecayGeometrically) {
  NoiseSpec s;
  s.outlier_fraction = 0.01;  // one primary in 100 frames
  s.outlier_sigma_max = 1.0;
  s.secondary_sigma = 2.0;
  s.secondary_max = 5;
  const auto truth = std::vector<double>(100, 0.0);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const NoisyWindow w = inject_noise(truth, s, rng);
    ASSERT_EQ(w.primary_frames.size(), 1u);
    const std::size_t p = w.primary_frames[0];
    const double e = w.noisy[p];
    EXPECT_NE(e, 0.0);
    int spread = 0;
    for (int d = 1; d <= 6; ++d) {
      const bool left = p >= std::size_t(d) && w.perturbed[p - d];
      const bool right = p + d < 100 && w.perturbed[p + d];
      if (!left && !right) break;
      spread = d;
      if (left) EXPECT_DOUBLE_EQ(w.noisy[p - d], std::ldexp(e, -d));
      if (right) EXPECT_DOUBLE_EQ(w.noisy[p + d], std::ldexp(e, -d));
    }
    EXPECT_LE(spread, 5);
    std::size_t touched = 0;
    for (auto f : w.perturbed) touched += f;
    EXPECT_LE(touched, 11u);
    ++checked;
  }
  EXPECT_EQ(checked, 200);
}

TEST(InjectNoise, OutlierSigmaInHalfOpenRange) {
  NoiseSpec s;
  s.outlier_fraction = 0.05;
  s.outlier_sigma_max = 45.0 * kDeg;
  s.secondary_max = 0;
  Rng rng(31);
  const auto truth = std::vector<double>(200, 0.0);
  double sq = 0.0;
  std::size_t n = 0;
  for (int i = 0; i < 2000; ++i) {
    const NoisyWindow w = inject_noise(truth, s, rng);
    for (std::size_t p : w.primary_frames) {
      sq += w.noisy[p] * w.noisy[p];
      ++n;
    }
  }
  // E[sigma^2] for sigma ~ U(m/3, m] is (13/27) m^2.
  const double m2 = std::pow(45.0 * kDeg, 2);
  EXPECT_NEAR(sq / double(n) / m2, 13.0 / 27.0, 0.03);
}

TEST(MixSeed, OrderSensitiveAndStable) {
  EXPECT_EQ(mix_seed({1, 2, 3}), mix_seed({1, 2, 3}));
  EXPECT_NE(mix_seed({1, 2, 3}), mix_seed({3, 2, 1}));
  EXPECT_NE(mix_seed({0}), mix_seed({0, 0}));
}

}  // namespace
}  // namespace jar
