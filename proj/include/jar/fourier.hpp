// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "jar/kinematics.hpp"

namespace jar {

inline constexpr int kFourierOrder = 8;

/// theta(m) = a0 + sum_{k=1..8} [a_k cos(2 pi k m / T) + b_k sin(2 pi k m / T)].
/// a[k-1], b[k-1] hold the order-k terms; the period is in frames.
struct FourierCoeffs {
  double a0 = 0.0;
  std::array<double, kFourierOrder> a{};
  std::array<double, kFourierOrder> b{};
  double period = 100.0;

  void validate() const;
  friend bool operator==(const FourierCoeffs&, const FourierCoeffs&) = default;
};

struct FourierMotionTemplate {
  std::string name;
  std::array<FourierCoeffs, kNumLimbs> joints{};

  friend bool operator==(const FourierMotionTemplate&, const FourierMotionTemplate&) = default;
};

struct FourierSample {
  double m;
  double theta;
};

double eval_fourier(const FourierCoeffs& c, double m);

/// Linear least squares for (a0, a_k, b_k), k <= order, at a fixed period.
/// Needs at least 2*order+1 samples.
FourierCoeffs fit_fourier(std::span<const FourierSample> samples, int order, double period);

/// Hand-authored walking, running and stair-climbing cycles, T = 100 frames.
const std::vector<FourierMotionTemplate>& reference_templates();

/// value' = value * U(mul_lo, mul_hi) + U(add_lo, add_hi).
struct ParamRange {
  double mul_lo = 1.0;
  double mul_hi = 1.0;
  double add_lo = 0.0;
  double add_hi = 0.0;

  static ParamRange additive(double half_width) { return {1.0, 1.0, -half_width, half_width}; }
  static ParamRange multiplicative(double lo, double hi) { return {lo, hi, 0.0, 0.0}; }
};

/// Bounds for the parameters that are varied between synthetic subjects.
/// Coefficient draws are independent per joint; the period draw is shared.
struct TemplateRanges {
  ParamRange a0;
  ParamRange a1;
  ParamRange b1;
  ParamRange a2;
  ParamRange b2;
  ParamRange period;

  static TemplateRanges none() { return {}; }
  static TemplateRanges defaults();
};

using Rng = std::mt19937_64;

FourierMotionTemplate randomize_template(const FourierMotionTemplate& base,
                                         const TemplateRanges& ranges, Rng& rng);

/// Per-joint sequences of length frames_per_cycle * cycles, sampled at
/// m = 0..len-1 with each joint's own period.
std::array<std::vector<double>, kNumLimbs> synthesize_truth(const FourierMotionTemplate& t,
                                                            int frames_per_cycle = 100,
                                                            int cycles = 2);

/// Start indices 0, stride, 2*stride, ... with start + window <= len.
std::vector<std::size_t> window_starts(std::size_t len, std::size_t window, std::size_t stride);
std::vector<std::vector<double>> segment_windows(std::span<const double> seq,
                                                 std::size_t window = 100,
                                                 std::size_t stride = 1);

}  // namespace jar
