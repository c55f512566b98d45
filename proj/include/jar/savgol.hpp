// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "jar/kinematics.hpp"

namespace jar {

struct SavGolConfig {
  int half_width = 50;
  int degree = 2;

  /// Throws InvalidInputError unless half_width >= 1 and degree == 2.
  void validate() const;
};

/// Local quadratic least-squares smoothing. Window [i-w, i+w] is clamped to the
/// series bounds; a clamped window with fewer than three samples is widened
/// inward to three.
std::vector<double> savgol_smooth(std::span<const double> series, const SavGolConfig& config);

/// Weights applied to series[lo..hi] to produce the smoothed value at `at`.
std::vector<double> savgol_weights(int lo, int hi, int at);

/// Smoothed nose trajectory S_B.
std::vector<Point2> smooth_base_trajectory(const PoseSequence& seq, const SavGolConfig& config);

}  // namespace jar
