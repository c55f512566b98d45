// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "jar/kinematics.hpp"

namespace jar {

inline constexpr double kDefaultTau = 10.0 * std::numbers::pi / 180.0;

/// A frame judged erroneous; empty `joints` means every joint is affected.
struct ErroneousFrame {
  std::size_t frame = 0;
  std::vector<std::size_t> joints;
};

struct MetricsReport {
  std::array<double, kNumLimbs> joint_mse{};
  double mse = 0.0;
  double correction_rate = 1.0;  // 1 when there are no erroneous frames
  std::size_t frames = 0;
  std::size_t erroneous_frames = 0;
  std::size_t corrected_frames = 0;
  double tau = kDefaultTau;
};

/// Angle differences are wrapped into (-pi, pi] before squaring or testing
/// against tau. A frame is corrected when every affected joint is within tau.
MetricsReport evaluate_metrics(const JointAngleSequence& refined, const JointAngleSequence& truth,
                               const std::vector<ErroneousFrame>& erroneous, double tau = kDefaultTau);

std::string metrics_json(const MetricsReport& report);

/// Accepts [3, 17, {"frame": 40, "joints": [2, 3]}] or {"erroneous": [...]}.
std::vector<ErroneousFrame> read_erroneous_set(const std::filesystem::path& path);
void write_erroneous_set(const std::vector<ErroneousFrame>& set, const std::filesystem::path& path);

}  // namespace jar
