// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "jar/kinematics.hpp"
#include "jar/refiner_model.hpp"

namespace jar {

/// Window starts are in padded coordinates: original frame j sits at
/// j + pad_before.
struct WindowPlan {
  std::size_t frames = 0;
  std::size_t window = 0;
  std::size_t stride = 0;
  std::vector<std::size_t> starts;
  std::size_t pad_before = 0;
  std::size_t pad_after = 0;

  std::size_t padded_frames() const { return frames + pad_before + pad_after; }
  std::size_t padding() const { return pad_before + pad_after; }
};

struct MergeConfig {
  double epsilon = 0.001;

  void validate() const;
};

struct RuntimeConfig {
  std::size_t stride = 5;
  MergeConfig merge;

  void validate() const;
};

WindowPlan plan_windows(std::size_t n_frames, std::size_t window, std::size_t stride);

/// Reflection about the end samples (the end sample itself is not repeated),
/// folded as often as the padding requires.
std::vector<double> reflect_pad(std::span<const double> series, std::size_t before,
                                std::size_t after);

/// Distance-weighted merge at padded frame j over every window covering it:
/// w_k = 1 / (|start_k + (L-1)/2 - j| + epsilon), result = sum w_k v_k / sum w_k.
/// `windows[k]` holds the refined values of window k of the plan.
double merge_windows(const WindowPlan& plan, std::span<const std::vector<double>> windows,
                     std::size_t frame, const MergeConfig& config);

/// Merged value for every padded frame.
std::vector<double> merge_all(const WindowPlan& plan, std::span<const std::vector<double>> windows,
                              const MergeConfig& config);

/// Maps a batch of windows (columns, L x B) to refined windows of the same shape.
using WindowRefiner = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

/// Per joint: unwrap, pad if short, refine every planned window, merge and
/// drop padding. Output angles stay unwrapped.
JointAngleSequence refine_sequence(const JointAngleSequence& angles, const WindowRefiner& refiner,
                                   std::size_t window, const RuntimeConfig& config = {});
JointAngleSequence refine_sequence(const JointAngleSequence& angles, const RefinerModel& model,
                                   const RuntimeConfig& config = {});

}  // namespace jar
