// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "jar/keypoint_io.hpp"
#include "jar/limb_solver.hpp"
#include "jar/refiner_model.hpp"
#include "jar/savgol.hpp"
#include "jar/window_runtime.hpp"

namespace jar {

struct PipelineConfig {
  SavGolConfig savgol;
  TrustRegionConfig limbs;
  RuntimeConfig runtime;

  void validate() const;
};

struct PipelineResult {
  RefinedMotion motion;
  PoseSequence output;
  JointAngleSequence raw_angles;
  LimbSolveResult limb_report;
};

/// Stage 1: angles and lengths per frame. Stage 2: smoothed base trajectory,
/// optimised limb lengths, refined angles. Stage 3: reconstruction.
PipelineResult run_jar(const PoseSequence& input, const WindowRefiner& refiner, std::size_t window,
                       const PipelineConfig& config = {});
PipelineResult run_jar(const PoseSequence& input, const RefinerModel& model,
                       const PipelineConfig& config = {});

/// File-level entry point; writes the refined keypoints to `output`.
PipelineResult run_jar(const std::filesystem::path& input, const std::filesystem::path& model,
                       const std::filesystem::path& output, const PipelineConfig& config = {});

}  // namespace jar
