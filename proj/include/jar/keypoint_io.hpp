// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "jar/kinematics.hpp"

namespace jar {

/// {"fps": f, "keypoints": [13 canonical names], "frames": [{"xy": [[x, y] x 13]}, ...]}
PoseSequence parse_keypoints(const std::filesystem::path& path);
PoseSequence parse_keypoints_text(std::string_view text);
void write_keypoints(const PoseSequence& seq, const std::filesystem::path& path);
std::string keypoints_to_text(const PoseSequence& seq);

/// Throws ValidationError for an empty sequence, fps <= 0 or a non-finite
/// coordinate (naming frame and joint).
void validate_pose_sequence(const PoseSequence& seq);

/// Smoothed base trajectory, refined angles and optimised lengths; one entry
/// per frame in each.
struct RefinedMotion {
  std::vector<Point2> base;
  JointAngleSequence angles;
  LimbLengthMatrix lengths;
  double fps = 30.0;

  std::size_t size() const { return base.size(); }
  void validate() const;
  /// Stage-3 reconstruction of every frame.
  PoseSequence reconstruct(const KinematicTree& tree = KinematicTree::canonical()) const;
};

void write_motion(const RefinedMotion& motion, const std::filesystem::path& path);
RefinedMotion read_motion(const std::filesystem::path& path);

enum class SeriesKind { Positions, Angles, Velocities };

SeriesKind series_kind_from_name(std::string_view name);

/// CSV with header; columns frame, time_s, then the requested series.
void export_series(const RefinedMotion& motion, SeriesKind what, const std::filesystem::path& path);
void write_angles_csv(const JointAngleSequence& angles, double fps, const std::filesystem::path& path);

}  // namespace jar
