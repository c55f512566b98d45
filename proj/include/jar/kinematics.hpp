// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace jar {

inline constexpr std::size_t kNumKeypoints = 13;
inline constexpr std::size_t kNumLimbs = 12;

enum class KeypointId : std::uint8_t {
  Nose = 0,
  LeftShoulder,
  RightShoulder,
  LeftElbow,
  RightElbow,
  LeftWrist,
  RightWrist,
  LeftHip,
  RightHip,
  LeftKnee,
  RightKnee,
  LeftAnkle,
  RightAnkle,
};

/// Canonical snake_case name, e.g. "left_shoulder".
std::string_view keypoint_name(KeypointId id);
std::string_view keypoint_name(std::size_t index);
std::optional<KeypointId> keypoint_from_name(std::string_view name);

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
  friend bool operator==(Point2 a, Point2 b) = default;
};

struct PoseFrame {
  std::array<Point2, kNumKeypoints> xy{};

  Point2& operator[](KeypointId id) { return xy[static_cast<std::size_t>(id)]; }
  const Point2& operator[](KeypointId id) const { return xy[static_cast<std::size_t>(id)]; }
  friend bool operator==(const PoseFrame&, const PoseFrame&) = default;
};

struct PoseSequence {
  std::vector<PoseFrame> frames;
  double fps = 30.0;

  std::size_t size() const noexcept { return frames.size(); }
  friend bool operator==(const PoseSequence&, const PoseSequence&) = default;
};

/// Global image-plane orientation of each limb, radians, canonical edge order.
struct JointAngleFrame {
  std::array<double, kNumLimbs> theta{};
};

struct JointAngleSequence {
  std::vector<JointAngleFrame> frames;

  std::size_t size() const noexcept { return frames.size(); }
  std::vector<double> joint_series(std::size_t joint) const;
  void set_joint_series(std::size_t joint, std::span<const double> values);
};

struct LimbLengthFrame {
  std::array<double, kNumLimbs> lengths{};
};

struct LimbLengthMatrix {
  std::vector<LimbLengthFrame> frames;

  std::size_t size() const noexcept { return frames.size(); }
};

struct Limb {
  KeypointId parent;
  KeypointId child;
};

/// Rooted spanning tree over the 13 keypoints. Edge order is the canonical
/// limb order used by every angle and length matrix.
class KinematicTree {
 public:
  /// Throws InvalidInputError unless the edges form a spanning tree rooted at `root`.
  KinematicTree(std::array<Limb, kNumLimbs> limbs, KeypointId root);

  /// nose->shoulders, shoulder->elbow->wrist, shoulder->hip, hip->knee->ankle.
  static const KinematicTree& canonical();

  std::span<const Limb> limbs() const noexcept { return limbs_; }
  const Limb& limb(std::size_t edge) const { return limbs_.at(edge); }
  KeypointId root() const noexcept { return root_; }
  /// Edge indices ordered so that every parent is placed before its children.
  std::span<const std::size_t> topological_order() const noexcept { return order_; }
  /// Edge whose child is `id`; nullopt for the root.
  std::optional<std::size_t> parent_edge(KeypointId id) const;

 private:
  std::array<Limb, kNumLimbs> limbs_;
  KeypointId root_;
  std::array<std::size_t, kNumLimbs> order_{};
  std::array<std::optional<std::size_t>, kNumKeypoints> parent_edge_{};
};

/// Four-quadrant orientation of (child - parent) in (-pi, pi].
/// Throws DegenerateLimbError when the points coincide.
double limb_orientation(Point2 parent, Point2 child);

JointAngleFrame angles_from_pose(const PoseFrame& frame, const KinematicTree& tree,
                                 std::optional<std::size_t> frame_index = std::nullopt);
LimbLengthFrame limb_lengths_from_pose(const PoseFrame& frame, const KinematicTree& tree);

JointAngleSequence angles_from_sequence(const PoseSequence& seq, const KinematicTree& tree);
LimbLengthMatrix lengths_from_sequence(const PoseSequence& seq, const KinematicTree& tree);

/// Removes 2*pi jumps per joint; output equals input modulo 2*pi and
/// consecutive values differ by at most pi.
JointAngleSequence unwrap_joint_angles(const JointAngleSequence& series);
std::vector<double> unwrap_series(std::span<const double> series);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

PoseFrame reconstruct_pose(Point2 base, const JointAngleFrame& angles,
                           const LimbLengthFrame& lengths, const KinematicTree& tree);

/// Central differences inside, one-sided at the ends. Units px/s.
std::vector<Point2> velocity_series(std::span<const Point2> positions, double fps);

}  // namespace jar
