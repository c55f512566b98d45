// SPDX-License-Identifier: Apache-2.0
#include "jar/kinematics.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "jar/error.hpp"

namespace jar {
namespace {

constexpr std::array<std::string_view, kNumKeypoints> kNames = {
    "nose",       "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist",   "left_hip",       "right_hip",  "left_knee",
    "right_knee", "left_ankle",    "right_ankle"};

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

KeypointId kp(int i) { return static_cast<KeypointId>(i); }

}  // namespace

std::string_view keypoint_name(KeypointId id) { return kNames.at(static_cast<std::size_t>(id)); }
std::string_view keypoint_name(std::size_t index) { return kNames.at(index); }

std::optional<KeypointId> keypoint_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<KeypointId>(i);
  }
  return std::nullopt;
}

std::vector<double> JointAngleSequence::joint_series(std::size_t joint) const {
  std::vector<double> out(frames.size());
  for (std::size_t n = 0; n < frames.size(); ++n) out[n] = frames[n].theta.at(joint);
  return out;
}

void JointAngleSequence::set_joint_series(std::size_t joint, std::span<const double> values) {
  if (values.size() != frames.size()) {
    throw ShapeError("joint series length " + std::to_string(values.size()) +
                     " does not match sequence length " + std::to_string(frames.size()));
  }
  for (std::size_t n = 0; n < frames.size(); ++n) frames[n].theta.at(joint) = values[n];
}

KinematicTree::KinematicTree(std::array<Limb, kNumLimbs> limbs, KeypointId root)
    : limbs_(limbs), root_(root) {
  for (std::size_t e = 0; e < kNumLimbs; ++e) {
    const auto child = static_cast<std::size_t>(limbs_[e].child);
    if (child >= kNumKeypoints || static_cast<std::size_t>(limbs_[e].parent) >= kNumKeypoints) {
      throw InvalidInputError("edge " + std::to_string(e) + " references an unknown keypoint");
    }
    if (limbs_[e].child == root_) {
      throw InvalidInputError("edge " + std::to_string(e) + " points into the root");
    }
    if (parent_edge_[child]) {
      throw InvalidInputError("keypoint " + std::string(kNames[child]) + " has two parents");
    }
    parent_edge_[child] = e;
  }
  // 12 edges, 13 nodes, unique parents: a spanning tree iff every node reaches the root.
  std::array<bool, kNumLimbs> placed{};
  std::array<bool, kNumKeypoints> reached{};
  reached[static_cast<std::size_t>(root_)] = true;
  std::size_t count = 0;
  bool progress = true;
  while (progress && count < kNumLimbs) {
    progress = false;
    for (std::size_t e = 0; e < kNumLimbs; ++e) {
      if (placed[e] || !reached[static_cast<std::size_t>(limbs_[e].parent)]) continue;
      placed[e] = true;
      reached[static_cast<std::size_t>(limbs_[e].child)] = true;
      order_[count++] = e;
      progress = true;
    }
  }
  if (count != kNumLimbs) throw InvalidInputError("limb edges contain a cycle or are disconnected");
}

const KinematicTree& KinematicTree::canonical() {
  static const KinematicTree tree(
      {Limb{kp(0), kp(1)}, Limb{kp(0), kp(2)}, Limb{kp(1), kp(3)}, Limb{kp(3), kp(5)},
       Limb{kp(2), kp(4)}, Limb{kp(4), kp(6)}, Limb{kp(1), kp(7)}, Limb{kp(2), kp(8)},
       Limb{kp(7), kp(9)}, Limb{kp(9), kp(11)}, Limb{kp(8), kp(10)}, Limb{kp(10), kp(12)}},
      KeypointId::Nose);
  return tree;
}

std::optional<std::size_t> KinematicTree::parent_edge(KeypointId id) const {
  return parent_edge_.at(static_cast<std::size_t>(id));
}

double limb_orientation(Point2 parent, Point2 child) {
  const double dx = child.x - parent.x;
  const double dy = child.y - parent.y;
  if (dx > 0.0) return std::atan(dy / dx);
  if (dx < 0.0) return dy >= 0.0 ? std::atan(dy / dx) + kPi : std::atan(dy / dx) - kPi;
  if (dy > 0.0) return kPi / 2.0;
  if (dy < 0.0) return -kPi / 2.0;
  throw DegenerateLimbError(0, std::nullopt, "coincident limb endpoints");
}

JointAngleFrame angles_from_pose(const PoseFrame& frame, const KinematicTree& tree,
                                 std::optional<std::size_t> frame_index) {
  JointAngleFrame out;
  for (std::size_t e = 0; e < kNumLimbs; ++e) {
    const Limb& limb = tree.limb(e);
    try {
      out.theta[e] = limb_orientation(frame[limb.parent], frame[limb.child]);
    } catch (const DegenerateLimbError&) {
      std::string msg = "degenerate limb " + std::to_string(e) + " (" +
                        std::string(keypoint_name(limb.parent)) + " -> " +
                        std::string(keypoint_name(limb.child)) + "): coincident endpoints";
      if (frame_index) msg += " in frame " + std::to_string(*frame_index);
      throw DegenerateLimbError(e, frame_index, msg);
    }
  }
  return out;
}

LimbLengthFrame limb_lengths_from_pose(const PoseFrame& frame, const KinematicTree& tree) {
  LimbLengthFrame out;
  for (std::size_t e = 0; e < kNumLimbs; ++e) {
    const Limb& limb = tree.limb(e);
    const Point2 d = frame[limb.child] - frame[limb.parent];
    out.lengths[e] = std::hypot(d.x, d.y);
  }
  return out;
}

JointAngleSequence angles_from_sequence(const PoseSequence& seq, const KinematicTree& tree) {
  JointAngleSequence out;
  out.frames.reserve(seq.size());
  for (std::size_t n = 0; n < seq.size(); ++n) {
    out.frames.push_back(angles_from_pose(seq.frames[n], tree, n));
  }
  return out;
}

LimbLengthMatrix lengths_from_sequence(const PoseSequence& seq, const KinematicTree& tree) {
  LimbLengthMatrix out;
  out.frames.reserve(seq.size());
  for (const auto& f : seq.frames) out.frames.push_back(limb_lengths_from_pose(f, tree));
  return out;
}

std::vector<double> unwrap_series(std::span<const double> series) {
  std::vector<double> out(series.begin(), series.end());
  for (std::size_t n = 1; n < out.size(); ++n) {
    const double turns = std::round((out[n - 1] - series[n]) / kTwoPi);
    out[n] = series[n] + turns * kTwoPi;
  }
  return out;
}

JointAngleSequence unwrap_joint_angles(const JointAngleSequence& series) {
  JointAngleSequence out = series;
  for (std::size_t j = 0; j < kNumLimbs; ++j) {
    out.set_joint_series(j, unwrap_series(series.joint_series(j)));
  }
  return out;
}

double wrap_angle(double angle) {
  double r = std::remainder(angle, kTwoPi);  // [-pi, pi]
  if (r <= -kPi) r += kTwoPi;
  return r;
}

PoseFrame reconstruct_pose(Point2 base, const JointAngleFrame& angles,
                           const LimbLengthFrame& lengths, const KinematicTree& tree) {
  PoseFrame out;
  out[tree.root()] = base;
  for (std::size_t e : tree.topological_order()) {
    const double len = lengths.lengths[e];
    if (!(len > 0.0) || !std::isfinite(len)) {
      throw DegenerateLimbError(e, std::nullopt,
                                "limb " + std::to_string(e) + " has non-positive length");
    }
    const Limb& limb = tree.limb(e);
    const double th = angles.theta[e];
    out[limb.child] = out[limb.parent] + Point2{len * std::cos(th), len * std::sin(th)};
  }
  return out;
}

std::vector<Point2> velocity_series(std::span<const Point2> positions, double fps) {
  const std::size_t n = positions.size();
  if (n < 2) throw InsufficientDataError("velocity needs at least 2 frames");
  std::vector<Point2> v(n);
  v.front() = fps * (positions[1] - positions[0]);
  v.back() = fps * (positions[n - 1] - positions[n - 2]);
  for (std::size_t j = 1; j + 1 < n; ++j) {
    v[j] = (fps / 2.0) * (positions[j + 1] - positions[j - 1]);
  }
  return v;
}

}  // namespace jar
