// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "jar/error.hpp"
#include "jar/kinematics.hpp"

namespace jar {
namespace {

constexpr double kPi = std::numbers::pi;
const KinematicTree& tree() { return KinematicTree::canonical(); }

PoseFrame random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-500.0, 500.0), len(5.0, 120.0), ang(-kPi, kPi);
  JointAngleFrame a;
  LimbLengthFrame l;
  for (std::size_t e = 0; e < kNumLimbs; ++e) {
    a.theta[e] = ang(rng);
    l.lengths[e] = len(rng);
  }
  return reconstruct_pose({pos(rng), pos(rng)}, a, l, tree());
}

TEST(Keypoints, CanonicalNamesAndOrder) {
  EXPECT_EQ(keypoint_name(KeypointId::Nose), "nose");
  EXPECT_EQ(keypoint_name(KeypointId::LeftShoulder), "left_shoulder");
  EXPECT_EQ(keypoint_name(12), "right_ankle");
  EXPECT_EQ(keypoint_from_name("right_knee"), KeypointId::RightKnee);
  EXPECT_FALSE(keypoint_from_name("tail").has_value());
}

TEST(Tree, CanonicalEdges) {
  const std::pair<int, int> expect[] = {{0, 1}, {0, 2}, {1, 3}, {3, 5}, {2, 4}, {4, 6},
                                        {1, 7}, {2, 8}, {7, 9}, {9, 11}, {8, 10}, {10, 12}};
  for (std::size_t e = 0; e < kNumLimbs; ++e) {
    EXPECT_EQ(static_cast<int>(tree().limb(e).parent), expect[e].first);
    EXPECT_EQ(static_cast<int>(tree().limb(e).child), expect[e].second);
  }
  EXPECT_EQ(tree().root(), KeypointId::Nose);
  EXPECT_FALSE(tree().parent_edge(KeypointId::Nose).has_value());
  EXPECT_EQ(tree().parent_edge(KeypointId::RightAnkle), 11u);
}

TEST(Tree, RejectsNonTrees) {
  auto limbs = std::array<Limb, kNumLimbs>{};
  for (std::size_t e = 0; e < kNumLimbs; ++e) limbs[e] = tree().limb(e);
  auto two_parents = limbs;
  two_parents[3] = {KeypointId::Nose, KeypointId::LeftElbow};
  EXPECT_THROW(KinematicTree(two_parents, KeypointId::Nose), InvalidInputError);
  auto into_root = limbs;
  into_root[0] = {KeypointId::LeftShoulder, KeypointId::Nose};
  EXPECT_THROW(KinematicTree(into_root, KeypointId::Nose), InvalidInputError);
}

TEST(Orientation, EquationBranches) {
  EXPECT_EQ(limb_orientation({0, 0}, {1, 0}), 0.0);
  EXPECT_DOUBLE_EQ(limb_orientation({0, 0}, {0, 1}), kPi / 2);
  EXPECT_DOUBLE_EQ(limb_orientation({0, 0}, {0, -1}), -kPi / 2);
  EXPECT_DOUBLE_EQ(limb_orientation({0, 0}, {-1, 0}), kPi);
  EXPECT_DOUBLE_EQ(limb_orientation({0, 0}, {1, 1}), kPi / 4);
  EXPECT_DOUBLE_EQ(limb_orientation({0, 0}, {-1, -1}), -3 * kPi / 4);
  EXPECT_DOUBLE_EQ(limb_orientation({2, 3}, {1, 4}), 3 * kPi / 4);
}

TEST(Orientation, CoincidentPointsNameEdgeAndFrame) {
  EXPECT_THROW(limb_orientation({1, 1}, {1, 1}), DegenerateLimbError);
  PoseFrame f;
  for (std::size_t k = 0; k < kNumKeypoints; ++k) f.xy[k] = {static_cast<double>(k), 0.0};
  f[KeypointId::LeftKnee] = f[KeypointId::LeftHip];
  try {
    angles_from_pose(f, tree(), 17);
    FAIL() << "expected DegenerateLimbError";
  } catch (const DegenerateLimbError& e) {
    EXPECT_EQ(e.edge(), 8u);
    EXPECT_EQ(e.frame(), 17u);
  }
}

TEST(Angles, UnitOffsetsGiveZero) {
  JointAngleFrame zero;
  LimbLengthFrame ones;
  ones.lengths.fill(1.0);
  const PoseFrame f = reconstruct_pose({3, 4}, zero, ones, tree());
  for (std::size_t e = 0; e < kNumLimbs; ++e) {
    const auto& l = tree().limb(e);
    EXPECT_EQ(f[l.child].x, f[l.parent].x + 1.0);
    EXPECT_EQ(f[l.child].y, f[l.parent].y);
  }
  const auto a = angles_from_pose(f, tree());
  for (double t : a.theta) EXPECT_EQ(t, 0.0);
}

TEST(Angles, TPose) {
  PoseFrame f;
  f[KeypointId::Nose] = {0, 0};
  f[KeypointId::LeftShoulder] = {20, -10};
  f[KeypointId::RightShoulder] = {-20, -10};
  f[KeypointId::LeftElbow] = {50, -10};
  f[KeypointId::LeftWrist] = {80, -10};
  f[KeypointId::RightElbow] = {-50, -10};
  f[KeypointId::RightWrist] = {-80, -10};
  f[KeypointId::LeftHip] = {15, -70};
  f[KeypointId::RightHip] = {-15, -70};
  f[KeypointId::LeftKnee] = {15, -110};
  f[KeypointId::LeftAnkle] = {15, -150};
  f[KeypointId::RightKnee] = {-15, -110};
  f[KeypointId::RightAnkle] = {-15, -150};
  const auto a = angles_from_pose(f, tree());
  EXPECT_EQ(a.theta[2], 0.0);   // left shoulder -> elbow
  EXPECT_EQ(a.theta[3], 0.0);   // left elbow -> wrist
  EXPECT_EQ(a.theta[4], kPi);   // right shoulder -> elbow
  EXPECT_EQ(a.theta[5], kPi);   // right elbow -> wrist
  for (std::size_t e : {8u, 9u, 10u, 11u}) EXPECT_DOUBLE_EQ(a.theta[e], -kPi / 2) << e;
}

TEST(Lengths, EuclideanAndHomogeneous) {
  PoseFrame f;
  for (std::size_t k = 0; k < kNumKeypoints; ++k) f.xy[k] = {3.0 * k, 4.0 * k};
  f[KeypointId::LeftShoulder] = {3, 4};
  f[KeypointId::Nose] = {0, 0};
  auto l = limb_lengths_from_pose(f, tree());
  EXPECT_DOUBLE_EQ(l.lengths[0], 5.0);
  f[KeypointId::RightShoulder] = f[KeypointId::Nose];
  l = limb_lengths_from_pose(f, tree());
  EXPECT_EQ(l.lengths[1], 0.0);
  std::mt19937_64 rng(1);
  const PoseFrame p = random_pose(rng);
  PoseFrame scaled = p;
  for (auto& q : scaled.xy) q = 2.5 * q;
  const auto a = limb_lengths_from_pose(p, tree()), b = limb_lengths_from_pose(scaled, tree());
  for (std::size_t e = 0; e < kNumLimbs; ++e) EXPECT_NEAR(b.lengths[e], 2.5 * a.lengths[e], 1e-12 * b.lengths[e]);
}

TEST(Unwrap, HandCases) {
  const auto u = unwrap_series(std::vector<double>{3.1, -3.1});
  EXPECT_EQ(u[0], 3.1);
  EXPECT_NEAR(u[1], -3.1 + 2 * kPi, 1e-15);
  EXPECT_NEAR(u[1], 3.1832, 1e-4);
  const std::vector<double> constant(5, 1.3);
  EXPECT_EQ(unwrap_series(constant), constant);
  const std::vector<double> gentle{0.1, 0.5, -0.3, 2.0, -1.0};
  EXPECT_EQ(unwrap_series(gentle), gentle);
}

TEST(Unwrap, CongruentAndContinuous) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> step(-0.9 * kPi, 0.9 * kPi);
  JointAngleSequence s;
  double walk[kNumLimbs] = {};
  for (int i = 0; i < 300; ++i) {
    JointAngleFrame f;
    for (std::size_t e = 0; e < kNumLimbs; ++e) {
      walk[e] += step(rng);
      f.theta[e] = wrap_angle(walk[e]);
    }
    s.frames.push_back(f);
  }
  const auto u = unwrap_joint_angles(s);
  for (std::size_t e = 0; e < kNumLimbs; ++e) {
    EXPECT_EQ(u.frames[0].theta[e], s.frames[0].theta[e]);
    for (std::size_t i = 1; i < s.size(); ++i) {
      EXPECT_LE(std::abs(u.frames[i].theta[e] - u.frames[i - 1].theta[e]), kPi);
      EXPECT_NEAR(wrap_angle(u.frames[i].theta[e] - s.frames[i].theta[e]), 0.0, 1e-9);
    }
  }
}

TEST(Wrap, IntoHalfOpenInterval) {
  EXPECT_EQ(wrap_angle(kPi), kPi);
  EXPECT_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-15);
  EXPECT_NEAR(wrap_angle(-7.0), -7.0 + 2 * kPi, 1e-15);
  EXPECT_EQ(wrap_angle(0.25), 0.25);
}

TEST(Reconstruct, RoundtripRandomPoses) {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const PoseFrame p = random_pose(rng);
    const PoseFrame q = reconstruct_pose(p[KeypointId::Nose], angles_from_pose(p, tree()),
                                         limb_lengths_from_pose(p, tree()), tree());
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
      worst = std::max({worst, std::abs(q.xy[k].x - p.xy[k].x), std::abs(q.xy[k].y - p.xy[k].y)});
    }
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(Reconstruct, RotationAboutBase) {
  std::mt19937_64 rng(6);
  const PoseFrame p = random_pose(rng);
  auto a = angles_from_pose(p, tree());
  const auto l = limb_lengths_from_pose(p, tree());
  const double phi = 0.7;
  for (double& t : a.theta) t += phi;
  const Point2 base = p[KeypointId::Nose];
  const PoseFrame q = reconstruct_pose(base, a, l, tree());
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    const Point2 d = p.xy[k] - base;
    EXPECT_NEAR(q.xy[k].x, base.x + d.x * std::cos(phi) - d.y * std::sin(phi), 1e-9);
    EXPECT_NEAR(q.xy[k].y, base.y + d.x * std::sin(phi) + d.y * std::cos(phi), 1e-9);
  }
}

TEST(Reconstruct, NonPositiveLengthIsDegenerate) {
  JointAngleFrame a;
  LimbLengthFrame l;
  l.lengths.fill(1.0);
  l.lengths[5] = 0.0;
  try {
    reconstruct_pose({0, 0}, a, l, tree());
    FAIL();
  } catch (const DegenerateLimbError& e) {
    EXPECT_EQ(e.edge(), 5u);
  }
  l.lengths[5] = -2.0;
  EXPECT_THROW(reconstruct_pose({0, 0}, a, l, tree()), DegenerateLimbError);
}

TEST(Velocity, Cases) {
  const std::vector<Point2> still(6, Point2{3, -2});
  for (const auto& v : velocity_series(still, 30.0)) EXPECT_EQ(v, (Point2{0, 0}));
  std::vector<Point2> line;
  for (int j = 0; j < 8; ++j) line.push_back({static_cast<double>(j), 2.0 * j});
  for (const auto& v : velocity_series(line, 10.0)) {
    EXPECT_DOUBLE_EQ(v.x, 10.0);
    EXPECT_DOUBLE_EQ(v.y, 20.0);
  }
  const auto v = velocity_series(std::vector<Point2>{{0, 0}, {1, 0}, {4, 0}}, 1.0);
  EXPECT_EQ(v[1], (Point2{2, 0}));
  EXPECT_EQ(v[0], (Point2{1, 0}));
  EXPECT_EQ(v[2], (Point2{3, 0}));
  EXPECT_THROW(velocity_series(std::vector<Point2>{{0, 0}}, 1.0), InsufficientDataError);
}

TEST(Sequences, JointSeriesShapeChecked) {
  JointAngleSequence s;
  s.frames.resize(4);
  s.set_joint_series(3, std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(s.joint_series(3), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_THROW(s.set_joint_series(3, std::vector<double>{1, 2}), ShapeError);
}

}  // namespace
}  // namespace jar
