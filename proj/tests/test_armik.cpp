#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dextac/armik.hpp"
#include "dextac/evalsuite.hpp"
#include "support.hpp"

using namespace dextac;

namespace {

RigidTransform tcp_pose(const RobotModel& m, const JointVector& q) {
  std::vector<std::string> names{"tcp"};
  return site_poses(m, q, names)[0];
}

IkOptions position_only() {
  IkOptions o;
  o.rotation_weight = 0.0;
  return o;
}

void expect_within_tolerance(const RobotModel& m, const IkSolution& s, const RigidTransform& target,
                             const IkOptions& o) {
  const RigidTransform reached = tcp_pose(m, s.q);
  EXPECT_LE((reached.translation - target.translation).norm(), o.tol_pos);
  if (o.rotation_weight > 0.0) EXPECT_LE(rotation_distance(reached.rotation, target.rotation), o.tol_rot);
  EXPECT_TRUE((s.q.array() >= m.lower_limits().array()).all());
  EXPECT_TRUE((s.q.array() <= m.upper_limits().array()).all());
}

}  // namespace

TEST(ArmIk, TargetAtSeedNeedsNoIterations) {
  RobotModel ur5 = parse_robot_model(ur5_arm_urdf());
  JointVector seed(6);
  seed << 0.3, -1.2, 1.4, -0.9, 1.1, 0.2;
  IkSolution s = solve_ik(ur5, tcp_pose(ur5, seed), "tcp", seed);
  EXPECT_TRUE(s.converged);
  EXPECT_EQ(s.iterations, 0);
  EXPECT_EQ(s.q, seed);
}

TEST(ArmIk, PlanarElbowFamily) {
  RobotModel arm = parse_robot_model(planar_two_link_urdf());
  RigidTransform target = RigidTransform::from_translation({0.5, 0.5, 0});
  IkOptions o = position_only();
  o.tol_pos = 1e-7;
  IkSolution s = solve_ik(arm, target, "tcp", Eigen::Vector2d(0.3, 0.3), o);
  ASSERT_TRUE(s.converged);
  EXPECT_LE((tcp_pose(arm, s.q).translation - target.translation).norm(), 1e-6);
  EXPECT_NEAR(std::abs(s.q[1]), std::numbers::pi / 2, 1e-3);
}

TEST(ArmIk, UnreachableTargetReportsResidual) {
  RobotModel arm = parse_robot_model(planar_two_link_urdf());
  IkOptions o = position_only();
  RigidTransform target = RigidTransform::from_translation({1.1, 0, 0});
  IkSolution s = solve_ik(arm, target, "tcp", Eigen::Vector2d(0.3, 0.3), o);
  EXPECT_FALSE(s.converged);
  EXPECT_GE(s.pos_residual, 0.1 - o.tol_pos);
  EXPECT_NEAR((tcp_pose(arm, s.q).translation - target.translation).norm(), s.pos_residual, 1e-12);
}

TEST(ArmIk, RandomReachableTargets) {
  RobotModel ur5 = parse_robot_model(ur5_arm_urdf());
  std::mt19937_64 rng(99);
  IkOptions o;
  int solved = 0;
  for (int trial = 0; trial < 100; ++trial) {
    JointVector truth = dextac::testing::random_configuration(rng, ur5);
    JointVector seed = ur5.mid_range();
    RigidTransform target = tcp_pose(ur5, truth);
    IkSolution s = solve_ik(ur5, target, "tcp", seed, o);
    if (s.converged) {
      ++solved;
      expect_within_tolerance(ur5, s, target, o);
    }
  }
  EXPECT_GE(solved, 95);
}

TEST(ArmIk, ConstantTargetsGiveConstantJoints) {
  RobotModel ur5 = parse_robot_model(ur5_arm_urdf());
  JointVector q(6);
  q << 0.1, -1.0, 1.2, -1.5, -1.4, 0.4;
  std::vector<RigidTransform> targets(10, tcp_pose(ur5, q));
  JointVector seed = q.array() + 0.1;
  IkTrajectory traj = trajectory_ik(ur5, targets, "tcp", seed);
  EXPECT_TRUE(traj.failed.empty());
  for (std::size_t t = 1; t < traj.q.size(); ++t) EXPECT_EQ(traj.q[t], traj.q[0]);
}

TEST(ArmIk, RampRoundTrip) {
  RobotModel ur5 = parse_robot_model(ur5_arm_urdf());
  JointVector a(6), b(6);
  a << 0.1, -1.2, 1.3, -1.6, -1.5, 0.2;
  b << 0.8, -0.7, 0.9, -1.0, -1.1, 0.9;
  std::vector<JointVector> ramp;
  std::vector<RigidTransform> targets;
  double max_target_step = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double u = k / 99.0;
    ramp.push_back(a + u * (b - a));
    targets.push_back(tcp_pose(ur5, ramp.back()));
    if (k > 0) max_target_step = std::max(max_target_step, (targets[k].translation - targets[k - 1].translation).norm());
  }
  IkOptions o;
  o.tol_pos = 1e-7;
  o.tol_rot = 1e-7;
  IkTrajectory traj = trajectory_ik(ur5, targets, "tcp", a, o);
  EXPECT_TRUE(traj.failed.empty());
  double worst = 0.0;
  for (std::size_t k = 0; k < ramp.size(); ++k) worst = std::max(worst, (traj.q[k] - ramp[k]).cwiseAbs().maxCoeff());
  EXPECT_LE(worst, 1e-4);
  // Shortest UR5 link is the 0.0823 m wrist offset.
  EXPECT_LE(traj.max_joint_step, 10.0 * max_target_step / 0.0823);
}

TEST(ArmIk, UnreachableFrameIsIsolated) {
  RobotModel arm = parse_robot_model(planar_two_link_urdf());
  std::vector<RigidTransform> targets;
  for (int k = 0; k < 9; ++k) {
    const double a = 0.2 + 0.05 * k;
    targets.push_back(RigidTransform::from_translation({0.8 * std::cos(a), 0.8 * std::sin(a), 0}));
  }
  targets[4] = RigidTransform::from_translation({1.5, 0, 0});
  IkTrajectory traj = trajectory_ik(arm, targets, "tcp", Eigen::Vector2d(0.0, 1.0), position_only());
  EXPECT_EQ(traj.failed, std::vector<std::size_t>{4});
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (k == 4) continue;
    EXPECT_TRUE(traj.frames[k].converged);
    EXPECT_LE((tcp_pose(arm, traj.q[k]).translation - targets[k].translation).norm(), 1e-4);
  }
}
