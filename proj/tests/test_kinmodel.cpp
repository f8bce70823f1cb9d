#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dextac/errors.hpp"
#include "dextac/evalsuite.hpp"
#include "dextac/kinmodel.hpp"
#include "dextac/rigid_transform.hpp"
#include "support.hpp"

using namespace dextac;
using dextac::testing::oracle_link_matrix;
using dextac::testing::random_configuration;
using dextac::testing::random_tree;

constexpr double kPi = std::numbers::pi;

TEST(RigidTransform, LogExpRoundTrip) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector3d v = dextac::testing::random_unit(rng) * dextac::testing::uniform(rng, 0.0, kPi - 1e-6);
    EXPECT_LE((rotation_to_vector(rotation_from_vector(v)) - v).norm(), 1e-12);
  }
}

TEST(RigidTransform, LogMapClosedForms) {
  EXPECT_LE(rotation_to_vector(Eigen::Quaterniond::Identity()).norm(), 0.0);
  Eigen::Quaterniond z90(Eigen::AngleAxisd(kPi / 2, Eigen::Vector3d::UnitZ()));
  EXPECT_LE((rotation_to_vector(z90) - Eigen::Vector3d(0, 0, kPi / 2)).norm(), 1e-12);
  Eigen::Quaterniond x180(Eigen::AngleAxisd(kPi, Eigen::Vector3d::UnitX()));
  EXPECT_LE((rotation_to_vector(x180) - Eigen::Vector3d(kPi, 0, 0)).norm(), 1e-12);
  Eigen::Quaterniond xneg180(Eigen::AngleAxisd(kPi, -Eigen::Vector3d::UnitX()));
  EXPECT_LE((rotation_to_vector(xneg180) - Eigen::Vector3d(kPi, 0, 0)).norm(), 1e-12);
}

TEST(RigidTransform, CanonicalQuaternionAndInverse) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    RigidTransform t(dextac::testing::random_rotation(rng), dextac::testing::random_vector(rng, 2.0));
    EXPECT_GE(t.rotation.w(), 0.0);
    RigidTransform id = t * t.inverse();
    EXPECT_LE(id.translation.norm(), 1e-12);
    EXPECT_LE(rotation_distance(id.rotation, Eigen::Quaterniond::Identity()), 1e-7);
    EXPECT_LE((RigidTransform::from_matrix(t.matrix()).matrix() - t.matrix()).norm(), 1e-12);
  }
}

TEST(KinModel, BaseOnlyModelHasNoJoints) {
  RobotModel m = parse_robot_model("<robot name=\"b\"><link name=\"base\"/></robot>");
  EXPECT_EQ(m.dof(), 0u);
  FkResult fk = forward_kinematics(m, JointVector(0));
  ASSERT_EQ(fk.link_poses.size(), 1u);
  EXPECT_EQ(fk.link_poses[0].matrix(), Eigen::Matrix4d::Identity());
}

TEST(KinModel, PlanarArmFieldByField) {
  RobotModel m = parse_robot_model(planar_two_link_urdf());
  ASSERT_EQ(m.dof(), 2u);
  EXPECT_EQ(m.joints()[m.dof_joint(0)].name, "j1");
  EXPECT_EQ(m.joints()[m.dof_joint(1)].name, "j2");
  EXPECT_EQ(m.joints()[m.dof_joint(1)].origin.translation, Eigen::Vector3d(0.5, 0, 0));
  EXPECT_EQ(m.joints()[m.dof_joint(0)].axis, Eigen::Vector3d::UnitZ());
  EXPECT_DOUBLE_EQ(m.lower_limits()[0], -kPi);
  EXPECT_DOUBLE_EQ(m.upper_limits()[1], kPi);
  EXPECT_EQ(m.base_link(), "base");
}

TEST(KinModel, PlanarArmForwardKinematics) {
  RobotModel m = parse_robot_model(planar_two_link_urdf());
  FkResult fk = forward_kinematics(m, Eigen::Vector2d(kPi / 2, 0));
  EXPECT_LE((fk.link_poses[*m.link_index("link2")].translation - Eigen::Vector3d(0, 0.5, 0)).norm(), 1e-12);
  EXPECT_LE((fk.link_poses[*m.link_index("tip")].translation - Eigen::Vector3d(0, 1.0, 0)).norm(), 1e-12);
  std::vector<std::string> names{"fingertip"};
  auto poses = site_poses(m, Eigen::Vector2d(kPi / 2, 0), names);
  EXPECT_LE((poses[0].translation - Eigen::Vector3d(0, 1.02, 0)).norm(), 1e-12);
}

TEST(KinModel, PrismaticJointTranslatesChild) {
  RobotModel m = parse_robot_model(
      "<robot name=\"p\"><link name=\"a\"/><link name=\"b\"/>"
      "<joint name=\"s\" type=\"prismatic\"><parent link=\"a\"/><child link=\"b\"/>"
      "<axis xyz=\"0 0 1\"/><limit lower=\"0\" upper=\"1\"/></joint></robot>");
  FkResult fk = forward_kinematics(m, JointVector::Constant(1, 0.2));
  EXPECT_LE((fk.link_poses[1].translation - Eigen::Vector3d(0, 0, 0.2)).norm(), 1e-15);
}

TEST(KinModel, CycleIsRejected) {
  const char* doc =
      "<robot name=\"c\"><link name=\"a\"/><link name=\"b\"/><link name=\"c\"/>"
      "<joint name=\"ab\" type=\"fixed\"><parent link=\"a\"/><child link=\"b\"/></joint>"
      "<joint name=\"bc\" type=\"fixed\"><parent link=\"b\"/><child link=\"c\"/></joint>"
      "<joint name=\"cb\" type=\"fixed\"><parent link=\"c\"/><child link=\"b\"/></joint></robot>";
  EXPECT_THROW(parse_robot_model(doc), ModelError);
}

TEST(KinModel, StructuralErrors) {
  EXPECT_THROW(parse_robot_model("<robot><link name=\"a\"/>"), SyntaxError);
  EXPECT_THROW(parse_robot_model("<robot><link name=\"a\"/><link name=\"a\"/></robot>"), ModelError);
  EXPECT_THROW(parse_robot_model("<robot><link name=\"a\"/><link name=\"b\"/>"
                                 "<joint name=\"j\" type=\"revolute\"><parent link=\"a\"/><child link=\"b\"/>"
                                 "<axis xyz=\"0 0 2\"/><limit lower=\"0\" upper=\"1\"/></joint></robot>"),
               ModelError);
  EXPECT_THROW(parse_robot_model("<robot><link name=\"a\"/><link name=\"b\"/>"
                                 "<joint name=\"j\" type=\"revolute\"><parent link=\"a\"/><child link=\"b\"/>"
                                 "<axis xyz=\"0 0 1\"/></joint></robot>"),
               ModelError);
}

TEST(KinModel, UnsupportedElementsBecomeWarnings) {
  RobotModel m = parse_robot_model(
      "<robot name=\"w\"><link name=\"a\"><visual><geometry/></visual><inertial/></link>"
      "<transmission name=\"t\"/></robot>");
  EXPECT_EQ(m.warnings().size(), 3u);
}

TEST(KinModel, UnknownSiteNamesOffender) {
  RobotModel m = parse_robot_model(planar_two_link_urdf());
  std::vector<std::string> names{"tcp", "fingretip", "fingertip"};
  try {
    site_poses(m, Eigen::Vector2d::Zero(), names);
    FAIL() << "expected UnknownSite";
  } catch (const UnknownSite& e) {
    EXPECT_NE(std::string(e.what()).find("fingretip"), std::string::npos);
  }
}

TEST(KinModel, ZeroConfigurationIsProductOfOrigins) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    RobotModel m = random_tree(rng);
    JointVector q = JointVector::Zero(static_cast<Eigen::Index>(m.dof()));
    FkResult fk = forward_kinematics(m, q);
    for (std::size_t l = 0; l < m.links().size(); ++l) {
      Eigen::Matrix4d expected = Eigen::Matrix4d::Identity();
      for (int j = m.parent_joint(l); j >= 0; j = m.parent_joint(m.joint_parent_link(j))) {
        expected = m.joints()[j].origin.matrix() * expected;
      }
      EXPECT_LE((fk.link_poses[l].matrix() - expected).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(KinModel, MatchesMatrixChainOracleOnRandomTrees) {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    RobotModel m = random_tree(rng);
    JointVector q = random_configuration(rng, m);
    FkResult fk = forward_kinematics(m, q);
    for (std::size_t l = 0; l < m.links().size(); ++l) {
      worst = std::max(worst, (fk.link_poses[l].matrix() - oracle_link_matrix(m, q, l)).cwiseAbs().maxCoeff());
    }
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(KinModel, RotationBlocksOrthonormal) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    RobotModel m = random_tree(rng);
    FkResult fk = forward_kinematics(m, random_configuration(rng, m));
    for (const auto& pose : fk.link_poses) {
      Eigen::Matrix3d r = pose.rotation_matrix();
      EXPECT_LE((r.transpose() * r - Eigen::Matrix3d::Identity()).norm(), 1e-10);
      EXPECT_NEAR(r.determinant(), 1.0, 1e-10);
    }
  }
}

TEST(KinModel, OutOfLimitValuesAreClampedAndFlagged) {
  RobotModel m = parse_robot_model(synthetic_hand_urdf());
  JointVector q = m.upper_limits().array() + 0.5;
  FkResult fk = forward_kinematics(m, q);
  EXPECT_TRUE(fk.any_clamped());
  EXPECT_EQ(fk.q, m.upper_limits());
  JointVector once = m.clamp(q);
  FkResult a = forward_kinematics(m, once);
  FkResult b = forward_kinematics(m, m.clamp(once));
  for (std::size_t l = 0; l < a.link_poses.size(); ++l) {
    EXPECT_EQ(a.link_poses[l].matrix(), b.link_poses[l].matrix());
  }
  EXPECT_FALSE(a.any_clamped());
}

TEST(KinModel, DimensionMismatch) {
  RobotModel m = parse_robot_model(planar_two_link_urdf());
  EXPECT_THROW(forward_kinematics(m, JointVector::Zero(3)), DimensionMismatch);
}

TEST(KinModel, BaseSiteHasIdentityPoseAndZeroJacobian) {
  RobotModel m = parse_robot_model(planar_two_link_urdf())
                     .with_sites({{"origin", "base", RigidTransform::identity(), SiteKind::kKeypoint,
                                   Eigen::Vector3d::UnitX()}});
  std::vector<std::string> names{"origin"};
  EXPECT_EQ(site_poses(m, Eigen::Vector2d(0.3, -1.0), names)[0].matrix(), Eigen::Matrix4d::Identity());
  EXPECT_EQ(site_jacobian(m, Eigen::Vector2d(0.3, -1.0), "origin"), Jacobian::Zero(6, 2));
}

TEST(KinModel, SingleJointJacobianIsScrewFormula) {
  RobotModel m = parse_robot_model(
      "<robot name=\"one\"><link name=\"a\"/><link name=\"b\"/>"
      "<joint name=\"j\" type=\"revolute\"><parent link=\"a\"/><child link=\"b\"/>"
      "<axis xyz=\"0 0 1\"/><limit lower=\"-1\" upper=\"1\"/></joint>"
      "<site name=\"tip\" parent=\"b\" xyz=\"0.5 0 0\"/></robot>");
  Jacobian j = site_jacobian(m, JointVector::Zero(1), "tip");
  EXPECT_LE((j.col(0).head<3>() - Eigen::Vector3d(0, 0.5, 0)).norm(), 1e-15);
  EXPECT_LE((j.col(0).tail<3>() - Eigen::Vector3d(0, 0, 1)).norm(), 1e-15);
}

TEST(KinModel, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  constexpr double h = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    RobotModel m = random_tree(rng);
    if (m.dof() == 0) continue;
    JointVector q = random_configuration(rng, m, 0.01);
    FkResult fk = forward_kinematics(m, q);
    for (std::size_t s = 0; s < m.sites().size(); ++s) {
      Jacobian j = site_jacobian(m, fk, s);
      for (std::size_t d = 0; d < m.dof(); ++d) {
        JointVector qp = q, qm = q;
        qp[d] += h;
        qm[d] -= h;
        RigidTransform pp = site_pose(m, forward_kinematics(m, qp), s);
        RigidTransform pm = site_pose(m, forward_kinematics(m, qm), s);
        Eigen::Vector3d v = (pp.translation - pm.translation) / (2 * h);
        Eigen::Vector3d w = rotation_to_vector(pp.rotation * pm.rotation.inverse()) / (2 * h);
        EXPECT_LE((j.col(d).head<3>() - v).cwiseAbs().maxCoeff(), 1e-5);
        EXPECT_LE((j.col(d).tail<3>() - w).cwiseAbs().maxCoeff(), 1e-5);
      }
    }
  }
}

TEST(KinModel, SiteSidecarJson) {
  auto sites = parse_sites_json(
      R"([{"name": "k", "parent": "tip", "xyz": [0.01, 0, 0], "kind": "tactile", "dir": "0 0 1"}])");
  ASSERT_EQ(sites.size(), 1u);
  EXPECT_EQ(sites[0].kind, SiteKind::kTactile);
  EXPECT_EQ(sites[0].local_direction, Eigen::Vector3d::UnitZ());
  RobotModel m = parse_robot_model(planar_two_link_urdf()).with_sites(sites);
  EXPECT_EQ(m.site_names(SiteKind::kTactile), std::vector<std::string>{"k"});
}

TEST(KinModel, SyntheticHandFixture) {
  RobotModel m = parse_robot_model(synthetic_hand_urdf());
  EXPECT_EQ(m.dof(), 16u);
  EXPECT_EQ(m.site_names(SiteKind::kTactile).size(), 32u);
  EXPECT_EQ(m.site_names(SiteKind::kKeypoint).size(), 5u);
}
