#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dextac/kinmodel.hpp"

namespace dextac::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Eigen::Vector3d random_vector(std::mt19937_64& rng, double half_width) {
  return {uniform(rng, -half_width, half_width), uniform(rng, -half_width, half_width),
          uniform(rng, -half_width, half_width)};
}

inline Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  Eigen::Vector3d v;
  do {
    v = random_vector(rng, 1.0);
  } while (v.norm() < 0.1);
  return v.normalized();
}

inline Eigen::Quaterniond random_rotation(std::mt19937_64& rng) {
  Eigen::Quaterniond q(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  return q.normalized();
}

/// Tree of up to `max_links` links and depth <= 6 with mixed joint types,
/// random axes and origins; every link carries a site.
inline RobotModel random_tree(std::mt19937_64& rng, int max_links = 12) {
  const int n = 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_links - 1));
  std::vector<Link> links{{"l0"}};
  std::vector<Joint> joints;
  std::vector<Site> sites{{"s0", "l0", RigidTransform::from_translation(random_vector(rng, 0.1)),
                           SiteKind::kKeypoint, Eigen::Vector3d::UnitX()}};
  std::vector<int> depth{0};
  for (int i = 1; i < n; ++i) {
    int parent;
    do {
      parent = static_cast<int>(rng() % static_cast<std::uint64_t>(i));
    } while (depth[parent] >= 6);
    depth.push_back(depth[parent] + 1);
    links.push_back({"l" + std::to_string(i)});
    Joint j;
    j.name = "j" + std::to_string(i);
    j.parent = "l" + std::to_string(parent);
    j.child = "l" + std::to_string(i);
    const auto kind = rng() % 5;
    j.type = kind == 0 ? JointType::kFixed : kind == 1 ? JointType::kPrismatic : JointType::kRevolute;
    j.axis = random_unit(rng);
    j.origin = RigidTransform(random_rotation(rng), random_vector(rng, 0.3));
    j.lower = j.type == JointType::kPrismatic ? -0.5 : -3.0;
    j.upper = -j.lower;
    joints.push_back(j);
    sites.push_back({"s" + std::to_string(i), j.child, RigidTransform(random_rotation(rng), random_vector(rng, 0.1)),
                     SiteKind::kKeypoint, random_unit(rng)});
  }
  return RobotModel("random", links, joints, sites);
}

inline JointVector random_configuration(std::mt19937_64& rng, const RobotModel& model, double margin = 0.0) {
  const JointVector lo = model.lower_limits();
  const JointVector hi = model.upper_limits();
  JointVector q(model.dof());
  for (Eigen::Index i = 0; i < q.size(); ++i) q[i] = uniform(rng, lo[i] + margin, hi[i] - margin);
  return q;
}

/// Independent forward kinematics: walks each link's path to the base and
/// multiplies homogeneous matrices joint by joint.
inline Eigen::Matrix4d oracle_link_matrix(const RobotModel& model, const JointVector& q, std::size_t link) {
  std::vector<std::size_t> path;
  for (int j = model.parent_joint(link); j >= 0;
       j = model.parent_joint(model.joint_parent_link(static_cast<std::size_t>(j)))) {
    path.push_back(static_cast<std::size_t>(j));
  }
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    const Joint& joint = model.joints()[*it];
    Eigen::Matrix4d origin = Eigen::Matrix4d::Identity();
    origin.topLeftCorner<3, 3>() = joint.origin.rotation.toRotationMatrix();
    origin.topRightCorner<3, 1>() = joint.origin.translation;
    Eigen::Matrix4d motion = Eigen::Matrix4d::Identity();
    const int d = model.joint_dof(*it);
    if (joint.type == JointType::kRevolute) {
      motion.topLeftCorner<3, 3>() = Eigen::AngleAxisd(q[d], joint.axis).toRotationMatrix();
    } else if (joint.type == JointType::kPrismatic) {
      motion.topRightCorner<3, 1>() = joint.axis * q[d];
    }
    m = m * origin * motion;
  }
  return m;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dextac_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dextac::testing
