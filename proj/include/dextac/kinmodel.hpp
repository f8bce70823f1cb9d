#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dextac/rigid_transform.hpp"

namespace dextac {

/// One entry per non-fixed joint, in model order. rad for revolute, m for prismatic.
using JointVector = Eigen::VectorXd;
using Jacobian = Eigen::Matrix<double, 6, Eigen::Dynamic>;

enum class JointType { kRevolute, kPrismatic, kFixed };
enum class SiteKind { kKeypoint, kTactile, kTcp };

struct Link {
  std::string name;
};

struct Joint {
  std::string name;
  std::string parent;
  std::string child;
  JointType type = JointType::kFixed;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  RigidTransform origin;
  double lower = 0.0;
  double upper = 0.0;
};

/// A named frame rigidly attached to a link: fingertip keypoints, tactile
/// sensor locations, tool center points.
struct Site {
  std::string name;
  std::string parent_link;
  RigidTransform offset;
  SiteKind kind = SiteKind::kKeypoint;
  Eigen::Vector3d local_direction = Eigen::Vector3d::UnitX();
};

/// Articulated kinematic tree. Validated on construction and immutable
/// afterwards, so one instance can be shared by any number of workers.
class RobotModel {
 public:
  /// Throws ModelError when the joints do not form a tree rooted at a
  /// single base link, names collide, an axis is not unit length, or a
  /// limit interval is empty.
  RobotModel(std::string name, std::vector<Link> links, std::vector<Joint> joints,
             std::vector<Site> sites = {}, std::vector<std::string> warnings = {});

  const std::string& name() const { return name_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<Site>& sites() const { return sites_; }
  /// Elements skipped while parsing (meshes, inertia, transmissions, ...).
  const std::vector<std::string>& warnings() const { return warnings_; }

  std::size_t dof() const { return dof_joints_.size(); }
  const std::string& base_link() const { return links_[base_].name; }

  std::optional<std::size_t> link_index(std::string_view name) const;
  std::optional<std::size_t> site_index(std::string_view name) const;
  /// Throws UnknownSite.
  std::size_t require_site(std::string_view name) const;
  const Site& site(std::string_view name) const { return sites_[require_site(name)]; }
  /// Site names of one kind, in declaration order.
  std::vector<std::string> site_names(SiteKind kind) const;

  /// Joint index (into joints()) of the i-th degree of freedom.
  std::size_t dof_joint(std::size_t i) const { return dof_joints_[i]; }
  /// Degree-of-freedom index of joint j, or -1 for fixed joints.
  int joint_dof(std::size_t j) const { return joint_dof_[j]; }
  /// Joints in parent-before-child order.
  const std::vector<std::size_t>& joint_order() const { return joint_order_; }
  /// Joint whose child is link l, or -1 for the base link.
  int parent_joint(std::size_t l) const { return link_parent_joint_[l]; }
  std::size_t joint_parent_link(std::size_t j) const { return joint_parent_link_[j]; }
  std::size_t joint_child_link(std::size_t j) const { return joint_child_link_[j]; }

  JointVector lower_limits() const;
  JointVector upper_limits() const;
  JointVector mid_range() const;

  /// Clamps into the joint limits; `flags`, when given, receives one entry
  /// per degree of freedom marking the clamped ones. Throws DimensionMismatch.
  JointVector clamp(const JointVector& q, std::vector<bool>* flags = nullptr) const;

  /// Copy of this model with extra sites attached (validated).
  RobotModel with_sites(const std::vector<Site>& extra) const;

 private:
  void validate_and_index();

  std::string name_;
  std::vector<Link> links_;
  std::vector<Joint> joints_;
  std::vector<Site> sites_;
  std::vector<std::string> warnings_;

  std::size_t base_ = 0;
  std::vector<std::size_t> dof_joints_;
  std::vector<int> joint_dof_;
  std::vector<std::size_t> joint_order_;
  std::vector<int> link_parent_joint_;
  std::vector<std::size_t> joint_parent_link_;
  std::vector<std::size_t> joint_child_link_;
  std::vector<std::size_t> site_link_;
};

/// Parses the URDF structural subset: robot, link, joint (origin, parent,
/// child, axis, limit) and the `site` extension tag, optionally namespace
/// prefixed (`<dex:site name=".." parent=".." xyz=".." rpy=".." kind=".." dir=".."/>`).
/// Throws SyntaxError for malformed XML or numbers, ModelError for invalid
/// structure.
RobotModel parse_robot_model(std::string_view document);

/// Reads a sidecar site file: a JSON array of records with the fields of the
/// `site` tag. Vectors may be JSON arrays or space separated strings.
std::vector<Site> parse_sites_json(std::string_view document);

RobotModel load_robot_model(const std::string& path);

std::string_view to_string(SiteKind kind);
SiteKind site_kind_from_string(std::string_view s);

// ---------------------------------------------------------------------------
// Kinematics

struct FkResult {
  /// World pose per link, indexed like RobotModel::links(). Base is identity.
  std::vector<RigidTransform> link_poses;
  /// Per degree of freedom: whether the input value was clamped.
  std::vector<bool> clamped;
  /// The joint vector actually used (after clamping).
  JointVector q;

  bool any_clamped() const;
};

/// Throws DimensionMismatch when q has the wrong length.
FkResult forward_kinematics(const RobotModel& model, const JointVector& q);

/// World pose of a site given precomputed link poses.
RigidTransform site_pose(const RobotModel& model, const FkResult& fk, std::size_t site);

/// World unit direction of a site: its rotation applied to local_direction.
Eigen::Vector3d site_direction(const RobotModel& model, const RigidTransform& site_world,
                               std::size_t site);

/// Throws UnknownSite naming the first unknown entry.
std::vector<RigidTransform> site_poses(const RobotModel& model, const JointVector& q,
                                       std::span<const std::string> site_names);

/// Rows 0-2 linear velocity and rows 3-5 angular velocity of the site, per
/// unit joint rate, in the world frame.
Jacobian site_jacobian(const RobotModel& model, const FkResult& fk, std::size_t site);
Jacobian site_jacobian(const RobotModel& model, const JointVector& q, std::string_view site_name);

}  // namespace dextac
