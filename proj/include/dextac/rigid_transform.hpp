#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dextac {

/// Rigid motion stored as a canonical unit quaternion (w >= 0) plus a
/// translation in meters. 4x4 matrices appear only at I/O boundaries.
struct RigidTransform {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  RigidTransform() = default;
  RigidTransform(const Eigen::Quaterniond& q, const Eigen::Vector3d& t);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Eigen::Vector3d& t);
  static RigidTransform from_rotation(const Eigen::Quaterniond& q);
  /// URDF convention: R = Rz(yaw) * Ry(pitch) * Rx(roll).
  static RigidTransform from_xyz_rpy(const Eigen::Vector3d& xyz, const Eigen::Vector3d& rpy);
  /// Rotation block is projected onto SO(3) through the quaternion.
  static RigidTransform from_matrix(const Eigen::Matrix4d& m);

  Eigen::Matrix4d matrix() const;
  Eigen::Matrix3d rotation_matrix() const { return rotation.toRotationMatrix(); }

  RigidTransform operator*(const RigidTransform& rhs) const;
  Eigen::Vector3d operator*(const Eigen::Vector3d& point) const;
  RigidTransform inverse() const;
};

/// Normalizes and flips sign so that w >= 0.
Eigen::Quaterniond canonical(const Eigen::Quaterniond& q);

Eigen::Quaterniond rpy_to_quaternion(const Eigen::Vector3d& rpy);

/// Exponential map: rotation vector (axis * angle) to unit quaternion.
Eigen::Quaterniond rotation_from_vector(const Eigen::Vector3d& v);

/// Log map onto the branch |v| <= pi. At pi (w < 1e-12) the axis sign is chosen
/// so that its first nonzero component is positive.
Eigen::Vector3d rotation_to_vector(const Eigen::Quaterniond& q);

/// Geodesic angle between two rotations, in [0, pi].
double rotation_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

}  // namespace dextac
