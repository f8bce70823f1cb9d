#include "dextac/rigid_transform.hpp"

#include <cmath>

namespace dextac {

Eigen::Quaterniond canonical(const Eigen::Quaterniond& q) {
  Eigen::Quaterniond out = q.normalized();
  if (out.w() < 0.0) out.coeffs() = -out.coeffs();
  return out;
}

RigidTransform::RigidTransform(const Eigen::Quaterniond& q, const Eigen::Vector3d& t)
    : rotation(canonical(q)), translation(t) {}

RigidTransform RigidTransform::from_translation(const Eigen::Vector3d& t) {
  return {Eigen::Quaterniond::Identity(), t};
}

RigidTransform RigidTransform::from_rotation(const Eigen::Quaterniond& q) {
  return {q, Eigen::Vector3d::Zero()};
}

Eigen::Quaterniond rpy_to_quaternion(const Eigen::Vector3d& rpy) {
  const Eigen::Quaterniond q = Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) *
                               Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
                               Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX());
  return canonical(q);
}

RigidTransform RigidTransform::from_xyz_rpy(const Eigen::Vector3d& xyz, const Eigen::Vector3d& rpy) {
  return {rpy_to_quaternion(rpy), xyz};
}

RigidTransform RigidTransform::from_matrix(const Eigen::Matrix4d& m) {
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  return {Eigen::Quaterniond(r), m.topRightCorner<3, 1>()};
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation.toRotationMatrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  return {rotation * rhs.rotation, rotation * rhs.translation + translation};
}

Eigen::Vector3d RigidTransform::operator*(const Eigen::Vector3d& point) const {
  return rotation * point + translation;
}

RigidTransform RigidTransform::inverse() const {
  const Eigen::Quaterniond inv = rotation.conjugate();
  return {inv, -(inv * translation)};
}

Eigen::Quaterniond rotation_from_vector(const Eigen::Vector3d& v) {
  const double angle = v.norm();
  const double half = 0.5 * angle;
  // sin(half)/angle, with its Taylor series near zero.
  const double k = angle < 1e-8 ? 0.5 - angle * angle / 48.0 : std::sin(half) / angle;
  Eigen::Quaterniond q(std::cos(half), k * v.x(), k * v.y(), k * v.z());
  return canonical(q);
}

Eigen::Vector3d rotation_to_vector(const Eigen::Quaterniond& q_in) {
  const Eigen::Quaterniond q = canonical(q_in);
  const Eigen::Vector3d v = q.vec();
  const double vn = v.norm();
  if (vn < 1e-300) return Eigen::Vector3d::Zero();
  const double angle = 2.0 * std::atan2(vn, q.w());
  Eigen::Vector3d axis = v / vn;
  if (q.w() < 1e-12) {
    for (int i = 0; i < 3; ++i) {
      if (axis[i] != 0.0) {
        if (axis[i] < 0.0) axis = -axis;
        break;
      }
    }
  }
  // Small angles: 2*atan2(vn, w)/vn -> 2/w, evaluated via the product to keep precision.
  if (vn < 1e-8) return v * (2.0 / q.w());
  return axis * angle;
}

double rotation_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  const Eigen::Quaterniond d = canonical(a.conjugate() * b);
  return 2.0 * std::atan2(d.vec().norm(), d.w());
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

}  // namespace dextac
