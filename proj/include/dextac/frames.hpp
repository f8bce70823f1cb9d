#pragma once

#include <Eigen/Core>
#include <span>
#include <string_view>
#include <vector>

#include "dextac/rigid_transform.hpp"

namespace dextac {

/// x -> s R x + t
struct SimilarityTransform {
  double scale = 1.0;
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d operator*(const Eigen::Vector3d& x) const;
  /// (this * rhs)(x) = this(rhs(x))
  SimilarityTransform operator*(const SimilarityTransform& rhs) const;
  SimilarityTransform inverse() const;
  Eigen::Matrix4d matrix() const;
};

struct SimilarityEstimate {
  SimilarityTransform transform;
  double rms = 0.0;  ///< residual RMS over the correspondences, m
};

/// Closed-form least squares fit of target ~ s R source + t (Umeyama, with
/// the reflection fix det(R) = +1). Throws DegenerateInput for fewer than 3
/// points or a collinear source set; the residual is reported, not judged.
SimilarityEstimate estimate_similarity(std::span<const Eigen::Vector3d> source,
                                       std::span<const Eigen::Vector3d> target);

std::vector<Eigen::Vector3d> apply_similarity(const SimilarityTransform& s,
                                              std::span<const Eigen::Vector3d> points);

/// Camera frame -> robot base frame.
struct CameraExtrinsics {
  RigidTransform transform;
};

/// Left-multiplies every pose by the extrinsics.
std::vector<RigidTransform> to_robot_frame(const CameraExtrinsics& extrinsics,
                                           std::span<const RigidTransform> trajectory);

struct PointCorrespondences {
  std::vector<Eigen::Vector3d> source;
  std::vector<Eigen::Vector3d> target;
};

/// {"source": [[x,y,z],...], "target": [[x,y,z],...]}
PointCorrespondences parse_correspondences_json(std::string_view document);

/// 4x4 row-major matrix, nested ([[..],[..],[..],[..]]) or flat (16 numbers).
/// Throws ConfigError when the rotation block is not orthonormal (1e-6).
CameraExtrinsics parse_extrinsics_json(std::string_view document);
std::string extrinsics_to_json(const CameraExtrinsics& extrinsics);

std::string similarity_to_json(const SimilarityEstimate& estimate);

}  // namespace dextac
