#include "dextac/frames.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <json.hpp>

#include "dextac/errors.hpp"

namespace dextac {

Eigen::Vector3d SimilarityTransform::operator*(const Eigen::Vector3d& x) const {
  return scale * (rotation * x) + translation;
}

SimilarityTransform SimilarityTransform::operator*(const SimilarityTransform& rhs) const {
  SimilarityTransform out;
  out.scale = scale * rhs.scale;
  out.rotation = canonical(rotation * rhs.rotation);
  out.translation = scale * (rotation * rhs.translation) + translation;
  return out;
}

SimilarityTransform SimilarityTransform::inverse() const {
  SimilarityTransform out;
  out.scale = 1.0 / scale;
  out.rotation = canonical(rotation.conjugate());
  out.translation = -(out.scale * (out.rotation * translation));
  return out;
}

Eigen::Matrix4d SimilarityTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = scale * rotation.toRotationMatrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

SimilarityEstimate estimate_similarity(std::span<const Eigen::Vector3d> source,
                                       std::span<const Eigen::Vector3d> target) {
  if (source.size() != target.size()) {
    throw DimensionMismatch("source and target point sets differ in size");
  }
  const std::size_t n = source.size();
  if (n < 3) throw DegenerateInput("similarity needs at least 3 correspondences, got " + std::to_string(n));

  Eigen::Vector3d mu_x = Eigen::Vector3d::Zero();
  Eigen::Vector3d mu_y = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mu_x += source[i];
    mu_y += target[i];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  mu_x *= inv_n;
  mu_y *= inv_n;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d scatter_x = Eigen::Matrix3d::Zero();
  double var_x = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d dx = source[i] - mu_x;
    const Eigen::Vector3d dy = target[i] - mu_y;
    cov += dy * dx.transpose();
    scatter_x += dx * dx.transpose();
    var_x += dx.squaredNorm();
  }
  cov *= inv_n;
  var_x *= inv_n;

  // A collinear source leaves rotation about the line undetermined.
  const Eigen::Vector3d spread = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(scatter_x).eigenvalues();
  if (!(spread[2] > 0.0) || spread[1] <= 1e-12 * spread[2]) {
    throw DegenerateInput("source points are collinear or coincident");
  }

  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  Eigen::Vector3d s_diag(1.0, 1.0, 1.0);
  if (u.determinant() * v.determinant() < 0.0) s_diag[2] = -1.0;
  const Eigen::Matrix3d r = u * s_diag.asDiagonal() * v.transpose();

  SimilarityEstimate est;
  est.transform.scale = svd.singularValues().dot(s_diag) / var_x;
  est.transform.rotation = canonical(Eigen::Quaterniond(r));
  est.transform.translation = mu_y - est.transform.scale * (r * mu_x);

  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) sq += (est.transform * source[i] - target[i]).squaredNorm();
  est.rms = std::sqrt(sq * inv_n);
  return est;
}

std::vector<Eigen::Vector3d> apply_similarity(const SimilarityTransform& s,
                                              std::span<const Eigen::Vector3d> points) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(s * p);
  return out;
}

std::vector<RigidTransform> to_robot_frame(const CameraExtrinsics& extrinsics,
                                           std::span<const RigidTransform> trajectory) {
  std::vector<RigidTransform> out;
  out.reserve(trajectory.size());
  for (const auto& p : trajectory) out.push_back(extrinsics.transform * p);
  return out;
}

namespace {

nlohmann::json parse_json(std::string_view document, const char* what) {
  try {
    return nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw SyntaxError(std::string("malformed ") + what + ": " + e.what());
  }
}

std::vector<Eigen::Vector3d> read_points(const nlohmann::json& arr, const char* key) {
  if (!arr.is_array()) throw SyntaxError(std::string("'") + key + "' must be an array of [x,y,z]");
  std::vector<Eigen::Vector3d> pts;
  for (const auto& p : arr) {
    if (!p.is_array() || p.size() != 3) throw SyntaxError(std::string("'") + key + "' entries must be [x,y,z]");
    pts.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
  }
  return pts;
}

}  // namespace

PointCorrespondences parse_correspondences_json(std::string_view document) {
  const auto doc = parse_json(document, "point correspondences");
  if (!doc.is_object() || !doc.contains("source") || !doc.contains("target")) {
    throw SyntaxError("point correspondences need 'source' and 'target'");
  }
  return {read_points(doc["source"], "source"), read_points(doc["target"], "target")};
}

CameraExtrinsics parse_extrinsics_json(std::string_view document) {
  auto doc = parse_json(document, "extrinsics");
  if (doc.is_object() && doc.contains("matrix")) doc = doc["matrix"];
  std::vector<double> flat;
  if (doc.is_array() && doc.size() == 4 && doc[0].is_array()) {
    for (const auto& row : doc) {
      if (!row.is_array() || row.size() != 4) throw SyntaxError("extrinsics rows must hold 4 numbers");
      for (const auto& v : row) flat.push_back(v.get<double>());
    }
  } else if (doc.is_array() && doc.size() == 16) {
    for (const auto& v : doc) flat.push_back(v.get<double>());
  } else {
    throw SyntaxError("extrinsics must be a 4x4 row-major array");
  }
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) m(r, c) = flat[static_cast<std::size_t>(r * 4 + c)];
  }
  const Eigen::Matrix3d rot = m.topLeftCorner<3, 3>();
  if ((rot.transpose() * rot - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
      rot.determinant() < 0.0) {
    throw ConfigError("extrinsics rotation block is not a proper rotation");
  }
  if (m.row(3).transpose() != Eigen::Vector4d(0, 0, 0, 1)) throw ConfigError("extrinsics last row must be 0 0 0 1");
  return {RigidTransform::from_matrix(m)};
}

std::string extrinsics_to_json(const CameraExtrinsics& extrinsics) {
  const Eigen::Matrix4d m = extrinsics.transform.matrix();
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return rows.dump();
}

std::string similarity_to_json(const SimilarityEstimate& estimate) {
  const auto& s = estimate.transform;
  nlohmann::json doc;
  doc["scale"] = s.scale;
  doc["rotation_wxyz"] = {s.rotation.w(), s.rotation.x(), s.rotation.y(), s.rotation.z()};
  doc["translation"] = {s.translation.x(), s.translation.y(), s.translation.z()};
  doc["rms"] = estimate.rms;
  const Eigen::Matrix4d m = s.matrix();
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  doc["matrix"] = rows;
  return doc.dump(2);
}

}  // namespace dextac
