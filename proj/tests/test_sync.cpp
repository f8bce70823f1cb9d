#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dextac/datastore.hpp"
#include "dextac/errors.hpp"
#include "dextac/sync.hpp"

using namespace dextac;

namespace {

std::vector<double> uniform_times(std::size_t n, double rate, double t0 = 0.0) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = t0 + static_cast<double>(i) / rate;
  return t;
}

TimedStream scalar_stream(const std::string& name, const std::vector<double>& t, const std::vector<double>& v) {
  std::vector<Eigen::VectorXd> rows;
  for (double x : v) rows.push_back(Eigen::VectorXd::Constant(1, x));
  return make_vector_stream(name, StreamKind::kScalar, t, rows);
}

Eigen::Quaterniond about_z(double angle) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ()));
}

}  // namespace

TEST(Sync, NativeRateResamplingIsIdentity) {
  const auto t = uniform_times(31, 30.0);
  std::vector<Eigen::VectorXd> rows;
  std::vector<RigidTransform> poses;
  for (std::size_t i = 0; i < t.size(); ++i) {
    rows.push_back(Eigen::Vector3d(std::sin(t[i]), std::cos(3 * t[i]), t[i] * t[i]));
    poses.emplace_back(about_z(0.3 * t[i]), Eigen::Vector3d(t[i], 0.5, -t[i]));
  }
  std::vector<TimedStream> in{make_vector_stream("j", StreamKind::kJoint, t, rows), make_pose_stream("p", t, poses)};
  auto out = resample_streams(in, 30.0);
  ASSERT_EQ(out.size(), 2u);
  for (std::size_t s = 0; s < 2; ++s) {
    EXPECT_EQ(out[s].timestamps, in[s].timestamps);
    EXPECT_EQ(out[s].samples, in[s].samples);
  }
}

TEST(Sync, ScalarLinearMidpoint) {
  std::vector<TimedStream> in{scalar_stream("s", {0.0, 1.0}, {0.0, 1.0})};
  auto out = resample_streams(in, 2.0);
  ASSERT_EQ(out[0].length(), 3u);
  EXPECT_EQ(out[0].timestamps[1], 0.5);
  EXPECT_EQ(out[0].samples(1, 0), 0.5);
}

TEST(Sync, PoseSlerpMidpoint) {
  std::vector<RigidTransform> poses{RigidTransform::identity(),
                                    RigidTransform(about_z(std::numbers::pi / 2), Eigen::Vector3d(1, 2, 3))};
  std::vector<TimedStream> in{make_pose_stream("p", {0.0, 1.0}, poses)};
  auto mid = pose_rows(resample_streams(in, 2.0)[0])[1];
  EXPECT_NEAR(rotation_distance(mid.rotation, Eigen::Quaterniond::Identity()), std::numbers::pi / 4, 1e-9);
  EXPECT_NEAR(rotation_distance(mid.rotation, about_z(std::numbers::pi / 4)), 0.0, 1e-9);
  EXPECT_LE((mid.translation - Eigen::Vector3d(0.5, 1, 1.5)).norm(), 1e-15);
}

TEST(Sync, InterpolatePoseEndpointsAndNorm) {
  RigidTransform a(Eigen::Quaterniond(0.2, 0.3, -0.5, 0.7).normalized(), Eigen::Vector3d(1, 2, 3));
  RigidTransform b(Eigen::Quaterniond(-0.1, 0.9, 0.2, 0.1).normalized(), Eigen::Vector3d(-1, 0, 4));
  EXPECT_EQ(interpolate_pose(a, b, 0.0).matrix(), a.matrix());
  EXPECT_EQ(interpolate_pose(a, b, 0.0).rotation.coeffs(), canonical(a.rotation).coeffs());
  EXPECT_EQ(interpolate_pose(a, b, 1.0).rotation.coeffs(), canonical(b.rotation).coeffs());
  EXPECT_EQ(interpolate_pose(a, b, 1.0).translation, b.translation);
  for (int i = 0; i <= 100; ++i) {
    EXPECT_NEAR(interpolate_pose(a, b, i / 100.0).rotation.norm(), 1.0, 1e-12);
  }
}

TEST(Sync, AntipodalQuaternionsInterpolateAsIdentityPath) {
  Eigen::Quaterniond q = about_z(0.7);
  Eigen::Quaterniond neg(-q.w(), -q.x(), -q.y(), -q.z());
  RigidTransform a(q, Eigen::Vector3d::Zero());
  RigidTransform b;
  b.rotation = neg;
  for (int i = 0; i <= 10; ++i) {
    EXPECT_LE(rotation_distance(interpolate_pose(a, b, i / 10.0).rotation, q), 1e-7);
  }
}

TEST(Sync, UniformTimelineAndCommonWindow) {
  std::vector<TimedStream> in{scalar_stream("a", uniform_times(200, 120.0, 0.013), std::vector<double>(200, 1.0)),
                              scalar_stream("b", uniform_times(50, 30.0, 0.2), std::vector<double>(50, 2.0))};
  auto t = common_timeline(in, 30.0);
  EXPECT_EQ(t.front(), 0.2);
  EXPECT_LE(t.back(), std::min(in[0].timestamps.back(), in[1].timestamps.back()));
  for (std::size_t k = 1; k < t.size(); ++k) EXPECT_LE(std::abs(t[k] - t[k - 1] - 1.0 / 30.0), 1e-12);
  auto out = resample_streams(in, 30.0);
  EXPECT_EQ(out[0].timestamps, out[1].timestamps);
}

TEST(Sync, TactileIsClampedAfterInterpolation) {
  std::vector<Eigen::VectorXd> rows{Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(1.0, 1.0)};
  TimedStream s = make_vector_stream("g", StreamKind::kTactile, {0.0, 1.0}, rows);
  s.samples(1, 1) = 1.5;
  auto out = resample_streams({s}, 4.0);
  for (Eigen::Index r = 0; r < out[0].samples.rows(); ++r) {
    EXPECT_LE(out[0].samples.row(r).maxCoeff(), 1.0);
    EXPECT_GE(out[0].samples.row(r).minCoeff(), 0.0);
  }
  EXPECT_EQ(out[0].samples(2, 0), 0.5);
}

TEST(Sync, Errors) {
  std::vector<TimedStream> disjoint{scalar_stream("a", {0.0, 1.0}, {0, 1}), scalar_stream("b", {2.0, 3.0}, {0, 1})};
  EXPECT_THROW(resample_streams(disjoint, 30.0), EmptyOverlap);
  std::vector<TimedStream> short_window{scalar_stream("a", {0.0, 0.05}, {0, 1})};
  EXPECT_THROW(resample_streams(short_window, 30.0), EmptyOverlap);
  std::vector<TimedStream> backwards{scalar_stream("a", {0.0, 1.0, 0.5}, {0, 1, 2})};
  EXPECT_THROW(resample_streams(backwards, 30.0), NonMonotonicTimestamps);
  std::vector<TimedStream> repeated{scalar_stream("a", {0.0, 1.0, 1.0}, {0, 1, 2})};
  EXPECT_THROW(resample_streams(repeated, 30.0), NonMonotonicTimestamps);
}

TEST(Sync, ImageStreamsTakeNearestFrame) {
  TimedStream cam;
  cam.name = "cam0";
  cam.kind = StreamKind::kImage;
  cam.timestamps = {0.0, 0.1, 0.2, 0.3};
  cam.frame_pattern = "cam0/{index}.ppm";
  std::vector<TimedStream> in{cam, scalar_stream("s", {0.0, 0.3}, {0, 1})};
  auto out = resample_streams(in, 20.0);
  ASSERT_EQ(out[0].length(), 7u);
  EXPECT_EQ(image_frame_ref(cam.frame_pattern, 3), "cam0/000003.ppm");
}

TEST(Sync, ResampleAssemblesDemonstration) {
  const auto t = uniform_times(61, 60.0);
  std::vector<Eigen::VectorXd> joints(t.size(), Eigen::Vector2d(0.1, 0.2));
  std::vector<Eigen::VectorXd> forces(t.size(), Eigen::Vector3d(0.0, 0.5, 1.0));
  std::vector<RigidTransform> poses(t.size(), RigidTransform::from_translation({1, 2, 3}));
  std::vector<TimedStream> in{make_vector_stream("j_glove", StreamKind::kJoint, t, joints),
                              make_pose_stream("p_glove", t, poses), make_pose_stream("p_object", t, poses),
                              make_vector_stream("gamma_glove", StreamKind::kTactile, t, forces),
                              scalar_stream("grasp_phase", t, std::vector<double>(t.size(), 2.0))};
  Demonstration demo = resample(in, 30.0);
  EXPECT_EQ(demo.length(), 31u);
  EXPECT_EQ(demo.j_glove.size(), 31u);
  EXPECT_EQ(demo.gamma_glove[5].values, Eigen::Vector3d(0.0, 0.5, 1.0));
  EXPECT_EQ(demo.scalars.at("grasp_phase").size(), 31u);
  EXPECT_NO_THROW(demo.validate());
  in.erase(in.begin());
  EXPECT_THROW(resample(in, 30.0), ManifestError);
}
