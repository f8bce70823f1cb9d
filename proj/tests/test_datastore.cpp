#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <json.hpp>
#include <numbers>
#include <map>
#include <random>
#include <set>

#include "dextac/datastore.hpp"
#include "dextac/errors.hpp"
#include "dextac/evalsuite.hpp"
#include "support.hpp"

using namespace dextac;
namespace fs = std::filesystem;

namespace {

RawBundle minimal_bundle() {
  RawBundle b;
  b.metadata = {"pour", "op7", ""};
  std::vector<Eigen::VectorXd> rows{Eigen::Vector2d(0.1, -2.5), Eigen::Vector2d(1.0 / 3.0, 1e-300)};
  b.streams.push_back(make_vector_stream("j_glove", StreamKind::kJoint, {0.0, 0.5}, rows));
  b.streams.back().rate = 2.0;
  return b;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

std::map<std::string, std::string> directory_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  }
  return out;
}

struct Packaged {
  RetargetResult result;
  Demonstration demo;
  std::vector<RigidTransform> tcp;
  std::vector<JointVector> arm;
};

Packaged small_result(std::size_t frames) {
  std::mt19937_64 rng(6);
  Packaged p;
  for (std::size_t t = 0; t < frames; ++t) {
    p.demo.timestamps.push_back(static_cast<double>(t) / 30.0);
    JointVector q(4);
    for (auto& v : q) v = dextac::testing::uniform(rng, -1, 1);
    p.result.j_dex.push_back(q);
    p.result.p_dex.push_back(RigidTransform::identity());
    Eigen::VectorXd g(3);
    for (auto& v : g) v = dextac::testing::uniform(rng, 0, 1);
    p.result.gamma_dex.push_back({g, p.demo.timestamps.back()});
    p.result.diagnostics.emplace_back();
    p.tcp.emplace_back(dextac::testing::random_rotation(rng), dextac::testing::random_vector(rng, 1.0));
    JointVector arm(6);
    for (auto& v : arm) v = dextac::testing::uniform(rng, -3, 3);
    p.arm.push_back(arm);
  }
  CameraStream cam{"cam0", {}};
  for (std::size_t t = 0; t < frames; ++t) cam.frames.push_back(image_frame_ref("cam0/{index}.ppm", t));
  p.demo.images.push_back(cam);
  return p;
}

}  // namespace

TEST(Datastore, MinimalBundleRoundTrip) {
  const fs::path dir = dextac::testing::scratch_dir("minimal_bundle");
  RawBundle b = minimal_bundle();
  write_bundle(dir, b);
  RawBundle back = load_demonstration(dir);
  EXPECT_EQ(back.metadata.task, "pour");
  EXPECT_EQ(back.metadata.operator_id, "op7");
  ASSERT_EQ(back.streams.size(), 1u);
  const TimedStream& s = back.streams[0];
  EXPECT_EQ(s.name, "j_glove");
  EXPECT_EQ(s.kind, StreamKind::kJoint);
  EXPECT_EQ(s.timestamps, b.streams[0].timestamps);
  for (Eigen::Index i = 0; i < s.samples.size(); ++i) {
    EXPECT_TRUE(same_bits(s.samples.data()[i], b.streams[0].samples.data()[i]));
  }
}

TEST(Datastore, DeclaredCountLargerThanBlob) {
  const fs::path dir = dextac::testing::scratch_dir("blob_mismatch");
  RawBundle b = minimal_bundle();
  std::vector<double> t(8);
  std::vector<Eigen::VectorXd> rows(8, Eigen::VectorXd::Constant(1, 0.5));
  for (std::size_t i = 0; i < 8; ++i) t[i] = static_cast<double>(i);
  b.streams = {make_vector_stream("grip", StreamKind::kScalar, t, rows)};
  write_bundle(dir, b);
  auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  manifest["streams"][0]["shape"] = {10, 1};
  write_file(dir / "manifest.json", manifest.dump(2));
  EXPECT_THROW(load_demonstration(dir), BlobSizeMismatch);
}

TEST(Datastore, UnknownVersionRejected) {
  const fs::path dir = dextac::testing::scratch_dir("bad_version");
  write_bundle(dir, minimal_bundle());
  auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  manifest["version"] = 2;
  write_file(dir / "manifest.json", manifest.dump(2));
  EXPECT_THROW(load_demonstration(dir), UnsupportedVersion);
}

TEST(Datastore, ManifestErrors) {
  const fs::path dir = dextac::testing::scratch_dir("bad_manifest");
  EXPECT_THROW(load_demonstration(dir), ManifestError);
  write_file(dir / "manifest.json", "{\"version\": 1, \"streams\": [{\"name\": \"x\"}]}");
  EXPECT_THROW(load_demonstration(dir), ManifestError);
  write_file(dir / "manifest.json", "not json");
  EXPECT_THROW(load_demonstration(dir), ManifestError);
}

TEST(Datastore, SyntheticBundleLoadsEveryKind) {
  const fs::path dir = dextac::testing::scratch_dir("synthetic_bundle");
  SyntheticScenario sc;
  sc.pose_samples = 60;
  write_synthetic_bundle(dir, generate_synthetic_demo(sc, 3));
  RawBundle b = load_demonstration(dir);
  std::set<StreamKind> kinds;
  for (const auto& s : b.streams) kinds.insert(s.kind);
  EXPECT_EQ(kinds.size(), 5u);
  EXPECT_TRUE(fs::exists(dir / b.metadata.glove_model));
  Demonstration demo = load_synchronized(dir, 30.0);
  EXPECT_NO_THROW(demo.validate());
  ASSERT_FALSE(demo.images.empty());
  EXPECT_TRUE(fs::exists(dir / demo.images[0].frames[0]));
}

TEST(Datastore, MakeActionExamples) {
  ActionRecord id = make_action(RigidTransform::from_translation({1, 2, 3}), Eigen::Vector2d(0.5, 0.25));
  EXPECT_EQ(id.pos, Eigen::Vector3d(1, 2, 3));
  EXPECT_EQ(id.rot, Eigen::Vector3d::Zero());
  EXPECT_EQ(id.j_dex, Eigen::Vector2d(0.5, 0.25));
  const double pi = std::numbers::pi;
  ActionRecord z = make_action(RigidTransform::from_rotation(Eigen::Quaterniond(Eigen::AngleAxisd(pi / 2, Eigen::Vector3d::UnitZ()))),
                               JointVector(0));
  EXPECT_LE((z.rot - Eigen::Vector3d(0, 0, pi / 2)).norm(), 1e-12);
  ActionRecord x = make_action(RigidTransform::from_rotation(Eigen::Quaterniond(Eigen::AngleAxisd(pi, Eigen::Vector3d::UnitX()))),
                               JointVector(0));
  EXPECT_LE((x.rot - Eigen::Vector3d(pi, 0, 0)).norm(), 1e-12);
}

TEST(Datastore, RotationVectorRoundTrip) {
  std::mt19937_64 rng(123);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Eigen::Vector3d v =
        dextac::testing::random_unit(rng) * dextac::testing::uniform(rng, 0.0, std::numbers::pi - 1e-9);
    const ActionRecord a = make_action(RigidTransform::from_rotation(rotation_from_vector(v)), JointVector(0));
    worst = std::max(worst, (a.rot - v).norm());
    EXPECT_LE(a.rot.norm(), std::numbers::pi);
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(Datastore, VlaDatasetRoundTripIsExact) {
  const fs::path dir = dextac::testing::scratch_dir("vla_round_trip");
  Packaged p = small_result(7);
  DatasetOptions opts;
  opts.task = "wipe";
  opts.heatmap_layout = grid_layout(3, 3);
  DatasetSummary summary = write_vla_dataset(p.result, p.demo, p.tcp, p.arm, dir, opts);
  EXPECT_EQ(summary.frames, 7u);
  EXPECT_EQ(summary.action_dim, 10u);
  VlaDataset back = read_vla_dataset(dir);
  ASSERT_EQ(back.records.size(), 7u);
  EXPECT_EQ(back.dex_dof, 4u);
  for (std::size_t t = 0; t < 7; ++t) {
    const ActionRecord a = make_action(p.tcp[t], p.result.j_dex[t]);
    const TrainingRecord& r = back.records[t];
    for (int k = 0; k < 3; ++k) {
      EXPECT_TRUE(same_bits(r.action.pos[k], static_cast<float>(a.pos[k])));
      EXPECT_TRUE(same_bits(r.action.rot[k], static_cast<float>(a.rot[k])));
    }
    for (int k = 0; k < 4; ++k) EXPECT_TRUE(same_bits(r.action.j_dex[k], static_cast<float>(a.j_dex[k])));
    for (int k = 0; k < 6; ++k) EXPECT_TRUE(same_bits(back.arm_joints[t][k], p.arm[t][k]));
    for (int k = 0; k < 3; ++k) {
      EXPECT_TRUE(same_bits(back.tactile[t][k], static_cast<float>(p.result.gamma_dex[t].values[k])));
    }
    EXPECT_TRUE(same_bits(r.timestamp, p.demo.timestamps[t]));
    EXPECT_EQ(r.visual_ref, p.demo.images[0].frames[t]);
    ASSERT_TRUE(r.tactile_image_ref.has_value());
    EXPECT_TRUE(fs::exists(dir / *r.tactile_image_ref));
  }

  // Writing what was read back reproduces the same files.
  RetargetResult again = p.result;
  std::vector<RigidTransform> tcp;
  for (std::size_t t = 0; t < 7; ++t) {
    again.j_dex[t] = back.records[t].action.j_dex;
    again.gamma_dex[t].values = back.tactile[t];
    tcp.emplace_back(rotation_from_vector(back.records[t].action.rot), back.records[t].action.pos);
  }
  const fs::path dir2 = dextac::testing::scratch_dir("vla_round_trip_again");
  write_vla_dataset(again, p.demo, tcp, back.arm_joints, dir2, opts);
  EXPECT_EQ(read_file(dir / "arm_joints.bin"), read_file(dir2 / "arm_joints.bin"));
  EXPECT_EQ(read_file(dir / "tactile.bin"), read_file(dir2 / "tactile.bin"));
  EXPECT_EQ(read_file(dir / "records.jsonl"), read_file(dir2 / "records.jsonl"));
}

TEST(Datastore, SingleFrameDatasetRoundTrips) {
  const fs::path dir = dextac::testing::scratch_dir("vla_single");
  Packaged p = small_result(1);
  write_vla_dataset(p.result, p.demo, p.tcp, p.arm, dir);
  VlaDataset back = read_vla_dataset(dir);
  ASSERT_EQ(back.records.size(), 1u);
  EXPECT_FALSE(back.records[0].tactile_image_ref.has_value());
  EXPECT_TRUE(same_bits(back.arm_joints[0][3], p.arm[0][3]));
}

TEST(Datastore, RepeatedWritesAreByteIdentical) {
  Packaged p = small_result(12);
  DatasetOptions opts;
  opts.heatmap_layout = grid_layout(3, 2);
  const fs::path a = dextac::testing::scratch_dir("vla_repeat_a");
  const fs::path b = dextac::testing::scratch_dir("vla_repeat_b");
  write_vla_dataset(p.result, p.demo, p.tcp, p.arm, a, opts);
  write_vla_dataset(p.result, p.demo, p.tcp, p.arm, b, opts);
  EXPECT_EQ(directory_bytes(a), directory_bytes(b));

  const fs::path c = dextac::testing::scratch_dir("bundle_repeat_c");
  const fs::path d = dextac::testing::scratch_dir("bundle_repeat_d");
  write_bundle(c, minimal_bundle());
  write_bundle(d, minimal_bundle());
  EXPECT_EQ(directory_bytes(c), directory_bytes(d));
}

TEST(Datastore, LengthMismatchRejected) {
  Packaged p = small_result(5);
  p.arm.pop_back();
  EXPECT_THROW(write_vla_dataset(p.result, p.demo, p.tcp, p.arm, dextac::testing::scratch_dir("vla_short")),
               LengthMismatch);
}
