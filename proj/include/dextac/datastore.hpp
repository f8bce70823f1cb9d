#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dextac/demonstration.hpp"
#include "dextac/kinmodel.hpp"
#include "dextac/retargeter.hpp"
#include "dextac/sync.hpp"
#include "dextac/tactile.hpp"

namespace dextac {

inline constexpr int kBundleVersion = 1;

struct BundleMetadata {
  std::string task;
  std::string operator_id;
  /// Robot description of the glove, relative to the bundle directory; may be empty.
  std::string glove_model;
};

/// On-disk demonstration bundle: `manifest.json` plus little-endian row-major
/// blobs `<stream>.bin` and timestamp blobs `<stream>.ts.bin` (f64).
struct RawBundle {
  BundleMetadata metadata;
  std::vector<TimedStream> streams;
};

/// Throws ManifestError, UnsupportedVersion or BlobSizeMismatch.
RawBundle load_demonstration(const std::filesystem::path& bundle_dir);

/// Writes manifest and blobs; identical input yields identical bytes.
void write_bundle(const std::filesystem::path& bundle_dir, const RawBundle& bundle);

/// load_demonstration followed by resample at `rate`.
Demonstration load_synchronized(const std::filesystem::path& bundle_dir, double rate);

TimedStream make_pose_stream(const std::string& name, const std::vector<double>& timestamps,
                             const std::vector<RigidTransform>& poses, SampleType dtype = SampleType::kF64);
TimedStream make_vector_stream(const std::string& name, StreamKind kind, const std::vector<double>& timestamps,
                               const std::vector<Eigen::VectorXd>& rows, SampleType dtype = SampleType::kF64);
std::vector<RigidTransform> pose_rows(const TimedStream& stream);
std::vector<Eigen::VectorXd> vector_rows(const TimedStream& stream);
const TimedStream& find_stream(const RawBundle& bundle, const std::string& name);

// ---------------------------------------------------------------------------
// Training records

/// a = [pos, rot, j_dex]; rot is the rotation vector with |rot| <= pi.
struct ActionRecord {
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d rot = Eigen::Vector3d::Zero();
  JointVector j_dex;
};

ActionRecord make_action(const RigidTransform& p_tcp, const JointVector& j_dex);

struct TrainingRecord {
  ActionRecord action;
  std::string visual_ref;
  std::optional<std::string> tactile_image_ref;
  double timestamp = 0.0;
};

struct DatasetOptions {
  /// When set, one tactile heatmap (PPM) per frame is written under tactile/.
  std::optional<HeatmapLayout> heatmap_layout;
  std::string task;
};

struct DatasetSummary {
  std::size_t frames = 0;
  std::size_t action_dim = 0;
  std::size_t arm_dof = 0;
  std::vector<std::string> files;
};

/// Writes manifest.json, records.jsonl, actions.bin (f32 rows
/// [pos(3) | rot(3) | j_dex(n)]), arm_joints.bin (f64), tactile.bin (f32) and
/// optional heatmaps. Throws LengthMismatch or IoError.
DatasetSummary write_vla_dataset(const RetargetResult& result, const Demonstration& demo,
                                 const std::vector<RigidTransform>& p_tcp,
                                 const std::vector<JointVector>& arm_joints,
                                 const std::filesystem::path& out_dir, const DatasetOptions& options = {});

struct VlaDataset {
  std::vector<TrainingRecord> records;
  std::vector<JointVector> arm_joints;
  std::vector<Eigen::VectorXd> tactile;
  std::size_t dex_dof = 0;
};

/// Values come back exactly as stored (f32 fields widened to double).
VlaDataset read_vla_dataset(const std::filesystem::path& dir);

// Low-level file helpers shared by writers.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace dextac
