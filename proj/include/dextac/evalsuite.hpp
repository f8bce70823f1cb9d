#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dextac/correspondence.hpp"
#include "dextac/datastore.hpp"
#include "dextac/demonstration.hpp"
#include "dextac/kinmodel.hpp"
#include "dextac/retargeter.hpp"
#include "dextac/tactile.hpp"

namespace dextac {

// ---------------------------------------------------------------------------
// Reference models

/// Four-digit hand: an opposable thumb (cmc roll, abduction, mcp, ip) and
/// index, middle and ring fingers (abduction, mcp, pip, dip); seven tactile
/// sites per digit plus four on the palm; keypoints at the fingertips and
/// palm center. Fingers point along +x and flexion curls them toward -z.
/// Every translation is multiplied by `scale`.
std::string synthetic_hand_urdf(double scale = 1.0);

/// Six-joint arm with UR5 geometry and a `tcp` site on the flange.
std::string ur5_arm_urdf();

/// Planar two-link arm (links of 0.5 m, joints about z) with a `tcp` site.
std::string planar_two_link_urdf();

/// One row per finger and a palm row, seven columns.
HeatmapLayout synthetic_hand_layout();

// ---------------------------------------------------------------------------
// Synthetic demonstrations

/// Scripted approach, grasp, hold and lift of a sphere. Phase durations are
/// fractions of the recording; lift takes the remainder.
struct SyntheticScenario {
  std::string object = "sphere";
  /// URDF text of the glove; empty selects synthetic_hand_urdf(1.0).
  std::string glove_urdf;
  std::size_t pose_samples = 300;
  double pose_rate = 30.0;
  double joint_rate = 120.0;
  double tactile_rate = 120.0;
  double approach = 0.25;
  double grasp = 0.25;
  double hold = 0.25;
  double object_radius = 0.035;
  /// Object center in the palm frame at the grasp pose.
  Eigen::Vector3d object_in_palm = Eigen::Vector3d(0.09, 0.0, -0.065);
  double approach_height = 0.10;
  double lift_height = 0.10;
  /// Extra closure past first contact, as a fraction of the full curl.
  double squeeze = 0.04;
  double joint_noise = 0.002;    ///< rad, standard deviation
  double tactile_noise = 0.003;  ///< standard deviation, channels in range only
  double radius_jitter = 0.003;  ///< m, uniform half-width
  double yaw_jitter = 0.2;       ///< rad, uniform half-width
  bool images = true;
};

/// {"object", "pose_samples", "pose_rate", ..., "object_in_palm": [x, y, z]};
/// absent keys keep their defaults; "glove_model" is a URDF path relative to
/// `base_dir`. Throws SyntaxError or ConfigError.
SyntheticScenario parse_scenario_json(std::string_view document, const std::filesystem::path& base_dir = {});

struct SyntheticGroundTruth {
  /// Pose-rate timeline and noise-free states on it.
  std::vector<double> timestamps;
  std::vector<JointVector> glove_joints;
  std::vector<RigidTransform> wrist;
  std::vector<RigidTransform> object;
  double object_radius = 0.0;
  double hold_start = 0.0;  ///< s
  double hold_end = 0.0;    ///< s
};

struct SyntheticDemo {
  RawBundle bundle;
  std::string glove_urdf;
  SyntheticGroundTruth truth;
};

/// Deterministic given `seed`. Tactile forces follow the distance of each
/// glove site to the object surface: 1 at contact, 0 beyond 1 cm, with a C1
/// ramp in between (a non-physical stand-in for a real sensor). Throws
/// ConfigError.
SyntheticDemo generate_synthetic_demo(const SyntheticScenario& scenario, std::uint64_t seed);

/// Writes the bundle, `glove.urdf` and placeholder camera frames.
void write_synthetic_bundle(const std::filesystem::path& dir, const SyntheticDemo& demo);

// ---------------------------------------------------------------------------
// Contact error

struct ObjectContactStats {
  std::string object;
  double mean_mm = 0.0;
  double max_mm = 0.0;
  double std_mm = 0.0;
  std::size_t frames = 0;   ///< frames with at least one admitted sensor
  std::size_t samples = 0;  ///< (frame, sensor) pairs
  /// (frame, mean discrepancy in mm) for every frame with contact.
  std::vector<std::pair<std::size_t, double>> per_frame;
};

struct ContactErrorReport {
  static constexpr double kPublishedReferenceMeanMm = 3.86;

  std::vector<ObjectContactStats> objects;
  /// Sample-weighted mean of the per-object means.
  double aggregate_mean_mm = 0.0;

  void recompute_aggregate();
};

/// Discrepancy between each admitted glove tactile point and its mapped dex
/// point, over all frames. Throws DimensionMismatch.
ContactErrorReport contact_error(const RetargetResult& result, const Demonstration& demo,
                                 const RobotModel& glove, const RobotModel& dex,
                                 const CorrespondenceMap& map, const std::string& object = "object",
                                 const ContactGate& gate = {});

ContactErrorReport merge_reports(const std::vector<ContactErrorReport>& reports);

/// Writes `contact_error.csv` and `contact_error.json` into `out_dir`.
void emit_report(const ContactErrorReport& report, const std::filesystem::path& out_dir);
std::string report_to_csv(const ContactErrorReport& report);
std::string report_to_json(const ContactErrorReport& report);
ContactErrorReport parse_report_json(std::string_view document);

/// Exhaustive search over groups of dex joints (typically the three flexion
/// joints of one finger) at a fixed step, other joints held at the solver
/// output, minimizing the mean contact discrepancy of the given frames.
struct GridOracleResult {
  double solver_mean_mm = 0.0;
  double oracle_mean_mm = 0.0;
  std::size_t samples = 0;
  std::size_t evaluated = 0;
};

GridOracleResult grid_search_contact_oracle(const RetargetResult& result, const Demonstration& demo,
                                            const RobotModel& glove, const RobotModel& dex,
                                            const CorrespondenceMap& map,
                                            const std::vector<std::vector<std::string>>& joint_groups,
                                            const std::vector<std::size_t>& frames, double step = 0.05,
                                            const ContactGate& gate = {});

}  // namespace dextac
