#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dextac/armik.hpp"
#include "dextac/datastore.hpp"
#include "dextac/errors.hpp"
#include "dextac/evalsuite.hpp"
#include "dextac/frames.hpp"
#include "dextac/retargeter.hpp"

namespace dextac {

/// A robot description given either as a file or as a built-in generator
/// ("synthetic_hand" with a link scale, "ur5", "planar_two_link").
struct ModelSource {
  std::filesystem::path path;
  std::string builtin;
  double scale = 1.0;

  RobotModel load() const;
};

enum class FrameErrorPolicy { kAbort, kSkip };

struct PipelineConfig {
  double rate = 30.0;
  /// Empty takes the glove model named by the bundle.
  std::filesystem::path glove_model;
  ModelSource dex_model{{}, "synthetic_hand", 0.9};
  ModelSource arm_model{{}, "ur5", 1.0};
  std::string tcp_site = "tcp";

  /// keypoint_pairs and tactile_map are filled per bundle from the models.
  RetargetConfig retarget;
  /// "same_name" (anatomical), "nearest" or a correspondence JSON file.
  std::string correspondence = "same_name";

  /// Marker correspondences from the capture frame to the metric world frame.
  std::optional<PointCorrespondences> alignment;
  CameraExtrinsics extrinsics;
  /// Pose of the hand base in the TCP frame.
  RigidTransform hand_mount;

  IkOptions ik;
  /// Empty seeds from the middle of the joint ranges.
  std::optional<JointVector> ik_seed;

  /// "grid", "synthetic_hand", "none" or a layout JSON file.
  std::string heatmap = "grid";
  int heatmap_width = 8;
  std::string object = "object";
  std::string task;

  /// 0 uses the available parallelism.
  std::size_t workers = 0;
  FrameErrorPolicy on_frame_error = FrameErrorPolicy::kAbort;
};

/// Keys mirror the fields above; nested objects "retarget", "ik", "align" and
/// "dataset". Relative paths resolve against `base_dir`. Throws SyntaxError or
/// ConfigError.
PipelineConfig parse_pipeline_config(std::string_view document, const std::filesystem::path& base_dir = {});

/// Throws ConfigError naming the path when the file cannot be read.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// One line-delimited JSON event per call; must be safe to call concurrently.
using EventSink = std::function<void(const std::string& json_line)>;

/// JSON event writer to standard error, serialized by a mutex.
EventSink stderr_sink();

struct StageOutputs {
  static constexpr const char* kRetarget = "retarget";
  static constexpr const char* kRobotFrame = "robot_frame";
  static constexpr const char* kArm = "arm";
  static constexpr const char* kDataset = "dataset";
  static constexpr const char* kReport = "report";
};

/// Resamples a bundle onto the common timeline and writes it with its glove
/// model and referenced camera frames.
void sync_stage(const std::filesystem::path& bundle, const PipelineConfig& cfg, const std::filesystem::path& out);

/// Writes the retargeted hand trajectory (a bundle with j_dex, p_dex and
/// gamma_dex streams) and per-frame diagnostics.
RetargetResult retarget_stage(const std::filesystem::path& bundle, const PipelineConfig& cfg,
                              const std::filesystem::path& out, const EventSink& log = {});

/// Maps the hand trajectory into the robot base frame and derives TCP targets.
void align_stage(const std::filesystem::path& retarget_dir, const PipelineConfig& cfg,
                 const std::filesystem::path& out, const EventSink& log = {});

/// Solves arm joints for the TCP targets. With the abort policy a frame that
/// does not converge throws NotConverged.
void ik_stage(const std::filesystem::path& robot_frame_dir, const PipelineConfig& cfg,
              const std::filesystem::path& out, const EventSink& log = {});

void package_stage(const std::filesystem::path& bundle, const std::filesystem::path& retarget_dir,
                   const std::filesystem::path& robot_frame_dir, const std::filesystem::path& arm_dir,
                   const PipelineConfig& cfg, const std::filesystem::path& out);

ContactErrorReport eval_contact_stage(const std::filesystem::path& bundle, const std::filesystem::path& retarget_dir,
                                      const PipelineConfig& cfg, const std::filesystem::path& out);

/// Reads back what retarget_stage wrote.
RetargetResult read_retarget_output(const std::filesystem::path& dir);

struct BundleOutcome {
  std::filesystem::path bundle;
  int exit_code = 0;
  std::string error;
};

/// Runs every stage for each bundle into `out/<bundle name>/`, then writes the
/// merged contact report to `out/report/`. Bundles run on a bounded worker
/// pool; stages within a bundle run in order. Returns 0 or the exit code of
/// the first failing bundle in argument order.
int run_pipeline(const PipelineConfig& cfg, const std::vector<std::filesystem::path>& bundles,
                 const std::filesystem::path& out, const EventSink& log = {},
                 std::vector<BundleOutcome>* outcomes = nullptr);

/// 2 for configuration errors, 3 for data errors, 4 for numerical failures.
int exit_code(const Error& error);

}  // namespace dextac
