#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dextac/correspondence.hpp"
#include "dextac/demonstration.hpp"
#include "dextac/kinmodel.hpp"
#include "dextac/tactile.hpp"

namespace dextac {

struct RetargetConfig {
  double lambda_pos = 1.0;  ///< 1/m
  double lambda_dir = 0.1;
  /// (glove site, dex site) pairs compared by the kinematic term.
  std::vector<std::pair<std::string, std::string>> keypoint_pairs;
  CorrespondenceMap tactile_map;
  double force_sigmoid_gain = 20.0;
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;
  /// Initial Levenberg damping of the Gauss-Newton system.
  double step_damping = 1e-3;
  /// Also solve for a 6-DOF correction of the wrist pose.
  bool optimize_wrist = false;
  /// Dex wrist pose = glove wrist pose * mount_offset.
  RigidTransform mount_offset;
  ContactGate gate;
  AttenuationParams attenuation;
  /// Frame t starts from frame t-1's solution instead of the mid-range pose.
  bool warm_start = true;
  /// Failing frames copy the previous solution and are flagged instead of
  /// aborting the trajectory.
  bool skip_failed_frames = false;
  /// Norms are evaluated as sqrt(|e|^2 + s^2) - s so the energy stays smooth
  /// where a residual vanishes. 0 is exact.
  double norm_smoothing = 1e-6;
};

/// Throws ConfigError when the config is unusable with these models.
void validate_config(const RetargetConfig& cfg, const RobotModel& glove, const RobotModel& dex);

/// Every keypoint site of the glove that the dex model also defines.
std::vector<std::pair<std::string, std::string>> default_keypoint_pairs(const RobotModel& glove,
                                                                        const RobotModel& dex);

/// Sigmoid contact weight 1 / (1 + exp(-gain (F - 0.5))), F clamped to [0, 1].
double contact_weight(double force, double gain = 20.0);

struct Keypoint {
  Eigen::Vector3d position;
  Eigen::Vector3d direction;  ///< unit
};

/// (1/N) sum(lambda_pos |dp| + lambda_dir |dd|). Throws DimensionMismatch.
double kinematic_loss(std::span<const Keypoint> glove_kp, std::span<const Keypoint> dex_kp,
                      const RetargetConfig& cfg);

/// (1/M) sum(w_j |g_j - q_j|), q_j the world position of the mapped dex
/// site. With a gate, sensors it rejects get weight 0.
double tactile_loss(std::span<const Eigen::Vector3d> glove_points, std::span<const double> glove_forces,
                    const RobotModel& dex, const JointVector& j_dex, const RigidTransform& p_dex,
                    const CorrespondenceMap& map, double gain = 20.0,
                    std::optional<ContactGate> gate = std::nullopt);

/// One synchronized glove sample.
struct GloveFrame {
  JointVector joints;
  RigidTransform wrist;
  Eigen::VectorXd forces;
};

struct FrameDiagnostics {
  double loss = 0.0;       ///< L_kin + L_tac at the solution
  double kin_loss = 0.0;
  double tac_loss = 0.0;
  double gradient_norm = 0.0;  ///< projected, infinity norm
  int iterations = 0;
  bool converged = false;
  bool failed = false;  ///< only with skip_failed_frames
  std::vector<bool> clamped;  ///< warm start entries that were outside limits
};

struct FrameSolution {
  JointVector j_dex;
  RigidTransform p_dex;
  FrameDiagnostics diagnostics;
};

/// Keypoints of `model` at (q, base) for the given site names.
std::vector<Keypoint> keypoints(const RobotModel& model, const JointVector& q, const RigidTransform& base,
                                std::span<const std::string> sites);

struct EnergyGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;  ///< w.r.t. the dex joints (and wrist twist when enabled)
};

/// Energy minimized by retarget_frame and its analytic gradient.
EnergyGradient retarget_energy(const GloveFrame& frame, const RobotModel& glove, const RobotModel& dex,
                               const RetargetConfig& cfg, const JointVector& j_dex,
                               const RigidTransform& p_dex);

/// Minimizes L_kin + L_tac over the dex joints with damped Gauss-Newton,
/// projecting onto the joint limits. Deterministic. Throws NonFiniteLoss.
FrameSolution retarget_frame(const GloveFrame& frame, const RobotModel& glove, const RobotModel& dex,
                             const RetargetConfig& cfg,
                             const std::optional<JointVector>& warm_start = std::nullopt);

struct RetargetResult {
  std::vector<JointVector> j_dex;
  std::vector<RigidTransform> p_dex;
  std::vector<TactileFrame> gamma_dex;
  std::vector<FrameDiagnostics> diagnostics;

  std::size_t length() const { return j_dex.size(); }
  int total_iterations() const;
  double converged_fraction() const;
};

GloveFrame glove_frame(const Demonstration& demo, std::size_t t);

/// Retargets every frame, warm-starting from the previous solution, then
/// synthesizes the dex tactile trajectory. Frame errors are rethrown as
/// FrameError carrying the frame index.
RetargetResult retarget_trajectory(const Demonstration& demo, const RobotModel& glove,
                                   const RobotModel& dex, const RetargetConfig& cfg);

}  // namespace dextac
