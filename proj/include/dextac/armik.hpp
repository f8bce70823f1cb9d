#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dextac/kinmodel.hpp"
#include "dextac/rigid_transform.hpp"

namespace dextac {

struct IkOptions {
  double tol_pos = 1e-4;  ///< m
  double tol_rot = 1e-3;  ///< rad
  int max_iterations = 200;
  double initial_damping = 1e-3;
  double damping_floor = 1e-6;
  /// Largest joint change per iteration, rad (0 disables the limit).
  double max_step = 0.5;
  /// 0 solves for the position only.
  double rotation_weight = 1.0;
  /// When the seeded solve fails, retry from this many configurations drawn
  /// uniformly within the limits (fixed generator seed, so deterministic).
  int restarts = 8;
  std::uint64_t restart_seed = 1;
};

struct IkSolution {
  JointVector q;
  bool converged = false;
  int iterations = 0;
  double pos_residual = 0.0;  ///< m
  double rot_residual = 0.0;  ///< rad
};

/// Damped least squares on the world-frame error twist (translation delta,
/// rotation log-map delta). Damping shrinks x0.5 after an accepted step and
/// grows x10 after a rejected one. Joints resting on a limit and pushed
/// outward are held fixed for the step; the rest are projected onto their limits.
/// A non-converged result still carries the best configuration found.
IkSolution solve_ik(const RobotModel& model, const RigidTransform& target, const std::string& tcp_site,
                    const JointVector& seed, const IkOptions& options = {});

struct IkTrajectory {
  std::vector<JointVector> q;
  std::vector<IkSolution> frames;
  std::vector<std::size_t> failed;  ///< indices of non-converged frames
  double max_joint_step = 0.0;      ///< largest inter-frame joint change, inf-norm
};

/// Solves frame by frame, seeding each from the last converged solution.
IkTrajectory trajectory_ik(const RobotModel& model, const std::vector<RigidTransform>& targets,
                           const std::string& tcp_site, const JointVector& seed, const IkOptions& options = {});

}  // namespace dextac
