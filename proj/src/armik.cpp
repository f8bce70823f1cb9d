#include "dextac/armik.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <random>

#include "dextac/errors.hpp"

namespace dextac {

namespace {

struct TwistError {
  Eigen::Matrix<double, 6, 1> e;
  double pos = 0.0;
  double rot = 0.0;
};

TwistError twist_error(const RigidTransform& current, const RigidTransform& target) {
  TwistError out;
  out.e.head<3>() = target.translation - current.translation;
  out.e.tail<3>() = rotation_to_vector(target.rotation * current.rotation.conjugate());
  out.pos = out.e.head<3>().norm();
  out.rot = out.e.tail<3>().norm();
  return out;
}

// Solves h dq = g with joints that sit on a limit and push outward pinned,
// then shrinks the step so no joint moves more than max_step.
Eigen::VectorXd limited_step(const Eigen::MatrixXd& h, const Eigen::VectorXd& g, const JointVector& q,
                             const JointVector& lo, const JointVector& hi, double max_step) {
  const Eigen::Index n = g.size();
  std::vector<bool> pinned(static_cast<std::size_t>(n), false);
  Eigen::VectorXd dq = Eigen::VectorXd::Zero(n);
  for (Eigen::Index round = 0; round <= n; ++round) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!pinned[static_cast<std::size_t>(i)]) free.push_back(i);
    }
    dq.setZero();
    if (free.empty()) break;
    Eigen::MatrixXd hf(free.size(), free.size());
    Eigen::VectorXd gf(free.size());
    for (std::size_t a = 0; a < free.size(); ++a) {
      gf[a] = g[free[a]];
      for (std::size_t b = 0; b < free.size(); ++b) hf(a, b) = h(free[a], free[b]);
    }
    const Eigen::VectorXd x = hf.ldlt().solve(gf);
    for (std::size_t a = 0; a < free.size(); ++a) dq[free[a]] = x[a];
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (pinned[static_cast<std::size_t>(i)]) continue;
      if ((q[i] <= lo[i] && dq[i] < 0.0) || (q[i] >= hi[i] && dq[i] > 0.0)) {
        pinned[static_cast<std::size_t>(i)] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  const double largest = dq.lpNorm<Eigen::Infinity>();
  if (max_step > 0.0 && largest > max_step) dq *= max_step / largest;
  return dq;
}

IkSolution descend(const RobotModel& model, std::size_t site, const RigidTransform& target,
                   const JointVector& seed, const IkOptions& options) {
  const double wr = options.rotation_weight;
  const bool use_rot = wr > 0.0;
  auto done = [&](const TwistError& err) {
    return err.pos <= options.tol_pos && (!use_rot || err.rot <= options.tol_rot);
  };
  auto cost = [&](const TwistError& err) { return err.pos * err.pos + wr * wr * err.rot * err.rot; };

  IkSolution sol;
  sol.q = model.clamp(seed);
  FkResult fk = forward_kinematics(model, sol.q);
  TwistError err = twist_error(site_pose(model, fk, site), target);
  const JointVector lo = model.lower_limits();
  const JointVector hi = model.upper_limits();
  double mu = options.initial_damping;
  while (!done(err) && sol.iterations < options.max_iterations) {
    ++sol.iterations;
    Jacobian j = site_jacobian(model, fk, site);
    Eigen::Matrix<double, 6, 1> e = err.e;
    j.bottomRows<3>() *= wr;
    e.tail<3>() *= wr;
    Eigen::MatrixXd h = j.transpose() * j;
    h.diagonal().array() += mu;
    const Eigen::VectorXd dq = limited_step(h, j.transpose() * e, sol.q, lo, hi, options.max_step);
    const JointVector q_new = model.clamp(sol.q + dq);
    FkResult fk_new = forward_kinematics(model, q_new);
    const TwistError err_new = twist_error(site_pose(model, fk_new, site), target);
    if (dq.allFinite() && cost(err_new) < cost(err)) {
      sol.q = q_new;
      fk = std::move(fk_new);
      err = err_new;
      mu = std::max(mu * 0.5, options.damping_floor);
    } else {
      mu *= 10.0;
      if (mu > 1e12) break;
    }
  }
  sol.converged = done(err);
  sol.pos_residual = err.pos;
  sol.rot_residual = err.rot;
  return sol;
}

}  // namespace

IkSolution solve_ik(const RobotModel& model, const RigidTransform& target, const std::string& tcp_site,
                    const JointVector& seed, const IkOptions& options) {
  const std::size_t site = model.require_site(tcp_site);
  IkSolution best = descend(model, site, target, seed, options);
  if (best.converged || options.restarts <= 0) return best;

  const double wr = options.rotation_weight;
  auto cost = [&](const IkSolution& s) {
    return s.pos_residual * s.pos_residual + wr * wr * s.rot_residual * s.rot_residual;
  };
  const JointVector lo = model.lower_limits();
  const JointVector hi = model.upper_limits();
  std::mt19937_64 rng(options.restart_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int iterations = best.iterations;
  for (int r = 0; r < options.restarts && !best.converged; ++r) {
    JointVector start(lo.size());
    for (Eigen::Index i = 0; i < start.size(); ++i) start[i] = lo[i] + unit(rng) * (hi[i] - lo[i]);
    IkSolution attempt = descend(model, site, target, start, options);
    iterations += attempt.iterations;
    if (attempt.converged || cost(attempt) < cost(best)) best = std::move(attempt);
  }
  best.iterations = iterations;
  return best;
}

IkTrajectory trajectory_ik(const RobotModel& model, const std::vector<RigidTransform>& targets,
                           const std::string& tcp_site, const JointVector& seed, const IkOptions& options) {
  if (targets.empty()) throw LengthMismatch("IK target trajectory is empty");
  IkTrajectory out;
  JointVector last_good = model.clamp(seed);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    IkSolution sol = solve_ik(model, targets[t], tcp_site, last_good, options);
    if (sol.converged) {
      last_good = sol.q;
    } else {
      out.failed.push_back(t);
    }
    if (!out.q.empty()) {
      out.max_joint_step = std::max(out.max_joint_step, (sol.q - out.q.back()).lpNorm<Eigen::Infinity>());
    }
    out.q.push_back(sol.q);
    out.frames.push_back(std::move(sol));
  }
  return out;
}

}  // namespace dextac
