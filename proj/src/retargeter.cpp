#include "dextac/retargeter.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "dextac/errors.hpp"

namespace dextac {

namespace {

constexpr double kMaxDamping = 1e16;
constexpr double kMinDamping = 1e-12;

/// One residual block of the energy: weight * |site quantity - target|.
struct Term {
  std::size_t site;
  Eigen::Vector3d target;
  double weight;
  bool direction;
  /// Degrees of freedom moving the site, base first.
  std::vector<Eigen::Index> chain;
};

std::vector<Eigen::Index> site_chain(const RobotModel& model, std::size_t site) {
  std::vector<Eigen::Index> chain;
  for (int pj = model.parent_joint(*model.link_index(model.sites()[site].parent_link)); pj >= 0;
       pj = model.parent_joint(model.joint_parent_link(static_cast<std::size_t>(pj)))) {
    const int dof = model.joint_dof(static_cast<std::size_t>(pj));
    if (dof >= 0) chain.push_back(dof);
  }
  std::reverse(chain.begin(), chain.end());
  return chain;
}

struct Problem {
  const RobotModel& dex;
  std::vector<Term> terms;
  double smoothing;
  bool wrist;

  Eigen::Index size() const { return static_cast<Eigen::Index>(dex.dof()) + (wrist ? 6 : 0); }
};

struct Evaluation {
  double loss = 0.0;
  Eigen::VectorXd gradient;
  /// Curvature of the smoothed norms under the linearized residuals.
  Eigen::MatrixXd hessian;
  /// Reweighted Gauss-Newton model: |e|^2 / (2 sn) majorizes each norm.
  Eigen::MatrixXd majorizer;
};

Evaluation evaluate(const Problem& prob, const JointVector& q, const RigidTransform& p_dex, bool derivatives) {
  const FkResult fk = forward_kinematics(prob.dex, q);
  const Eigen::Index n = static_cast<Eigen::Index>(prob.dex.dof());
  const Eigen::Index nv = prob.size();
  const Eigen::Matrix3d r_dex = p_dex.rotation_matrix();

  Evaluation ev;
  if (derivatives) {
    ev.gradient = Eigen::VectorXd::Zero(nv);
    ev.hessian = Eigen::MatrixXd::Zero(nv, nv);
    ev.majorizer = Eigen::MatrixXd::Zero(nv, nv);
  }
  std::map<std::size_t, Jacobian> jacobians;
  Eigen::MatrixXd je(3, nv);
  for (const Term& term : prob.terms) {
    const RigidTransform world = p_dex * site_pose(prob.dex, fk, term.site);
    const Eigen::Vector3d value =
        term.direction ? site_direction(prob.dex, world, term.site) : world.translation;
    const Eigen::Vector3d e = value - term.target;
    const double sn = std::sqrt(e.squaredNorm() + prob.smoothing * prob.smoothing);
    if (sn > 0.0) ev.loss += term.weight * e.squaredNorm() / (sn + prob.smoothing);
    if (!derivatives || sn == 0.0) continue;

    auto it = jacobians.find(term.site);
    if (it == jacobians.end()) it = jacobians.emplace(term.site, site_jacobian(prob.dex, fk, term.site)).first;
    const Jacobian& jm = it->second;
    je.setZero();
    if (term.direction) {
      je.leftCols(n) = -skew(value) * (r_dex * jm.bottomRows<3>());
      if (prob.wrist) je.rightCols<3>() = -skew(value);
    } else {
      je.leftCols(n) = r_dex * jm.topRows<3>();
      if (prob.wrist) {
        je.block(0, n, 3, 3).setIdentity();
        je.rightCols<3>() = -skew(value - p_dex.translation);
      }
    }
    const Eigen::MatrixXd jtj = (term.weight / sn) * je.transpose() * je;
    const Eigen::VectorXd jte = je.transpose() * e;
    ev.gradient.noalias() += (term.weight / sn) * jte;
    ev.majorizer += jtj;
    ev.hessian += jtj;
    ev.hessian.noalias() -= (term.weight / (sn * sn * sn)) * jte * jte.transpose();
    // Residual curvature: moving an upstream joint i rotates the column of a
    // downstream joint j about axis w_i.
    for (std::size_t a = 0; a < term.chain.size(); ++a) {
      const Eigen::Index i = term.chain[a];
      const Eigen::Vector3d wi = r_dex * jm.col(i).tail<3>();
      if (wi.isZero(0.0)) continue;
      for (std::size_t b = a; b < term.chain.size(); ++b) {
        const Eigen::Index j = term.chain[b];
        const Eigen::Vector3d cj = je.col(j);
        const double c = (term.weight / sn) * e.dot(wi.cross(cj));
        ev.hessian(i, j) += c;
        if (i != j) ev.hessian(j, i) += c;
      }
    }
  }
  return ev;
}

struct GloveTargets {
  std::vector<Keypoint> keypoints;
  std::vector<Eigen::Vector3d> tactile_points;
};

GloveTargets glove_targets(const GloveFrame& frame, const RobotModel& glove, const RetargetConfig& cfg) {
  const FkResult fk = forward_kinematics(glove, frame.joints);
  GloveTargets out;
  for (const auto& [glove_site, dex_site] : cfg.keypoint_pairs) {
    const std::size_t s = glove.require_site(glove_site);
    const RigidTransform w = frame.wrist * site_pose(glove, fk, s);
    out.keypoints.push_back({w.translation, site_direction(glove, w, s)});
  }
  for (std::size_t s = 0; s < glove.sites().size(); ++s) {
    if (glove.sites()[s].kind == SiteKind::kTactile) {
      out.tactile_points.push_back(frame.wrist * site_pose(glove, fk, s).translation);
    }
  }
  return out;
}

Problem build_problem(const GloveFrame& frame, const RobotModel& glove, const RobotModel& dex,
                      const RetargetConfig& cfg) {
  const GloveTargets targets = glove_targets(frame, glove, cfg);
  const std::size_t m = targets.tactile_points.size();
  if (static_cast<std::size_t>(frame.forces.size()) != m) {
    throw DimensionMismatch("glove frame has " + std::to_string(frame.forces.size()) +
                            " tactile readings, glove model has " + std::to_string(m) + " tactile sites");
  }
  if (static_cast<std::size_t>(frame.joints.size()) != glove.dof()) {
    throw DimensionMismatch("glove frame has " + std::to_string(frame.joints.size()) +
                            " joints, glove model has " + std::to_string(glove.dof()));
  }
  Problem prob{dex, {}, cfg.norm_smoothing, cfg.optimize_wrist};
  const double inv_n = 1.0 / static_cast<double>(cfg.keypoint_pairs.size());
  for (std::size_t i = 0; i < cfg.keypoint_pairs.size(); ++i) {
    const std::size_t s = dex.require_site(cfg.keypoint_pairs[i].second);
    if (cfg.lambda_pos > 0.0) {
      prob.terms.push_back({s, targets.keypoints[i].position, cfg.lambda_pos * inv_n, false, site_chain(dex, s)});
    }
    if (cfg.lambda_dir > 0.0) {
      prob.terms.push_back({s, targets.keypoints[i].direction, cfg.lambda_dir * inv_n, true, site_chain(dex, s)});
    }
  }
  if (m > 0) {
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t j = 0; j < m; ++j) {
      if (!cfg.gate.admits(frame.forces[j])) continue;
      const double w = contact_weight(frame.forces[j], cfg.force_sigmoid_gain);
      const std::size_t site = dex.require_site(cfg.tactile_map.dex_sites.at(j));
      prob.terms.push_back({site, targets.tactile_points[j], w * inv_m, false, site_chain(dex, site)});
    }
  }
  return prob;
}

/// Gradient with joint components zeroed where a limit blocks descent.
Eigen::VectorXd projected_gradient(const Eigen::VectorXd& g, const JointVector& q, const JointVector& lo,
                                   const JointVector& hi) {
  Eigen::VectorXd pg = g;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if ((q[i] <= lo[i] && g[i] > 0.0) || (q[i] >= hi[i] && g[i] < 0.0)) pg[i] = 0.0;
  }
  return pg;
}

/// Same eigenvectors with |lambda|: a positive semidefinite model that keeps
/// the curvature magnitudes of an indefinite Hessian.
Eigen::MatrixXd absolute_eigenvalues(const Eigen::MatrixXd& h) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
  if (eig.info() != Eigen::Success) return h;
  if (eig.eigenvalues().minCoeff() >= 0.0) return h;
  return eig.eigenvectors() * eig.eigenvalues().cwiseAbs().asDiagonal() * eig.eigenvectors().transpose();
}

/// Damped Newton step on `model` that keeps the joints inside [lo, hi]:
/// joints a limit blocks are pinned and the remaining system is re-solved
/// until no free joint overshoots. Variables past the joints (wrist twist)
/// are unbounded. Returns nothing when no descent step exists.
std::optional<Eigen::VectorXd> bounded_step(const Eigen::MatrixXd& model, const Eigen::VectorXd& grad,
                                            const JointVector& q, const JointVector& lo, const JointVector& hi,
                                            double mu) {
  const Eigen::Index nv = grad.size();
  const Eigen::Index n = q.size();
  std::vector<bool> pinned(static_cast<std::size_t>(nv), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    if ((q[i] <= lo[i] && grad[i] > 0.0) || (q[i] >= hi[i] && grad[i] < 0.0)) pinned[static_cast<std::size_t>(i)] = true;
  }
  Eigen::VectorXd step = Eigen::VectorXd::Zero(nv);
  for (Eigen::Index round = 0; round <= n; ++round) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < nv; ++i) {
      if (!pinned[static_cast<std::size_t>(i)]) free.push_back(i);
    }
    if (free.empty()) break;
    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd h(nf, nf);
    Eigen::VectorXd rhs(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      rhs[a] = -grad[free[a]];
      for (Eigen::Index j = 0; j < nv; ++j) {
        if (pinned[static_cast<std::size_t>(j)]) rhs[a] -= model(free[a], j) * step[j];
      }
      for (Eigen::Index b = 0; b < nf; ++b) h(a, b) = model(free[a], free[b]);
    }
    h.diagonal().array() += mu;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    const Eigen::VectorXd sf = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !sf.allFinite()) return std::nullopt;
    bool changed = false;
    for (Eigen::Index a = 0; a < nf; ++a) {
      const Eigen::Index i = free[a];
      step[i] = sf[a];
      if (i >= n) continue;
      if (q[i] + step[i] > hi[i]) {
        step[i] = hi[i] - q[i];
        pinned[static_cast<std::size_t>(i)] = changed = true;
      } else if (q[i] + step[i] < lo[i]) {
        step[i] = lo[i] - q[i];
        pinned[static_cast<std::size_t>(i)] = changed = true;
      }
    }
    if (!changed) break;
  }
  if (!(grad.dot(step) < 0.0)) return std::nullopt;
  return step;
}

RigidTransform apply_wrist_step(const RigidTransform& p, const Eigen::VectorXd& step, Eigen::Index offset) {
  const Eigen::Vector3d dt = step.segment<3>(offset);
  const Eigen::Vector3d dw = step.segment<3>(offset + 3);
  return {rotation_from_vector(dw) * p.rotation, p.translation + dt};
}

}  // namespace

void validate_config(const RetargetConfig& cfg, const RobotModel& glove, const RobotModel& dex) {
  if (cfg.keypoint_pairs.empty()) throw ConfigError("retargeting needs at least one keypoint pair");
  if (cfg.max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!(cfg.gradient_tolerance > 0.0)) throw ConfigError("gradient_tolerance must be > 0");
  if (!(cfg.lambda_pos >= 0.0) || !(cfg.lambda_dir >= 0.0)) throw ConfigError("keypoint weights must be >= 0");
  if (!(cfg.step_damping > 0.0)) throw ConfigError("step_damping must be > 0");
  if (!(cfg.norm_smoothing >= 0.0)) throw ConfigError("norm_smoothing must be >= 0");
  if (!(cfg.attenuation.alpha > 0.0) || !(cfg.attenuation.beta >= 0.0)) {
    throw ConfigError("attenuation needs alpha > 0 and beta >= 0");
  }
  if (!(cfg.gate.force_threshold >= 0.0 && cfg.gate.force_threshold <= 1.0)) {
    throw ConfigError("contact gate threshold must lie in [0, 1]");
  }
  for (const auto& [g, d] : cfg.keypoint_pairs) {
    if (!glove.site_index(g)) throw ConfigError("glove model has no keypoint site '" + g + "'");
    if (!dex.site_index(d)) throw ConfigError("dex model has no keypoint site '" + d + "'");
  }
  try {
    validate_correspondence(cfg.tactile_map, glove.site_names(SiteKind::kTactile).size(), dex);
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid tactile map: ") + e.what());
  }
}

std::vector<std::pair<std::string, std::string>> default_keypoint_pairs(const RobotModel& glove,
                                                                        const RobotModel& dex) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& name : glove.site_names(SiteKind::kKeypoint)) {
    if (dex.site_index(name)) pairs.emplace_back(name, name);
  }
  return pairs;
}

double contact_weight(double force, double gain) {
  const double f = std::clamp(force, 0.0, 1.0);
  return 1.0 / (1.0 + std::exp(-gain * (f - 0.5)));
}

double kinematic_loss(std::span<const Keypoint> glove_kp, std::span<const Keypoint> dex_kp,
                      const RetargetConfig& cfg) {
  if (glove_kp.size() != dex_kp.size() || glove_kp.empty()) {
    throw DimensionMismatch("keypoint lists must be non-empty and of equal length (" +
                            std::to_string(glove_kp.size()) + " vs " + std::to_string(dex_kp.size()) + ")");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < glove_kp.size(); ++i) {
    sum += cfg.lambda_pos * (glove_kp[i].position - dex_kp[i].position).norm() +
           cfg.lambda_dir * (glove_kp[i].direction - dex_kp[i].direction).norm();
  }
  return sum / static_cast<double>(glove_kp.size());
}

double tactile_loss(std::span<const Eigen::Vector3d> glove_points, std::span<const double> glove_forces,
                    const RobotModel& dex, const JointVector& j_dex, const RigidTransform& p_dex,
                    const CorrespondenceMap& map, double gain, std::optional<ContactGate> gate) {
  if (glove_points.size() != glove_forces.size() || glove_points.size() != map.size()) {
    throw DimensionMismatch("tactile points, forces and correspondence map differ in length");
  }
  if (glove_points.empty()) return 0.0;
  std::vector<std::size_t> sites;
  for (const auto& name : map.dex_sites) sites.push_back(dex.require_site(name));
  const auto dex_pts = dex_tactile_points(dex, j_dex, p_dex, sites);
  double sum = 0.0;
  for (std::size_t j = 0; j < glove_points.size(); ++j) {
    if (gate && !gate->admits(glove_forces[j])) continue;
    sum += contact_weight(glove_forces[j], gain) * (glove_points[j] - dex_pts[j]).norm();
  }
  return sum / static_cast<double>(glove_points.size());
}

std::vector<Keypoint> keypoints(const RobotModel& model, const JointVector& q, const RigidTransform& base,
                                std::span<const std::string> sites) {
  const FkResult fk = forward_kinematics(model, q);
  std::vector<Keypoint> out;
  for (const auto& name : sites) {
    const std::size_t s = model.require_site(name);
    const RigidTransform w = base * site_pose(model, fk, s);
    out.push_back({w.translation, site_direction(model, w, s)});
  }
  return out;
}

EnergyGradient retarget_energy(const GloveFrame& frame, const RobotModel& glove, const RobotModel& dex,
                               const RetargetConfig& cfg, const JointVector& j_dex,
                               const RigidTransform& p_dex) {
  const Problem prob = build_problem(frame, glove, dex, cfg);
  Evaluation ev = evaluate(prob, dex.clamp(j_dex), p_dex, true);
  return {ev.loss, std::move(ev.gradient)};
}

FrameSolution retarget_frame(const GloveFrame& frame, const RobotModel& glove, const RobotModel& dex,
                             const RetargetConfig& cfg, const std::optional<JointVector>& warm_start) {
  const Problem prob = build_problem(frame, glove, dex, cfg);
  const Eigen::Index n = static_cast<Eigen::Index>(dex.dof());
  const JointVector lo = dex.lower_limits();
  const JointVector hi = dex.upper_limits();

  FrameSolution sol;
  sol.j_dex = dex.clamp(warm_start ? *warm_start : dex.mid_range(), &sol.diagnostics.clamped);
  sol.p_dex = frame.wrist * cfg.mount_offset;

  Evaluation ev = evaluate(prob, sol.j_dex, sol.p_dex, true);
  if (!std::isfinite(ev.loss) || !ev.gradient.allFinite()) {
    throw NonFiniteLoss("retargeting energy is not finite at the initial configuration");
  }

  double mu = cfg.step_damping;
  int iterations = 0;
  bool converged = false;
  Eigen::VectorXd pg = projected_gradient(ev.gradient, sol.j_dex, lo, hi);
  while (true) {
    if (ev.loss == 0.0 || pg.lpNorm<Eigen::Infinity>() <= cfg.gradient_tolerance) {
      converged = true;
      break;
    }
    if (iterations >= cfg.max_iterations || mu > kMaxDamping) break;
    ++iterations;

    // Newton-like model first; the majorizer is the fallback when its step
    // does not reduce the energy.
    bool accepted = false;
    const Eigen::MatrixXd newton = absolute_eigenvalues(ev.hessian);
    for (const Eigen::MatrixXd* model : {&newton, static_cast<const Eigen::MatrixXd*>(&ev.majorizer)}) {
      const auto step = bounded_step(*model, ev.gradient, sol.j_dex, lo, hi, mu);
      if (!step) continue;
      const JointVector q_new = dex.clamp(sol.j_dex + step->head(n));
      const RigidTransform p_new = prob.wrist ? apply_wrist_step(sol.p_dex, *step, n) : sol.p_dex;
      Evaluation ev_new = evaluate(prob, q_new, p_new, true);
      if (std::isfinite(ev_new.loss) && ev_new.loss <= ev.loss) {
        sol.j_dex = q_new;
        sol.p_dex = p_new;
        ev = std::move(ev_new);
        pg = projected_gradient(ev.gradient, sol.j_dex, lo, hi);
        accepted = true;
        break;
      }
    }
    if (accepted) {
      mu = std::max(mu * 0.5, kMinDamping);
    } else {
      mu *= 10.0;
    }
  }

  FrameDiagnostics& diag = sol.diagnostics;
  diag.iterations = iterations;
  diag.converged = converged;
  diag.gradient_norm = pg.lpNorm<Eigen::Infinity>();

  std::vector<std::string> glove_sites;
  std::vector<std::string> dex_sites;
  for (const auto& [g, d] : cfg.keypoint_pairs) {
    glove_sites.push_back(g);
    dex_sites.push_back(d);
  }
  const auto gk = keypoints(glove, frame.joints, frame.wrist, glove_sites);
  const auto dk = keypoints(dex, sol.j_dex, sol.p_dex, dex_sites);
  diag.kin_loss = kinematic_loss(gk, dk, cfg);
  const GloveTargets targets = glove_targets(frame, glove, cfg);
  const std::vector<double> forces(frame.forces.data(), frame.forces.data() + frame.forces.size());
  diag.tac_loss = tactile_loss(targets.tactile_points, forces, dex, sol.j_dex, sol.p_dex, cfg.tactile_map,
                               cfg.force_sigmoid_gain, cfg.gate);
  diag.loss = diag.kin_loss + diag.tac_loss;
  if (!std::isfinite(diag.loss)) throw NonFiniteLoss("retargeting energy is not finite at the solution");
  return sol;
}

int RetargetResult::total_iterations() const {
  int total = 0;
  for (const auto& d : diagnostics) total += d.iterations;
  return total;
}

double RetargetResult::converged_fraction() const {
  if (diagnostics.empty()) return 0.0;
  const auto n = std::count_if(diagnostics.begin(), diagnostics.end(), [](const auto& d) { return d.converged; });
  return static_cast<double>(n) / static_cast<double>(diagnostics.size());
}

GloveFrame glove_frame(const Demonstration& demo, std::size_t t) {
  return {demo.j_glove.at(t), demo.p_glove.at(t), demo.gamma_glove.at(t).values};
}

RetargetResult retarget_trajectory(const Demonstration& demo, const RobotModel& glove,
                                   const RobotModel& dex, const RetargetConfig& cfg) {
  demo.validate();
  validate_config(cfg, glove, dex);
  RetargetResult result;
  const std::size_t t_len = demo.length();
  result.j_dex.reserve(t_len);
  result.p_dex.reserve(t_len);
  result.diagnostics.reserve(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    std::optional<JointVector> seed;
    if (cfg.warm_start && t > 0) seed = result.j_dex.back();
    try {
      FrameSolution sol = retarget_frame(glove_frame(demo, t), glove, dex, cfg, seed);
      result.j_dex.push_back(std::move(sol.j_dex));
      result.p_dex.push_back(sol.p_dex);
      result.diagnostics.push_back(std::move(sol.diagnostics));
    } catch (const Error& e) {
      if (!cfg.skip_failed_frames) throw FrameError(t, e);
      FrameDiagnostics diag;
      diag.failed = true;
      diag.loss = std::numeric_limits<double>::quiet_NaN();
      result.j_dex.push_back(t > 0 ? result.j_dex.back() : dex.mid_range());
      result.p_dex.push_back(t > 0 ? result.p_dex.back() : demo.p_glove[t] * cfg.mount_offset);
      result.diagnostics.push_back(std::move(diag));
    }
  }
  result.gamma_dex = retarget_tactile_trajectory(demo, glove, dex, result.j_dex, result.p_dex, cfg.tactile_map,
                                                 cfg.attenuation, cfg.gate);
  return result;
}

}  // namespace dextac
