#include "dextac/kinmodel.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "dextac/errors.hpp"

namespace dextac {

namespace {

constexpr double kUnitTolerance = 1e-9;

template <typename T>
void require_unique(const std::vector<T>& items, const char* what) {
  std::unordered_set<std::string> seen;
  for (const auto& item : items) {
    if (item.name.empty()) throw ModelError(std::string(what) + " with empty name");
    if (!seen.insert(item.name).second) {
      throw ModelError(std::string("duplicate ") + what + " name '" + item.name + "'");
    }
  }
}

}  // namespace

RobotModel::RobotModel(std::string name, std::vector<Link> links, std::vector<Joint> joints,
                       std::vector<Site> sites, std::vector<std::string> warnings)
    : name_(std::move(name)),
      links_(std::move(links)),
      joints_(std::move(joints)),
      sites_(std::move(sites)),
      warnings_(std::move(warnings)) {
  validate_and_index();
}

void RobotModel::validate_and_index() {
  if (links_.empty()) throw ModelError("robot '" + name_ + "' has no links");
  require_unique(links_, "link");
  require_unique(joints_, "joint");
  require_unique(sites_, "site");

  std::unordered_map<std::string, std::size_t> link_lookup;
  for (std::size_t i = 0; i < links_.size(); ++i) link_lookup.emplace(links_[i].name, i);

  const std::size_t nl = links_.size();
  const std::size_t nj = joints_.size();
  joint_parent_link_.assign(nj, 0);
  joint_child_link_.assign(nj, 0);
  std::vector<std::vector<std::size_t>> children(nl);
  for (std::size_t j = 0; j < nj; ++j) {
    Joint& joint = joints_[j];
    auto p = link_lookup.find(joint.parent);
    auto c = link_lookup.find(joint.child);
    if (p == link_lookup.end()) {
      throw ModelError("joint '" + joint.name + "' references unknown parent link '" + joint.parent + "'");
    }
    if (c == link_lookup.end()) {
      throw ModelError("joint '" + joint.name + "' references unknown child link '" + joint.child + "'");
    }
    joint_parent_link_[j] = p->second;
    joint_child_link_[j] = c->second;
    children[p->second].push_back(j);
    if (joint.type != JointType::kFixed) {
      if (std::abs(joint.axis.norm() - 1.0) > kUnitTolerance) {
        throw ModelError("joint '" + joint.name + "' axis is not unit length");
      }
      if (!(joint.lower <= joint.upper)) {
        throw ModelError("joint '" + joint.name + "' has lower limit above upper limit");
      }
    }
  }

  // Cycle detection over the directed link graph.
  std::vector<int> color(nl, 0);
  std::vector<std::pair<std::size_t, std::size_t>> stack;
  for (std::size_t start = 0; start < nl; ++start) {
    if (color[start] != 0) continue;
    stack.push_back({start, 0});
    color[start] = 1;
    while (!stack.empty()) {
      auto& [link, next] = stack.back();
      if (next < children[link].size()) {
        const std::size_t j = children[link][next++];
        const std::size_t child = joint_child_link_[j];
        if (color[child] == 1) {
          throw ModelError("joint '" + joints_[j].name + "' closes a cycle: link '" +
                           links_[child].name + "' is its own ancestor");
        }
        if (color[child] == 0) {
          color[child] = 1;
          stack.push_back({child, 0});
        }
      } else {
        color[link] = 2;
        stack.pop_back();
      }
    }
  }

  link_parent_joint_.assign(nl, -1);
  for (std::size_t j = 0; j < nj; ++j) {
    const std::size_t c = joint_child_link_[j];
    if (link_parent_joint_[c] != -1) {
      throw ModelError("link '" + links_[c].name + "' has more than one parent joint");
    }
    link_parent_joint_[c] = static_cast<int>(j);
  }
  std::vector<std::size_t> roots;
  for (std::size_t l = 0; l < nl; ++l) {
    if (link_parent_joint_[l] == -1) roots.push_back(l);
  }
  if (roots.size() != 1) {
    throw ModelError("robot '" + name_ + "' must have exactly one base link, found " +
                     std::to_string(roots.size()));
  }
  base_ = roots.front();

  // Breadth-first joint order from the base; declaration order among siblings.
  joint_order_.clear();
  std::vector<std::size_t> frontier{base_};
  for (std::size_t k = 0; k < frontier.size(); ++k) {
    for (std::size_t j : children[frontier[k]]) {
      joint_order_.push_back(j);
      frontier.push_back(joint_child_link_[j]);
    }
  }

  dof_joints_.clear();
  joint_dof_.assign(nj, -1);
  for (std::size_t j = 0; j < nj; ++j) {
    if (joints_[j].type != JointType::kFixed) {
      joint_dof_[j] = static_cast<int>(dof_joints_.size());
      dof_joints_.push_back(j);
    }
  }

  site_link_.clear();
  for (auto& site : sites_) {
    auto it = link_lookup.find(site.parent_link);
    if (it == link_lookup.end()) {
      throw ModelError("site '" + site.name + "' references unknown link '" + site.parent_link + "'");
    }
    if (std::abs(site.local_direction.norm() - 1.0) > kUnitTolerance) {
      throw ModelError("site '" + site.name + "' direction is not unit length");
    }
    if (std::abs(site.offset.rotation.norm() - 1.0) > kUnitTolerance) {
      throw ModelError("site '" + site.name + "' offset rotation is not orthonormal");
    }
    site_link_.push_back(it->second);
  }
}

std::optional<std::size_t> RobotModel::link_index(std::string_view name) const {
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (links_[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> RobotModel::site_index(std::string_view name) const {
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    if (sites_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t RobotModel::require_site(std::string_view name) const {
  if (auto i = site_index(name)) return *i;
  throw UnknownSite("robot '" + name_ + "' has no site '" + std::string(name) + "'");
}

std::vector<std::string> RobotModel::site_names(SiteKind kind) const {
  std::vector<std::string> out;
  for (const auto& s : sites_) {
    if (s.kind == kind) out.push_back(s.name);
  }
  return out;
}

JointVector RobotModel::lower_limits() const {
  JointVector v(dof());
  for (std::size_t i = 0; i < dof(); ++i) v[i] = joints_[dof_joints_[i]].lower;
  return v;
}

JointVector RobotModel::upper_limits() const {
  JointVector v(dof());
  for (std::size_t i = 0; i < dof(); ++i) v[i] = joints_[dof_joints_[i]].upper;
  return v;
}

JointVector RobotModel::mid_range() const { return 0.5 * (lower_limits() + upper_limits()); }

JointVector RobotModel::clamp(const JointVector& q, std::vector<bool>* flags) const {
  if (static_cast<std::size_t>(q.size()) != dof()) {
    throw DimensionMismatch("joint vector has " + std::to_string(q.size()) + " entries, model '" +
                            name_ + "' has " + std::to_string(dof()) + " degrees of freedom");
  }
  JointVector out = q;
  if (flags) flags->assign(dof(), false);
  for (std::size_t i = 0; i < dof(); ++i) {
    const Joint& joint = joints_[dof_joints_[i]];
    const double v = std::clamp(q[i], joint.lower, joint.upper);
    if (v != q[i]) {
      out[i] = v;
      if (flags) (*flags)[i] = true;
    }
  }
  return out;
}

RobotModel RobotModel::with_sites(const std::vector<Site>& extra) const {
  std::vector<Site> all = sites_;
  all.insert(all.end(), extra.begin(), extra.end());
  return RobotModel(name_, links_, joints_, std::move(all), warnings_);
}

std::string_view to_string(SiteKind kind) {
  switch (kind) {
    case SiteKind::kKeypoint: return "keypoint";
    case SiteKind::kTactile: return "tactile";
    case SiteKind::kTcp: return "tcp";
  }
  return "keypoint";
}

SiteKind site_kind_from_string(std::string_view s) {
  if (s == "keypoint") return SiteKind::kKeypoint;
  if (s == "tactile") return SiteKind::kTactile;
  if (s == "tcp") return SiteKind::kTcp;
  throw ModelError("unknown site kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------

bool FkResult::any_clamped() const {
  return std::find(clamped.begin(), clamped.end(), true) != clamped.end();
}

FkResult forward_kinematics(const RobotModel& model, const JointVector& q) {
  FkResult fk;
  fk.q = model.clamp(q, &fk.clamped);
  fk.link_poses.assign(model.links().size(), RigidTransform::identity());
  for (std::size_t j : model.joint_order()) {
    const Joint& joint = model.joints()[j];
    const RigidTransform& parent = fk.link_poses[model.joint_parent_link(j)];
    RigidTransform motion;
    const int d = model.joint_dof(j);
    if (joint.type == JointType::kRevolute) {
      motion.rotation = canonical(Eigen::Quaterniond(Eigen::AngleAxisd(fk.q[d], joint.axis)));
    } else if (joint.type == JointType::kPrismatic) {
      motion.translation = joint.axis * fk.q[d];
    }
    fk.link_poses[model.joint_child_link(j)] = parent * joint.origin * motion;
  }
  return fk;
}

RigidTransform site_pose(const RobotModel& model, const FkResult& fk, std::size_t site) {
  const Site& s = model.sites()[site];
  return fk.link_poses[*model.link_index(s.parent_link)] * s.offset;
}

Eigen::Vector3d site_direction(const RobotModel& model, const RigidTransform& site_world,
                               std::size_t site) {
  return site_world.rotation * model.sites()[site].local_direction;
}

std::vector<RigidTransform> site_poses(const RobotModel& model, const JointVector& q,
                                       std::span<const std::string> site_names) {
  std::vector<std::size_t> indices;
  indices.reserve(site_names.size());
  for (const auto& n : site_names) indices.push_back(model.require_site(n));
  const FkResult fk = forward_kinematics(model, q);
  std::vector<RigidTransform> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(site_pose(model, fk, i));
  return out;
}

Jacobian site_jacobian(const RobotModel& model, const FkResult& fk, std::size_t site) {
  Jacobian jac = Jacobian::Zero(6, static_cast<Eigen::Index>(model.dof()));
  const Eigen::Vector3d point = site_pose(model, fk, site).translation;
  std::size_t link = *model.link_index(model.sites()[site].parent_link);
  for (int j = model.parent_joint(link); j >= 0; j = model.parent_joint(link)) {
    const Joint& joint = model.joints()[j];
    const int d = model.joint_dof(j);
    if (d >= 0) {
      const RigidTransform frame = fk.link_poses[model.joint_parent_link(j)] * joint.origin;
      const Eigen::Vector3d axis = frame.rotation * joint.axis;
      if (joint.type == JointType::kRevolute) {
        jac.col(d).head<3>() = axis.cross(point - frame.translation);
        jac.col(d).tail<3>() = axis;
      } else {
        jac.col(d).head<3>() = axis;
      }
    }
    link = model.joint_parent_link(j);
  }
  return jac;
}

Jacobian site_jacobian(const RobotModel& model, const JointVector& q, std::string_view site_name) {
  const std::size_t site = model.require_site(site_name);
  return site_jacobian(model, forward_kinematics(model, q), site);
}

}  // namespace dextac
