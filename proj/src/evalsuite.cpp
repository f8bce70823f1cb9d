#include "dextac/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <random>
#include <sstream>

#include "dextac/errors.hpp"
#include "dextac/sync.hpp"

namespace dextac {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string vec(double x, double y, double z) { return num(x) + " " + num(y) + " " + num(z); }

struct FingerSpec {
  const char* name;
  double x, y, yaw;
};

constexpr FingerSpec kFingers[] = {
    {"index", 0.09, 0.025, 0.0},
    {"middle", 0.095, 0.0, 0.0},
    {"ring", 0.09, -0.025, 0.0},
};

struct TactileSpec {
  const char* link;
  double x, z;
};

constexpr TactileSpec kFingerTactile[] = {
    {"proximal", 0.013, -0.008}, {"proximal", 0.027, -0.008}, {"middle", 0.008, -0.007},
    {"middle", 0.017, -0.007},   {"distal", 0.007, -0.006},   {"distal", 0.014, -0.006},
    {"tip", 0.002, -0.004},
};

constexpr TactileSpec kThumbTactile[] = {
    {"metacarpal", 0.015, -0.009}, {"metacarpal", 0.03, -0.009}, {"proximal", 0.01, -0.008},
    {"proximal", 0.022, -0.008},   {"distal", 0.008, -0.006},    {"distal", 0.016, -0.006},
    {"tip", 0.002, -0.004},
};

void joint(std::ostringstream& os, const std::string& name, const char* type, const std::string& parent,
           const std::string& child, const std::string& xyz, const std::string& rpy, const char* axis,
           double lower, double upper) {
  os << "  <joint name=\"" << name << "\" type=\"" << type << "\">\n"
     << "    <parent link=\"" << parent << "\"/>\n"
     << "    <child link=\"" << child << "\"/>\n"
     << "    <origin xyz=\"" << xyz << "\" rpy=\"" << rpy << "\"/>\n";
  if (std::string(type) != "fixed") {
    os << "    <axis xyz=\"" << axis << "\"/>\n"
       << "    <limit lower=\"" << num(lower) << "\" upper=\"" << num(upper) << "\"/>\n";
  }
  os << "  </joint>\n";
}

void site(std::ostringstream& os, const std::string& name, const std::string& parent, const std::string& xyz,
          const char* kind, const char* dir = "1 0 0", const std::string& rpy = "0 0 0") {
  os << "  <site name=\"" << name << "\" parent=\"" << parent << "\" xyz=\"" << xyz << "\" rpy=\"" << rpy
     << "\" kind=\"" << kind << "\" dir=\"" << dir << "\"/>\n";
}

}  // namespace

std::string synthetic_hand_urdf(double scale) {
  const double s = scale;
  std::ostringstream os;
  os << "<?xml version=\"1.0\"?>\n<robot name=\"synthetic_hand\">\n  <link name=\"palm\"/>\n";
  for (const char* l : {"thumb_base", "thumb_metacarpal", "thumb_proximal", "thumb_distal", "thumb_tip"}) {
    os << "  <link name=\"" << l << "\"/>\n";
  }
  // Thumb: roll toward the palm, abduction, then two flexion joints.
  joint(os, "thumb_cmc", "revolute", "palm", "thumb_base", vec(0.03 * s, 0.04 * s, -0.01 * s), vec(0, 0, 0.3),
        "-1 0 0", 0.0, 1.2);
  joint(os, "thumb_abd", "revolute", "thumb_base", "thumb_metacarpal", "0 0 0", "0 0 0", "0 0 1", -0.3, 0.3);
  joint(os, "thumb_mcp", "revolute", "thumb_metacarpal", "thumb_proximal", vec(0.04 * s, 0, 0), "0 0 0", "0 1 0",
        -0.1, 1.2);
  joint(os, "thumb_ip", "revolute", "thumb_proximal", "thumb_distal", vec(0.032 * s, 0, 0), "0 0 0", "0 1 0", 0.0,
        1.4);
  joint(os, "thumb_tip_joint", "fixed", "thumb_distal", "thumb_tip", vec(0.025 * s, 0, 0), "0 0 0", "", 0, 0);
  for (const auto& f : kFingers) {
    const std::string p = f.name;
    for (const char* l : {"knuckle", "proximal", "middle", "distal", "tip"}) {
      os << "  <link name=\"" << p << "_" << l << "\"/>\n";
    }
    joint(os, p + "_abd", "revolute", "palm", p + "_knuckle", vec(f.x * s, f.y * s, 0), vec(0, 0, f.yaw), "0 0 1",
          -0.3, 0.3);
    joint(os, p + "_mcp", "revolute", p + "_knuckle", p + "_proximal", "0 0 0", "0 0 0", "0 1 0", -0.1, 1.6);
    joint(os, p + "_pip", "revolute", p + "_proximal", p + "_middle", vec(0.04 * s, 0, 0), "0 0 0", "0 1 0", 0.0,
          1.7);
    joint(os, p + "_dip", "revolute", p + "_middle", p + "_distal", vec(0.025 * s, 0, 0), "0 0 0", "0 1 0", 0.0,
          1.4);
    joint(os, p + "_tip_joint", "fixed", p + "_distal", p + "_tip", vec(0.02 * s, 0, 0), "0 0 0", "", 0, 0);
  }
  int k = 0;
  for (const auto& t : kThumbTactile) {
    site(os, "thumb_t" + std::to_string(k++), std::string("thumb_") + t.link, vec(t.x * s, 0, t.z * s), "tactile");
  }
  for (const auto& f : kFingers) {
    k = 0;
    for (const auto& t : kFingerTactile) {
      site(os, std::string(f.name) + "_t" + std::to_string(k++), std::string(f.name) + "_" + t.link,
           vec(t.x * s, 0, t.z * s), "tactile");
    }
  }
  const double palm_sites[4][2] = {{0.05, 0.02}, {0.05, -0.02}, {0.075, 0.02}, {0.075, -0.02}};
  for (k = 0; k < 4; ++k) {
    site(os, "palm_t" + std::to_string(k), "palm", vec(palm_sites[k][0] * s, palm_sites[k][1] * s, -0.01 * s),
         "tactile");
  }
  site(os, "thumb_fingertip", "thumb_tip", "0 0 0", "keypoint");
  for (const auto& f : kFingers) {
    site(os, std::string(f.name) + "_fingertip", std::string(f.name) + "_tip", "0 0 0", "keypoint");
  }
  site(os, "palm_center", "palm", vec(0.05 * s, 0, 0), "keypoint", "0 0 -1");
  os << "</robot>\n";
  return os.str();
}

std::string ur5_arm_urdf() {
  constexpr double pi = std::numbers::pi;
  std::ostringstream os;
  os << "<?xml version=\"1.0\"?>\n<robot name=\"ur5\">\n";
  for (const char* l : {"base_link", "shoulder_link", "upper_arm_link", "forearm_link", "wrist_1_link",
                        "wrist_2_link", "wrist_3_link"}) {
    os << "  <link name=\"" << l << "\"/>\n";
  }
  joint(os, "shoulder_pan_joint", "revolute", "base_link", "shoulder_link", vec(0, 0, 0.089159), "0 0 0", "0 0 1",
        -2 * pi, 2 * pi);
  joint(os, "shoulder_lift_joint", "revolute", "shoulder_link", "upper_arm_link", vec(0, 0.13585, 0),
        vec(0, pi / 2, 0), "0 1 0", -2 * pi, 2 * pi);
  joint(os, "elbow_joint", "revolute", "upper_arm_link", "forearm_link", vec(0, -0.1197, 0.425), "0 0 0", "0 1 0",
        -pi, pi);
  joint(os, "wrist_1_joint", "revolute", "forearm_link", "wrist_1_link", vec(0, 0, 0.39225), vec(0, pi / 2, 0),
        "0 1 0", -2 * pi, 2 * pi);
  joint(os, "wrist_2_joint", "revolute", "wrist_1_link", "wrist_2_link", vec(0, 0.093, 0), "0 0 0", "0 0 1",
        -2 * pi, 2 * pi);
  joint(os, "wrist_3_joint", "revolute", "wrist_2_link", "wrist_3_link", vec(0, 0, 0.09465), "0 0 0", "0 1 0",
        -2 * pi, 2 * pi);
  site(os, "tcp", "wrist_3_link", vec(0, 0.0823, 0), "tcp", "0 0 1", vec(0, 0, pi / 2));
  os << "</robot>\n";
  return os.str();
}

std::string planar_two_link_urdf() {
  constexpr double pi = std::numbers::pi;
  std::ostringstream os;
  os << "<?xml version=\"1.0\"?>\n<robot name=\"planar_2link\">\n";
  for (const char* l : {"base", "link1", "link2", "tip"}) os << "  <link name=\"" << l << "\"/>\n";
  joint(os, "j1", "revolute", "base", "link1", "0 0 0", "0 0 0", "0 0 1", -pi, pi);
  joint(os, "j2", "revolute", "link1", "link2", "0.5 0 0", "0 0 0", "0 0 1", -pi, pi);
  joint(os, "tip_joint", "fixed", "link2", "tip", "0.5 0 0", "0 0 0", "", 0, 0);
  site(os, "tcp", "tip", "0 0 0", "tcp");
  site(os, "fingertip", "tip", "0.02 0 0", "keypoint");
  os << "</robot>\n";
  return os.str();
}

HeatmapLayout synthetic_hand_layout() {
  HeatmapLayout layout;
  layout.height = 5;
  layout.width = 7;
  for (int f = 0; f < 4; ++f) {
    for (int k = 0; k < 7; ++k) layout.cells.emplace_back(f, k);
  }
  for (int k = 0; k < 4; ++k) layout.cells.emplace_back(4, k);
  return layout;
}

// ---------------------------------------------------------------------------

SyntheticScenario parse_scenario_json(std::string_view document, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw SyntaxError(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("scenario must be a JSON object");
  SyntheticScenario s;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "object") s.object = value.get<std::string>();
      else if (key == "glove_model") {
        const fs::path path = base_dir / value.get<std::string>();
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read glove model '" + path.string() + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        s.glove_urdf = buf.str();
      } else if (key == "pose_samples") s.pose_samples = value.get<std::size_t>();
      else if (key == "pose_rate") s.pose_rate = value.get<double>();
      else if (key == "joint_rate") s.joint_rate = value.get<double>();
      else if (key == "tactile_rate") s.tactile_rate = value.get<double>();
      else if (key == "approach") s.approach = value.get<double>();
      else if (key == "grasp") s.grasp = value.get<double>();
      else if (key == "hold") s.hold = value.get<double>();
      else if (key == "object_radius") s.object_radius = value.get<double>();
      else if (key == "object_in_palm") {
        const auto v = value.get<std::vector<double>>();
        if (v.size() != 3) throw ConfigError("object_in_palm needs three values");
        s.object_in_palm = Eigen::Vector3d(v[0], v[1], v[2]);
      } else if (key == "approach_height") s.approach_height = value.get<double>();
      else if (key == "lift_height") s.lift_height = value.get<double>();
      else if (key == "squeeze") s.squeeze = value.get<double>();
      else if (key == "joint_noise") s.joint_noise = value.get<double>();
      else if (key == "tactile_noise") s.tactile_noise = value.get<double>();
      else if (key == "radius_jitter") s.radius_jitter = value.get<double>();
      else if (key == "yaw_jitter") s.yaw_jitter = value.get<double>();
      else if (key == "images") s.images = value.get<bool>();
      else throw ConfigError("unknown scenario key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario field has the wrong type: ") + e.what());
  }
  return s;
}

namespace {

/// Deterministic across standard libraries, unlike the <random> distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double symmetric() { return 2.0 * uniform() - 1.0; }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

/// 1 at or inside the surface, 0 beyond 1 cm, C1 in between.
double contact_force(double distance) { return 1.0 - smoothstep(distance / 0.01); }

void validate_scenario(const SyntheticScenario& s) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("scenario: " + msg);
  };
  require(s.pose_samples >= 2, "pose_samples must be at least 2");
  require(s.pose_rate > 0 && s.joint_rate > 0 && s.tactile_rate > 0, "rates must be positive");
  require(s.approach >= 0 && s.grasp >= 0 && s.hold >= 0, "phase fractions must be non-negative");
  require(s.approach + s.grasp + s.hold <= 1.0 + 1e-12, "phase fractions exceed the recording");
  require(s.object_radius > 0, "object_radius must be positive");
  require(s.radius_jitter >= 0 && s.radius_jitter < s.object_radius, "radius_jitter out of range");
  require(s.joint_noise >= 0 && s.tactile_noise >= 0 && s.yaw_jitter >= 0, "noise levels must be non-negative");
  require(s.squeeze >= 0, "squeeze must be non-negative");
  require(s.object_in_palm.allFinite(), "object_in_palm must be finite");
}

/// Curl program: each finger (joint-name prefix before '_') closes its
/// non-abduction joints toward 85 % of their upper limit.
struct CurlProgram {
  JointVector open;
  JointVector close;
  std::vector<std::string> groups;
  std::vector<int> dof_group;     ///< per DOF
  std::vector<int> sensor_group;  ///< per tactile site, -1 when on the base
};

CurlProgram make_curl_program(const RobotModel& glove) {
  CurlProgram cp;
  const auto n = static_cast<Eigen::Index>(glove.dof());
  cp.open = glove.clamp(JointVector::Zero(n));
  cp.close = cp.open;
  std::vector<int> joint_group(glove.joints().size(), -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t j = glove.dof_joint(static_cast<std::size_t>(i));
    const Joint& jt = glove.joints()[j];
    const std::string prefix = jt.name.substr(0, jt.name.find('_'));
    auto it = std::find(cp.groups.begin(), cp.groups.end(), prefix);
    if (it == cp.groups.end()) it = cp.groups.insert(cp.groups.end(), prefix);
    const int g = static_cast<int>(it - cp.groups.begin());
    cp.dof_group.push_back(g);
    joint_group[j] = g;
    if (jt.name.find("abd") == std::string::npos) {
      cp.close[i] = std::max(jt.lower, 0.85 * jt.upper);
    }
  }
  for (const auto& s : glove.sites()) {
    if (s.kind != SiteKind::kTactile) continue;
    int group = -1;
    for (int pj = glove.parent_joint(*glove.link_index(s.parent_link)); pj >= 0;
         pj = glove.parent_joint(glove.joint_parent_link(static_cast<std::size_t>(pj)))) {
      if (joint_group[static_cast<std::size_t>(pj)] >= 0) {
        group = joint_group[static_cast<std::size_t>(pj)];
        break;
      }
    }
    cp.sensor_group.push_back(group);
  }
  return cp;
}

JointVector curl(const CurlProgram& cp, const std::vector<double>& c) {
  JointVector q = cp.open;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    q[i] += c[static_cast<std::size_t>(cp.dof_group[static_cast<std::size_t>(i)])] * (cp.close[i] - cp.open[i]);
  }
  return q;
}

/// Signed distances of the tactile sites to the sphere surface, palm frame.
std::vector<double> surface_distances(const RobotModel& glove, const std::vector<std::size_t>& sites,
                                      const JointVector& q, const Eigen::Vector3d& center, double radius) {
  const FkResult fk = forward_kinematics(glove, q);
  std::vector<double> d;
  d.reserve(sites.size());
  for (std::size_t s : sites) d.push_back((site_pose(glove, fk, s).translation - center).norm() - radius);
  return d;
}

std::vector<double> timeline(double duration, double rate) {
  const auto count = static_cast<std::size_t>(std::floor(duration * rate + 1e-9 * rate)) + 1;
  std::vector<double> t(count);
  for (std::size_t k = 0; k < count; ++k) t[k] = static_cast<double>(k) / rate;
  return t;
}

}  // namespace

SyntheticDemo generate_synthetic_demo(const SyntheticScenario& scenario, std::uint64_t seed) {
  validate_scenario(scenario);
  SyntheticDemo out;
  out.glove_urdf = scenario.glove_urdf.empty() ? synthetic_hand_urdf(1.0) : scenario.glove_urdf;
  const RobotModel glove = parse_robot_model(out.glove_urdf);
  std::vector<std::size_t> tactile;
  for (std::size_t i = 0; i < glove.sites().size(); ++i) {
    if (glove.sites()[i].kind == SiteKind::kTactile) tactile.push_back(i);
  }
  if (tactile.empty()) throw ConfigError("scenario glove model has no tactile sites");
  if (glove.dof() == 0) throw ConfigError("scenario glove model has no joints");

  Rng rng(seed);
  const double radius = scenario.object_radius + scenario.radius_jitter * rng.symmetric();
  const double yaw = scenario.yaw_jitter * rng.symmetric();
  const Eigen::Quaterniond wrist_rot(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));

  const double duration = static_cast<double>(scenario.pose_samples - 1) / scenario.pose_rate;
  const double t_grasp = scenario.approach * duration;
  const double t_hold = t_grasp + scenario.grasp * duration;
  const double t_lift = t_hold + scenario.hold * duration;
  const Eigen::Vector3d o_grasp = scenario.object_in_palm;
  const Eigen::Vector3d table_center(0.5, 0.0, radius);

  // Closure at first contact per finger, found by bisection.
  const CurlProgram cp = make_curl_program(glove);
  std::vector<double> c_hold(cp.groups.size(), 0.0);
  for (std::size_t g = 0; g < cp.groups.size(); ++g) {
    std::vector<std::size_t> sites;
    for (std::size_t k = 0; k < tactile.size(); ++k) {
      if (cp.sensor_group[k] == static_cast<int>(g)) sites.push_back(tactile[k]);
    }
    if (sites.empty()) continue;
    auto min_distance = [&](double c) {
      std::vector<double> cs(cp.groups.size(), 0.0);
      cs[g] = c;
      const auto d = surface_distances(glove, sites, curl(cp, cs), o_grasp, radius);
      return *std::min_element(d.begin(), d.end());
    };
    double contact = 1.0;
    if (min_distance(0.0) <= 0.0) {
      contact = 0.0;
    } else if (min_distance(1.0) <= 0.0) {
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (min_distance(mid) <= 0.0 ? hi : lo) = mid;
      }
      contact = hi;
    }
    c_hold[g] = std::min(1.0, contact + scenario.squeeze);
  }

  auto closure = [&](double t) {
    if (scenario.grasp <= 0.0 || t <= t_grasp) return 0.0;
    return smoothstep((t - t_grasp) / (t_hold - t_grasp));
  };
  auto true_joints = [&](double t) {
    std::vector<double> cs(c_hold);
    for (double& c : cs) c *= closure(t);
    return curl(cp, cs);
  };
  auto object_in_palm = [&](double t) -> Eigen::Vector3d {
    if (t >= t_grasp || t_grasp <= 0.0) return o_grasp;
    return o_grasp - Eigen::Vector3d(0, 0, scenario.approach_height * (1.0 - smoothstep(t / t_grasp)));
  };
  auto object_world = [&](double t) -> Eigen::Vector3d {
    if (t <= t_lift || duration <= t_lift) return table_center;
    return table_center + Eigen::Vector3d(0, 0, scenario.lift_height * smoothstep((t - t_lift) / (duration - t_lift)));
  };
  auto wrist_pose = [&](double t) {
    return RigidTransform(wrist_rot, object_world(t) - wrist_rot * object_in_palm(t));
  };

  // Pose-rate streams and ground truth.
  std::vector<double> pose_t(scenario.pose_samples);
  for (std::size_t k = 0; k < pose_t.size(); ++k) pose_t[k] = static_cast<double>(k) / scenario.pose_rate;
  std::vector<RigidTransform> wrist, object;
  std::vector<Eigen::VectorXd> phase;
  for (double t : pose_t) {
    wrist.push_back(wrist_pose(t));
    object.emplace_back(Eigen::Quaterniond::Identity(), object_world(t));
    phase.push_back(Eigen::VectorXd::Constant(1, closure(t)));
    out.truth.glove_joints.push_back(true_joints(t));
  }
  out.truth.timestamps = pose_t;
  out.truth.wrist = wrist;
  out.truth.object = object;
  out.truth.object_radius = radius;
  out.truth.hold_start = t_hold;
  out.truth.hold_end = t_lift;

  const auto joint_t = timeline(duration, scenario.joint_rate);
  std::vector<Eigen::VectorXd> joints;
  for (double t : joint_t) {
    JointVector q = true_joints(t);
    for (Eigen::Index i = 0; i < q.size(); ++i) q[i] += scenario.joint_noise * rng.normal();
    joints.push_back(glove.clamp(q));
  }

  const auto tactile_t = timeline(duration, scenario.tactile_rate);
  std::vector<Eigen::VectorXd> forces;
  for (double t : tactile_t) {
    const auto d = surface_distances(glove, tactile, true_joints(t), object_in_palm(t), radius);
    Eigen::VectorXd f(static_cast<Eigen::Index>(d.size()));
    for (std::size_t k = 0; k < d.size(); ++k) {
      const double clean = contact_force(d[k]);
      const double noise = scenario.tactile_noise * rng.normal();
      f[static_cast<Eigen::Index>(k)] = clean > 0.0 ? std::clamp(clean + noise, 0.0, 1.0) : 0.0;
    }
    forces.push_back(std::move(f));
  }

  auto& b = out.bundle;
  b.metadata.task = "grasp and lift " + scenario.object;
  b.metadata.operator_id = "synthetic";
  b.metadata.glove_model = "glove.urdf";
  b.streams.push_back(make_pose_stream("p_glove", pose_t, wrist));
  b.streams.push_back(make_pose_stream("p_object", pose_t, object));
  b.streams.push_back(make_vector_stream("j_glove", StreamKind::kJoint, joint_t, joints));
  b.streams.push_back(make_vector_stream("gamma_glove", StreamKind::kTactile, tactile_t, forces, SampleType::kF32));
  b.streams.push_back(make_vector_stream("grasp_phase", StreamKind::kScalar, pose_t, phase));
  b.streams[0].rate = b.streams[1].rate = b.streams[4].rate = scenario.pose_rate;
  b.streams[2].rate = scenario.joint_rate;
  b.streams[3].rate = scenario.tactile_rate;
  if (scenario.images) {
    TimedStream cam;
    cam.name = "cam0";
    cam.kind = StreamKind::kImage;
    cam.timestamps = pose_t;
    cam.rate = scenario.pose_rate;
    cam.frame_pattern = "cam0/{index}.ppm";
    b.streams.push_back(std::move(cam));
  }
  return out;
}

void write_synthetic_bundle(const fs::path& dir, const SyntheticDemo& demo) {
  write_bundle(dir, demo.bundle);
  write_file(dir / "glove.urdf", demo.glove_urdf);
  Image placeholder{2, 2, std::vector<std::uint8_t>(12, 128)};
  const std::string bytes = encode_ppm(placeholder);
  for (const auto& s : demo.bundle.streams) {
    if (s.kind != StreamKind::kImage) continue;
    for (std::size_t k = 0; k < s.length(); ++k) write_file(dir / image_frame_ref(s.frame_pattern, k), bytes);
  }
}

// ---------------------------------------------------------------------------

void ContactErrorReport::recompute_aggregate() {
  double weighted = 0.0;
  std::size_t samples = 0;
  for (const auto& o : objects) {
    weighted += o.mean_mm * static_cast<double>(o.samples);
    samples += o.samples;
  }
  aggregate_mean_mm = samples == 0 ? 0.0 : weighted / static_cast<double>(samples);
}

namespace {

std::vector<std::size_t> map_indices(const CorrespondenceMap& map, const RobotModel& dex) {
  std::vector<std::size_t> idx;
  idx.reserve(map.size());
  for (const auto& name : map.dex_sites) idx.push_back(dex.require_site(name));
  return idx;
}

void check_inputs(const RetargetResult& result, const Demonstration& demo, const RobotModel& glove,
                  const CorrespondenceMap& map) {
  const std::size_t t_len = demo.length();
  if (result.length() != t_len || result.p_dex.size() != t_len || demo.gamma_glove.size() != t_len) {
    throw DimensionMismatch("retarget result has " + std::to_string(result.length()) + " frames, demonstration has " +
                            std::to_string(t_len));
  }
  const std::size_t m = glove.site_names(SiteKind::kTactile).size();
  if (map.size() != m) {
    throw DimensionMismatch("correspondence covers " + std::to_string(map.size()) + " sensors, glove has " +
                            std::to_string(m));
  }
  for (std::size_t t = 0; t < t_len; ++t) {
    if (static_cast<std::size_t>(demo.gamma_glove[t].values.size()) != m) {
      throw DimensionMismatch("tactile frame " + std::to_string(t) + " does not match the glove sensor count");
    }
  }
}

}  // namespace

ContactErrorReport contact_error(const RetargetResult& result, const Demonstration& demo, const RobotModel& glove,
                                 const RobotModel& dex, const CorrespondenceMap& map, const std::string& object,
                                 const ContactGate& gate) {
  check_inputs(result, demo, glove, map);
  const auto dex_idx = map_indices(map, dex);
  const auto glove_pts = glove_tactile_points(demo, glove);

  ObjectContactStats stats;
  stats.object = object;
  std::vector<double> all;
  for (std::size_t t = 0; t < demo.length(); ++t) {
    const auto& forces = demo.gamma_glove[t].values;
    std::vector<std::size_t> admitted;
    for (std::size_t i = 0; i < map.size(); ++i) {
      if (gate.admits(forces[static_cast<Eigen::Index>(i)])) admitted.push_back(i);
    }
    if (admitted.empty()) continue;
    const auto dex_pts = dex_tactile_points(dex, result.j_dex[t], result.p_dex[t], dex_idx);
    double sum = 0.0;
    for (std::size_t i : admitted) {
      const double d = 1000.0 * site_discrepancy(glove_pts[t][i], dex_pts[i]);
      all.push_back(d);
      sum += d;
    }
    stats.per_frame.emplace_back(t, sum / static_cast<double>(admitted.size()));
  }
  stats.frames = stats.per_frame.size();
  stats.samples = all.size();
  if (!all.empty()) {
    double sum = 0.0;
    for (double d : all) sum += d;
    stats.mean_mm = sum / static_cast<double>(all.size());
    double var = 0.0;
    for (double d : all) var += (d - stats.mean_mm) * (d - stats.mean_mm);
    stats.std_mm = std::sqrt(var / static_cast<double>(all.size()));
    stats.max_mm = *std::max_element(all.begin(), all.end());
  }
  ContactErrorReport report;
  report.objects.push_back(std::move(stats));
  report.recompute_aggregate();
  return report;
}

ContactErrorReport merge_reports(const std::vector<ContactErrorReport>& reports) {
  ContactErrorReport out;
  for (const auto& r : reports) out.objects.insert(out.objects.end(), r.objects.begin(), r.objects.end());
  out.recompute_aggregate();
  return out;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string report_to_csv(const ContactErrorReport& report) {
  std::string out = "object,mean_mm,max_mm,std_mm,frames\n";
  for (const auto& o : report.objects) {
    out += csv_field(o.object) + "," + fixed6(o.mean_mm) + "," + fixed6(o.max_mm) + "," + fixed6(o.std_mm) + "," +
           std::to_string(o.frames) + "\n";
  }
  return out;
}

std::string report_to_json(const ContactErrorReport& report) {
  json doc;
  doc["published_reference"] = {{"mean_mm", ContactErrorReport::kPublishedReferenceMeanMm},
                                {"reproduced", false},
                                {"note", "reference value from real glove recordings; context only"}};
  doc["aggregate_mean_mm"] = report.aggregate_mean_mm;
  json objects = json::array();
  for (const auto& o : report.objects) {
    json series = json::array();
    for (const auto& [frame, mean] : o.per_frame) series.push_back({frame, mean});
    objects.push_back({{"object", o.object},
                       {"mean_mm", o.mean_mm},
                       {"max_mm", o.max_mm},
                       {"std_mm", o.std_mm},
                       {"frames", o.frames},
                       {"samples", o.samples},
                       {"per_frame", std::move(series)}});
  }
  doc["objects"] = std::move(objects);
  return doc.dump(2) + "\n";
}

ContactErrorReport parse_report_json(std::string_view document) {
  ContactErrorReport report;
  try {
    const json doc = json::parse(document);
    report.aggregate_mean_mm = doc.at("aggregate_mean_mm").get<double>();
    for (const auto& o : doc.at("objects")) {
      ObjectContactStats s;
      s.object = o.at("object").get<std::string>();
      s.mean_mm = o.at("mean_mm").get<double>();
      s.max_mm = o.at("max_mm").get<double>();
      s.std_mm = o.at("std_mm").get<double>();
      s.frames = o.at("frames").get<std::size_t>();
      s.samples = o.at("samples").get<std::size_t>();
      for (const auto& e : o.at("per_frame")) s.per_frame.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<double>());
      report.objects.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw SyntaxError(std::string("malformed contact report: ") + e.what());
  }
  return report;
}

void emit_report(const ContactErrorReport& report, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
  write_file(out_dir / "contact_error.csv", report_to_csv(report));
  write_file(out_dir / "contact_error.json", report_to_json(report));
}

// ---------------------------------------------------------------------------

GridOracleResult grid_search_contact_oracle(const RetargetResult& result, const Demonstration& demo,
                                            const RobotModel& glove, const RobotModel& dex,
                                            const CorrespondenceMap& map,
                                            const std::vector<std::vector<std::string>>& joint_groups,
                                            const std::vector<std::size_t>& frames, double step,
                                            const ContactGate& gate) {
  check_inputs(result, demo, glove, map);
  if (!(step > 0.0)) throw ConfigError("grid step must be positive");
  const auto dex_idx = map_indices(map, dex);

  // DOF indices per group and the group each mapped sensor moves with.
  std::vector<int> joint_group(dex.joints().size(), -1);
  std::vector<std::vector<Eigen::Index>> group_dofs;
  for (std::size_t g = 0; g < joint_groups.size(); ++g) {
    std::vector<Eigen::Index> dofs;
    for (const auto& name : joint_groups[g]) {
      const auto it = std::find_if(dex.joints().begin(), dex.joints().end(),
                                   [&](const Joint& j) { return j.name == name; });
      if (it == dex.joints().end()) throw ConfigError("unknown joint '" + name + "' in oracle group");
      const auto j = static_cast<std::size_t>(it - dex.joints().begin());
      if (dex.joint_dof(j) < 0) throw ConfigError("joint '" + name + "' is fixed");
      joint_group[j] = static_cast<int>(g);
      dofs.push_back(dex.joint_dof(j));
    }
    group_dofs.push_back(std::move(dofs));
  }
  std::vector<int> sensor_group;
  for (std::size_t s : dex_idx) {
    int group = -1;
    for (int pj = dex.parent_joint(*dex.link_index(dex.sites()[s].parent_link)); pj >= 0;
         pj = dex.parent_joint(dex.joint_parent_link(static_cast<std::size_t>(pj)))) {
      const int g = joint_group[static_cast<std::size_t>(pj)];
      if (g >= 0) {
        if (group >= 0 && group != g) throw ConfigError("oracle groups overlap on one sensor chain");
        group = g;
      }
    }
    sensor_group.push_back(group);
  }

  const JointVector lo = dex.lower_limits();
  const JointVector hi = dex.upper_limits();
  const auto glove_pts = glove_tactile_points(demo, glove);
  GridOracleResult res;
  double solver_sum = 0.0;
  double oracle_sum = 0.0;
  for (std::size_t t : frames) {
    if (t >= demo.length()) throw DimensionMismatch("oracle frame " + std::to_string(t) + " out of range");
    const auto& forces = demo.gamma_glove[t].values;
    std::vector<std::size_t> admitted;
    for (std::size_t i = 0; i < map.size(); ++i) {
      if (gate.admits(forces[static_cast<Eigen::Index>(i)])) admitted.push_back(i);
    }
    if (admitted.empty()) continue;
    const auto solver_pts = dex_tactile_points(dex, result.j_dex[t], result.p_dex[t], dex_idx);
    for (std::size_t i : admitted) {
      const double d = site_discrepancy(glove_pts[t][i], solver_pts[i]);
      solver_sum += d;
      if (sensor_group[i] < 0) oracle_sum += d;
    }
    res.samples += admitted.size();

    for (std::size_t g = 0; g < group_dofs.size(); ++g) {
      std::vector<std::size_t> sensors;
      for (std::size_t i : admitted) {
        if (sensor_group[i] == static_cast<int>(g)) sensors.push_back(i);
      }
      if (sensors.empty()) continue;
      const auto& dofs = group_dofs[g];
      std::vector<int> counts;
      for (Eigen::Index d : dofs) counts.push_back(static_cast<int>(std::floor((hi[d] - lo[d]) / step + 1e-9)) + 1);
      std::vector<int> k(dofs.size(), 0);
      double best = std::numeric_limits<double>::infinity();
      JointVector q = result.j_dex[t];
      while (true) {
        for (std::size_t a = 0; a < dofs.size(); ++a) q[dofs[a]] = lo[dofs[a]] + step * k[a];
        const FkResult fk = forward_kinematics(dex, q);
        double sum = 0.0;
        for (std::size_t i : sensors) {
          sum += site_discrepancy(glove_pts[t][i], result.p_dex[t] * site_pose(dex, fk, dex_idx[i]).translation);
        }
        best = std::min(best, sum);
        ++res.evaluated;
        std::size_t a = 0;
        while (a < k.size() && ++k[a] == counts[a]) k[a++] = 0;
        if (a == k.size()) break;
      }
      oracle_sum += best;
    }
  }
  if (res.samples > 0) {
    res.solver_mean_mm = 1000.0 * solver_sum / static_cast<double>(res.samples);
    res.oracle_mean_mm = 1000.0 * oracle_sum / static_cast<double>(res.samples);
  }
  return res;
}

}  // namespace dextac
