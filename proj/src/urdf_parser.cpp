#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fstream>
#include <locale>
#include <json.hpp>
#include <sstream>

#include "dextac/errors.hpp"
#include "dextac/kinmodel.hpp"

namespace dextac {

namespace {

namespace pt = boost::property_tree;

std::vector<double> parse_numbers(const std::string& text, std::size_t expected, const std::string& context) {
  std::istringstream in(text);
  in.imbue(std::locale::classic());
  std::vector<double> out;
  double v = 0.0;
  while (in >> v) out.push_back(v);
  if (!in.eof() || out.size() != expected) {
    throw SyntaxError(context + ": expected " + std::to_string(expected) + " numbers, got '" + text + "'");
  }
  return out;
}

Eigen::Vector3d parse_vec3(const std::string& text, const std::string& context) {
  const auto v = parse_numbers(text, 3, context);
  return {v[0], v[1], v[2]};
}

double parse_scalar(const std::string& text, const std::string& context) {
  return parse_numbers(text, 1, context)[0];
}

std::optional<std::string> attribute(const pt::ptree& node, const std::string& key) {
  if (auto attrs = node.get_child_optional("<xmlattr>")) {
    if (auto v = attrs->get_optional<std::string>(key)) return *v;
  }
  return std::nullopt;
}

std::string required_attribute(const pt::ptree& node, const std::string& key, const std::string& context) {
  if (auto v = attribute(node, key)) return *v;
  throw SyntaxError(context + ": missing attribute '" + key + "'");
}

bool is_meta(const std::string& tag) { return tag == "<xmlattr>" || tag == "<xmlcomment>"; }

bool is_site_tag(const std::string& tag) {
  if (tag == "site") return true;
  const auto colon = tag.rfind(':');
  return colon != std::string::npos && tag.substr(colon + 1) == "site";
}

RigidTransform parse_origin(const pt::ptree& node, const std::string& context) {
  Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
  Eigen::Vector3d rpy = Eigen::Vector3d::Zero();
  if (auto v = attribute(node, "xyz")) xyz = parse_vec3(*v, context + " xyz");
  if (auto v = attribute(node, "rpy")) rpy = parse_vec3(*v, context + " rpy");
  return RigidTransform::from_xyz_rpy(xyz, rpy);
}

Site parse_site(const pt::ptree& node) {
  Site site;
  site.name = required_attribute(node, "name", "site");
  const std::string ctx = "site '" + site.name + "'";
  site.parent_link = required_attribute(node, "parent", ctx);
  site.offset = parse_origin(node, ctx);
  if (auto k = attribute(node, "kind")) site.kind = site_kind_from_string(*k);
  if (auto d = attribute(node, "dir")) site.local_direction = parse_vec3(*d, ctx + " dir");
  return site;
}

Joint parse_joint(const pt::ptree& node, std::vector<std::string>& warnings) {
  Joint joint;
  joint.name = required_attribute(node, "name", "joint");
  const std::string ctx = "joint '" + joint.name + "'";
  const std::string type = required_attribute(node, "type", ctx);
  if (type == "revolute") {
    joint.type = JointType::kRevolute;
  } else if (type == "prismatic") {
    joint.type = JointType::kPrismatic;
  } else if (type == "fixed") {
    joint.type = JointType::kFixed;
  } else {
    throw ModelError(ctx + ": unsupported joint type '" + type + "'");
  }
  bool has_parent = false;
  bool has_child = false;
  bool has_limit = false;
  for (const auto& [tag, child] : node) {
    if (is_meta(tag)) continue;
    if (tag == "origin") {
      joint.origin = parse_origin(child, ctx + " origin");
    } else if (tag == "parent") {
      joint.parent = required_attribute(child, "link", ctx + " parent");
      has_parent = true;
    } else if (tag == "child") {
      joint.child = required_attribute(child, "link", ctx + " child");
      has_child = true;
    } else if (tag == "axis") {
      joint.axis = parse_vec3(required_attribute(child, "xyz", ctx + " axis"), ctx + " axis");
    } else if (tag == "limit") {
      auto lower = attribute(child, "lower");
      auto upper = attribute(child, "upper");
      if (lower && upper) {
        joint.lower = parse_scalar(*lower, ctx + " lower limit");
        joint.upper = parse_scalar(*upper, ctx + " upper limit");
        has_limit = true;
      }
    } else {
      warnings.push_back(ctx + ": ignored <" + tag + ">");
    }
  }
  if (!has_parent || !has_child) throw ModelError(ctx + ": missing parent or child link");
  if (joint.type != JointType::kFixed && !has_limit) {
    throw ModelError(ctx + ": non-fixed joint requires <limit lower=.. upper=..>");
  }
  return joint;
}

}  // namespace

RobotModel parse_robot_model(std::string_view document) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(document)};
    pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw SyntaxError(std::string("malformed robot description: ") + e.what());
  }
  auto robot = tree.get_child_optional("robot");
  if (!robot) throw SyntaxError("robot description has no <robot> root element");

  std::string name = attribute(*robot, "name").value_or("robot");
  std::vector<Link> links;
  std::vector<Joint> joints;
  std::vector<Site> sites;
  std::vector<std::string> warnings;
  for (const auto& [tag, node] : *robot) {
    if (is_meta(tag)) continue;
    if (tag == "link") {
      Link link{required_attribute(node, "name", "link")};
      for (const auto& [sub, unused] : node) {
        if (!is_meta(sub)) warnings.push_back("link '" + link.name + "': ignored <" + sub + ">");
      }
      links.push_back(std::move(link));
    } else if (tag == "joint") {
      joints.push_back(parse_joint(node, warnings));
    } else if (is_site_tag(tag)) {
      sites.push_back(parse_site(node));
    } else {
      warnings.push_back("ignored <" + tag + ">");
    }
  }
  return RobotModel(std::move(name), std::move(links), std::move(joints), std::move(sites),
                    std::move(warnings));
}

std::vector<Site> parse_sites_json(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw SyntaxError(std::string("malformed site file: ") + e.what());
  }
  if (!doc.is_array()) throw SyntaxError("site file must hold a JSON array");

  auto vec3 = [](const nlohmann::json& v, const std::string& ctx) -> Eigen::Vector3d {
    if (v.is_string()) return parse_vec3(v.get<std::string>(), ctx);
    if (!v.is_array() || v.size() != 3) throw SyntaxError(ctx + ": expected 3 numbers");
    Eigen::Vector3d out;
    for (int i = 0; i < 3; ++i) {
      if (!v[i].is_number()) throw SyntaxError(ctx + ": expected 3 numbers");
      out[i] = v[i].get<double>();
    }
    return out;
  };

  std::vector<Site> sites;
  for (const auto& rec : doc) {
    if (!rec.is_object() || !rec.contains("name") || !rec.contains("parent") ||
        !rec["name"].is_string() || !rec["parent"].is_string()) {
      throw SyntaxError("site record needs string fields 'name' and 'parent'");
    }
    Site site;
    site.name = rec["name"].get<std::string>();
    site.parent_link = rec["parent"].get<std::string>();
    const std::string ctx = "site '" + site.name + "'";
    const Eigen::Vector3d xyz = rec.contains("xyz") ? vec3(rec["xyz"], ctx + " xyz") : Eigen::Vector3d::Zero();
    const Eigen::Vector3d rpy = rec.contains("rpy") ? vec3(rec["rpy"], ctx + " rpy") : Eigen::Vector3d::Zero();
    site.offset = RigidTransform::from_xyz_rpy(xyz, rpy);
    if (rec.contains("kind")) site.kind = site_kind_from_string(rec["kind"].get<std::string>());
    if (rec.contains("dir")) site.local_direction = vec3(rec["dir"], ctx + " dir");
    sites.push_back(std::move(site));
  }
  return sites;
}

RobotModel load_robot_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open robot description '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_robot_model(buf.str());
}

}  // namespace dextac
