#include "dextac/tactile.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <set>

#include "dextac/errors.hpp"

namespace dextac {

AttenuationConvention convention_from_string(std::string_view s) {
  if (s == "prose") return AttenuationConvention::kProse;
  if (s == "verbatim") return AttenuationConvention::kVerbatim;
  throw ConfigError("unknown attenuation convention '" + std::string(s) + "'");
}

std::string_view to_string(AttenuationConvention c) {
  return c == AttenuationConvention::kProse ? "prose" : "verbatim";
}

double site_discrepancy(const Eigen::Vector3d& glove_point, const Eigen::Vector3d& dex_point) {
  return (glove_point - dex_point).norm();
}

double attenuation_factor(double delta, const AttenuationParams& params) {
  const double x = params.alpha * (delta - params.beta);
  const double exponent = params.convention == AttenuationConvention::kProse ? x : -x;
  return 1.0 / (1.0 + std::exp(exponent));
}

double attenuate(double gamma, double delta, const AttenuationParams& params) {
  return std::clamp(gamma, 0.0, 1.0) * attenuation_factor(delta, params);
}

std::vector<std::vector<Eigen::Vector3d>> glove_tactile_points(const Demonstration& demo,
                                                               const RobotModel& glove) {
  std::vector<std::size_t> sites;
  for (std::size_t i = 0; i < glove.sites().size(); ++i) {
    if (glove.sites()[i].kind == SiteKind::kTactile) sites.push_back(i);
  }
  std::vector<std::vector<Eigen::Vector3d>> out;
  out.reserve(demo.length());
  for (std::size_t t = 0; t < demo.length(); ++t) {
    const FkResult fk = forward_kinematics(glove, demo.j_glove[t]);
    std::vector<Eigen::Vector3d> pts;
    pts.reserve(sites.size());
    for (std::size_t s : sites) pts.push_back(demo.p_glove[t] * site_pose(glove, fk, s).translation);
    out.push_back(std::move(pts));
  }
  return out;
}

std::vector<Eigen::Vector3d> dex_tactile_points(const RobotModel& dex, const JointVector& j_dex,
                                                const RigidTransform& p_dex,
                                                const std::vector<std::size_t>& dex_site_indices) {
  const FkResult fk = forward_kinematics(dex, j_dex);
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(dex_site_indices.size());
  for (std::size_t s : dex_site_indices) pts.push_back(p_dex * site_pose(dex, fk, s).translation);
  return pts;
}

std::vector<TactileFrame> retarget_tactile_trajectory(
    const Demonstration& demo, const RobotModel& glove, const RobotModel& dex,
    const std::vector<JointVector>& j_dex, const std::vector<RigidTransform>& p_dex,
    const CorrespondenceMap& map, const AttenuationParams& params, const ContactGate& gate) {
  demo.validate();
  const std::size_t t_len = demo.length();
  if (j_dex.size() != t_len || p_dex.size() != t_len) {
    throw DimensionMismatch("dex trajectory length differs from demonstration length " +
                            std::to_string(t_len));
  }
  const std::size_t m = glove.site_names(SiteKind::kTactile).size();
  validate_correspondence(map, m, dex);
  std::vector<std::size_t> dex_sites;
  for (const auto& name : map.dex_sites) dex_sites.push_back(dex.require_site(name));

  const auto glove_pts = glove_tactile_points(demo, glove);
  std::vector<TactileFrame> out;
  out.reserve(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    const Eigen::VectorXd& gamma = demo.gamma_glove[t].values;
    if (static_cast<std::size_t>(gamma.size()) != m) {
      throw DimensionMismatch("tactile frame " + std::to_string(t) + " has " +
                              std::to_string(gamma.size()) + " sensors, glove has " + std::to_string(m));
    }
    const auto dex_pts = dex_tactile_points(dex, j_dex[t], p_dex[t], dex_sites);
    TactileFrame frame;
    frame.timestamp = demo.timestamps[t];
    frame.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
      if (!gate.admits(gamma[i])) continue;
      const double delta = site_discrepancy(glove_pts[t][i], dex_pts[i]);
      frame.values[i] = std::clamp(attenuate(gamma[i], delta, params), 0.0, 1.0);
    }
    out.push_back(std::move(frame));
  }
  return out;
}

// ---------------------------------------------------------------------------

HeatmapLayout grid_layout(std::size_t sensors, int width) {
  if (width <= 0) throw LayoutError("grid width must be positive");
  HeatmapLayout layout;
  layout.width = width;
  layout.height = static_cast<int>((sensors + width - 1) / width);
  for (std::size_t i = 0; i < sensors; ++i) {
    layout.cells.emplace_back(static_cast<int>(i) / width, static_cast<int>(i) % width);
  }
  return layout;
}

void validate_layout(const HeatmapLayout& layout, std::size_t sensors) {
  if (layout.height <= 0 || layout.width <= 0) throw LayoutError("layout grid must be non-empty");
  if (layout.cells.size() < sensors) {
    throw LayoutError("sensor " + std::to_string(layout.cells.size()) + " has no layout cell");
  }
  std::set<std::pair<int, int>> used;
  for (std::size_t i = 0; i < layout.cells.size(); ++i) {
    const auto [r, c] = layout.cells[i];
    if (r < 0 || c < 0 || r >= layout.height || c >= layout.width) {
      throw LayoutError("cell of sensor " + std::to_string(i) + " lies outside the grid");
    }
    if (!used.insert(layout.cells[i]).second) {
      throw LayoutError("sensor " + std::to_string(i) + " overlaps another sensor's cell");
    }
  }
}

HeatmapLayout parse_layout_json(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw SyntaxError(std::string("malformed heatmap layout: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("H") || !doc.contains("W") || !doc.contains("cells") ||
      !doc["cells"].is_object()) {
    throw LayoutError("layout needs integer H, W and a cells object");
  }
  HeatmapLayout layout;
  layout.height = doc["H"].get<int>();
  layout.width = doc["W"].get<int>();
  const auto& cells = doc["cells"];
  layout.cells.assign(cells.size(), {-1, -1});
  for (const auto& [key, rc] : cells.items()) {
    std::size_t idx = 0;
    try {
      idx = std::stoul(key);
    } catch (const std::exception&) {
      throw LayoutError("layout key '" + key + "' is not a sensor index");
    }
    if (idx >= layout.cells.size()) throw LayoutError("sensor indices in layout are not contiguous");
    if (!rc.is_array() || rc.size() != 2) throw LayoutError("cell of sensor " + key + " must be [row, col]");
    layout.cells[idx] = {rc[0].get<int>(), rc[1].get<int>()};
  }
  return layout;
}

std::string layout_to_json(const HeatmapLayout& layout) {
  nlohmann::json doc;
  doc["H"] = layout.height;
  doc["W"] = layout.width;
  nlohmann::json cells = nlohmann::json::object();
  for (std::size_t i = 0; i < layout.cells.size(); ++i) {
    cells[std::to_string(i)] = {layout.cells[i].first, layout.cells[i].second};
  }
  doc["cells"] = cells;
  return doc.dump(2);
}

Image rasterize_heatmap(const TactileFrame& frame, const HeatmapLayout& layout) {
  const auto m = static_cast<std::size_t>(frame.values.size());
  validate_layout(layout, m);
  Image img;
  img.height = layout.height;
  img.width = layout.width;
  img.rgb.assign(static_cast<std::size_t>(img.height) * img.width * 3, 0);
  for (std::size_t i = 0; i < m; ++i) {
    const double v = std::clamp(frame.values[i], 0.0, 1.0);
    const auto [r, c] = layout.cells[i];
    const std::size_t px = (static_cast<std::size_t>(r) * img.width + c) * 3;
    img.rgb[px + 0] = static_cast<std::uint8_t>(std::round(255.0 * v));
    img.rgb[px + 1] = 0;
    img.rgb[px + 2] = static_cast<std::uint8_t>(std::round(255.0 * (1.0 - v)));
  }
  return img;
}

std::string encode_ppm(const Image& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.rgb.data()), image.rgb.size());
  return out;
}

}  // namespace dextac
