#include "dextac/correspondence.hpp"

#include <json.hpp>
#include <limits>

#include "dextac/errors.hpp"

namespace dextac {

CorrespondenceMap same_name_map(const RobotModel& glove, const RobotModel& dex) {
  CorrespondenceMap map;
  for (const auto& name : glove.site_names(SiteKind::kTactile)) {
    dex.require_site(name);
    map.dex_sites.push_back(name);
  }
  return map;
}

CorrespondenceMap nearest_neighbor_map(const RobotModel& glove, const RobotModel& dex) {
  const FkResult glove_fk = forward_kinematics(glove, glove.mid_range());
  const FkResult dex_fk = forward_kinematics(dex, dex.mid_range());
  std::vector<std::size_t> dex_candidates;
  for (std::size_t i = 0; i < dex.sites().size(); ++i) {
    if (dex.sites()[i].kind == SiteKind::kTactile) dex_candidates.push_back(i);
  }
  if (dex_candidates.empty()) throw ModelError("dex model '" + dex.name() + "' has no tactile sites");

  CorrespondenceMap map;
  map.source = CorrespondenceMap::Source::kNearestNeighborCanonical;
  for (std::size_t g = 0; g < glove.sites().size(); ++g) {
    if (glove.sites()[g].kind != SiteKind::kTactile) continue;
    const Eigen::Vector3d p = site_pose(glove, glove_fk, g).translation;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_site = dex_candidates.front();
    for (std::size_t d : dex_candidates) {
      const double dist = (site_pose(dex, dex_fk, d).translation - p).norm();
      if (dist < best) {
        best = dist;
        best_site = d;
      }
    }
    map.dex_sites.push_back(dex.sites()[best_site].name);
  }
  return map;
}

CorrespondenceMap parse_correspondence_json(std::string_view document, std::size_t glove_sites) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw SyntaxError(std::string("malformed correspondence map: ") + e.what());
  }
  if (!doc.is_object()) throw SyntaxError("correspondence map must be a JSON object");
  CorrespondenceMap map;
  map.dex_sites.assign(glove_sites, {});
  std::vector<bool> seen(glove_sites, false);
  for (const auto& [key, value] : doc.items()) {
    std::size_t idx = 0;
    try {
      std::size_t used = 0;
      idx = std::stoul(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw SyntaxError("correspondence key '" + key + "' is not a sensor index");
    }
    if (idx >= glove_sites) {
      throw ConfigError("correspondence key " + key + " exceeds glove sensor count " +
                        std::to_string(glove_sites));
    }
    if (!value.is_string()) throw SyntaxError("correspondence value for " + key + " must be a site name");
    map.dex_sites[idx] = value.get<std::string>();
    seen[idx] = true;
  }
  for (std::size_t i = 0; i < glove_sites; ++i) {
    if (!seen[i]) throw ConfigError("correspondence map misses glove sensor " + std::to_string(i));
  }
  return map;
}

std::string correspondence_to_json(const CorrespondenceMap& map) {
  nlohmann::json doc = nlohmann::json::object();
  for (std::size_t i = 0; i < map.dex_sites.size(); ++i) doc[std::to_string(i)] = map.dex_sites[i];
  return doc.dump(2);
}

void validate_correspondence(const CorrespondenceMap& map, std::size_t glove_sites,
                             const RobotModel& dex) {
  if (map.size() != glove_sites) {
    throw DimensionMismatch("correspondence map covers " + std::to_string(map.size()) +
                            " sensors, glove has " + std::to_string(glove_sites));
  }
  for (const auto& name : map.dex_sites) dex.require_site(name);
}

}  // namespace dextac
