#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dextac/kinmodel.hpp"

namespace dextac {

/// Maps every glove tactile site (by index among the glove's tactile sites,
/// in declaration order) to a dex-hand site name.
struct CorrespondenceMap {
  enum class Source { kStaticAnatomical, kNearestNeighborCanonical };

  std::vector<std::string> dex_sites;
  Source source = Source::kStaticAnatomical;

  std::size_t size() const { return dex_sites.size(); }
};

/// Glove tactile site i -> dex site with the same name.
CorrespondenceMap same_name_map(const RobotModel& glove, const RobotModel& dex);

/// Glove tactile site i -> dex tactile site nearest to it when both hands sit
/// at their mid-range configuration, each measured in its own base frame.
/// Ties resolve to the first dex site in declaration order.
CorrespondenceMap nearest_neighbor_map(const RobotModel& glove, const RobotModel& dex);

/// JSON object {"<glove index>": "<dex site>", ...}. Throws SyntaxError or
/// ConfigError when the map is not total over `glove_sites` entries.
CorrespondenceMap parse_correspondence_json(std::string_view document, std::size_t glove_sites);

std::string correspondence_to_json(const CorrespondenceMap& map);

/// Throws DimensionMismatch when the map does not cover `glove_sites`
/// entries and UnknownSite when a dex site is missing.
void validate_correspondence(const CorrespondenceMap& map, std::size_t glove_sites,
                             const RobotModel& dex);

}  // namespace dextac
