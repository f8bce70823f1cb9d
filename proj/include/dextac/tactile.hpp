#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dextac/correspondence.hpp"
#include "dextac/demonstration.hpp"
#include "dextac/kinmodel.hpp"

namespace dextac {

enum class AttenuationConvention {
  /// Factor 1/(1 + exp(+alpha (delta - beta))): close sites keep their signal.
  kProse,
  /// Factor 1/(1 + exp(-alpha (delta - beta))), the formula as printed.
  kVerbatim,
};

struct AttenuationParams {
  double alpha = 2000.0;  ///< 1/m, i.e. 20 per cm
  double beta = 0.0075;   ///< m
  AttenuationConvention convention = AttenuationConvention::kProse;
};

/// Readings below the threshold are treated as sensor noise and zeroed.
struct ContactGate {
  double force_threshold = 0.02;

  bool admits(double force) const { return force >= force_threshold; }
};

AttenuationConvention convention_from_string(std::string_view s);
std::string_view to_string(AttenuationConvention c);

/// Euclidean distance between corresponding glove and dex tactile points, m.
double site_discrepancy(const Eigen::Vector3d& glove_point, const Eigen::Vector3d& dex_point);

double attenuation_factor(double delta, const AttenuationParams& params);

/// gamma * attenuation_factor(delta); gamma is clamped into [0, 1].
double attenuate(double gamma, double delta, const AttenuationParams& params);

/// World positions of the glove tactile sites for every frame of the demo.
std::vector<std::vector<Eigen::Vector3d>> glove_tactile_points(const Demonstration& demo,
                                                               const RobotModel& glove);

/// World positions of the mapped dex sites under (j_dex, p_dex).
std::vector<Eigen::Vector3d> dex_tactile_points(const RobotModel& dex, const JointVector& j_dex,
                                                const RigidTransform& p_dex,
                                                const std::vector<std::size_t>& dex_site_indices);

/// Synthesizes the dex-hand tactile trajectory: per sensor, the glove reading
/// attenuated by the distance between the glove point and its mapped dex
/// point. Gated-out sensors output exactly 0.
std::vector<TactileFrame> retarget_tactile_trajectory(
    const Demonstration& demo, const RobotModel& glove, const RobotModel& dex,
    const std::vector<JointVector>& j_dex, const std::vector<RigidTransform>& p_dex,
    const CorrespondenceMap& map, const AttenuationParams& params, const ContactGate& gate);

// ---------------------------------------------------------------------------
// Heatmaps

/// Sensor i is drawn in cell cells[i] = (row, col) of a height x width grid.
struct HeatmapLayout {
  int height = 0;
  int width = 0;
  std::vector<std::pair<int, int>> cells;
};

struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;  ///< row-major, 3 bytes per pixel
};

/// Row-major grid with `width` sensors per row.
HeatmapLayout grid_layout(std::size_t sensors, int width);

/// Throws LayoutError for sensors without a cell, cells outside the grid or
/// shared cells.
void validate_layout(const HeatmapLayout& layout, std::size_t sensors);

/// {"H": h, "W": w, "cells": {"<sensor>": [row, col], ...}}
HeatmapLayout parse_layout_json(std::string_view document);
std::string layout_to_json(const HeatmapLayout& layout);

/// Cell color (round(255 v), 0, round(255 (1 - v))), rounding half away from
/// zero; unassigned cells black.
Image rasterize_heatmap(const TactileFrame& frame, const HeatmapLayout& layout);

/// Binary PPM (P6, maxval 255).
std::string encode_ppm(const Image& image);

}  // namespace dextac
