#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "dextac/kinmodel.hpp"
#include "dextac/rigid_transform.hpp"

namespace dextac {

/// Normalized force readings, one entry per sensor, each in [0, 1].
struct TactileFrame {
  Eigen::VectorXd values;
  double timestamp = 0.0;
};

/// Per-camera list of frame references. Pixels are never decoded.
struct CameraStream {
  std::string name;
  std::vector<std::string> frames;
};

struct DemoMetadata {
  std::string task;
  std::string operator_id;
  /// Rate of the synchronized timeline, Hz.
  double rate = 30.0;
  /// Native rate of every raw stream, Hz.
  std::map<std::string, double> native_rates;
  /// Robot description of the glove, relative to the bundle directory.
  std::string glove_model;
};

/// A synchronized multimodal recording: every trajectory has the same length
/// and shares `timestamps`.
struct Demonstration {
  std::vector<double> timestamps;
  std::vector<CameraStream> images;
  std::vector<JointVector> j_glove;
  std::vector<RigidTransform> p_glove;
  std::vector<TactileFrame> gamma_glove;
  std::vector<RigidTransform> p_object;
  /// Additional scalar streams, resampled alongside.
  std::map<std::string, std::vector<double>> scalars;
  DemoMetadata metadata;

  std::size_t length() const { return timestamps.size(); }
  /// Throws LengthMismatch if any trajectory differs from timestamps in length
  /// or the demonstration is empty.
  void validate() const;
};

}  // namespace dextac
