#pragma once

#include <span>
#include <string>

#include "csiwb/csi/csi_frame.hpp"

namespace csiwb::csi {

/// Averaged front-end distortion of one Tx/Rx/mode/bandwidth combination.
struct DistortionTemplate {
  SubcarrierGrid grid;
  std::vector<double> mag_db;
  std::vector<double> phase_rad;  // unwrapped, zero mean and zero slope
  std::size_t n_frames = 0;
  ComboKey combo_key;
};

DistortionTemplate build_distortion_template(std::span<const CsiFrame> frames);
/// Divides the template out in the magnitude and phase domains.
CsiFrame remove_distortion(const CsiFrame& frame, const DistortionTemplate& tmpl);

/// Versioned text form with a combo-key header.
std::string serialize_template(const DistortionTemplate& tmpl);
DistortionTemplate parse_template(const std::string& text);
void save_template(const std::string& path, const DistortionTemplate& tmpl);
DistortionTemplate load_template(const std::string& path);

enum class DistortionType { Flat, Type1, Type2, Type3, Unclassified };
const char* to_string(DistortionType type);

/// Shape measurements of a magnitude profile (dB over grid positions).
struct ShapeMetrics {
  double range_db = 0.0;
  double left_peak_db = 0.0;   // max over the lower half of the grid
  double right_peak_db = 0.0;  // max over the upper half
  std::size_t left_peak_pos = 0;
  std::size_t right_peak_pos = 0;
  std::size_t argmax_pos = 0;
  double center_db = 0.0;  // mean over the central tones
  double center_dip_db = 0.0;  // min(shoulders) - center
  double edge_drop_db = 0.0;  // max(shoulders) - max(edges)
  double shoulder_asymmetry_db = 0.0;  // |left_peak - right_peak|
  double edge_asymmetry_db = 0.0;      // |mean of first n/8 tones - mean of last n/8|
  double asymmetry_db = 0.0;           // max of the two
  bool central_max = false;    // argmax within the middle quarter of the grid
  bool decreasing_to_edges = false;
};

struct ClassifyThresholds {
  double flat_range_db = 0.5;
  double asymmetry_db = 1.5;
  double center_dip_db = 0.5;
  double edge_drop_db = 3.0;
};

ShapeMetrics shape_metrics(std::span<const double> mag_db);
DistortionType classify_distortion(std::span<const double> mag_db, const ClassifyThresholds& th = {});
DistortionType classify_distortion(const DistortionTemplate& tmpl, const ClassifyThresholds& th = {});

}  // namespace csiwb::csi
