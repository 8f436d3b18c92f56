#pragma once

// Plot-ready CSV exports and raw I/Q sample files.

#include <optional>
#include <string>

#include "csiwb/capture.hpp"
#include "csiwb/csi/distortion.hpp"
#include "csiwb/phy/frame.hpp"

namespace csiwb::io {

enum class PlotKind { Mag, Phase, Template, Stitched };
const char* to_string(PlotKind kind);
PlotKind plot_kind_from_string(const std::string& text);

inline constexpr const char* kPlotHeader = "subcarrier_or_freq,value,series_id";

/// CSV with columns subcarrier_or_freq,value,series_id.
///   mag:      subcarrier index, |H| in dB, record number
///   phase:    subcarrier index, unwrapped phase in rad, record number
///   template: subcarrier index, template value, "mag_db" or "phase_rad"
///   stitched: tone frequency in Hz, value, "mag_db" or "phase_rad"
/// Rows follow record order, then tone order. An empty capture yields the header only.
/// `tmpl` overrides the template built from the capture for kind = template.
std::string export_plotdata(const Capture& cap, PlotKind kind,
                            const std::optional<csi::DistortionTemplate>& tmpl = std::nullopt);

/// Interleaved little-endian float32 I/Q at `path` plus `path + ".json"`
/// holding sample_rate_hz, center_freq_hz and n_samples.
void write_iq(const std::string& path, const phy::BasebandBurst& burst);
phy::BasebandBurst read_iq(const std::string& path);

}  // namespace csiwb::io
