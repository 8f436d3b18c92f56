#include "csiwb/export.hpp"

#include <fmt/format.h>

#include <bit>
#include <fstream>
#include <json.hpp>

#include "csiwb/csi/analysis.hpp"
#include "csiwb/csi/stitch.hpp"

namespace csiwb::io {

const char* to_string(PlotKind kind) {
  switch (kind) {
    case PlotKind::Mag:
      return "mag";
    case PlotKind::Phase:
      return "phase";
    case PlotKind::Template:
      return "template";
    case PlotKind::Stitched:
      return "stitched";
  }
  return "?";
}

PlotKind plot_kind_from_string(const std::string& text) {
  for (PlotKind k : {PlotKind::Mag, PlotKind::Phase, PlotKind::Template, PlotKind::Stitched})
    if (text == to_string(k)) return k;
  throw DomainError("unknown plot kind '" + text + "' (mag, phase, template, stitched)");
}

std::string export_plotdata(const Capture& cap, PlotKind kind, const std::optional<csi::DistortionTemplate>& tmpl) {
  std::string out = std::string(kPlotHeader) + "\n";
  if (cap.records.empty() && !(kind == PlotKind::Template && tmpl)) return out;
  std::vector<csi::CsiFrame> frames;
  frames.reserve(cap.records.size());
  for (const auto& r : cap.records) frames.push_back(frame_from_record(r));

  switch (kind) {
    case PlotKind::Mag:
      for (std::size_t i = 0; i < frames.size(); ++i)
        for (std::size_t k = 0; k < frames[i].grid.size(); ++k)
          out += fmt::format("{},{:.6f},{}\n", frames[i].grid.indices[k], db20(std::abs(frames[i].values[k])), i);
      break;
    case PlotKind::Phase:
      for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto ph = csi::unwrapped_phase(frames[i].values);
        for (std::size_t k = 0; k < frames[i].grid.size(); ++k)
          out += fmt::format("{},{:.6f},{}\n", frames[i].grid.indices[k], ph[k], i);
      }
      break;
    case PlotKind::Template: {
      const csi::DistortionTemplate t = tmpl ? *tmpl : csi::build_distortion_template(frames);
      for (std::size_t k = 0; k < t.grid.size(); ++k) out += fmt::format("{},{:.6f},mag_db\n", t.grid.indices[k], t.mag_db[k]);
      for (std::size_t k = 0; k < t.grid.size(); ++k)
        out += fmt::format("{},{:.6f},phase_rad\n", t.grid.indices[k], t.phase_rad[k]);
      break;
    }
    case PlotKind::Stitched: {
      const csi::StitchResult s = csi::stitch(frames);
      for (std::size_t k = 0; k < s.freq.size(); ++k) out += fmt::format("{:.3f},{:.6f},mag_db\n", s.freq[k], db20(std::abs(s.values[k])));
      const auto ph = csi::unwrapped_phase(s.values);
      for (std::size_t k = 0; k < s.freq.size(); ++k) out += fmt::format("{:.3f},{:.6f},phase_rad\n", s.freq[k], ph[k]);
      break;
    }
  }
  return out;
}

void write_iq(const std::string& path, const phy::BasebandBurst& burst) {
  std::vector<char> bytes;
  bytes.reserve(burst.size() * 8);
  auto put = [&](float f) {
    const auto u = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>(u >> (8 * i)));
  };
  for (const auto& s : burst.samples) {
    put(static_cast<float>(s.real()));
    put(static_cast<float>(s.imag()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write I/Q file '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  nlohmann::ordered_json meta = {{"format", "cf32_le"},
                                 {"sample_rate_hz", burst.sample_rate},
                                 {"center_freq_hz", burst.center_freq},
                                 {"n_samples", burst.size()}};
  std::ofstream side(path + ".json");
  if (!side) throw std::runtime_error("cannot write I/Q sidecar '" + path + ".json'");
  side << meta.dump(2) << "\n";
}

phy::BasebandBurst read_iq(const std::string& path) {
  std::ifstream side(path + ".json");
  if (!side) throw std::runtime_error("cannot read I/Q sidecar '" + path + ".json'");
  const auto meta = nlohmann::json::parse(side);
  phy::BasebandBurst b;
  b.sample_rate = meta.at("sample_rate_hz").get<double>();
  b.center_freq = meta.at("center_freq_hz").get<double>();
  const auto n = meta.at("n_samples").get<std::size_t>();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read I/Q file '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != n * 8) throw DomainError("I/Q file size does not match its sidecar");
  auto get = [&](std::size_t off) {
    std::uint32_t u = 0;
    for (int i = 0; i < 4; ++i) u |= std::uint32_t{bytes[off + static_cast<std::size_t>(i)]} << (8 * i);
    return static_cast<double>(std::bit_cast<float>(u));
  };
  b.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) b.samples[i] = {get(8 * i), get(8 * i + 4)};
  return b;
}

}  // namespace csiwb::io
