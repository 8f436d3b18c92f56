#include "csiwb/csi/distortion.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "csiwb/csi/analysis.hpp"

namespace csiwb::csi {

namespace {

constexpr const char* kTemplateMagic = "csiwb-template";
constexpr int kTemplateVersion = 1;

}  // namespace

DistortionTemplate build_distortion_template(std::span<const CsiFrame> frames) {
  if (frames.empty()) throw DomainError("template needs at least one frame");
  const ComboKey key = combo_key_of(frames[0]);
  DistortionTemplate t;
  t.grid = frames[0].grid;
  t.combo_key = key;
  t.n_frames = frames.size();
  const std::size_t n = t.grid.size();
  t.mag_db.assign(n, 0.0);
  t.phase_rad.assign(n, 0.0);
  for (const auto& f : frames) {
    f.validate();
    if (!(combo_key_of(f) == key)) throw DomainError("template frames mix Tx/Rx/mode/bandwidth combinations");
    if (f.grid.indices != t.grid.indices) throw DomainError("template frames use different subcarrier grids");
    const LinearFit fit = detrend_linear(unwrapped_phase(f.values), f.grid.indices);
    for (std::size_t k = 0; k < n; ++k) {
      t.mag_db[k] += db20(std::abs(f.values[k]));
      t.phase_rad[k] += fit.detrended[k];
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    t.mag_db[k] /= static_cast<double>(frames.size());
    t.phase_rad[k] /= static_cast<double>(frames.size());
  }
  t.phase_rad = detrend_linear(t.phase_rad, t.grid.indices).detrended;
  return t;
}

CsiFrame remove_distortion(const CsiFrame& frame, const DistortionTemplate& tmpl) {
  frame.validate();
  if (!(combo_key_of(frame) == tmpl.combo_key))
    throw DomainError("frame combination does not match the template's");
  if (frame.grid.indices != tmpl.grid.indices) throw DomainError("frame grid does not match the template grid");
  CsiFrame out = frame;
  for (std::size_t k = 0; k < frame.values.size(); ++k) {
    const Complex v = frame.values[k];
    const double mag = db20(std::abs(v)) - tmpl.mag_db[k];
    out.values[k] = std::polar(std::pow(10.0, mag / 20.0), std::arg(v) - tmpl.phase_rad[k]);
  }
  return out;
}

std::string serialize_template(const DistortionTemplate& t) {
  std::string out = fmt::format("{} {}\n", kTemplateMagic, kTemplateVersion);
  out += fmt::format("tx_id = {}\nrx_id = {}\n", t.combo_key.tx_id, t.combo_key.rx_id);
  out += fmt::format("channel_mode = {}\n", to_string(t.combo_key.channel_mode));
  out += fmt::format("bandwidth_hz = {:.17g}\n", t.combo_key.bandwidth);
  out += fmt::format("spacing_hz = {:.17g}\n", t.grid.spacing);
  out += fmt::format("n_frames = {}\n", t.n_frames);
  out += "pilots =";
  for (int p : t.grid.pilot_indices) out += fmt::format(" {}", p);
  out += fmt::format("\nn_tones = {}\n# index mag_db phase_rad\n", t.grid.size());
  for (std::size_t k = 0; k < t.grid.size(); ++k)
    out += fmt::format("{} {:.17g} {:.17g}\n", t.grid.indices[k], t.mag_db[k], t.phase_rad[k]);
  return out;
}

DistortionTemplate parse_template(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kTemplateMagic) throw DomainError("not a distortion template");
  if (version != kTemplateVersion) throw DomainError(fmt::format("unsupported template version {}", version));
  DistortionTemplate t;
  std::string line;
  std::getline(in, line);
  std::size_t n_tones = 0;
  bool have_tones = false;
  while (!have_tones && std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DomainError("malformed template header line '" + line + "'");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    key.erase(key.find_last_not_of(' ') + 1);
    value.erase(0, value.find_first_not_of(' '));
    if (key == "tx_id") {
      t.combo_key.tx_id = value;
    } else if (key == "rx_id") {
      t.combo_key.rx_id = value;
    } else if (key == "channel_mode") {
      t.combo_key.channel_mode = channel_mode_from_string(value);
    } else if (key == "bandwidth_hz") {
      t.combo_key.bandwidth = std::stod(value);
    } else if (key == "spacing_hz") {
      t.grid.spacing = std::stod(value);
    } else if (key == "n_frames") {
      t.n_frames = std::stoul(value);
    } else if (key == "pilots") {
      std::istringstream ps(value);
      int p = 0;
      while (ps >> p) t.grid.pilot_indices.push_back(p);
    } else if (key == "n_tones") {
      n_tones = std::stoul(value);
      have_tones = true;
    } else {
      throw DomainError("unknown template key '" + key + "'");
    }
  }
  if (!have_tones) throw DomainError("template lacks n_tones");
  while (t.grid.indices.size() < n_tones && std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int idx = 0;
    double m = 0.0;
    double p = 0.0;
    if (!(ls >> idx >> m >> p)) throw DomainError("malformed template row '" + line + "'");
    t.grid.indices.push_back(idx);
    t.mag_db.push_back(m);
    t.phase_rad.push_back(p);
  }
  if (t.grid.indices.size() != n_tones) throw DomainError("template ends early");
  if (!std::is_sorted(t.grid.indices.begin(), t.grid.indices.end()))
    throw DomainError("template tone indices are not increasing");
  return t;
}

void save_template(const std::string& path, const DistortionTemplate& tmpl) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write template file '" + path + "'");
  out << serialize_template(tmpl);
}

DistortionTemplate load_template(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read template file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_template(buf.str());
}

const char* to_string(DistortionType type) {
  switch (type) {
    case DistortionType::Flat:
      return "Flat";
    case DistortionType::Type1:
      return "Type1";
    case DistortionType::Type2:
      return "Type2";
    case DistortionType::Type3:
      return "Type3";
    case DistortionType::Unclassified:
      return "Unclassified";
  }
  return "?";
}

ShapeMetrics shape_metrics(std::span<const double> mag) {
  ShapeMetrics m;
  const std::size_t n = mag.size();
  if (n < 8) throw DomainError("shape metrics need at least 8 tones");
  const std::size_t half = n / 2;
  auto lmax = std::max_element(mag.begin(), mag.begin() + static_cast<long>(half));
  auto rmax = std::max_element(mag.begin() + static_cast<long>(half), mag.end());
  auto [mn, mx] = std::minmax_element(mag.begin(), mag.end());
  m.range_db = *mx - *mn;
  m.left_peak_db = *lmax;
  m.right_peak_db = *rmax;
  m.left_peak_pos = static_cast<std::size_t>(lmax - mag.begin());
  m.right_peak_pos = static_cast<std::size_t>(rmax - mag.begin());
  m.argmax_pos = static_cast<std::size_t>(mx - mag.begin());
  double c = 0.0;
  for (std::size_t i = half - 2; i < half + 2; ++i) c += mag[i];
  m.center_db = c / 4.0;
  m.center_dip_db = std::min(m.left_peak_db, m.right_peak_db) - m.center_db;
  m.edge_drop_db = std::max(m.left_peak_db, m.right_peak_db) - std::max(mag.front(), mag.back());
  m.shoulder_asymmetry_db = std::abs(m.left_peak_db - m.right_peak_db);
  const std::size_t e = n / 8;
  double el = 0.0;
  double er = 0.0;
  for (std::size_t i = 0; i < e; ++i) {
    el += mag[i];
    er += mag[n - 1 - i];
  }
  m.edge_asymmetry_db = std::abs(el - er) / static_cast<double>(e);
  m.asymmetry_db = std::max(m.shoulder_asymmetry_db, m.edge_asymmetry_db);
  m.central_max = m.argmax_pos >= 3 * n / 8 && m.argmax_pos < 5 * n / 8;

  // Non-decreasing up to the peak and non-increasing after it, within a small tolerance.
  constexpr double kTol = 0.2;
  bool mono = true;
  double run = mag.front();
  for (std::size_t i = 0; i <= m.argmax_pos && mono; ++i) {
    run = std::max(run, mag[i]);
    mono = mag[i] >= run - kTol;
  }
  run = mag.back();
  for (std::size_t i = n; i-- > m.argmax_pos && mono;) {
    run = std::max(run, mag[i]);
    mono = mag[i] >= run - kTol;
  }
  m.decreasing_to_edges = mono;
  return m;
}

DistortionType classify_distortion(std::span<const double> mag_db, const ClassifyThresholds& th) {
  const ShapeMetrics m = shape_metrics(mag_db);
  const std::size_t n = mag_db.size();
  if (m.range_db < th.flat_range_db) return DistortionType::Flat;
  if (m.asymmetry_db > th.asymmetry_db) return DistortionType::Type3;
  if (m.central_max && m.decreasing_to_edges) return DistortionType::Type2;
  const bool shoulders = m.left_peak_pos < 3 * n / 8 && m.right_peak_pos >= 5 * n / 8;
  if (shoulders && m.center_dip_db >= th.center_dip_db && m.edge_drop_db >= th.edge_drop_db)
    return DistortionType::Type1;
  return DistortionType::Unclassified;
}

DistortionType classify_distortion(const DistortionTemplate& tmpl, const ClassifyThresholds& th) {
  return classify_distortion(tmpl.mag_db, th);
}

}  // namespace csiwb::csi
