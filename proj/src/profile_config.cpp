#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "csiwb/impairments.hpp"

namespace csiwb::imp {

namespace {

std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || !std::isfinite(d)) throw DomainError("profile key '" + key + "': bad number '" + v + "'");
  return d;
}

int to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d)) throw DomainError("profile key '" + key + "': expected an integer, got '" + v + "'");
  return static_cast<int>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw DomainError("profile key '" + key + "': expected a boolean, got '" + v + "'");
}

std::optional<double> to_opt(const std::string& key, const std::string& v) {
  if (v == "none" || v.empty()) return std::nullopt;
  return to_double(key, v);
}

// "delay:re:im" entries separated by ';' or ','.
std::vector<Tap> to_taps(const std::string& key, const std::string& v) {
  std::vector<Tap> taps;
  if (v == "none" || v.empty()) return taps;
  std::string item;
  std::string norm = v;
  std::replace(norm.begin(), norm.end(), ',', ';');
  std::stringstream ss(norm);
  while (std::getline(ss, item, ';')) {
    item = trim(item);
    if (item.empty()) continue;
    std::stringstream parts(item);
    std::string d, re, im;
    std::getline(parts, d, ':');
    std::getline(parts, re, ':');
    std::getline(parts, im, ':');
    const int delay = to_int(key, trim(d));
    if (delay < 0) throw DomainError("profile key '" + key + "': negative tap delay");
    taps.push_back({static_cast<std::size_t>(delay),
                    {to_double(key, trim(re)), im.empty() ? 0.0 : to_double(key, trim(im))}});
  }
  return taps;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : "none"; }

}  // namespace

ImpairmentProfile named_profile(const std::string& name) {
  if (name == "clean") return ImpairmentProfile::clean();
  if (name == "default20" || name == "default") return ImpairmentProfile::default_for(20e6);
  if (name == "default40") return ImpairmentProfile::default_for(40e6);
  if (name == "tracked20") {
    auto p = ImpairmentProfile::default_for(20e6);
    p.name = "tracked20";
    p.track_clock = true;
    return p;
  }
  throw DomainError("unknown profile '" + name + "'");
}

ImpairmentProfile parse_profile(const std::string& text) {
  ImpairmentProfile p = ImpairmentProfile::default_for(20e6);
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DomainError(fmt::format("profile line {}: expected 'key = value'", line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string v = trim(line.substr(eq + 1));
    if (key == "base") {
      p = named_profile(v);
    } else if (key == "name") {
      p.name = v;
    } else if (key == "dac_zoh") {
      p.dac_zoh = to_bool(key, v);
    } else if (key == "dac_oversample") {
      p.dac_oversample = to_int(key, v);
    } else if (key == "predistortion_overcomp") {
      p.predistortion_overcomp = to_double(key, v);
    } else if (key == "design_rate_hz") {
      p.design_rate = to_double(key, v);
    } else if (key == "track_clock") {
      p.track_clock = to_bool(key, v);
    } else if (key == "recon.order") {
      p.recon.order = to_int(key, v);
    } else if (key == "recon.cutoff_hz") {
      p.recon.cutoff = to_double(key, v);
    } else if (key == "recon.enabled") {
      p.recon.enabled = to_bool(key, v);
    } else if (key == "acr.order") {
      p.acr.order = to_int(key, v);
    } else if (key == "acr.cutoff_hz") {
      p.acr.cutoff = to_double(key, v);
    } else if (key == "acr.enabled") {
      p.acr.enabled = to_bool(key, v);
    } else if (key == "iq.gain_ratio") {
      p.iq.gain_ratio = to_double(key, v);
    } else if (key == "iq.phase_deg") {
      p.iq.phase_deg = to_double(key, v);
    } else if (key == "cfo_hz") {
      p.cfo = to_double(key, v);
    } else if (key == "sfo_ppm") {
      p.sfo_ppm = to_double(key, v);
    } else if (key == "snr_db") {
      p.snr_db = to_opt(key, v);
    } else if (key == "agc.target_rms") {
      p.agc_target_rms = to_opt(key, v);
    } else if (key == "multipath") {
      p.multipath = to_taps(key, v);
    } else {
      throw DomainError(fmt::format("profile line {}: unknown key '{}'", line_no, key));
    }
  }
  p.validate();
  return p;
}

std::string format_profile(const ImpairmentProfile& p) {
  std::string taps;
  for (const auto& t : p.multipath) {
    if (!taps.empty()) taps += "; ";
    taps += fmt::format("{}:{}:{}", t.delay, t.gain.real(), t.gain.imag());
  }
  std::string out;
  out += fmt::format("name = {}\n", p.name);
  out += fmt::format("dac_zoh = {}\n", p.dac_zoh);
  out += fmt::format("dac_oversample = {}\n", p.dac_oversample);
  out += fmt::format("predistortion_overcomp = {}\n", p.predistortion_overcomp);
  out += fmt::format("design_rate_hz = {}\n", p.design_rate);
  out += fmt::format("track_clock = {}\n", p.track_clock);
  out += fmt::format("recon.order = {}\nrecon.cutoff_hz = {}\nrecon.enabled = {}\n", p.recon.order, p.recon.cutoff,
                     p.recon.enabled);
  out += fmt::format("acr.order = {}\nacr.cutoff_hz = {}\nacr.enabled = {}\n", p.acr.order, p.acr.cutoff,
                     p.acr.enabled);
  out += fmt::format("iq.gain_ratio = {}\niq.phase_deg = {}\n", p.iq.gain_ratio, p.iq.phase_deg);
  out += fmt::format("cfo_hz = {}\nsfo_ppm = {}\n", p.cfo, p.sfo_ppm);
  out += fmt::format("snr_db = {}\n", fmt_opt(p.snr_db));
  out += fmt::format("agc.target_rms = {}\n", fmt_opt(p.agc_target_rms));
  out += fmt::format("multipath = {}\n", taps.empty() ? "none" : taps);
  return out;
}

ImpairmentProfile load_profile(const std::string& name_or_path) {
  try {
    return named_profile(name_or_path);
  } catch (const DomainError&) {
  }
  std::ifstream in(name_or_path);
  if (!in) throw DomainError("profile '" + name_or_path + "' is neither a built-in name nor a readable file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_profile(buf.str());
}

}  // namespace csiwb::imp
