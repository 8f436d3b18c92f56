#include "csiwb/capture.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "csiwb/phy/receiver.hpp"

namespace csiwb::io {

namespace {

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename T>
  void put(T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>((u >> (8 * i)) & 0xffu));
  }
  void put_f32(float f) { put(std::bit_cast<std::uint32_t>(f)); }
  void put_cf(CFloat c) {
    put_f32(c.real());
    put_f32(c.imag());
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& in, std::size_t pos, std::size_t end) : in_(in), pos_(pos), end_(end) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(in_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  CFloat get_cf() {
    const float re = get_f32();
    return {re, get_f32()};
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw DomainError("capture record truncated");
  }
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_;
  std::size_t end_;
};

std::uint8_t mode_code(ChannelMode m) {
  switch (m) {
    case ChannelMode::HT20:
      return 0;
    case ChannelMode::HT40Plus:
      return 1;
    case ChannelMode::HT40Minus:
      return 2;
  }
  return 0;
}

ChannelMode mode_from_code(std::uint8_t c) {
  switch (c) {
    case 0:
      return ChannelMode::HT20;
    case 1:
      return ChannelMode::HT40Plus;
    case 2:
      return ChannelMode::HT40Minus;
    default:
      throw DomainError("capture record has unknown channel mode " + std::to_string(c));
  }
}

// Bytes after record_len for the given counts.
std::size_t body_size(std::size_t n_tones, std::size_t n_sym) {
  return 8 + 8 + 8 + 1 + 1 + 1 + 2 + 2 * n_tones + 8 * n_tones + 2 + 8 * n_tones * n_sym + 8 + 4;
}

}  // namespace

void CaptureRecord::validate() const {
  if (tones.size() > 0xffff) throw DomainError("capture record has more than 65535 tones");
  if (csi.size() != tones.size()) throw DomainError("capture record CSI length differs from its tone list");
  if (data_csi.size() != tones.size() * n_data_symbols)
    throw DomainError("capture record data CSI length differs from tones x symbols");
  for (std::size_t i = 1; i < tones.size(); ++i) {
    if (tones[i] <= tones[i - 1]) throw DomainError("capture record tone indices are not strictly increasing");
  }
}

std::vector<std::uint8_t> encode_record(const CaptureRecord& rec) {
  rec.validate();
  const std::size_t body = body_size(rec.tones.size(), rec.n_data_symbols);
  if (body > 0xffffffffu) throw DomainError("capture record too large");
  std::vector<std::uint8_t> out;
  out.reserve(body + 4);
  Writer w(out);
  w.put(static_cast<std::uint32_t>(body));
  w.put(rec.timestamp_us);
  w.put(rec.cf_hz);
  w.put(rec.sf_hz);
  w.put(mode_code(rec.channel_mode));
  w.put(rec.mcs);
  w.put(rec.seed);
  w.put(static_cast<std::uint16_t>(rec.tones.size()));
  for (auto t : rec.tones) w.put(t);
  for (auto c : rec.csi) w.put_cf(c);
  w.put(rec.n_data_symbols);
  for (auto c : rec.data_csi) w.put_cf(c);
  w.put(rec.cfo_uhz);
  w.put(rec.evm_cdb);
  return out;
}

CaptureRecord decode_record(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  Reader len_reader(bytes, pos, bytes.size());
  const auto len = len_reader.get<std::uint32_t>();
  const std::size_t start = pos + 4;
  if (start + len > bytes.size()) throw DomainError("capture record length runs past the end of the file");
  Reader r(bytes, start, start + len);
  CaptureRecord rec;
  rec.timestamp_us = r.get<std::uint64_t>();
  rec.cf_hz = r.get<std::uint64_t>();
  rec.sf_hz = r.get<std::uint64_t>();
  rec.channel_mode = mode_from_code(r.get<std::uint8_t>());
  rec.mcs = r.get<std::uint8_t>();
  rec.seed = r.get<std::uint8_t>();
  const auto n_tones = r.get<std::uint16_t>();
  if (body_size(n_tones, 0) > len) throw DomainError("capture record length too small for its tone count");
  rec.tones.resize(n_tones);
  for (auto& t : rec.tones) t = r.get<std::int16_t>();
  rec.csi.resize(n_tones);
  for (auto& c : rec.csi) c = r.get_cf();
  rec.n_data_symbols = r.get<std::uint16_t>();
  if (body_size(n_tones, rec.n_data_symbols) != len)
    throw DomainError("capture record length inconsistent with its counts");
  rec.data_csi.resize(static_cast<std::size_t>(n_tones) * rec.n_data_symbols);
  for (auto& c : rec.data_csi) c = r.get_cf();
  rec.cfo_uhz = r.get<std::int64_t>();
  rec.evm_cdb = r.get<std::int32_t>();
  rec.validate();
  pos = start + len;
  return rec;
}

std::vector<std::uint8_t> serialize_capture(const Capture& cap) {
  std::vector<std::uint8_t> out(std::begin(kCaptureMagic), std::end(kCaptureMagic));
  Writer w(out);
  w.put(kCaptureVersion);
  w.put(kLittleEndian);
  w.put(std::uint8_t{0});
  for (const auto& rec : cap.records) {
    auto b = encode_record(rec);
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

Capture parse_capture(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kCaptureHeaderBytes || !std::equal(std::begin(kCaptureMagic), std::end(kCaptureMagic), bytes.begin()))
    throw DomainError("not a CSF1 capture");
  Reader r(bytes, 4, bytes.size());
  const auto version = r.get<std::uint16_t>();
  if (version != kCaptureVersion) throw DomainError("unsupported capture version " + std::to_string(version));
  if (r.get<std::uint8_t>() != kLittleEndian) throw DomainError("capture is not little-endian");
  r.get<std::uint8_t>();
  Capture cap;
  std::size_t pos = kCaptureHeaderBytes;
  while (pos < bytes.size()) cap.records.push_back(decode_record(bytes, pos));
  return cap;
}

void write_capture(const std::string& path, const Capture& cap) {
  const auto bytes = serialize_capture(cap);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write capture '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for capture '" + path + "'");
}

Capture read_capture(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read capture '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_capture(bytes);
}

std::size_t fft_size_for(ChannelMode mode) { return is_ht40(mode) ? 128 : 64; }

CaptureRecord record_from_rx(const phy::RxResult& rx, double timestamp, double center_freq) {
  CaptureRecord rec;
  rec.timestamp_us = static_cast<std::uint64_t>(std::llround(timestamp * 1e6));
  rec.cf_hz = static_cast<std::uint64_t>(std::llround(center_freq));
  rec.sf_hz = static_cast<std::uint64_t>(std::llround(rx.csi.bandwidth));
  rec.channel_mode = rx.csi.channel_mode;
  rec.mcs = static_cast<std::uint8_t>(rx.signal.mcs);
  rec.seed = static_cast<std::uint8_t>(rx.scrambler_seed);
  for (int k : rx.csi.grid.indices) rec.tones.push_back(static_cast<std::int16_t>(k));
  for (auto v : rx.csi.values) rec.csi.emplace_back(static_cast<float>(v.real()), static_cast<float>(v.imag()));
  const std::size_t n_sym = std::min<std::size_t>(rx.data_symbol_csi.size(), 0xffff);
  rec.n_data_symbols = static_cast<std::uint16_t>(n_sym);
  rec.data_csi.reserve(n_sym * rec.tones.size());
  for (std::size_t i = 0; i < n_sym; ++i) {
    for (auto v : rx.data_symbol_csi[i]) rec.data_csi.emplace_back(static_cast<float>(v.real()), static_cast<float>(v.imag()));
  }
  rec.cfo_uhz = std::llround(rx.cfo_preamble * 1e6);
  rec.evm_cdb = static_cast<std::int32_t>(std::lround(std::clamp(rx.evm_db, -1e6, 1e6) * 100.0));
  return rec;
}

csi::CsiFrame frame_from_record(const CaptureRecord& rec) {
  rec.validate();
  csi::CsiFrame f;
  f.grid.indices.assign(rec.tones.begin(), rec.tones.end());
  const auto n = fft_size_for(rec.channel_mode);
  f.grid.spacing = static_cast<double>(rec.sf_hz) / static_cast<double>(n);
  for (const SubcarrierGrid& g : {grid_nonht(), grid_ht20(), grid_ht40()}) {
    for (int off : {0, -32, 32}) {
      const SubcarrierGrid s = g.shifted(off);
      if (s.indices == f.grid.indices) f.grid.pilot_indices = s.pilot_indices;
    }
  }
  f.values.reserve(rec.csi.size());
  for (auto c : rec.csi) f.values.emplace_back(c.real(), c.imag());
  f.center_freq = static_cast<double>(rec.cf_hz);
  f.bandwidth = static_cast<double>(rec.sf_hz);
  f.channel_mode = rec.channel_mode;
  f.timestamp = static_cast<double>(rec.timestamp_us) * 1e-6;
  f.source.mcs = rec.mcs;
  f.source.seed = rec.seed;
  return f;
}

std::vector<CVec> data_train(const CaptureRecord& rec) {
  rec.validate();
  const std::size_t n = rec.tones.size();
  std::vector<CVec> out(rec.n_data_symbols, CVec(n));
  for (std::size_t i = 0; i < rec.n_data_symbols; ++i)
    for (std::size_t k = 0; k < n; ++k) out[i][k] = {rec.data_csi[i * n + k].real(), rec.data_csi[i * n + k].imag()};
  return out;
}

double record_cfo_hz(const CaptureRecord& rec) { return static_cast<double>(rec.cfo_uhz) * 1e-6; }
double record_evm_db(const CaptureRecord& rec) { return static_cast<double>(rec.evm_cdb) / 100.0; }

double record_symbol_duration(const CaptureRecord& rec, bool short_gi) {
  const double n = static_cast<double>(fft_size_for(rec.channel_mode));
  return (n + n / (short_gi ? 8.0 : 4.0)) / static_cast<double>(rec.sf_hz);
}

}  // namespace csiwb::io
