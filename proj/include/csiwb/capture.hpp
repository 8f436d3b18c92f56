#pragma once

// CSF1 capture files: a fixed header followed by length-prefixed CSI records.

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "csiwb/csi/csi_frame.hpp"

namespace csiwb::phy {
struct RxResult;
}

namespace csiwb::io {

inline constexpr char kCaptureMagic[4] = {'C', 'S', 'F', '1'};
inline constexpr std::uint16_t kCaptureVersion = 1;
inline constexpr std::uint8_t kLittleEndian = 1;
inline constexpr std::size_t kCaptureHeaderBytes = 8;

using CFloat = std::complex<float>;

struct CaptureRecord {
  std::uint64_t timestamp_us = 0;
  std::uint64_t cf_hz = 0;
  std::uint64_t sf_hz = 0;
  ChannelMode channel_mode = ChannelMode::HT20;
  std::uint8_t mcs = 0;
  std::uint8_t seed = 0;
  std::vector<std::int16_t> tones;
  std::vector<CFloat> csi;
  std::uint16_t n_data_symbols = 0;
  std::vector<CFloat> data_csi;  // symbol-major: n_data_symbols blocks of tones.size()
  std::int64_t cfo_uhz = 0;       // micro-hertz
  std::int32_t evm_cdb = 0;       // centi-dB

  /// Throws DomainError when counts disagree or tones are not strictly increasing.
  void validate() const;
  bool operator==(const CaptureRecord&) const = default;
};

struct Capture {
  std::vector<CaptureRecord> records;

  bool operator==(const Capture&) const = default;
};

/// One record including its leading u32 length.
std::vector<std::uint8_t> encode_record(const CaptureRecord& rec);
/// Decodes one record starting at `pos`; advances `pos` past it.
CaptureRecord decode_record(const std::vector<std::uint8_t>& bytes, std::size_t& pos);

std::vector<std::uint8_t> serialize_capture(const Capture& cap);
Capture parse_capture(const std::vector<std::uint8_t>& bytes);

void write_capture(const std::string& path, const Capture& cap);
Capture read_capture(const std::string& path);

/// FFT size used by a channel mode (64 for HT20, 128 for HT40+/-).
std::size_t fft_size_for(ChannelMode mode);

/// Record from a decoded frame; the data train is the untracked one.
CaptureRecord record_from_rx(const phy::RxResult& rx, double timestamp, double center_freq);
/// CSI frame of a record. Pilots are restored when the tone list matches a standard grid.
csi::CsiFrame frame_from_record(const CaptureRecord& rec);
/// Data-symbol CSI train of a record, one vector per symbol.
std::vector<CVec> data_train(const CaptureRecord& rec);
double record_cfo_hz(const CaptureRecord& rec);
double record_evm_db(const CaptureRecord& rec);
/// Data symbol duration for the record's sample rate; the guard interval is not stored.
double record_symbol_duration(const CaptureRecord& rec, bool short_gi);

}  // namespace csiwb::io
