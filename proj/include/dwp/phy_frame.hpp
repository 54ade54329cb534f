#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dwp/dsp.hpp"

namespace dwp::phy {

using Bits = std::vector<std::uint8_t>;

inline constexpr std::size_t kFftSize = 256;
inline constexpr std::size_t kCpLen = 16;  // 0.8 us guard interval at 20 MHz
inline constexpr std::size_t kSymbolLen = kFftSize + kCpLen;
inline constexpr double kSamplePeriod = 50e-9;
inline constexpr std::size_t kNumData = 234;
inline constexpr std::size_t kNumPilots = 8;
inline constexpr std::size_t kNumActive = kNumData + kNumPilots;

inline constexpr std::size_t kLegacyFftSize = 64;
inline constexpr std::size_t kLltfCpLen = 32;
inline constexpr std::size_t kLltfLen = kLltfCpLen + 2 * kLegacyFftSize;  // 160
inline constexpr std::size_t kLegacyActive = 52;

/// FFT window starts this many samples before the nominal end of each CP.
inline constexpr std::size_t kTimingBackoff = 4;

/// Polarity index of DATA symbol 0 in the 127-periodic pilot polarity sequence.
inline constexpr std::size_t kPilotPolarityOffset = 3;
inline constexpr std::array<double, kNumPilots> kPilotBase = {1, 1, 1, -1, -1, 1, 1, 1};

/// Seed for the HE-LTF +-1 training sequence (shared by both link ends).
inline constexpr std::uint64_t kHeLtfSeed = 0x4845'4C54'4621ULL;

enum class ToneRole : std::uint8_t { data, pilot, null };

/// 242-tone RU layout of a 20 MHz HE symbol. Indices are subcarrier offsets
/// from DC in [-128, 127], each list ascending.
struct TonePlan {
  std::size_t fft_size = kFftSize;
  double sample_period = kSamplePeriod;
  std::vector<int> data;
  std::vector<int> pilots;
  std::vector<int> nulls;   // DC and guard tones
  std::vector<int> active;  // data + pilots, ascending

  static const TonePlan& he20();

  double subcarrier_spacing() const { return 1.0 / (static_cast<double>(fft_size) * sample_period); }
  std::size_t bin(int k) const {
    return static_cast<std::size_t>((k + static_cast<int>(fft_size)) % static_cast<int>(fft_size));
  }
  ToneRole role(int k) const;
  /// Position of tone k inside `active`, or -1.
  int active_index(int k) const;
};

/// One demodulated OFDM symbol, bins in FFT order.
struct FrequencyGrid {
  ComplexBuf bins;

  cplx at(int k) const { return bins[static_cast<std::size_t>((k + static_cast<int>(bins.size())) % static_cast<int>(bins.size()))]; }
  ComplexBuf gather(std::span<const int> tones) const;
};

/// Gray-mapped square QAM (or BPSK for order 2) with unit average energy.
class Constellation {
 public:
  explicit Constellation(int order);
  static const Constellation& get(int order);

  int order() const { return order_; }
  int bits_per_symbol() const { return bits_; }
  /// Point for label (bits MSB-first: first half I axis, second half Q axis).
  cplx point(unsigned label) const { return points_[label]; }
  cplx map(std::span<const std::uint8_t> bits) const;
  /// Nearest point's label; ties go to the lower Gray label on each axis.
  unsigned nearest_label(cplx x) const;

  // Per-axis PAM view used by the demappers.
  int axis_bits() const { return axis_bits_; }
  int axis_levels() const { return 1 << axis_bits_; }
  double axis_amplitude(int level_index) const;
  /// Bit label of an axis level; levels are indexed in ascending amplitude.
  unsigned axis_gray(int level_index) const {
    if (order_ == 2) return static_cast<unsigned>(1 - level_index);
    return static_cast<unsigned>(level_index ^ (level_index >> 1));
  }
  int axis_nearest(double r) const;
  double scale() const { return scale_; }

 private:
  int order_;
  int bits_;
  int axis_bits_;
  double scale_;
  std::vector<cplx> points_;
};

cplx qam_map(std::span<const std::uint8_t> bits, int order);

struct McsInfo {
  int mcs;
  int order;
  int rate_num;
  int rate_den;
};

/// MCS 7..10 of the single-stream 20 MHz table; mcs = -1 is the BPSK debug mode.
const McsInfo& mcs_info(int mcs);
inline constexpr int kDebugBpskMcs = -1;

/// Fixed 52-tone legacy LTF values for subcarriers -26..26 (DC entry 0).
const std::array<double, 53>& lltf_sequence();
/// Time-domain L-LTF: 32-sample CP followed by two identical 64-sample periods.
ComplexBuf build_lltf();

/// +-1 HE-LTF values on the 242 active tones, in `TonePlan::active` order.
const std::vector<double>& heltf_sequence();
ComplexBuf build_heltf(const TonePlan& plan);

/// Pilot polarity p[n] of the x^7+x^4+1 all-ones LFSR, n taken mod 127.
int pilot_polarity(std::size_t n);
std::array<cplx, kNumPilots> pilot_sequence(std::size_t symbol_index);

ComplexBuf modulate_symbol(const FrequencyGrid& grid);
FrequencyGrid demodulate_symbol(std::span<const cplx> time_samples, const TonePlan& plan);
/// 64-point unitary transform of one L-LTF period.
FrequencyGrid demodulate_legacy(std::span<const cplx> period);

struct HesuPacket {
  ComplexBuf lltf_time;
  ComplexBuf heltf_time;
  std::vector<ComplexBuf> data_time;
  Bits tx_bits;
  std::vector<ComplexBuf> tx_constellation;  // 234 points per symbol
  std::vector<std::array<cplx, kNumPilots>> tx_pilots;
  int mcs = 7;
  int order = 64;

  std::size_t n_symbols() const { return data_time.size(); }
  ComplexBuf samples() const;
};

std::size_t coded_bits_per_packet(int mcs, std::size_t n_data_symbols);

/// Maps `coded_bits` onto the data tones in natural order, one symbol at a time.
HesuPacket assemble_packet(std::span<const std::uint8_t> coded_bits, int mcs,
                           std::size_t n_data_symbols, const TonePlan& plan);

/// Sample offsets of each field inside a packet and the receiver's FFT windows.
struct FrameLayout {
  static constexpr std::size_t heltf_start = kLltfLen;
  static constexpr std::size_t data_start = kLltfLen + kSymbolLen;

  static std::size_t total_length(std::size_t n_data_symbols) {
    return data_start + n_data_symbols * kSymbolLen;
  }
  static std::size_t data_symbol_start(std::size_t m) { return data_start + m * kSymbolLen; }
  /// First sample of the 256-sample FFT window of DATA symbol m.
  static std::size_t data_window(std::size_t m) { return data_symbol_start(m) + kCpLen - kTimingBackoff; }
  static std::size_t heltf_window() { return heltf_start + kCpLen - kTimingBackoff; }
  static std::size_t lltf_window(std::size_t rep) {
    return kLltfCpLen + rep * kLegacyFftSize - kTimingBackoff;
  }
  /// Samples from the HE-LTF window to the DATA symbol m window.
  static double elapsed_samples(std::size_t m) { return static_cast<double>((m + 1) * kSymbolLen); }
};

/// CP+symbol slice for DATA symbol m of a capture, honoring the timing backoff.
std::span<const cplx> data_symbol_slice(std::span<const cplx> samples, std::size_t m);
std::span<const cplx> heltf_slice(std::span<const cplx> samples);
std::span<const cplx> lltf_period(std::span<const cplx> samples, std::size_t rep);

/// Self-describing constants: tone plan, pilots, LTF sequences.
nlohmann::json tone_plan_json(const TonePlan& plan);
/// CRC32 over the serialized constants; printed as the constants version.
std::string constants_fingerprint();

}  // namespace dwp::phy
