#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "dwp/dsp.hpp"
#include "dwp/rng.hpp"

namespace dwp::channel {

struct Cluster {
  double start_ns = 0.0;
  int taps = 1;
};

struct ChannelModelSpec {
  char id = 'a';
  double delay_spread_ns = 0.0;
  std::vector<Cluster> clusters;
  double tap_spacing_ns = 10.0;

  /// TGax-style indoor model 'a'..'f'.
  static const ChannelModelSpec& tgax(char id);
  int potential_taps() const;
  nlohmann::json to_json() const;
};

inline constexpr double kSamplePeriodNs = 50.0;
/// Half-length (samples) of the tapered sinc used to place off-grid paths.
inline constexpr int kPlacementHalfLen = 8;

/// Block-fading realization. `taps[j]` is the gain at sample delay j - precursor.
struct ChannelRealization {
  std::vector<double> path_delays_ns;
  ComplexBuf path_gains;
  ComplexBuf taps;
  int precursor = 0;
  ComplexBuf freq_response;  // 256 bins, FFT order

  double energy() const { return dsp::squared_norm(taps); }
  cplx at_tone(int k) const {
    const int n = static_cast<int>(freq_response.size());
    return freq_response[static_cast<std::size_t>((k % n + n) % n)];
  }
};

ChannelRealization draw_channel(const ChannelModelSpec& spec, SeededRng& rng);

/// Builds a realization directly from sample-spaced taps (taps[0] at delay 0
/// unless `precursor` > 0); used for deterministic tests.
ChannelRealization make_sample_channel(ComplexBuf taps, int precursor = 0,
                                       std::size_t fft_size = 256);

/// Linear convolution, truncated to the input length.
ComplexBuf apply_channel(std::span<const cplx> tx, const ChannelRealization& ch);

struct NoisyOutput {
  ComplexBuf samples;
  double noise_variance = 0.0;
};

/// Adds CN(0, ref / 10^(snr/10)) per sample; +inf SNR adds nothing.
NoisyOutput add_awgn(std::span<const cplx> x, double snr_db, double signal_power_ref, SeededRng& rng);

/// Nominal average transmit sample power of an HE symbol (242 unit tones over 256 bins).
inline constexpr double kNominalSignalPower = 242.0 / 256.0;

/// RMS delay spread of the 10 ns path profile of one realization.
double rms_delay_spread_ns(const ChannelRealization& ch);

}  // namespace dwp::channel
