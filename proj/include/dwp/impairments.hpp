#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "dwp/dsp.hpp"
#include "dwp/rng.hpp"

namespace dwp::impair {

enum class ImpairmentType { I = 1, II = 2, III = 3 };

std::string to_string(ImpairmentType t);
ImpairmentType parse_type(const std::string& s);

struct ImpairmentConfig {
  ImpairmentType type = ImpairmentType::I;
  /// Clock offsets are drawn uniformly in [-clock_ppm, clock_ppm] per packet.
  double clock_ppm = 20.0;
  double residual_cfo_hz = 300.0;
  double phase_noise_dbchz = -100.0;  // -inf disables
  double phase_noise_corner_hz = 100e3;
  double pa_backoff_db = 8.0;  // +inf disables
  double pa_smoothness = 3.0;
  int filter_length = 63;
  double filter_cutoff = 0.49;  // fraction of f_s
  /// When true, clock_ppm and residual_cfo_hz are applied as-is instead of
  /// being used as bounds for a uniform draw.
  bool fixed_offsets = false;
  double sample_period = 50e-9;

  bool filter_on() const { return true; }
  bool sro_on() const { return type != ImpairmentType::I; }
  bool cfo_on() const { return type == ImpairmentType::III; }
  bool phase_noise_on() const { return type != ImpairmentType::I; }
  bool pa_on() const { return type != ImpairmentType::I; }

  static ImpairmentConfig defaults(ImpairmentType t);
  /// Same type with every magnitude set to zero.
  ImpairmentConfig zeroed() const;

  nlohmann::json to_json() const;
  static ImpairmentConfig from_json(const nlohmann::json& j);
};

/// Ground truth of what the chain applied; for estimator tests only.
struct GenieOffsets {
  double clock_ratio = 0.0;  // resampling ratio minus one (ppm * 1e-6)
  double cfo_hz = 0.0;
  /// Total rotation applied to each output sample, radians.
  std::vector<double> applied_phase;

  double sro_ppm() const { return clock_ratio * 1e6; }
  /// Drift ratio tau in seconds per second; equals clock_ratio.
  double tau() const { return clock_ratio; }
  /// Circular mean of the applied rotation over [start, start + len).
  double window_phase(std::size_t start, std::size_t len) const;
  /// Common phase error of DATA symbol m relative to the HE-LTF window, signed
  /// so that y = h x e^{-j omega}.
  double cpe(std::size_t m) const;
  std::vector<double> cpe_per_symbol(std::size_t n_symbols) const;
};

/// Hamming-windowed sinc lowpass of odd length with unit DC gain.
std::vector<double> design_lowpass(int length, double cutoff);
/// Complex response of a centered FIR at normalized frequency f (cycles/sample).
cplx filter_response(const std::vector<double>& taps, double f);
/// Zero-phase FIR: output sample n is aligned with input sample n.
ComplexBuf apply_fir_centered(std::span<const cplx> x, const std::vector<double>& taps);
ComplexBuf apply_analog_filter(std::span<const cplx> x, const ImpairmentConfig& cfg);

struct SroResult {
  ComplexBuf samples;
  double clock_ratio = 0.0;
};
/// Resamples so that out[n] = x(n (1 + ppm 1e-6)) with a 128-tap Kaiser windowed sinc.
SroResult apply_sro(std::span<const cplx> x, double ppm);
/// Draws the per-packet clock offset (or uses cfg.clock_ppm when fixed) and resamples.
SroResult apply_sro(std::span<const cplx> x, const ImpairmentConfig& cfg, SeededRng& rng);

struct RotationResult {
  ComplexBuf samples;
  GenieOffsets genie;
};
RotationResult apply_cfo_and_phase_noise(std::span<const cplx> x, const ImpairmentConfig& cfg,
                                         SeededRng& rng);

/// Ornstein-Uhlenbeck phase trajectory with single-pole PSD, started from
/// its stationary distribution.
std::vector<double> phase_noise_trajectory(std::size_t n, const ImpairmentConfig& cfg, SeededRng& rng);

/// Memoryless AM/AM Rapp model; A_sat is `backoff_db` above the mean input power.
ComplexBuf apply_pa(std::span<const cplx> x, double backoff_db, double smoothness);

/// Transmit-side part of the chain (PA).
ComplexBuf apply_tx_chain(std::span<const cplx> x, const ImpairmentConfig& cfg);
/// Receive-side part: analog filter, SRO, CFO and phase noise.
RotationResult apply_rx_chain(std::span<const cplx> x, const ImpairmentConfig& cfg, SeededRng& rng);
/// Full chain without a channel: PA, filter, SRO, CFO and phase noise.
RotationResult apply_chain(std::span<const cplx> x, const ImpairmentConfig& cfg, SeededRng& rng);

}  // namespace dwp::impair
