#pragma once

#include <array>
#include <string>
#include <vector>

#include "dwp/link.hpp"
#include "dwp/phy_frame.hpp"

namespace dwp::rx {

enum class EstimateMethod { ls, ls_smoothed, ls_time_domain, genie };

struct ChannelEstimate {
  ComplexBuf h_hat;  // one value per active tone, TonePlan::active order
  double sigma2 = 0.0;
  EstimateMethod method = EstimateMethod::ls;
  int param = 0;  // smoothing span or tap count

  cplx at_tone(int k, const phy::TonePlan& plan) const;
};

struct LegacyGrids {
  phy::FrequencyGrid rep1;
  phy::FrequencyGrid rep2;
};

LegacyGrids demodulate_lltf(std::span<const cplx> capture);
phy::FrequencyGrid demodulate_heltf(std::span<const cplx> capture, const phy::TonePlan& plan);
phy::FrequencyGrid demodulate_data(std::span<const cplx> capture, std::size_t m, const phy::TonePlan& plan);

/// Repetition-difference estimate: sum |Y1 - Y2|^2 over the 52 legacy tones / 104.
double estimate_noise_variance(const LegacyGrids& lltf);
double estimate_noise_variance(std::span<const cplx> capture);

/// h[k] = y[k] x*[k] on every active tone.
ChannelEstimate ls_channel_estimate(const phy::FrequencyGrid& rx_heltf, const phy::TonePlan& plan);

/// Moving average over `span` active neighbours; the window is truncated at
/// the band edges and does not cross the DC gap. The linear phase of the
/// timing backoff is removed before averaging and restored afterwards.
ChannelEstimate smooth_frequency(const ChannelEstimate& est, int span, const phy::TonePlan& plan);

/// Least squares over an n_taps delay basis of the DFT; the basis starts at
/// the FFT window position, i.e. kTimingBackoff samples before the nominal CP end.
ChannelEstimate time_domain_ls_estimate(const phy::FrequencyGrid& rx_heltf, int n_taps,
                                        const phy::TonePlan& plan);

/// Joint CPE/SRO tracker state for one packet.
struct CpeSroEstimate {
  double omega_hat = 0.0;    // current symbol's CPE, radians in [-pi, pi]
  double drift_hat = 0.0;    // current symbol's timing drift, samples
  double clock_ratio = 0.0;  // cumulative LS estimate of the clock offset (ppm * 1e-6)
  double tau_hat = 0.0;      // current symbol's drift in seconds, signed as in h_D = h_T e^{-j 2 pi tau k / (N Ts)}
  std::vector<double> omega_history;
  std::vector<double> drift_history;
  double sum_dn_drift = 0.0;
  double sum_dn2 = 0.0;
};

/// Updates `state` from the pilots of DATA symbol m.
void estimate_cpe_sro(const phy::FrequencyGrid& rx_data, const ChannelEstimate& est,
                      const std::array<cplx, phy::kNumPilots>& tx_pilots, std::size_t m,
                      CpeSroEstimate& state, const phy::TonePlan& plan);

/// C_eq = h_D* / (|h_D|^2 + sigma2); zero when both vanish.
cplx mmse_coefficient(cplx h_d, double sigma2);

struct Equalized {
  ComplexBuf points;  // 234 data tones
  ComplexBuf h_d;     // effective channel per data tone
};

Equalized mmse_equalize(const phy::FrequencyGrid& rx_data, const ChannelEstimate& est,
                        const CpeSroEstimate& cpesro, const phy::TonePlan& plan);

std::vector<std::uint8_t> hard_demap(std::span<const cplx> points, int order);

enum class Variant { no_smoothing, smoothing, time_domain };

struct ReceiverConfig {
  Variant variant = Variant::no_smoothing;
  int span = 9;
  int n_taps = 16;
  bool track_cpe_sro = true;

  std::string name() const;
  static ReceiverConfig parse(const std::string& name);
};

/// Per-packet receiver output consumed by the harness.
struct RxResult {
  std::vector<ComplexBuf> points;  // equalized data tones per symbol
  std::vector<std::vector<double>> rho;  // per-tone LLR reliability per symbol
  double sigma2 = 0.0;
  CpeSroEstimate tracking;
};

ChannelEstimate estimate_channel(std::span<const cplx> capture, const ReceiverConfig& cfg,
                                 const phy::TonePlan& plan);

RxResult run_conventional(const link::RxCapture& capture, const ReceiverConfig& cfg);

/// Uses the true channel, offsets and noise variance; simulation only.
RxResult run_genie(const link::RxCapture& capture, const link::CaptureGenie& genie,
                   const link::LinkConfig& link_cfg);

/// Lower bound on sigma2 used for LLR scaling when the estimate is zero.
inline constexpr double kSigma2Floor = 1e-6;

}  // namespace dwp::rx
