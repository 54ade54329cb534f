#include "dwp/rx_conventional.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

#include "dwp/error.hpp"

namespace dwp::rx {

using phy::FrameLayout;
using phy::TonePlan;

cplx ChannelEstimate::at_tone(int k, const TonePlan& plan) const {
  const int i = plan.active_index(k);
  if (i < 0) throw ArgumentError("ChannelEstimate: tone " + std::to_string(k) + " is not active");
  return h_hat[static_cast<std::size_t>(i)];
}

LegacyGrids demodulate_lltf(std::span<const cplx> capture) {
  return {phy::demodulate_legacy(phy::lltf_period(capture, 0)),
          phy::demodulate_legacy(phy::lltf_period(capture, 1))};
}

phy::FrequencyGrid demodulate_heltf(std::span<const cplx> capture, const TonePlan& plan) {
  return phy::demodulate_symbol(phy::heltf_slice(capture), plan);
}

phy::FrequencyGrid demodulate_data(std::span<const cplx> capture, std::size_t m, const TonePlan& plan) {
  return phy::demodulate_symbol(phy::data_symbol_slice(capture, m), plan);
}

double estimate_noise_variance(const LegacyGrids& lltf) {
  double acc = 0.0;
  for (int k = -26; k <= 26; ++k) {
    if (k == 0) continue;
    acc += std::norm(lltf.rep1.at(k) - lltf.rep2.at(k));
  }
  return acc / (2.0 * phy::kLegacyActive);
}

double estimate_noise_variance(std::span<const cplx> capture) {
  return estimate_noise_variance(demodulate_lltf(capture));
}

ChannelEstimate ls_channel_estimate(const phy::FrequencyGrid& rx_heltf, const TonePlan& plan) {
  const auto& x = phy::heltf_sequence();
  ChannelEstimate est;
  est.method = EstimateMethod::ls;
  est.h_hat.resize(plan.active.size());
  for (std::size_t i = 0; i < plan.active.size(); ++i) est.h_hat[i] = rx_heltf.at(plan.active[i]) * x[i];
  return est;
}

ChannelEstimate smooth_frequency(const ChannelEstimate& est, int span, const TonePlan& plan) {
  if (span < 1 || span > 31 || span % 2 == 0) {
    throw ArgumentError("smooth_frequency: span must be odd in [1, 31], got " + std::to_string(span));
  }
  ChannelEstimate out = est;
  out.method = EstimateMethod::ls_smoothed;
  out.param = span;
  if (span == 1) return out;
  const int half = span / 2;
  const int n = static_cast<int>(plan.active.size());
  // Average with the FFT window's own linear phase removed, then restore it.
  const double slope = 2.0 * kPi * static_cast<double>(phy::kTimingBackoff) / static_cast<double>(plan.fft_size);
  ComplexBuf flat(est.h_hat.size());
  for (int i = 0; i < n; ++i) {
    flat[static_cast<std::size_t>(i)] = est.h_hat[static_cast<std::size_t>(i)] * std::polar(1.0, slope * plan.active[static_cast<std::size_t>(i)]);
  }
  // Contiguous runs of active tones (the DC gap splits the band in two).
  int run_start = 0;
  for (int i = 0; i < n; ++i) {
    if (i > 0 && plan.active[static_cast<std::size_t>(i)] != plan.active[static_cast<std::size_t>(i - 1)] + 1) run_start = i;
    int run_end = i;
    while (run_end + 1 < n && plan.active[static_cast<std::size_t>(run_end + 1)] == plan.active[static_cast<std::size_t>(run_end)] + 1) ++run_end;
    const int lo = std::max(run_start, i - half);
    const int hi = std::min(run_end, i + half);
    cplx acc{};
    for (int j = lo; j <= hi; ++j) acc += flat[static_cast<std::size_t>(j)];
    out.h_hat[static_cast<std::size_t>(i)] =
        acc / static_cast<double>(hi - lo + 1) * std::polar(1.0, -slope * plan.active[static_cast<std::size_t>(i)]);
  }
  return out;
}

ChannelEstimate time_domain_ls_estimate(const phy::FrequencyGrid& rx_heltf, int n_taps, const TonePlan& plan) {
  if (n_taps < 1 || n_taps > static_cast<int>(phy::kCpLen)) {
    throw ArgumentError("time_domain_ls_estimate: n_taps must be in [1, 16]");
  }
  const auto& x = phy::heltf_sequence();
  const Eigen::Index rows = static_cast<Eigen::Index>(plan.active.size());
  const double n = static_cast<double>(plan.fft_size);
  Eigen::MatrixXcd f(rows, n_taps);
  Eigen::VectorXcd y(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int k = plan.active[static_cast<std::size_t>(r)];
    for (int d = 0; d < n_taps; ++d) f(r, d) = std::polar(1.0, -2.0 * kPi * k * d / n);
    // Known training values are +-1, so X^H y == x * y.
    y(r) = rx_heltf.at(k) * x[static_cast<std::size_t>(r)];
  }
  const Eigen::MatrixXcd gram = f.adjoint() * f;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(gram);
  const auto& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(cond <= 1e12)) throw NumericalError("time_domain_ls_estimate: normal matrix is ill-conditioned");
  const Eigen::VectorXcd g = gram.ldlt().solve(f.adjoint() * y);
  const Eigen::VectorXcd h = f * g;

  ChannelEstimate est;
  est.method = EstimateMethod::ls_time_domain;
  est.param = n_taps;
  est.h_hat.assign(h.data(), h.data() + h.size());
  return est;
}

void estimate_cpe_sro(const phy::FrequencyGrid& rx_data, const ChannelEstimate& est,
                      const std::array<cplx, phy::kNumPilots>& tx_pilots, std::size_t m,
                      CpeSroEstimate& state, const TonePlan& plan) {
  std::array<double, phy::kNumPilots> ks{}, theta{}, w{};
  int usable = 0;
  double prev = 0.0;
  for (std::size_t p = 0; p < plan.pilots.size(); ++p) {
    const int k = plan.pilots[p];
    const cplx h = est.at_tone(k, plan);
    const cplx z = rx_data.at(k) * std::conj(tx_pilots[p]) * std::conj(h);
    ks[p] = k;
    double t = std::arg(z);
    if (p > 0) t = prev + dsp::wrap_phase(t - prev);
    theta[p] = t;
    prev = t;
    const double mag = std::abs(h);
    w[p] = (mag < 1e-9 || std::abs(rx_data.at(k)) < 1e-9) ? 0.0 : mag * mag;
    if (w[p] > 0.0) ++usable;
  }
  if (usable < 2) throw NumericalError("estimate_cpe_sro: fewer than two usable pilots");
  const auto fit = dsp::wls_line_fit(ks, theta, w);

  const double n = static_cast<double>(plan.fft_size);
  const double drift = fit.slope * n / (2.0 * kPi);
  const double dn = FrameLayout::elapsed_samples(m);
  state.sum_dn_drift += dn * drift;
  state.sum_dn2 += dn * dn;
  state.clock_ratio = state.sum_dn_drift / state.sum_dn2;
  state.drift_hat = state.clock_ratio * dn;
  state.tau_hat = -state.drift_hat * plan.sample_period;
  state.omega_hat = dsp::wrap_phase(-fit.intercept);
  state.omega_history.push_back(state.omega_hat);
  state.drift_history.push_back(drift);
}

cplx mmse_coefficient(cplx h_d, double sigma2) {
  const double den = std::norm(h_d) + sigma2;
  if (den == 0.0) return {};
  return std::conj(h_d) / den;
}

Equalized mmse_equalize(const phy::FrequencyGrid& rx_data, const ChannelEstimate& est,
                        const CpeSroEstimate& cpesro, const TonePlan& plan) {
  Equalized out;
  out.points.resize(plan.data.size());
  out.h_d.resize(plan.data.size());
  const double n = static_cast<double>(plan.fft_size);
  const double sigma2 = std::max(est.sigma2, 0.0);
  for (std::size_t i = 0; i < plan.data.size(); ++i) {
    const int k = plan.data[i];
    // conj(C_CpeSro) = e^{-j 2 pi tau k / (N Ts)} e^{-j omega}, tau = -drift * Ts.
    const cplx c_conj = std::polar(1.0, 2.0 * kPi * cpesro.drift_hat * k / n - cpesro.omega_hat);
    const cplx hd = est.at_tone(k, plan) * c_conj;
    out.h_d[i] = hd;
    out.points[i] = mmse_coefficient(hd, sigma2) * rx_data.at(k);
  }
  return out;
}

std::vector<std::uint8_t> hard_demap(std::span<const cplx> points, int order) {
  const auto& con = phy::Constellation::get(order);
  const int bps = con.bits_per_symbol();
  std::vector<std::uint8_t> bits;
  bits.reserve(points.size() * static_cast<std::size_t>(bps));
  for (const auto& p : points) {
    const unsigned label = con.nearest_label(p);
    for (int b = bps - 1; b >= 0; --b) bits.push_back(static_cast<std::uint8_t>((label >> b) & 1U));
  }
  return bits;
}

std::string ReceiverConfig::name() const {
  switch (variant) {
    case Variant::no_smoothing: return "ls";
    case Variant::smoothing: return "ls_smooth" + std::to_string(span);
    case Variant::time_domain: return "ls_td" + std::to_string(n_taps);
  }
  return "?";
}

ReceiverConfig ReceiverConfig::parse(const std::string& name) {
  ReceiverConfig c;
  auto number_after = [&](std::size_t pos) {
    try {
      return std::stoi(name.substr(pos));
    } catch (const std::logic_error&) {
      throw ConfigError("bad receiver name '" + name + "'");
    }
  };
  if (name == "ls" || name == "no_smoothing") {
    c.variant = Variant::no_smoothing;
  } else if (name.rfind("ls_smooth", 0) == 0) {
    c.variant = Variant::smoothing;
    if (name.size() > 9) c.span = number_after(9);
  } else if (name == "smoothing") {
    c.variant = Variant::smoothing;
  } else if (name.rfind("ls_td", 0) == 0) {
    c.variant = Variant::time_domain;
    if (name.size() > 5) c.n_taps = number_after(5);
  } else if (name == "time_domain") {
    c.variant = Variant::time_domain;
  } else {
    throw ConfigError("unknown receiver '" + name + "'");
  }
  return c;
}

ChannelEstimate estimate_channel(std::span<const cplx> capture, const ReceiverConfig& cfg, const TonePlan& plan) {
  const auto heltf = demodulate_heltf(capture, plan);
  ChannelEstimate est;
  switch (cfg.variant) {
    case Variant::no_smoothing: est = ls_channel_estimate(heltf, plan); break;
    case Variant::smoothing: est = smooth_frequency(ls_channel_estimate(heltf, plan), cfg.span, plan); break;
    case Variant::time_domain: est = time_domain_ls_estimate(heltf, cfg.n_taps, plan); break;
  }
  est.sigma2 = estimate_noise_variance(capture);
  return est;
}

namespace {

RxResult equalize_all(const link::RxCapture& capture, const ChannelEstimate& est,
                      const std::function<void(std::size_t, const phy::FrequencyGrid&, CpeSroEstimate&)>& track) {
  const auto& plan = TonePlan::he20();
  RxResult res;
  res.sigma2 = est.sigma2;
  const double s2 = std::max(est.sigma2, kSigma2Floor);
  res.points.reserve(capture.n_symbols);
  res.rho.reserve(capture.n_symbols);
  for (std::size_t m = 0; m < capture.n_symbols; ++m) {
    const auto grid = demodulate_data(capture.samples, m, plan);
    track(m, grid, res.tracking);
    auto eq = mmse_equalize(grid, est, res.tracking, plan);
    std::vector<double> rho(eq.h_d.size());
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = std::norm(eq.h_d[i]) / s2;
    res.points.push_back(std::move(eq.points));
    res.rho.push_back(std::move(rho));
  }
  return res;
}

}  // namespace

RxResult run_conventional(const link::RxCapture& capture, const ReceiverConfig& cfg) {
  const auto& plan = TonePlan::he20();
  const ChannelEstimate est = estimate_channel(capture.samples, cfg, plan);
  return equalize_all(capture, est, [&](std::size_t m, const phy::FrequencyGrid& g, CpeSroEstimate& st) {
    if (cfg.track_cpe_sro) estimate_cpe_sro(g, est, phy::pilot_sequence(m), m, st, plan);
  });
}

RxResult run_genie(const link::RxCapture& capture, const link::CaptureGenie& genie,
                   const link::LinkConfig& link_cfg) {
  const auto& plan = TonePlan::he20();
  const double n = static_cast<double>(plan.fft_size);
  std::vector<double> filt;
  if (link_cfg.impairments) {
    filt = impair::design_lowpass(link_cfg.impairments->filter_length, link_cfg.impairments->filter_cutoff);
  }
  ChannelEstimate est;
  est.method = EstimateMethod::genie;
  est.sigma2 = genie.noise_variance;
  est.h_hat.resize(plan.active.size());
  for (std::size_t i = 0; i < plan.active.size(); ++i) {
    const int k = plan.active[i];
    cplx h = genie.channel.at_tone(k) * std::polar(1.0, -2.0 * kPi * k * phy::kTimingBackoff / n);
    if (!filt.empty()) h *= impair::filter_response(filt, k / n);
    est.h_hat[i] = h;
  }
  return equalize_all(capture, est, [&](std::size_t m, const phy::FrequencyGrid&, CpeSroEstimate& st) {
    st.clock_ratio = genie.offsets.clock_ratio;
    st.drift_hat = st.clock_ratio * FrameLayout::elapsed_samples(m);
    st.tau_hat = -st.drift_hat * plan.sample_period;
    st.omega_hat = genie.offsets.applied_phase.empty() ? 0.0 : dsp::wrap_phase(genie.offsets.cpe(m));
  });
}

}  // namespace dwp::rx
