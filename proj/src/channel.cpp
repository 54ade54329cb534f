#include "dwp/channel.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dwp/error.hpp"

namespace dwp::channel {
namespace {

std::map<char, ChannelModelSpec> build_models() {
  auto mk = [](char id, double ds, std::vector<double> starts, std::vector<int> counts) {
    ChannelModelSpec s;
    s.id = id;
    s.delay_spread_ns = ds;
    for (std::size_t i = 0; i < starts.size(); ++i) s.clusters.push_back({starts[i], counts[i]});
    return s;
  };
  std::map<char, ChannelModelSpec> m;
  m['a'] = mk('a', 0, {0}, {1});
  m['b'] = mk('b', 15, {0, 40}, {5, 7});
  m['c'] = mk('c', 30, {0, 70}, {10, 8});
  m['d'] = mk('d', 50, {0, 120, 160}, {16, 7, 4});
  m['e'] = mk('e', 100, {0, 250, 300, 350}, {15, 12, 7, 4});
  m['f'] = mk('f', 150, {0, 350, 400, 450, 500, 550}, {15, 12, 7, 3, 2, 2});
  return m;
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

double placement_kernel(double x) {
  if (std::abs(x) > kPlacementHalfLen) return 0.0;
  const double w = 0.5 * (1.0 + std::cos(kPi * x / (kPlacementHalfLen + 1)));
  return sinc(x) * w;
}

ComplexBuf response(const ComplexBuf& taps, int precursor, std::size_t n) {
  ComplexBuf h(n);
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc{};
    for (std::size_t j = 0; j < taps.size(); ++j) {
      const double d = static_cast<double>(static_cast<int>(j) - precursor);
      const double a = -2.0 * kPi * static_cast<double>(k) * d / static_cast<double>(n);
      acc += taps[j] * cplx(std::cos(a), std::sin(a));
    }
    h[k] = acc;
  }
  return h;
}

}  // namespace

const ChannelModelSpec& ChannelModelSpec::tgax(char id) {
  static const auto models = build_models();
  auto it = models.find(id);
  if (it == models.end()) throw ArgumentError(std::string("unknown channel model '") + id + "'");
  return it->second;
}

int ChannelModelSpec::potential_taps() const {
  int n = 0;
  for (const auto& c : clusters) n += c.taps;
  return n;
}

nlohmann::json ChannelModelSpec::to_json() const {
  nlohmann::json j;
  j["id"] = std::string(1, id);
  j["delay_spread_ns"] = delay_spread_ns;
  j["tap_spacing_ns"] = tap_spacing_ns;
  auto& cl = j["clusters"] = nlohmann::json::array();
  for (const auto& c : clusters) cl.push_back({{"start_ns", c.start_ns}, {"taps", c.taps}});
  return j;
}

ChannelRealization make_sample_channel(ComplexBuf taps, int precursor, std::size_t fft_size) {
  if (taps.empty()) throw ArgumentError("make_sample_channel: no taps");
  ChannelRealization ch;
  ch.taps = std::move(taps);
  ch.precursor = precursor;
  ch.freq_response = response(ch.taps, precursor, fft_size);
  return ch;
}

ChannelRealization draw_channel(const ChannelModelSpec& spec, SeededRng& rng) {
  ChannelRealization ch;
  if (spec.delay_spread_ns <= 0.0) {
    const double phi = rng.uniform(-kPi, kPi);
    ch.path_delays_ns = {0.0};
    ch.path_gains = {std::polar(1.0, phi)};
    ch.taps = ch.path_gains;
    ch.freq_response = response(ch.taps, 0, 256);
    return ch;
  }

  std::map<long, cplx> paths;  // keyed by delay in 0.1 ns units
  for (const auto& c : spec.clusters) {
    for (int t = 0; t < c.taps; ++t) {
      const double tau = c.start_ns + spec.tap_spacing_ns * t;
      const double power = std::exp(-tau / spec.delay_spread_ns);
      paths[std::lround(tau * 10.0)] += rng.complex_normal(power);
    }
  }

  double max_delay = 0.0;
  for (const auto& [key, g] : paths) {
    ch.path_delays_ns.push_back(key / 10.0);
    ch.path_gains.push_back(g);
    max_delay = std::max(max_delay, key / 10.0);
  }

  const int last = static_cast<int>(std::ceil(max_delay / kSamplePeriodNs)) + kPlacementHalfLen;
  const int first = -kPlacementHalfLen;
  ComplexBuf grid(static_cast<std::size_t>(last - first + 1));
  for (std::size_t p = 0; p < ch.path_gains.size(); ++p) {
    const double d = ch.path_delays_ns[p] / kSamplePeriodNs;
    const double dr = std::round(d);
    if (std::abs(d - dr) < 1e-12) {
      grid[static_cast<std::size_t>(static_cast<int>(dr) - first)] += ch.path_gains[p];
      continue;
    }
    for (int n = first; n <= last; ++n) {
      const double k = placement_kernel(n - d);
      if (k != 0.0) grid[static_cast<std::size_t>(n - first)] += ch.path_gains[p] * k;
    }
  }

  std::size_t lo = 0, hi = grid.size();
  while (lo < hi && grid[lo] == cplx{}) ++lo;
  while (hi > lo && grid[hi - 1] == cplx{}) --hi;
  if (lo == hi) throw NumericalError("draw_channel: all taps vanished");
  ch.taps.assign(grid.begin() + static_cast<std::ptrdiff_t>(lo), grid.begin() + static_cast<std::ptrdiff_t>(hi));
  ch.precursor = -(first + static_cast<int>(lo));

  const double scale = 1.0 / std::sqrt(dsp::squared_norm(ch.taps));
  for (auto& t : ch.taps) t *= scale;
  for (auto& g : ch.path_gains) g *= scale;
  ch.freq_response = response(ch.taps, ch.precursor, 256);
  return ch;
}

ComplexBuf apply_channel(std::span<const cplx> tx, const ChannelRealization& ch) {
  const long n = static_cast<long>(tx.size());
  ComplexBuf y(tx.size());
  for (std::size_t j = 0; j < ch.taps.size(); ++j) {
    const long shift = static_cast<long>(j) - ch.precursor;
    const cplx g = ch.taps[j];
    if (g == cplx{}) continue;
    const long start = std::max(0L, shift);
    const long stop = std::min(n, n + shift);
    for (long i = start; i < stop; ++i) y[static_cast<std::size_t>(i)] += g * tx[static_cast<std::size_t>(i - shift)];
  }
  return y;
}

NoisyOutput add_awgn(std::span<const cplx> x, double snr_db, double signal_power_ref, SeededRng& rng) {
  if (std::isnan(snr_db)) throw ArgumentError("add_awgn: SNR is NaN");
  NoisyOutput out;
  out.samples.assign(x.begin(), x.end());
  if (std::isinf(snr_db) && snr_db > 0) return out;
  out.noise_variance = signal_power_ref / std::pow(10.0, snr_db / 10.0);
  for (auto& v : out.samples) v += rng.complex_normal(out.noise_variance);
  return out;
}

double rms_delay_spread_ns(const ChannelRealization& ch) {
  double p = 0, m1 = 0, m2 = 0;
  for (std::size_t i = 0; i < ch.path_gains.size(); ++i) {
    const double t = ch.path_delays_ns[i];
    const double w = std::norm(ch.path_gains[i]);
    p += w;
    m1 += w * t;
    m2 += w * t * t;
  }
  if (p <= 0) return 0.0;
  const double mean = m1 / p;
  return std::sqrt(std::max(0.0, m2 / p - mean * mean));
}

}  // namespace dwp::channel
