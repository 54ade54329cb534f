#include "dwp/impairments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dwp/error.hpp"
#include "dwp/phy_frame.hpp"

namespace dwp::impair {
namespace {

constexpr int kSroHalf = 64;
constexpr double kSroBeta = 10.0;
constexpr int kSroPhases = 1024;

double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

// Kernel table: row p holds the 128 taps for fractional offset p / kSroPhases.
struct SroKernel {
  std::vector<double> table;

  SroKernel() : table(static_cast<std::size_t>((kSroPhases + 1) * 2 * kSroHalf)) {
    const double i0b = std::cyl_bessel_i(0.0, kSroBeta);
    for (int p = 0; p <= kSroPhases; ++p) {
      const double mu = static_cast<double>(p) / kSroPhases;
      for (int j = -kSroHalf + 1; j <= kSroHalf; ++j) {
        const double x = j - mu;
        const double r = x / kSroHalf;
        const double w = std::abs(r) >= 1.0 ? 0.0
                                             : std::cyl_bessel_i(0.0, kSroBeta * std::sqrt(1.0 - r * r)) / i0b;
        table[static_cast<std::size_t>(p * 2 * kSroHalf + (j + kSroHalf - 1))] = sinc(x) * w;
      }
    }
  }

  const double* row(int p) const { return &table[static_cast<std::size_t>(p * 2 * kSroHalf)]; }
};

const SroKernel& sro_kernel() {
  static const SroKernel k;
  return k;
}

}  // namespace

std::string to_string(ImpairmentType t) {
  switch (t) {
    case ImpairmentType::I: return "I";
    case ImpairmentType::II: return "II";
    case ImpairmentType::III: return "III";
  }
  return "?";
}

ImpairmentType parse_type(const std::string& s) {
  if (s == "I" || s == "1") return ImpairmentType::I;
  if (s == "II" || s == "2") return ImpairmentType::II;
  if (s == "III" || s == "3") return ImpairmentType::III;
  throw ArgumentError("unknown impairment type '" + s + "'");
}

ImpairmentConfig ImpairmentConfig::defaults(ImpairmentType t) {
  ImpairmentConfig c;
  c.type = t;
  return c;
}

ImpairmentConfig ImpairmentConfig::zeroed() const {
  ImpairmentConfig c = *this;
  c.clock_ppm = 0.0;
  c.residual_cfo_hz = 0.0;
  c.phase_noise_dbchz = -std::numeric_limits<double>::infinity();
  c.pa_backoff_db = std::numeric_limits<double>::infinity();
  return c;
}

namespace {
nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}
double read_number(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ConfigError("expected a number, got '" + s + "'");
  }
  return j.get<double>();
}
}  // namespace

nlohmann::json ImpairmentConfig::to_json() const {
  return {
      {"type", to_string(type)},
      {"chain", "pa,channel,filter,sro,cfo+phase_noise,awgn"},
      {"clock_ppm", clock_ppm},
      {"residual_cfo_hz", residual_cfo_hz},
      {"phase_noise_dbchz", finite_or_null(phase_noise_dbchz)},
      {"phase_noise_corner_hz", phase_noise_corner_hz},
      {"pa_backoff_db", finite_or_null(pa_backoff_db)},
      {"pa_smoothness", pa_smoothness},
      {"filter_length", filter_length},
      {"filter_cutoff", filter_cutoff},
      {"fixed_offsets", fixed_offsets},
  };
}

ImpairmentConfig ImpairmentConfig::from_json(const nlohmann::json& j) {
  ImpairmentConfig c;
  try {
    if (j.contains("type")) c.type = parse_type(j.at("type").get<std::string>());
    if (j.contains("clock_ppm")) c.clock_ppm = read_number(j.at("clock_ppm"));
    if (j.contains("residual_cfo_hz")) c.residual_cfo_hz = read_number(j.at("residual_cfo_hz"));
    if (j.contains("phase_noise_dbchz")) c.phase_noise_dbchz = read_number(j.at("phase_noise_dbchz"));
    if (j.contains("phase_noise_corner_hz")) c.phase_noise_corner_hz = read_number(j.at("phase_noise_corner_hz"));
    if (j.contains("pa_backoff_db")) c.pa_backoff_db = read_number(j.at("pa_backoff_db"));
    if (j.contains("pa_smoothness")) c.pa_smoothness = read_number(j.at("pa_smoothness"));
    if (j.contains("filter_length")) c.filter_length = j.at("filter_length").get<int>();
    if (j.contains("filter_cutoff")) c.filter_cutoff = read_number(j.at("filter_cutoff"));
    if (j.contains("fixed_offsets")) c.fixed_offsets = j.at("fixed_offsets").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("impairment config: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  if (std::abs(c.clock_ppm) > 100.0) throw ConfigError("clock_ppm must be within +-100");
  if (!c.fixed_offsets && (c.clock_ppm < 0.0 || c.residual_cfo_hz < 0.0)) {
    throw ConfigError("clock_ppm and residual_cfo_hz are draw bounds and must be non-negative");
  }
  if (!(c.pa_smoothness > 0.0)) throw ConfigError("pa_smoothness must be positive");
  if (c.filter_length < 1 || c.filter_length % 2 == 0) throw ConfigError("filter_length must be odd");
  if (!(c.filter_cutoff > 0.0 && c.filter_cutoff < 0.5)) throw ConfigError("filter_cutoff must be in (0, 0.5)");
  return c;
}

// ---- genie ------------------------------------------------------------------

double GenieOffsets::window_phase(std::size_t start, std::size_t len) const {
  if (applied_phase.empty()) return 0.0;
  if (start + len > applied_phase.size()) throw ArgumentError("window_phase: window out of range");
  cplx acc{};
  for (std::size_t i = start; i < start + len; ++i) acc += std::polar(1.0, applied_phase[i]);
  // Unwrap relative to the first sample so long CFO ramps keep their sign.
  const double ref = applied_phase[start];
  return ref + dsp::wrap_phase(std::arg(acc) - ref);
}

double GenieOffsets::cpe(std::size_t m) const {
  using phy::FrameLayout;
  const double t = window_phase(FrameLayout::heltf_window(), phy::kFftSize);
  const double d = window_phase(FrameLayout::data_window(m), phy::kFftSize);
  return -(d - t);
}

std::vector<double> GenieOffsets::cpe_per_symbol(std::size_t n_symbols) const {
  std::vector<double> out(n_symbols);
  for (std::size_t m = 0; m < n_symbols; ++m) out[m] = cpe(m);
  return out;
}

// ---- analog filter ------------------------------------------------------------

std::vector<double> design_lowpass(int length, double cutoff) {
  if (length < 1 || length % 2 == 0) throw ArgumentError("design_lowpass: length must be odd");
  if (!(cutoff > 0.0 && cutoff <= 0.5)) throw ArgumentError("design_lowpass: cutoff must be in (0, 0.5]");
  std::vector<double> h(static_cast<std::size_t>(length));
  const double c = (length - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < length; ++i) {
    const double n = i - c;
    const double w = length == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * kPi * i / (length - 1));
    h[static_cast<std::size_t>(i)] = 2.0 * cutoff * sinc(2.0 * cutoff * n) * w;
    sum += h[static_cast<std::size_t>(i)];
  }
  for (auto& v : h) v /= sum;
  return h;
}

cplx filter_response(const std::vector<double>& taps, double f) {
  const double c = (static_cast<double>(taps.size()) - 1.0) / 2.0;
  cplx acc{};
  for (std::size_t i = 0; i < taps.size(); ++i) {
    acc += taps[i] * std::polar(1.0, -2.0 * kPi * f * (static_cast<double>(i) - c));
  }
  return acc;
}

ComplexBuf apply_fir_centered(std::span<const cplx> x, const std::vector<double>& taps) {
  const long n = static_cast<long>(x.size());
  const long half = static_cast<long>(taps.size() / 2);
  ComplexBuf y(x.size());
  for (long i = 0; i < n; ++i) {
    cplx acc{};
    const long lo = std::max(0L, i - half);
    const long hi = std::min(n - 1, i + half);
    for (long s = lo; s <= hi; ++s) acc += taps[static_cast<std::size_t>(half + i - s)] * x[static_cast<std::size_t>(s)];
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

ComplexBuf apply_analog_filter(std::span<const cplx> x, const ImpairmentConfig& cfg) {
  return apply_fir_centered(x, design_lowpass(cfg.filter_length, cfg.filter_cutoff));
}

// ---- sampling-rate offset ---------------------------------------------------

SroResult apply_sro(std::span<const cplx> x, double ppm) {
  if (std::abs(ppm) > 100.0) throw ArgumentError("apply_sro: |ppm| must be <= 100");
  SroResult r;
  r.clock_ratio = ppm * 1e-6;
  if (ppm == 0.0) {
    r.samples.assign(x.begin(), x.end());
    return r;
  }
  const auto& kern = sro_kernel();
  const long n = static_cast<long>(x.size());
  r.samples.assign(x.size(), cplx{});
  const double ratio = 1.0 + r.clock_ratio;
  for (long i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * ratio;
    const double fl = std::floor(t);
    const long base = static_cast<long>(fl);
    const double pos = (t - fl) * kSroPhases;
    int p = static_cast<int>(pos);
    if (p >= kSroPhases) p = kSroPhases - 1;
    const double frac = pos - p;
    const double* r0 = kern.row(p);
    const double* r1 = kern.row(p + 1);
    cplx acc{};
    for (int j = -kSroHalf + 1; j <= kSroHalf; ++j) {
      const long s = base + j;
      if (s < 0 || s >= n) continue;
      const std::size_t idx = static_cast<std::size_t>(j + kSroHalf - 1);
      const double w = r0[idx] + frac * (r1[idx] - r0[idx]);
      acc += w * x[static_cast<std::size_t>(s)];
    }
    r.samples[static_cast<std::size_t>(i)] = acc;
  }
  return r;
}

SroResult apply_sro(std::span<const cplx> x, const ImpairmentConfig& cfg, SeededRng& rng) {
  const double ppm = cfg.fixed_offsets ? cfg.clock_ppm : rng.uniform(-cfg.clock_ppm, cfg.clock_ppm);
  return apply_sro(x, ppm);
}

// ---- CFO and phase noise ----------------------------------------------------

std::vector<double> phase_noise_trajectory(std::size_t n, const ImpairmentConfig& cfg, SeededRng& rng) {
  std::vector<double> phi(n, 0.0);
  if (!std::isfinite(cfg.phase_noise_dbchz) || n == 0) return phi;
  const double s0 = std::pow(10.0, cfg.phase_noise_dbchz / 10.0);
  const double a = std::exp(-2.0 * kPi * cfg.phase_noise_corner_hz * cfg.sample_period);
  const double q = s0 * (1.0 - a) * (1.0 - a) / cfg.sample_period;
  const double sd = std::sqrt(q);
  double v = std::sqrt(q / (1.0 - a * a)) * rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) v = a * v + sd * rng.normal();
    phi[i] = v;
  }
  return phi;
}

RotationResult apply_cfo_and_phase_noise(std::span<const cplx> x, const ImpairmentConfig& cfg,
                                         SeededRng& rng) {
  RotationResult r;
  const double cfo = cfg.fixed_offsets ? cfg.residual_cfo_hz
                                       : rng.uniform(-cfg.residual_cfo_hz, cfg.residual_cfo_hz);
  SeededRng pn_rng(rng.seed(), rng.stream(), Stage::phase_noise);
  auto phase = phase_noise_trajectory(x.size(), cfg, pn_rng);
  r.genie.cfo_hz = cfo;
  r.samples.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    phase[i] += 2.0 * kPi * cfo * static_cast<double>(i) * cfg.sample_period;
    r.samples[i] = phase[i] == 0.0 ? x[i] : x[i] * std::polar(1.0, phase[i]);
  }
  r.genie.applied_phase = std::move(phase);
  return r;
}

// ---- PA -----------------------------------------------------------------------

ComplexBuf apply_pa(std::span<const cplx> x, double backoff_db, double smoothness) {
  if (!(smoothness > 0.0)) throw ArgumentError("apply_pa: smoothness must be positive");
  ComplexBuf y(x.begin(), x.end());
  if (!std::isfinite(backoff_db) || x.empty()) return y;
  const double pin = dsp::squared_norm(x) / static_cast<double>(x.size());
  if (!(pin > 0.0)) return y;
  const double asat = std::sqrt(pin * std::pow(10.0, backoff_db / 10.0));
  const double p2 = 2.0 * smoothness;
  for (auto& v : y) {
    const double r = std::abs(v);
    if (r == 0.0) continue;
    const double g = 1.0 / std::pow(1.0 + std::pow(r / asat, p2), 1.0 / p2);
    v *= g;
  }
  return y;
}

// ---- chain --------------------------------------------------------------------

ComplexBuf apply_tx_chain(std::span<const cplx> x, const ImpairmentConfig& cfg) {
  if (cfg.pa_on()) return apply_pa(x, cfg.pa_backoff_db, cfg.pa_smoothness);
  return ComplexBuf(x.begin(), x.end());
}

RotationResult apply_rx_chain(std::span<const cplx> x, const ImpairmentConfig& cfg, SeededRng& rng) {
  // Offsets are drawn in a fixed order regardless of type so that Type II and
  // III packets with the same seed share the clock draw.
  const double ppm = cfg.fixed_offsets ? cfg.clock_ppm : rng.uniform(-cfg.clock_ppm, cfg.clock_ppm);
  ComplexBuf y = apply_analog_filter(x, cfg);
  double ratio = 0.0;
  if (cfg.sro_on()) {
    auto s = apply_sro(y, ppm);
    y = std::move(s.samples);
    ratio = s.clock_ratio;
  }
  ImpairmentConfig rot = cfg;
  rot.fixed_offsets = true;
  const double cfo = cfg.fixed_offsets ? cfg.residual_cfo_hz
                                       : rng.uniform(-cfg.residual_cfo_hz, cfg.residual_cfo_hz);
  rot.residual_cfo_hz = cfg.cfo_on() ? cfo : 0.0;
  if (!cfg.phase_noise_on()) rot.phase_noise_dbchz = -std::numeric_limits<double>::infinity();
  RotationResult r = apply_cfo_and_phase_noise(y, rot, rng);
  r.genie.clock_ratio = ratio;
  return r;
}

RotationResult apply_chain(std::span<const cplx> x, const ImpairmentConfig& cfg, SeededRng& rng) {
  const ComplexBuf tx = apply_tx_chain(x, cfg);
  return apply_rx_chain(tx, cfg, rng);
}

}  // namespace dwp::impair
