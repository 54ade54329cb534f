#include <doctest.h>

#include <cmath>

#include "dwp/dsp.hpp"
#include "dwp/error.hpp"
#include "dwp/impairments.hpp"
#include "dwp/phy_frame.hpp"
#include "dwp/rng.hpp"

using namespace dwp;
using namespace dwp::impair;

namespace {

ComplexBuf tone(std::size_t n, double f) {
  ComplexBuf x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::polar(1.0, 2.0 * kPi * f * static_cast<double>(i));
  return x;
}

// Steady-state amplitude gain of the filter on a complex tone, measured mid-signal.
double measured_gain(double f, double cutoff = ImpairmentConfig{}.filter_cutoff) {
  ImpairmentConfig cfg;
  cfg.filter_cutoff = cutoff;
  const auto x = tone(2000, f);
  const auto y = apply_analog_filter(x, cfg);
  double g = 0.0;
  for (std::size_t i = 500; i < 1500; ++i) g += std::abs(y[i]) / std::abs(x[i]);
  return g / 1000.0;
}

ComplexBuf repeated_symbols(std::size_t n_sym, std::uint64_t seed) {
  const auto& plan = phy::TonePlan::he20();
  SeededRng rng(seed);
  phy::FrequencyGrid g;
  g.bins.assign(256, 0.0);
  for (int k : plan.active) g.bins[plan.bin(k)] = rng.complex_normal(1.0);
  const auto sym = phy::modulate_symbol(g);
  ComplexBuf x;
  for (std::size_t s = 0; s < n_sym; ++s) x.insert(x.end(), sym.begin(), sym.end());
  return x;
}

}  // namespace

TEST_CASE("type table") {
  const auto i = ImpairmentConfig::defaults(ImpairmentType::I);
  CHECK(i.filter_on());
  CHECK_FALSE(i.sro_on());
  CHECK_FALSE(i.cfo_on());
  CHECK_FALSE(i.phase_noise_on());
  CHECK_FALSE(i.pa_on());
  const auto ii = ImpairmentConfig::defaults(ImpairmentType::II);
  CHECK((ii.filter_on() && ii.sro_on() && ii.phase_noise_on() && ii.pa_on()));
  CHECK_FALSE(ii.cfo_on());
  const auto iii = ImpairmentConfig::defaults(ImpairmentType::III);
  CHECK((iii.filter_on() && iii.sro_on() && iii.cfo_on() && iii.phase_noise_on() && iii.pa_on()));
  CHECK(parse_type("II") == ImpairmentType::II);
  CHECK_THROWS_AS(parse_type("IV"), ArgumentError);
}

TEST_CASE("config JSON round trip and validation") {
  auto c = ImpairmentConfig::defaults(ImpairmentType::III).zeroed();
  const auto back = ImpairmentConfig::from_json(c.to_json());
  CHECK(back.type == ImpairmentType::III);
  CHECK(std::isinf(back.pa_backoff_db));
  CHECK(std::isinf(back.phase_noise_dbchz));
  CHECK(back.phase_noise_dbchz < 0);
  auto j = c.to_json();
  j["filter_length"] = 62;
  CHECK_THROWS_AS(ImpairmentConfig::from_json(j), ConfigError);
  j = c.to_json();
  j["clock_ppm"] = -1;
  CHECK_THROWS_AS(ImpairmentConfig::from_json(j), ConfigError);
}

TEST_CASE("analog filter response") {
  ImpairmentConfig cfg;
  const auto taps = design_lowpass(63, 0.45);
  double dc = 0.0;
  for (double t : taps) dc += t;
  CHECK(dc == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(measured_gain(0.0, 0.45) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(measured_gain(0.3, 0.45) - 1.0) <= 0.05);
  CHECK(20.0 * std::log10(measured_gain(0.48, 0.45)) <= -20.0);
  CHECK(measured_gain(0.0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(measured_gain(0.3) - 1.0) <= 0.05);
  CHECK(std::abs(std::abs(filter_response(taps, 0.3)) - measured_gain(0.3, 0.45)) < 1e-9);
  // Zero phase: an in-band tone keeps its phase.
  const auto x = tone(1000, 0.1);
  const auto y = apply_analog_filter(x, cfg);
  CHECK(std::abs(std::arg(y[500] * std::conj(x[500]))) < 1e-9);
}

TEST_CASE("SRO resampler") {
  const auto x = tone(120000, 0.01);
  const auto same = apply_sro(x, 0.0);
  CHECK(same.samples == x);
  CHECK(same.clock_ratio == 0.0);

  const auto r = apply_sro(x, 20.0);
  CHECK(r.clock_ratio == doctest::Approx(20e-6));
  // out[n] = x(n (1 + eps)): phase lead 2 pi f n eps.
  const std::size_t n = 100000;
  const double drift = std::arg(r.samples[n] * std::conj(x[n])) / (2.0 * kPi * 0.01);
  CHECK(std::abs(drift - 2.0) < 0.01);
  CHECK_THROWS_AS(apply_sro(x, 150.0), ArgumentError);
}

TEST_CASE("SRO shows up as a per-tone phase ramp") {
  const auto& plan = phy::TonePlan::he20();
  const std::size_t n_sym = 16;
  const double ppm = 20.0;
  for (int k : {-122, -116, -58, -1, 1, 58, 116, 122}) {
    const auto x = tone(n_sym * 272, k / 256.0);
    const auto y = apply_sro(x, ppm).samples;
    for (std::size_t m = 1; m + 1 < n_sym; ++m) {
      const auto ref = phy::demodulate_symbol(std::span<const cplx>(x).subspan(m * 272, 272), plan);
      const auto g = phy::demodulate_symbol(std::span<const cplx>(y).subspan(m * 272, 272), plan);
      // The FFT window sees x advanced by eps times its centre position.
      const double delta = ppm * 1e-6 * (static_cast<double>(m * 272 + 16) + 127.5);
      const double expected = 2.0 * kPi * k * delta / 256.0;
      const double got = std::arg(g.at(k) * std::conj(ref.at(k)));
      CHECK(std::abs(dsp::wrap_phase(got - expected)) < 1e-3);
    }
  }
}

TEST_CASE("CFO and phase noise") {
  ImpairmentConfig cfg = ImpairmentConfig::defaults(ImpairmentType::III);
  cfg.fixed_offsets = true;
  cfg.residual_cfo_hz = 0.0;
  cfg.phase_noise_dbchz = -std::numeric_limits<double>::infinity();
  SeededRng rng(4);
  const auto x = repeated_symbols(4, 4);
  const auto same = apply_cfo_and_phase_noise(x, cfg, rng);
  CHECK(same.samples == x);

  cfg.residual_cfo_hz = 200.0;
  const auto r = apply_cfo_and_phase_noise(x, cfg, rng);
  const auto& plan = phy::TonePlan::he20();
  const double step = 2.0 * kPi * 200.0 * 272.0 * 50e-9;
  double prev = 0.0;
  for (std::size_t m = 0; m < 4; ++m) {
    const auto g = phy::demodulate_symbol(std::span<const cplx>(r.samples).subspan(m * 272, 272), plan);
    const auto g0 = phy::demodulate_symbol(std::span<const cplx>(x).subspan(m * 272, 272), plan);
    cplx acc = 0.0;
    for (int k : plan.active) acc += g.at(k) * std::conj(g0.at(k));
    const double ph = std::arg(acc);
    if (m > 0) CHECK(std::abs(dsp::wrap_phase(ph - prev) - step) < 1e-6);
    prev = ph;
  }
}

TEST_CASE("phase noise statistics") {
  ImpairmentConfig cfg = ImpairmentConfig::defaults(ImpairmentType::II);
  const std::size_t n_sym = 10000;
  SeededRng rng(5, 0, Stage::phase_noise);
  const auto ph = phase_noise_trajectory(n_sym * 272, cfg, rng);
  std::vector<double> cpe(n_sym);
  for (std::size_t m = 0; m < n_sym; ++m) {
    double s = 0, c = 0;
    for (std::size_t i = 0; i < 272; ++i) {
      s += std::sin(ph[m * 272 + i]);
      c += std::cos(ph[m * 272 + i]);
    }
    cpe[m] = std::atan2(s, c);
  }
  double mean = 0, var = 0, inc = 0, inc2 = 0;
  for (double v : cpe) mean += v;
  mean /= n_sym;
  for (double v : cpe) var += (v - mean) * (v - mean);
  var /= n_sym;
  for (std::size_t m = 1; m < n_sym; ++m) {
    const double d = cpe[m] - cpe[m - 1];
    inc += d;
    inc2 += d * d;
  }
  inc /= n_sym - 1;
  inc2 /= n_sym - 1;
  CHECK(var > 0.0);
  CHECK(std::abs(inc) < 4.0 * std::sqrt(inc2 / (n_sym - 1)));
  // Stationary variance of the OU process equals pi * S0 * f_c.
  const double s0 = std::pow(10.0, cfg.phase_noise_dbchz / 10.0);
  double pv = 0.0;
  for (double v : ph) pv += v * v;
  pv /= static_cast<double>(ph.size());
  CHECK(pv == doctest::Approx(kPi * s0 * cfg.phase_noise_corner_hz).epsilon(0.25));
}

TEST_CASE("Rapp PA") {
  SeededRng rng(6);
  ComplexBuf x(5000);
  for (auto& v : x) v = rng.complex_normal(1.0);
  const auto lin = apply_pa(x, 40.0, 3.0);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(lin[i] - x[i]) <= 1e-3 * std::abs(x[i]));
  ComplexBuf ones(16, cplx(0.6, 0.8));
  for (double p : {1.0, 3.0, 50.0}) {
    const auto y = apply_pa(ones, 0.0, p);
    CHECK(std::abs(y[0]) == doctest::Approx(std::pow(2.0, -1.0 / (2.0 * p))).epsilon(1e-12));
  }
  CHECK(std::abs(apply_pa(ones, 0.0, 500.0)[0]) == doctest::Approx(1.0).epsilon(1e-3));
  const auto nl = apply_pa(x, 8.0, 3.0);
  double evm = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) evm += std::norm(nl[i] - x[i]);
  CHECK(evm / dsp::squared_norm(x) > 1e-6);
  CHECK(apply_pa(x, std::numeric_limits<double>::infinity(), 3.0) == x);
}

TEST_CASE("chain composition by type") {
  const auto x = repeated_symbols(6, 7);
  auto c1 = ImpairmentConfig::defaults(ImpairmentType::I);
  SeededRng r1(8, 1, Stage::impairment);
  const auto a = apply_chain(x, c1, r1);
  CHECK(a.samples == apply_analog_filter(x, c1));
  CHECK(a.genie.clock_ratio == 0.0);
  CHECK(a.genie.cfo_hz == 0.0);
  for (double p : a.genie.applied_phase) CHECK(p == 0.0);

  auto c2 = ImpairmentConfig::defaults(ImpairmentType::II);
  SeededRng r2(8, 1, Stage::impairment);
  const auto b = apply_chain(x, c2, r2);
  CHECK(b.genie.cfo_hz == 0.0);
  CHECK(b.genie.clock_ratio != 0.0);
  CHECK(b.samples != a.samples);

  auto c3 = ImpairmentConfig::defaults(ImpairmentType::III).zeroed();
  SeededRng r3(8, 1, Stage::impairment);
  const auto c = apply_chain(x, c3, r3);
  REQUIRE(c.samples.size() == a.samples.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(c.samples[i] - a.samples[i]) < 1e-12);
}
