#include "dwp/selftest.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "dwp/channel.hpp"
#include "dwp/dataset.hpp"
#include "dwp/deepwiphy.hpp"
#include "dwp/dsp.hpp"
#include "dwp/fec.hpp"
#include "dwp/harness.hpp"
#include "dwp/link.hpp"
#include "dwp/nn.hpp"
#include "dwp/phy_frame.hpp"
#include "dwp/rng.hpp"
#include "dwp/rx_conventional.hpp"

namespace dwp::selftest {
namespace {

struct Failure {
  std::string what;
};

void check(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

std::string fft_roundtrip() {
  SeededRng rng(11);
  ComplexBuf x(256);
  for (auto& v : x) v = rng.complex_normal(1.0);
  const auto y = dsp::ifft(dsp::fft(x, 256), 256);
  double err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(x[i] - y[i]));
  check(err < 1e-12, "ifft(fft(x)) differs from x by " + std::to_string(err));
  return "max error " + std::to_string(err);
}

std::string tone_plan() {
  const auto& p = phy::TonePlan::he20();
  check(p.data.size() == 234 && p.pilots.size() == 8 && p.active.size() == 242, "tone counts");
  check(p.nulls.size() == 14, "null count");
  return "234 data, 8 pilots, 14 nulls";
}

std::string constellation_energy() {
  for (int order : {2, 64, 256, 1024}) {
    const auto& c = phy::Constellation::get(order);
    double e = 0.0;
    for (int l = 0; l < order; ++l) e += std::norm(c.point(static_cast<unsigned>(l)));
    e /= order;
    check(std::abs(e - 1.0) < 1e-12, "order " + std::to_string(order) + " energy " + std::to_string(e));
    for (int l = 0; l < order; ++l) {
      check(c.nearest_label(c.point(static_cast<unsigned>(l))) == static_cast<unsigned>(l), "nearest(point) != label");
    }
  }
  return "unit energy and self-demap for BPSK/64/256/1024";
}

std::string normalization() {
  SeededRng rng(12);
  ComplexBuf x(242);
  for (auto& v : x) v = rng.complex_normal(3.0);
  const auto y = dsp::normalize_field(x);
  check(std::abs(dsp::squared_norm(y) - 242.0) < 1e-9, "squared norm after normalization");
  return "squared norm 242";
}

std::string ldpc() {
  for (auto [num, den] : {std::pair{3, 4}, std::pair{5, 6}}) {
    const auto& code = fec::LdpcCode::get(num, den);
    SeededRng rng(13, static_cast<std::uint64_t>(num));
    fec::Bits info(static_cast<std::size_t>(code.k()));
    for (auto& b : info) b = rng.bit();
    const auto cw = fec::ldpc_encode(info, code);
    check(code.is_codeword(cw), "encoded word fails H c = 0");
    std::vector<double> llr(cw.size());
    for (std::size_t i = 0; i < cw.size(); ++i) llr[i] = cw[i] ? -4.0 : 4.0;
    llr[17] = -llr[17];
    const auto r = fec::ldpc_decode_minsum(llr, code);
    check(r.converged && r.codeword == cw, "single flip not corrected");
  }
  return "rate 3/4 and 5/6 encode and single-flip decode";
}

std::string loopback() {
  for (int mcs : {7, 8, 10}) {
    link::LinkConfig cfg;
    cfg.mcs = mcs;
    cfg.n_symbols = 4;
    cfg.model = '0';
    const auto pkt = link::simulate_packet(cfg, 5, 1);
    const auto res = rx::run_conventional(pkt.rx, {});
    const auto o = harness::score_packet(pkt, res);
    check(o.bit_errors == 0 && !o.packet_error, "MCS " + std::to_string(mcs) + " loopback has errors");
  }
  return "MCS 7/8/10 error free";
}

std::string mmse() {
  const cplx c = rx::mmse_coefficient(0.5, 0.25);
  check(std::abs(c - cplx(1.0, 0.0)) < 1e-15, "h=0.5, s2=0.25 coefficient");
  return "C_eq = 1 at h = 0.5, sigma2 = 0.25";
}

std::string determinism() {
  link::LinkConfig cfg;
  cfg.model = 'd';
  cfg.n_symbols = 2;
  cfg.snr_db = 20;
  cfg.impairments = impair::ImpairmentConfig::defaults(impair::ImpairmentType::III);
  const auto a = link::simulate_packet(cfg, 9, 3);
  const auto b = link::simulate_packet(cfg, 9, 3);
  check(a.rx.samples == b.rx.samples, "same seed produced different captures");
  return "identical captures for identical seeds";
}

std::string record_roundtrip() {
  link::LinkConfig cfg;
  cfg.n_symbols = 2;
  cfg.snr_db = 30;
  const auto pkt = link::simulate_packet(cfg, 3, 4);
  const auto recs = data::make_records(pkt, cfg, impair::ImpairmentType::I);
  std::vector<unsigned char> buf(data::SymbolRecord::kBytes), buf2(data::SymbolRecord::kBytes);
  recs[1].encode(buf.data());
  data::SymbolRecord::decode(buf.data()).encode(buf2.data());
  check(buf == buf2, "record encode/decode is not exact");
  return std::to_string(data::SymbolRecord::kBytes) + "-byte records";
}

std::string model_io() {
  dwphy::ModelShape shape;
  shape.units = 4;
  shape.layers = 1;
  dwphy::DeepWiPhyModel m(shape, 3);
  const auto dir = std::filesystem::temp_directory_path() /
                   ("dwp_selftest_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  m.save(dir);
  const auto back = dwphy::DeepWiPhyModel::load(dir);
  std::filesystem::remove_all(dir);
  for (int c = 0; c < m.M(); ++c) {
    check(m.subs()[c].eq.parameter_hash() == back.subs()[c].eq.parameter_hash() &&
              m.subs()[c].cpesro.parameter_hash() == back.subs()[c].cpesro.parameter_hash(),
          "model bundle round trip changed weights");
  }
  return "13-cluster bundle round trip";
}

std::string wilson_bounds() {
  const auto w0 = harness::wilson(0, 100);
  const auto w1 = harness::wilson(100, 100);
  check(w0.lower() >= -1e-15 && w1.upper() <= 1.0 + 1e-15, "Wilson interval outside [0, 1]");
  return "intervals within [0, 1]";
}

std::string compare_identity() {
  harness::EvalResult r;
  for (double s : {10.0, 20.0, 30.0}) {
    harness::EvalRow row;
    row.receiver = "x";
    row.snr_db = s;
    row.model = "a";
    row.type = "I";
    row.bits = 1000000;
    row.bit_errors = static_cast<std::uint64_t>(1e6 * std::pow(10.0, -s / 10.0));
    row.packets = 1;
    r.rows.push_back(row);
  }
  const auto g = harness::compare(r, r, harness::Metric::ber, {1e-2});
  check(g.rows.size() == 1 && std::abs(g.rows[0].gain_db) < 1e-12, "self-comparison gain is not zero");
  return "identical curves give 0 dB";
}

}  // namespace

std::vector<CaseResult> run(const std::function<void(const CaseResult&)>& on_case) {
  const std::vector<std::pair<const char*, std::string (*)()>> cases = {
      {"fft_roundtrip", fft_roundtrip},   {"tone_plan", tone_plan},
      {"constellations", constellation_energy}, {"normalization", normalization},
      {"ldpc", ldpc},                     {"loopback", loopback},
      {"mmse_hand_case", mmse},           {"determinism", determinism},
      {"record_roundtrip", record_roundtrip}, {"model_bundle", model_io},
      {"wilson", wilson_bounds},          {"compare_identity", compare_identity},
  };
  std::vector<CaseResult> out;
  for (const auto& [name, fn] : cases) {
    CaseResult r;
    r.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      r.detail = fn();
      r.passed = true;
    } catch (const Failure& f) {
      r.detail = f.what;
    } catch (const std::exception& e) {
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_case) on_case(r);
    out.push_back(r);
  }
  return out;
}

bool all_passed(const std::vector<CaseResult>& results) {
  for (const auto& r : results) {
    if (!r.passed) return false;
  }
  return true;
}

}  // namespace dwp::selftest
