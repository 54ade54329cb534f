#include "dwp/phy_frame.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>

#include <zlib.h>

#include "dwp/error.hpp"
#include "dwp/rng.hpp"

namespace dwp::phy {
namespace {

constexpr int kFirstActive = 2;
constexpr int kLastActive = 122;
constexpr std::array<int, kNumPilots> kPilotTones = {-116, -90, -48, -22, 22, 48, 90, 116};

TonePlan make_he20() {
  TonePlan p;
  const int n = static_cast<int>(p.fft_size);
  for (int k = -n / 2; k < n / 2; ++k) {
    const int a = std::abs(k);
    if (a < kFirstActive || a > kLastActive) {
      p.nulls.push_back(k);
      continue;
    }
    p.active.push_back(k);
    if (std::find(kPilotTones.begin(), kPilotTones.end(), k) != kPilotTones.end()) {
      p.pilots.push_back(k);
    } else {
      p.data.push_back(k);
    }
  }
  return p;
}

std::array<int, 127> make_polarity() {
  std::array<int, 127> p{};
  unsigned state = 0x7F;
  for (int i = 0; i < 127; ++i) {
    const unsigned bit = ((state >> 6) ^ (state >> 3)) & 1U;
    state = ((state << 1) | bit) & 0x7FU;
    p[static_cast<std::size_t>(i)] = bit ? -1 : 1;
  }
  return p;
}

ComplexBuf unitary_ifft(const ComplexBuf& bins) {
  auto t = dsp::ifft(bins, bins.size());
  const double s = std::sqrt(static_cast<double>(bins.size()));
  for (auto& v : t) v *= s;
  return t;
}

ComplexBuf add_cp(const ComplexBuf& body, std::size_t cp) {
  ComplexBuf out;
  out.reserve(body.size() + cp);
  out.insert(out.end(), body.end() - static_cast<std::ptrdiff_t>(cp), body.end());
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

}  // namespace

const TonePlan& TonePlan::he20() {
  static const TonePlan plan = make_he20();
  return plan;
}

ToneRole TonePlan::role(int k) const {
  if (std::binary_search(pilots.begin(), pilots.end(), k)) return ToneRole::pilot;
  if (std::binary_search(data.begin(), data.end(), k)) return ToneRole::data;
  return ToneRole::null;
}

int TonePlan::active_index(int k) const {
  auto it = std::lower_bound(active.begin(), active.end(), k);
  if (it == active.end() || *it != k) return -1;
  return static_cast<int>(it - active.begin());
}

ComplexBuf FrequencyGrid::gather(std::span<const int> tones) const {
  ComplexBuf out;
  out.reserve(tones.size());
  for (int k : tones) out.push_back(at(k));
  return out;
}

// ---- constellation --------------------------------------------------------

Constellation::Constellation(int order) : order_(order) {
  switch (order) {
    case 2:
      bits_ = 1;
      axis_bits_ = 1;
      scale_ = 1.0;
      points_ = {cplx(1.0, 0.0), cplx(-1.0, 0.0)};
      return;
    case 64:
    case 256:
    case 1024:
      break;
    default:
      throw ArgumentError("unsupported QAM order " + std::to_string(order));
  }
  bits_ = static_cast<int>(std::lround(std::log2(order)));
  axis_bits_ = bits_ / 2;
  scale_ = 1.0 / std::sqrt(2.0 * (order - 1) / 3.0);
  const int levels = axis_levels();
  points_.assign(static_cast<std::size_t>(order), cplx{});
  for (int i = 0; i < levels; ++i) {
    for (int q = 0; q < levels; ++q) {
      const unsigned label = (axis_gray(i) << axis_bits_) | axis_gray(q);
      points_[label] = cplx(axis_amplitude(i), axis_amplitude(q));
    }
  }
}

const Constellation& Constellation::get(int order) {
  static const Constellation c2(2), c64(64), c256(256), c1024(1024);
  switch (order) {
    case 2: return c2;
    case 64: return c64;
    case 256: return c256;
    case 1024: return c1024;
    default: throw ArgumentError("unsupported QAM order " + std::to_string(order));
  }
}

double Constellation::axis_amplitude(int level_index) const {
  if (order_ == 2) return level_index == 0 ? -1.0 : 1.0;
  return (2.0 * level_index - (axis_levels() - 1)) * scale_;
}

int Constellation::axis_nearest(double r) const {
  const int levels = axis_levels();
  if (order_ == 2) return r > 0.0 ? 1 : (r < 0.0 ? 0 : 1);  // tie: label 0 (+1)
  // Continuous level coordinate; half-integers are ties between neighbours.
  const double u = (r / scale_ + (levels - 1)) / 2.0;
  const double fl = std::floor(u);
  int lo = static_cast<int>(fl);
  int pick;
  if (u - fl == 0.5) {
    const int hi = lo + 1;
    pick = axis_gray(lo) < axis_gray(hi) ? lo : hi;
  } else {
    pick = static_cast<int>(std::lround(u));
  }
  return std::clamp(pick, 0, levels - 1);
}

unsigned Constellation::nearest_label(cplx x) const {
  if (order_ == 2) return axis_nearest(x.real()) == 1 ? 0U : 1U;
  const unsigned li = axis_gray(axis_nearest(x.real()));
  const unsigned lq = axis_gray(axis_nearest(x.imag()));
  return (li << axis_bits_) | lq;
}

cplx Constellation::map(std::span<const std::uint8_t> bits) const {
  if (bits.size() != static_cast<std::size_t>(bits_)) {
    throw ArgumentError("qam_map: expected " + std::to_string(bits_) + " bits, got " +
                        std::to_string(bits.size()));
  }
  unsigned label = 0;
  for (auto b : bits) label = (label << 1) | (b & 1U);
  return points_[label];
}

cplx qam_map(std::span<const std::uint8_t> bits, int order) {
  return Constellation::get(order).map(bits);
}

const McsInfo& mcs_info(int mcs) {
  static const std::map<int, McsInfo> table = {
      {kDebugBpskMcs, {kDebugBpskMcs, 2, 1, 1}},
      {7, {7, 64, 5, 6}},
      {8, {8, 256, 3, 4}},
      {9, {9, 256, 5, 6}},
      {10, {10, 1024, 3, 4}},
  };
  auto it = table.find(mcs);
  if (it == table.end()) throw ArgumentError("unsupported MCS " + std::to_string(mcs));
  return it->second;
}

// ---- training fields and pilots --------------------------------------------

const std::array<double, 53>& lltf_sequence() {
  static const std::array<double, 53> seq = {
      1,  1, -1, -1, 1,  1, -1, 1, -1, 1,  1,  1,  1,  1,  1, -1, -1, 1,
      1, -1, 1,  -1, 1,  1, 1,  1, 0,  1, -1, -1, 1,  1, -1, 1,  -1, 1,
      -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1,  1,  1,  1};
  return seq;
}

ComplexBuf build_lltf() {
  ComplexBuf bins(kLegacyFftSize);
  const auto& seq = lltf_sequence();
  for (int k = -26; k <= 26; ++k) {
    bins[static_cast<std::size_t>((k + 64) % 64)] = seq[static_cast<std::size_t>(k + 26)];
  }
  const ComplexBuf period = unitary_ifft(bins);
  ComplexBuf out;
  out.reserve(kLltfLen);
  out.insert(out.end(), period.end() - static_cast<std::ptrdiff_t>(kLltfCpLen), period.end());
  out.insert(out.end(), period.begin(), period.end());
  out.insert(out.end(), period.begin(), period.end());
  return out;
}

const std::vector<double>& heltf_sequence() {
  static const std::vector<double> seq = [] {
    SeededRng rng(kHeLtfSeed, 0, Stage::heltf);
    std::vector<double> s(kNumActive);
    for (auto& v : s) v = rng.bit() ? -1.0 : 1.0;
    return s;
  }();
  return seq;
}

ComplexBuf build_heltf(const TonePlan& plan) {
  FrequencyGrid g;
  g.bins.assign(plan.fft_size, cplx{});
  const auto& seq = heltf_sequence();
  for (std::size_t i = 0; i < plan.active.size(); ++i) g.bins[plan.bin(plan.active[i])] = seq[i];
  return modulate_symbol(g);
}

int pilot_polarity(std::size_t n) {
  static const auto p = make_polarity();
  return p[n % 127];
}

std::array<cplx, kNumPilots> pilot_sequence(std::size_t symbol_index) {
  const double pol = pilot_polarity(symbol_index + kPilotPolarityOffset);
  std::array<cplx, kNumPilots> out;
  for (std::size_t i = 0; i < kNumPilots; ++i) out[i] = kPilotBase[i] * pol;
  return out;
}

// ---- OFDM -------------------------------------------------------------------

ComplexBuf modulate_symbol(const FrequencyGrid& grid) {
  return add_cp(unitary_ifft(grid.bins), kCpLen);
}

FrequencyGrid demodulate_symbol(std::span<const cplx> time_samples, const TonePlan& plan) {
  if (time_samples.size() != kCpLen + plan.fft_size) {
    throw ArgumentError("demodulate_symbol: expected " + std::to_string(kCpLen + plan.fft_size) +
                        " samples, got " + std::to_string(time_samples.size()));
  }
  FrequencyGrid g;
  g.bins = dsp::fft(time_samples.subspan(kCpLen), plan.fft_size);
  const double s = 1.0 / std::sqrt(static_cast<double>(plan.fft_size));
  for (auto& v : g.bins) v *= s;
  return g;
}

FrequencyGrid demodulate_legacy(std::span<const cplx> period) {
  if (period.size() != kLegacyFftSize) {
    throw ArgumentError("demodulate_legacy: expected 64 samples");
  }
  FrequencyGrid g;
  g.bins = dsp::fft(period, kLegacyFftSize);
  for (auto& v : g.bins) v *= 0.125;
  return g;
}

ComplexBuf HesuPacket::samples() const {
  ComplexBuf out;
  out.reserve(FrameLayout::total_length(data_time.size()));
  out.insert(out.end(), lltf_time.begin(), lltf_time.end());
  out.insert(out.end(), heltf_time.begin(), heltf_time.end());
  for (const auto& s : data_time) out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::size_t coded_bits_per_packet(int mcs, std::size_t n_data_symbols) {
  const auto& c = Constellation::get(mcs_info(mcs).order);
  return kNumData * static_cast<std::size_t>(c.bits_per_symbol()) * n_data_symbols;
}

HesuPacket assemble_packet(std::span<const std::uint8_t> coded_bits, int mcs,
                           std::size_t n_data_symbols, const TonePlan& plan) {
  const auto& info = mcs_info(mcs);
  const auto& con = Constellation::get(info.order);
  const std::size_t bps = static_cast<std::size_t>(con.bits_per_symbol());
  const std::size_t expected = plan.data.size() * bps * n_data_symbols;
  if (coded_bits.size() != expected) {
    throw ArgumentError("assemble_packet: expected " + std::to_string(expected) +
                        " coded bits, got " + std::to_string(coded_bits.size()));
  }

  HesuPacket pkt;
  pkt.mcs = mcs;
  pkt.order = info.order;
  pkt.tx_bits.assign(coded_bits.begin(), coded_bits.end());
  pkt.lltf_time = build_lltf();
  pkt.heltf_time = build_heltf(plan);
  pkt.data_time.reserve(n_data_symbols);
  pkt.tx_constellation.reserve(n_data_symbols);
  pkt.tx_pilots.reserve(n_data_symbols);

  std::size_t pos = 0;
  for (std::size_t m = 0; m < n_data_symbols; ++m) {
    FrequencyGrid g;
    g.bins.assign(plan.fft_size, cplx{});
    ComplexBuf points(plan.data.size());
    for (std::size_t i = 0; i < plan.data.size(); ++i) {
      points[i] = con.map(coded_bits.subspan(pos, bps));
      pos += bps;
      g.bins[plan.bin(plan.data[i])] = points[i];
    }
    const auto pilots = pilot_sequence(m);
    for (std::size_t i = 0; i < plan.pilots.size(); ++i) g.bins[plan.bin(plan.pilots[i])] = pilots[i];
    pkt.data_time.push_back(modulate_symbol(g));
    pkt.tx_constellation.push_back(std::move(points));
    pkt.tx_pilots.push_back(pilots);
  }
  return pkt;
}

namespace {
std::span<const cplx> checked_slice(std::span<const cplx> s, std::size_t start, std::size_t len,
                                    const char* what) {
  if (start + len > s.size()) {
    throw ArgumentError(std::string(what) + ": capture too short (" + std::to_string(s.size()) +
                        " samples)");
  }
  return s.subspan(start, len);
}
}  // namespace

std::span<const cplx> data_symbol_slice(std::span<const cplx> samples, std::size_t m) {
  return checked_slice(samples, FrameLayout::data_symbol_start(m) - kTimingBackoff, kSymbolLen,
                       "data_symbol_slice");
}

std::span<const cplx> heltf_slice(std::span<const cplx> samples) {
  return checked_slice(samples, FrameLayout::heltf_start - kTimingBackoff, kSymbolLen,
                       "heltf_slice");
}

std::span<const cplx> lltf_period(std::span<const cplx> samples, std::size_t rep) {
  return checked_slice(samples, FrameLayout::lltf_window(rep), kLegacyFftSize, "lltf_period");
}

nlohmann::json tone_plan_json(const TonePlan& plan) {
  nlohmann::json j;
  j["version"] = 1;
  j["fft_size"] = plan.fft_size;
  j["sample_period_s"] = plan.sample_period;
  j["cp_len"] = kCpLen;
  j["timing_backoff"] = kTimingBackoff;
  j["data_tones"] = plan.data;
  j["pilot_tones"] = plan.pilots;
  j["null_tones"] = plan.nulls;
  j["pilot_base"] = kPilotBase;
  j["pilot_polarity_offset"] = kPilotPolarityOffset;
  std::vector<int> pol(127);
  for (std::size_t i = 0; i < 127; ++i) pol[i] = pilot_polarity(i);
  j["pilot_polarity"] = pol;
  j["lltf_sequence"] = lltf_sequence();
  j["heltf_seed"] = kHeLtfSeed;
  j["heltf_sequence"] = heltf_sequence();
  return j;
}

std::string constants_fingerprint() {
  const std::string s = tone_plan_json(TonePlan::he20()).dump();
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size()));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

}  // namespace dwp::phy
