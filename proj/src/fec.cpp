#include "dwp/fec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dwp/error.hpp"
#include "dwp/phy_frame.hpp"

namespace dwp::fec {
namespace {

constexpr int kLiftingZ = 81;

// (P^s x)[r] = x[(r + s) mod Z]
void accumulate_shifted(std::uint8_t* dst, const std::uint8_t* src, int s, int z) {
  for (int r = 0; r < z; ++r) dst[r] ^= src[(r + s) % z];
}

}  // namespace

LdpcCode LdpcCode::from_prototype(const std::string& text, int z) {
  LdpcCode c;
  c.z_ = z;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::string tok;
    std::vector<int> row;
    while (ls >> tok) {
      if (tok == "-") {
        row.push_back(-1);
      } else {
        try {
          const int v = std::stoi(tok);
          if (v < 0 || v >= z) throw FormatError("LDPC prototype: shift out of range: " + tok);
          row.push_back(v);
        } catch (const std::logic_error&) {
          throw FormatError("LDPC prototype: bad token '" + tok + "'");
        }
      }
    }
    if (c.nb_ == 0) c.nb_ = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != c.nb_) throw FormatError("LDPC prototype: ragged rows");
    c.proto_.insert(c.proto_.end(), row.begin(), row.end());
    ++c.mb_;
  }
  if (c.mb_ == 0 || c.nb_ <= c.mb_) throw FormatError("LDPC prototype: empty or malformed table");

  c.rows_.assign(static_cast<std::size_t>(c.m()), {});
  for (int i = 0; i < c.mb_; ++i) {
    for (int j = 0; j < c.nb_; ++j) {
      const int s = c.shift(i, j);
      if (s < 0) continue;
      for (int r = 0; r < z; ++r) c.rows_[static_cast<std::size_t>(i * z + r)].push_back(j * z + (r + s) % z);
    }
  }
  return c;
}

const LdpcCode& LdpcCode::get(int rate_num, int rate_den) {
  static const LdpcCode r34 = from_prototype(detail::prototype_text_r34(), kLiftingZ);
  static const LdpcCode r56 = from_prototype(detail::prototype_text_r56(), kLiftingZ);
  if (rate_num * 4 == rate_den * 3) return r34;
  if (rate_num * 6 == rate_den * 5) return r56;
  throw ArgumentError("no LDPC code for rate " + std::to_string(rate_num) + "/" + std::to_string(rate_den));
}

int LdpcCode::syndrome_weight(std::span<const std::uint8_t> word) const {
  if (static_cast<int>(word.size()) != n()) throw ArgumentError("syndrome: word length mismatch");
  int w = 0;
  for (const auto& row : rows_) {
    std::uint8_t acc = 0;
    for (int v : row) acc ^= word[static_cast<std::size_t>(v)];
    w += acc & 1;
  }
  return w;
}

Bits ldpc_encode(std::span<const std::uint8_t> info, const LdpcCode& code) {
  const int z = code.z();
  const int mb = code.base_rows();
  const int kb = code.base_cols() - mb;
  if (static_cast<int>(info.size()) != code.k()) {
    throw ArgumentError("ldpc_encode: expected " + std::to_string(code.k()) + " info bits, got " +
                        std::to_string(info.size()));
  }
  Bits cw(static_cast<std::size_t>(code.n()), 0);
  for (std::size_t i = 0; i < info.size(); ++i) cw[i] = info[i] & 1U;

  std::vector<std::uint8_t> lambda(static_cast<std::size_t>(mb * z), 0);
  for (int i = 0; i < mb; ++i) {
    for (int j = 0; j < kb; ++j) {
      const int s = code.shift(i, j);
      if (s >= 0) accumulate_shifted(&lambda[static_cast<std::size_t>(i * z)], &cw[static_cast<std::size_t>(j * z)], s, z);
    }
  }

  std::uint8_t* p = &cw[static_cast<std::size_t>(kb * z)];
  // p0 = sum of all lambda_i (the first parity column sums to identity).
  for (int i = 0; i < mb; ++i) {
    for (int r = 0; r < z; ++r) p[r] ^= lambda[static_cast<std::size_t>(i * z + r)];
  }
  // p1 = lambda_0 + H_{0,kb} p0, then p_{i+1} = lambda_i + p_i + H_{i,kb} p0.
  for (int i = 0; i + 1 < mb; ++i) {
    std::uint8_t* next = p + (i + 1) * z;
    for (int r = 0; r < z; ++r) next[r] = lambda[static_cast<std::size_t>(i * z + r)];
    if (i > 0) {
      for (int r = 0; r < z; ++r) next[r] ^= p[i * z + r];
    }
    const int s = code.shift(i, kb);
    if (s >= 0) accumulate_shifted(next, p, s, z);
  }
  return cw;
}

DecodeResult ldpc_decode_minsum(std::span<const double> llrs, const LdpcCode& code, int max_iter) {
  const std::size_t n = static_cast<std::size_t>(code.n());
  if (llrs.size() != n) throw ArgumentError("ldpc_decode: LLR length mismatch");
  const auto& rows = code.check_rows();

  std::vector<double> ch(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = llrs[i];
    ch[i] = std::isnan(v) ? 0.0 : std::clamp(v, -kLlrClip, kLlrClip);
  }

  DecodeResult res;
  res.codeword.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.codeword[i] = ch[i] < 0.0 ? 1 : 0;
  auto finish = [&](bool ok, int it) {
    res.converged = ok;
    res.iterations = it;
    res.info.assign(res.codeword.begin(), res.codeword.begin() + code.k());
    return res;
  };
  if (code.is_codeword(res.codeword)) return finish(true, 0);

  std::size_t n_edges = 0;
  for (const auto& r : rows) n_edges += r.size();
  std::vector<double> c2v(n_edges, 0.0);
  std::vector<double> post(ch);

  for (int it = 1; it <= max_iter; ++it) {
    std::size_t e = 0;
    for (const auto& row : rows) {
      double min1 = std::numeric_limits<double>::infinity(), min2 = min1;
      int argmin = -1;
      bool neg = false;
      const std::size_t base = e;
      for (std::size_t t = 0; t < row.size(); ++t) {
        const double v2c = post[static_cast<std::size_t>(row[t])] - c2v[base + t];
        const double a = std::abs(v2c);
        if (v2c < 0.0) neg = !neg;
        if (a < min1) {
          min2 = min1;
          min1 = a;
          argmin = static_cast<int>(t);
        } else if (a < min2) {
          min2 = a;
        }
      }
      for (std::size_t t = 0; t < row.size(); ++t) {
        const std::size_t v = static_cast<std::size_t>(row[t]);
        const double v2c = post[v] - c2v[base + t];
        const double mag = static_cast<int>(t) == argmin ? min2 : min1;
        const bool sign_neg = neg != (v2c < 0.0);
        const double msg = sign_neg ? -mag : mag;
        // Flooding: posteriors are rebuilt below from the fresh messages.
        c2v[base + t] = msg;
      }
      e += row.size();
    }
    std::copy(ch.begin(), ch.end(), post.begin());
    e = 0;
    for (const auto& row : rows) {
      for (int v : row) post[static_cast<std::size_t>(v)] += c2v[e++];
    }
    for (std::size_t i = 0; i < n; ++i) res.codeword[i] = post[i] < 0.0 ? 1 : 0;
    if (code.is_codeword(res.codeword)) return finish(true, it);
  }
  return finish(false, max_iter);
}

void soft_demap(cplx x, double rho, int order, std::span<double> out) {
  const auto& con = phy::Constellation::get(order);
  const int bps = con.bits_per_symbol();
  if (static_cast<int>(out.size()) != bps) throw ArgumentError("soft_demap: output size mismatch");
  if (order == 2) {
    // Points +1 (bit 0) and -1 (bit 1).
    const double d0 = std::norm(x - cplx(1.0, 0.0));
    const double d1 = std::norm(x - cplx(-1.0, 0.0));
    out[0] = rho * (d1 - d0);
    return;
  }
  const int ab = con.axis_bits();
  const int levels = con.axis_levels();
  double d[32];
  for (int axis = 0; axis < 2; ++axis) {
    const double r = axis == 0 ? x.real() : x.imag();
    for (int l = 0; l < levels; ++l) {
      const double diff = r - con.axis_amplitude(l);
      d[l] = diff * diff;
    }
    for (int b = 0; b < ab; ++b) {
      const unsigned mask = 1U << (ab - 1 - b);
      double m0 = std::numeric_limits<double>::infinity(), m1 = m0;
      for (int l = 0; l < levels; ++l) {
        if (con.axis_gray(l) & mask) {
          m1 = std::min(m1, d[l]);
        } else {
          m0 = std::min(m0, d[l]);
        }
      }
      out[static_cast<std::size_t>(axis * ab + b)] = rho * (m1 - m0);
    }
  }
}

void soft_demap(cplx x, cplx h_d, double sigma2, int order, std::span<double> out) {
  if (!(sigma2 > 0.0)) throw ArgumentError("soft_demap: sigma2 must be positive");
  soft_demap(x, std::norm(h_d) / sigma2, order, out);
}

PacketCoding PacketCoding::make(int mcs, std::size_t n_symbols) {
  const auto& info = phy::mcs_info(mcs);
  if (info.order == 2) throw ArgumentError("PacketCoding: the BPSK debug mode is uncoded");
  PacketCoding pc;
  pc.mcs = mcs;
  pc.n_symbols = n_symbols;
  pc.code = &LdpcCode::get(info.rate_num, info.rate_den);
  pc.coded_bits = phy::coded_bits_per_packet(mcs, n_symbols);
  pc.n_codewords = pc.coded_bits / static_cast<std::size_t>(pc.code->n());
  pc.payload_bits = pc.n_codewords * static_cast<std::size_t>(pc.code->k());
  return pc;
}

Bits encode_packet(std::span<const std::uint8_t> payload, const PacketCoding& pc) {
  const std::size_t k = static_cast<std::size_t>(pc.code->k());
  const std::size_t blocks = (payload.size() + k - 1) / k;
  if (blocks > pc.n_codewords) {
    throw ArgumentError("segment_and_pad: payload of " + std::to_string(payload.size()) +
                        " bits exceeds the packet capacity of " + std::to_string(pc.payload_bits));
  }
  Bits out;
  out.reserve(pc.coded_bits);
  Bits info(k);
  for (std::size_t b = 0; b < pc.n_codewords; ++b) {
    std::fill(info.begin(), info.end(), 0);
    const std::size_t lo = b * k;
    if (lo < payload.size()) {
      const std::size_t hi = std::min(payload.size(), lo + k);
      std::copy(payload.begin() + static_cast<std::ptrdiff_t>(lo), payload.begin() + static_cast<std::ptrdiff_t>(hi), info.begin());
    }
    const Bits cw = ldpc_encode(info, *pc.code);
    out.insert(out.end(), cw.begin(), cw.end());
  }
  // Fill the tail with the x^7 + x^4 + 1 scrambler sequence so it does not map
  // to one repeated constellation point.
  unsigned state = 0x7F;
  while (out.size() < pc.coded_bits) {
    const unsigned bit = ((state >> 6) ^ (state >> 3)) & 1U;
    state = ((state << 1) | bit) & 0x7F;
    out.push_back(static_cast<std::uint8_t>(bit));
  }
  return out;
}

Bits segment_and_pad(std::span<const std::uint8_t> payload, const LdpcCode& code, std::size_t n_symbols,
                     int mcs) {
  PacketCoding pc = PacketCoding::make(mcs, n_symbols);
  if (pc.code->n() != code.n() || pc.code->k() != code.k()) {
    throw ArgumentError("segment_and_pad: code does not match the MCS rate");
  }
  pc.code = &code;
  return encode_packet(payload, pc);
}

PacketDecode decode_packet(std::span<const double> llrs, const PacketCoding& pc, std::size_t payload_len,
                           int max_iter) {
  if (llrs.size() != pc.coded_bits) throw ArgumentError("decode_packet: LLR length mismatch");
  if (payload_len > pc.payload_bits) throw ArgumentError("decode_packet: payload longer than capacity");
  const std::size_t n = static_cast<std::size_t>(pc.code->n());
  const std::size_t k = static_cast<std::size_t>(pc.code->k());
  PacketDecode out;
  out.payload.reserve(pc.payload_bits);
  for (std::size_t b = 0; b < pc.n_codewords && out.payload.size() < payload_len; ++b) {
    auto r = ldpc_decode_minsum(llrs.subspan(b * n, n), *pc.code, max_iter);
    if (r.converged) ++out.codewords_converged;
    out.payload.insert(out.payload.end(), r.info.begin(), r.info.begin() + static_cast<std::ptrdiff_t>(k));
  }
  out.payload.resize(payload_len);
  return out;
}

}  // namespace dwp::fec
