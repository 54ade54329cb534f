#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dwp/dsp.hpp"

namespace dwp::fec {

using Bits = std::vector<std::uint8_t>;

inline constexpr double kLlrClip = 40.0;
inline constexpr int kDefaultIterations = 20;

/// Quasi-cyclic LDPC code from the 802.11n n=1944 family.
class LdpcCode {
 public:
  /// Rate as num/den; 3/4 and 5/6 are available.
  static const LdpcCode& get(int rate_num, int rate_den);
  /// Parses a prototype table: comment lines start with '#', '-' marks an empty block.
  static LdpcCode from_prototype(const std::string& text, int z);

  int n() const { return nb_ * z_; }
  int k() const { return (nb_ - mb_) * z_; }
  int m() const { return mb_ * z_; }
  int z() const { return z_; }
  int base_rows() const { return mb_; }
  int base_cols() const { return nb_; }
  /// Circulant shift of block (i, j), or -1 for an empty block.
  int shift(int i, int j) const { return proto_[static_cast<std::size_t>(i * nb_ + j)]; }

  /// Variable indices participating in each parity check.
  const std::vector<std::vector<int>>& check_rows() const { return rows_; }
  /// Number of unsatisfied checks for a hard word of length n.
  int syndrome_weight(std::span<const std::uint8_t> word) const;
  bool is_codeword(std::span<const std::uint8_t> word) const { return syndrome_weight(word) == 0; }

 private:
  int mb_ = 0, nb_ = 0, z_ = 0;
  std::vector<int> proto_;
  std::vector<std::vector<int>> rows_;
};

/// Systematic encoding: codeword = [info | parity].
Bits ldpc_encode(std::span<const std::uint8_t> info, const LdpcCode& code);

struct DecodeResult {
  Bits info;
  Bits codeword;
  bool converged = false;
  /// Message-passing rounds run; 0 when the input already satisfied every check.
  int iterations = 0;
};

/// Flooding min-sum (no normalization). Positive LLR means bit 0.
DecodeResult ldpc_decode_minsum(std::span<const double> llrs, const LdpcCode& code,
                                int max_iter = kDefaultIterations);

/// Max-log per-bit LLRs of one equalized point, positive favouring bit 0.
/// Bits are ordered as in the mapper (I-axis bits first).
void soft_demap(cplx x, double rho, int order, std::span<double> out);
/// rho = |h_D|^2 / sigma2.
void soft_demap(cplx x, cplx h_d, double sigma2, int order, std::span<double> out);

/// Code and segmentation of one packet for a given MCS and symbol count.
struct PacketCoding {
  int mcs = 7;
  std::size_t n_symbols = 0;
  std::size_t coded_bits = 0;    // 234 * bps * n_symbols
  std::size_t n_codewords = 0;   // floor(coded_bits / n)
  std::size_t payload_bits = 0;  // n_codewords * k
  const LdpcCode* code = nullptr;

  static PacketCoding make(int mcs, std::size_t n_symbols);
};

/// Splits the payload into info blocks (the last one zero-padded), encodes
/// each and fills the rest of `coded_bits` with the 127-periodic scrambler
/// sequence (all-ones seed).
Bits segment_and_pad(std::span<const std::uint8_t> payload, const LdpcCode& code,
                     std::size_t n_symbols, int mcs);
Bits encode_packet(std::span<const std::uint8_t> payload, const PacketCoding& pc);

struct PacketDecode {
  Bits payload;
  std::size_t codewords_converged = 0;
};
/// Decodes every codeword from the coded-stream LLRs and returns `payload_len` info bits.
PacketDecode decode_packet(std::span<const double> llrs, const PacketCoding& pc, std::size_t payload_len,
                           int max_iter = kDefaultIterations);

namespace detail {
const char* prototype_text_r34();
const char* prototype_text_r56();
}  // namespace detail

}  // namespace dwp::fec
