#pragma once

#include <cstdint>
#include <limits>
#include <optional>

#include <json.hpp>

#include "dwp/channel.hpp"
#include "dwp/fec.hpp"
#include "dwp/impairments.hpp"
#include "dwp/phy_frame.hpp"

namespace dwp::link {

/// One operating point of the simulated link.
struct LinkConfig {
  int mcs = 7;
  std::size_t n_symbols = 16;
  char model = 'a';  // '0' bypasses the channel
  std::optional<impair::ImpairmentConfig> impairments;  // empty: ideal RF
  double snr_db = std::numeric_limits<double>::infinity();
  double signal_power_ref = channel::kNominalSignalPower;

  nlohmann::json to_json() const;
};

/// What the receiver gets: the time-domain capture plus what the standard
/// header would tell it (MCS, length). Nothing here is ground truth.
struct RxCapture {
  ComplexBuf samples;
  int mcs = 7;
  std::size_t n_symbols = 0;
};

/// Simulation-only ground truth, kept next to but separate from the capture.
struct CaptureGenie {
  channel::ChannelRealization channel;
  impair::GenieOffsets offsets;
  double noise_variance = 0.0;
};

struct LinkPacket {
  std::uint64_t packet_id = 0;
  fec::Bits payload;  // info bits; for the BPSK debug mode the raw tone bits
  phy::HesuPacket tx;
  RxCapture rx;
  CaptureGenie genie;
};

/// Deterministic in (seed, packet_id): each stage draws from its own stream.
LinkPacket simulate_packet(const LinkConfig& cfg, std::uint64_t seed, std::uint64_t packet_id);

/// Same capture path for a caller-supplied transmit packet.
void propagate(LinkPacket& pkt, const LinkConfig& cfg, std::uint64_t seed);

}  // namespace dwp::link
