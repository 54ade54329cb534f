#include "dwp/link.hpp"

#include <cmath>

namespace dwp::link {

nlohmann::json LinkConfig::to_json() const {
  nlohmann::json j;
  j["mcs"] = mcs;
  j["n_symbols"] = n_symbols;
  j["model"] = std::string(1, model);
  j["impairments"] = impairments ? impairments->to_json() : nlohmann::json(nullptr);
  j["snr_db"] = std::isinf(snr_db) ? nlohmann::json("inf") : nlohmann::json(snr_db);
  j["signal_power_ref"] = signal_power_ref;
  return j;
}

void propagate(LinkPacket& pkt, const LinkConfig& cfg, std::uint64_t seed) {
  const std::uint64_t id = pkt.packet_id;
  ComplexBuf x = pkt.tx.samples();
  if (cfg.impairments) x = impair::apply_tx_chain(x, *cfg.impairments);

  if (cfg.model != '0') {
    SeededRng rng(seed, id, Stage::channel);
    pkt.genie.channel = channel::draw_channel(channel::ChannelModelSpec::tgax(cfg.model), rng);
    x = channel::apply_channel(x, pkt.genie.channel);
  } else {
    pkt.genie.channel = channel::make_sample_channel({cplx(1.0, 0.0)});
  }

  if (cfg.impairments) {
    SeededRng rng(seed, id, Stage::impairment);
    auto r = impair::apply_rx_chain(x, *cfg.impairments, rng);
    x = std::move(r.samples);
    pkt.genie.offsets = std::move(r.genie);
  }

  SeededRng noise(seed, id, Stage::noise);
  auto n = channel::add_awgn(x, cfg.snr_db, cfg.signal_power_ref, noise);
  pkt.genie.noise_variance = n.noise_variance;
  pkt.rx.samples = std::move(n.samples);
  pkt.rx.mcs = cfg.mcs;
  pkt.rx.n_symbols = pkt.tx.n_symbols();
}

LinkPacket simulate_packet(const LinkConfig& cfg, std::uint64_t seed, std::uint64_t packet_id) {
  LinkPacket pkt;
  pkt.packet_id = packet_id;
  const auto& plan = phy::TonePlan::he20();
  SeededRng prng(seed, packet_id, Stage::payload);

  fec::Bits coded;
  if (phy::mcs_info(cfg.mcs).order == 2) {
    pkt.payload.resize(phy::coded_bits_per_packet(cfg.mcs, cfg.n_symbols));
    for (auto& b : pkt.payload) b = prng.bit();
    coded = pkt.payload;
  } else {
    const auto pc = fec::PacketCoding::make(cfg.mcs, cfg.n_symbols);
    pkt.payload.resize(pc.payload_bits);
    for (auto& b : pkt.payload) b = prng.bit();
    coded = fec::encode_packet(pkt.payload, pc);
  }
  pkt.tx = phy::assemble_packet(coded, cfg.mcs, cfg.n_symbols, plan);
  propagate(pkt, cfg, seed);
  return pkt;
}

}  // namespace dwp::link
