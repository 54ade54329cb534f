#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dwp/deepwiphy.hpp"
#include "dwp/impairments.hpp"
#include "dwp/link.hpp"
#include "dwp/rx_conventional.hpp"

namespace dwp::harness {

/// Impairment setting of an evaluation point; empty means ideal RF.
using TypeSlot = std::optional<impair::ImpairmentType>;

std::string type_label(const TypeSlot& t);
TypeSlot parse_type_label(const std::string& s);

struct EvalSpec {
  int mcs = 7;
  std::vector<double> snr_db = {25.0};
  std::string models = "a";
  std::vector<TypeSlot> types = {impair::ImpairmentType::I};
  std::size_t packets_per_point = 100;  // per (model, type) setting
  std::size_t n_symbols = 16;
  std::uint64_t seed = 7001;
  int threads = 1;
  int max_iter = 20;
  bool split_settings = false;  // one row per (model, type) instead of the pooled row
  impair::ImpairmentConfig impairments;  // type field is overridden per setting

  nlohmann::json to_json() const;
  static EvalSpec from_json(const nlohmann::json& j);
};

/// Error counts at one operating point.
struct EvalRow {
  std::string receiver;
  int mcs = 7;
  double snr_db = 0.0;
  std::string model;
  std::string type;
  std::uint64_t bit_errors = 0;
  std::uint64_t bits = 0;
  std::uint64_t packet_errors = 0;
  std::uint64_t packets = 0;
  std::uint64_t info_bit_errors = 0;
  std::uint64_t info_bits = 0;

  double ber() const;
  double per() const;
  double ber_ci() const;
  double per_ci() const;
  double info_ber() const;
};

struct EvalResult {
  std::vector<EvalRow> rows;

  std::string to_csv() const;
  nlohmann::json to_json() const;
  static EvalResult from_csv(const std::string& text);
};

/// 95% Wilson score interval half-width and centre for k successes in n.
struct WilsonInterval {
  double centre = 0.0;
  double half_width = 0.0;
  double lower() const { return centre - half_width; }
  double upper() const { return centre + half_width; }
};
WilsonInterval wilson(std::uint64_t k, std::uint64_t n, double z = 1.959963984540054);

/// A receiver under test. `run` sees only the capture unless it is the genie.
struct Receiver {
  std::string name;
  std::optional<int> mcs;  // set when the receiver only supports one MCS
  std::function<rx::RxResult(const link::LinkPacket&, const link::LinkConfig&)> run;
};

Receiver conventional_receiver(const rx::ReceiverConfig& cfg);
Receiver genie_receiver();
Receiver deepwiphy_receiver(std::shared_ptr<const dwphy::DeepWiPhyModel> model, std::string name = "deepwiphy");

/// Outcome of one packet through one receiver.
struct PacketOutcome {
  std::uint64_t bit_errors = 0;
  std::uint64_t bits = 0;
  bool packet_error = false;
  std::uint64_t info_bit_errors = 0;
  std::uint64_t info_bits = 0;
  bool converged = true;  // every codeword converged
};

PacketOutcome score_packet(const link::LinkPacket& pkt, const rx::RxResult& res, int max_iter = 20);

/// Packet id used by evaluation; disjoint from the dataset id space.
std::uint64_t eval_packet_id(int mcs, char model, const TypeSlot& type, std::size_t index);

link::LinkConfig eval_link_config(const EvalSpec& spec, char model, const TypeSlot& type, double snr_db);

/// Runs fresh packets through every receiver. The same packets are shared by
/// all receivers and all SNR points.
EvalResult evaluate(const std::vector<Receiver>& receivers, const EvalSpec& spec);
EvalResult evaluate(const Receiver& receiver, const EvalSpec& spec);

enum class Metric { ber, per };

struct GainRow {
  std::string metric;
  double level = 0.0;
  int mcs = 7;
  std::string model;
  std::string type;
  double snr_baseline = 0.0;   // NaN when the curve never reaches the level
  double snr_candidate = 0.0;
  double gain_db = 0.0;        // snr_baseline - snr_candidate; positive favours the candidate
};

struct GainReport {
  std::vector<GainRow> rows;
  bool sign_change = false;  // curves cross within the compared levels

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

/// SNR at which a curve reaches `level`, interpolating log10(value) linearly
/// in SNR between grid points. NaN when the level is not crossed.
double snr_at_level(const std::vector<std::pair<double, double>>& curve, double level);

/// Horizontal shift between two result sets at the given error levels.
/// Groups are matched by (mcs, model, type); each side must hold one receiver per group.
GainReport compare(const EvalResult& baseline, const EvalResult& candidate, Metric metric,
                   const std::vector<double>& levels);

}  // namespace dwp::harness
