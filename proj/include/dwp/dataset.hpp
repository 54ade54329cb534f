#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dwp/deepwiphy.hpp"
#include "dwp/impairments.hpp"

namespace dwp::data {

struct SnrPoint {
  double snr_db = 30.0;  // +inf allowed
  double quota = 1.0;    // relative symbol share, millions
};

struct DatasetSpec {
  std::vector<int> mcs = {7};
  std::map<int, std::vector<SnrPoint>> snr_grid;  // per MCS; defaults to the reference quotas
  std::string models = "abcdef";
  std::vector<impair::ImpairmentType> types = {impair::ImpairmentType::I, impair::ImpairmentType::II,
                                               impair::ImpairmentType::III};
  /// Packets per (model, type) setting at the largest finite quota.
  std::size_t packets_per_setting = 20;
  std::size_t symbols_per_packet = 16;
  std::uint64_t seed = 1;
  impair::ImpairmentConfig impairments;  // type is overridden per setting

  /// Reference quotas: 64-QAM 25..45 dB + inf, 256/1024-QAM 30..50 dB + inf.
  static std::vector<SnrPoint> reference_grid(int mcs);
  /// The published scale: 3200 packets x 128 symbols per setting and SNR.
  static DatasetSpec full_scale();
  const std::vector<SnrPoint>& grid(int mcs) const;
  /// Packets generated for one (setting, SNR) point.
  std::size_t packets_at(int mcs, const SnrPoint& p) const;
  std::size_t settings() const { return models.size() * types.size(); }
  std::size_t total_symbols(int mcs) const;

  nlohmann::json to_json() const;
  static DatasetSpec from_json(const nlohmann::json& j);
};

inline constexpr int kLltfLen = dwphy::kLltfWidth;
inline constexpr int kHeltfLen = dwphy::kHeltfWidth;
inline constexpr int kPilotLen = dwphy::kPilotWidth;
inline constexpr int kDataLen = dwphy::kDataWidth;

/// One stored DATA symbol. Feature arrays are normalized as fed to the networks.
struct SymbolRecord {
  std::uint64_t packet_id = 0;
  std::uint32_t symbol_index = 0;
  char model = 'a';
  impair::ImpairmentType type = impair::ImpairmentType::I;
  int mcs = 7;
  float snr_db = 0.0f;
  float noise_var = 0.0f;  // true per-sample noise variance
  float rx_power = 0.0f;   // mean |y|^2 over the 242 active tones before normalization
  std::array<float, kLltfLen> rx_lltf{};
  std::array<float, kHeltfLen> rx_heltf{};
  std::array<float, kPilotLen> rx_pilots{};
  std::array<float, kPilotLen> tx_pilots{};
  std::array<float, kDataLen> rx_data{};
  std::array<float, kDataLen> label{};

  static constexpr std::size_t kBytes = 8 + 4 + 4 + 3 * 4 + 4 * (kLltfLen + kHeltfLen + 2 * kPilotLen + 2 * kDataLen);
  void encode(unsigned char* out) const;
  static SymbolRecord decode(const unsigned char* in);
};

/// Deterministic id of packet `index` at one (mcs, model, type, snr) point.
std::uint64_t packet_id(int mcs, char model, impair::ImpairmentType type, std::size_t snr_index, std::size_t index);
/// Link configuration that regenerates a record's packet.
link::LinkConfig link_config(const DatasetSpec& spec, int mcs, char model, impair::ImpairmentType type, double snr_db);

/// Records for every DATA symbol of one simulated packet.
std::vector<SymbolRecord> make_records(const link::LinkPacket& pkt, const link::LinkConfig& cfg,
                                       impair::ImpairmentType type);

std::string shard_name(int mcs, char model, impair::ImpairmentType type);

class ShardWriter {
 public:
  ShardWriter(const std::filesystem::path& path, const nlohmann::json& header);
  ~ShardWriter();
  void write(const SymbolRecord& r);
  void close();
  std::uint64_t count() const { return count_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  unsigned long crc_ = 0;
  std::uint64_t count_ = 0;
  bool closed_ = false;
  void put(const void* p, std::size_t n);
};

class ShardReader {
 public:
  /// Validates magic, version and (when `verify`) the CRC before any record is returned.
  explicit ShardReader(const std::filesystem::path& path, bool verify = true);
  const nlohmann::json& header() const { return header_; }
  std::uint64_t count() const { return count_; }
  bool next(SymbolRecord& r);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  nlohmann::json header_;
  std::uint64_t count_ = 0;
  std::uint64_t read_ = 0;
  std::streamoff data_start_ = 0;
};

struct RecordFilter {
  std::optional<double> snr_db;
  std::optional<std::string> models;  // any of these ids
  std::optional<std::vector<impair::ImpairmentType>> types;
  std::optional<int> mcs;

  bool accepts(const SymbolRecord& r) const;
};

/// Shard files (*.dwpy) under `path`, or `path` itself, sorted by name.
std::vector<std::filesystem::path> list_shards(const std::filesystem::path& path);

/// Streams matching records in shard order; returns how many were visited.
std::size_t for_each_record(const std::filesystem::path& path, const RecordFilter& filter,
                            const std::function<void(const SymbolRecord&, const ShardReader&)>& fn);

/// Materializes matching records, optionally shuffled deterministically.
std::vector<SymbolRecord> read_records(const std::filesystem::path& path, const RecordFilter& filter = {},
                                       std::optional<std::uint64_t> shuffle_seed = std::nullopt);

/// Loads matching records into the dense training layout, sharing preamble
/// features between symbols of one packet.
dwphy::TrainingSet load_training_set(const std::filesystem::path& path, const RecordFilter& filter, int mcs,
                                     std::size_t max_records = 0);

struct GenerateOptions {
  std::filesystem::path out_dir;
  int threads = 1;
  std::function<void(const std::string&)> log;
};

struct GenerateSummary {
  std::vector<std::filesystem::path> shards;
  std::size_t records = 0;
};

GenerateSummary generate(const DatasetSpec& spec, const GenerateOptions& opts);

struct StatsRow {
  int mcs = 0;
  double snr_db = 0.0;
  char model = 'a';
  impair::ImpairmentType type = impair::ImpairmentType::I;
  std::size_t records = 0;
  double mean_rx_power = 0.0;
  double mean_noise_var = 0.0;
};

std::vector<StatsRow> dataset_stats(const std::filesystem::path& path);
std::string stats_csv(const std::vector<StatsRow>& rows);

/// Regenerates the packet behind `r` and compares every stored field bit-exactly.
bool replay_matches(const SymbolRecord& r, const nlohmann::json& shard_header);

/// CRC32 over all shard files: a fingerprint recorded in model manifests.
std::string dataset_fingerprint(const std::filesystem::path& path);

}  // namespace dwp::data
