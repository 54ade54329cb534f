#include "dwp/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <zlib.h>

#include "dwp/error.hpp"

namespace dwp::data {
namespace {

constexpr char kMagic[4] = {'D', 'W', 'P', 'Y'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kTrailer = 8 + 4;
constexpr double kInf = std::numeric_limits<double>::infinity();

template <typename T>
void store(unsigned char*& p, T v) {
  std::memcpy(p, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(p, p + sizeof(T));
  p += sizeof(T);
}

template <typename T>
T load(const unsigned char*& p) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  p += sizeof(T);
  return v;
}

template <std::size_t N>
void store_array(unsigned char*& p, const std::array<float, N>& a) {
  for (float v : a) store(p, v);
}

template <std::size_t N>
void load_array(const unsigned char*& p, std::array<float, N>& a) {
  for (auto& v : a) v = load<float>(p);
}

nlohmann::json snr_json(double v) { return std::isinf(v) ? nlohmann::json("inf") : nlohmann::json(v); }

double snr_from(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return kInf;
    throw ConfigError("bad SNR value '" + j.get<std::string>() + "'");
  }
  return j.get<double>();
}

template <std::size_t N>
void copy_to(std::array<float, N>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < N; ++i) dst[i] = static_cast<float>(src[i]);
}

}  // namespace

// ---- spec -----------------------------------------------------------------------

std::vector<SnrPoint> DatasetSpec::reference_grid(int mcs) {
  switch (mcs) {
    case 7:
      return {{25, 7.3728}, {30, 7.3728}, {35, 7.3728}, {40, 7.3728}, {45, 7.3728}, {50, 0.0}, {kInf, 9.216}};
    case 8:
    case 9:
    case 10:
      return {{25, 0.0}, {30, 4.608}, {35, 4.608}, {40, 4.608}, {45, 4.608}, {50, 4.608}, {kInf, 9.216}};
    default:
      throw ConfigError("no reference SNR grid for MCS " + std::to_string(mcs));
  }
}

DatasetSpec DatasetSpec::full_scale() {
  DatasetSpec s;
  s.mcs = {7, 8, 10};
  s.packets_per_setting = 3200;
  s.symbols_per_packet = 128;
  return s;
}

const std::vector<SnrPoint>& DatasetSpec::grid(int mcs) const {
  auto it = snr_grid.find(mcs);
  if (it != snr_grid.end()) return it->second;
  static std::map<int, std::vector<SnrPoint>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto [pos, inserted] = cache.try_emplace(mcs);
  if (inserted) pos->second = reference_grid(mcs);
  return pos->second;
}

std::size_t DatasetSpec::packets_at(int mcs, const SnrPoint& p) const {
  double max_finite = 0.0;
  for (const auto& q : grid(mcs)) {
    if (std::isfinite(q.snr_db)) max_finite = std::max(max_finite, q.quota);
  }
  if (max_finite <= 0.0) {
    for (const auto& q : grid(mcs)) max_finite = std::max(max_finite, q.quota);
  }
  if (max_finite <= 0.0 || p.quota <= 0.0) return 0;
  return static_cast<std::size_t>(std::llround(static_cast<double>(packets_per_setting) * p.quota / max_finite));
}

std::size_t DatasetSpec::total_symbols(int mcs) const {
  std::size_t n = 0;
  for (const auto& p : grid(mcs)) n += packets_at(mcs, p);
  return n * settings() * symbols_per_packet;
}

nlohmann::json DatasetSpec::to_json() const {
  nlohmann::json j;
  j["mcs"] = mcs;
  auto& g = j["snr_grid"] = nlohmann::json::object();
  for (int m : mcs) {
    auto& arr = g[std::to_string(m)] = nlohmann::json::array();
    for (const auto& p : grid(m)) arr.push_back({snr_json(p.snr_db), p.quota});
  }
  j["models"] = models;
  auto& t = j["types"] = nlohmann::json::array();
  for (auto ty : types) t.push_back(impair::to_string(ty));
  j["packets_per_setting"] = packets_per_setting;
  j["symbols_per_packet"] = symbols_per_packet;
  j["seed"] = seed;
  j["impairments"] = impairments.to_json();
  return j;
}

DatasetSpec DatasetSpec::from_json(const nlohmann::json& j) {
  DatasetSpec s;
  try {
    if (j.value("full_scale", false)) s = full_scale();
    if (j.contains("mcs")) {
      s.mcs = j.at("mcs").is_array() ? j.at("mcs").get<std::vector<int>>() : std::vector<int>{j.at("mcs").get<int>()};
    }
    if (j.contains("snr_grid")) {
      for (auto it = j.at("snr_grid").begin(); it != j.at("snr_grid").end(); ++it) {
        std::vector<SnrPoint> pts;
        for (const auto& e : it.value()) {
          if (e.is_array()) {
            pts.push_back({snr_from(e.at(0)), e.at(1).get<double>()});
          } else {
            pts.push_back({snr_from(e), 1.0});
          }
        }
        s.snr_grid[std::stoi(it.key())] = pts;
      }
    }
    if (j.contains("models")) s.models = j.at("models").get<std::string>();
    if (j.contains("types")) {
      s.types.clear();
      for (const auto& t : j.at("types")) s.types.push_back(impair::parse_type(t.get<std::string>()));
    }
    if (j.contains("packets_per_setting")) s.packets_per_setting = j.at("packets_per_setting").get<std::size_t>();
    if (j.contains("symbols_per_packet")) s.symbols_per_packet = j.at("symbols_per_packet").get<std::size_t>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("impairments")) s.impairments = impair::ImpairmentConfig::from_json(j.at("impairments"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dataset spec: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("dataset spec: ") + e.what());
  }
  for (char m : s.models) channel::ChannelModelSpec::tgax(m);
  for (int m : s.mcs) {
    s.grid(m);
    phy::mcs_info(m);
  }
  if (s.symbols_per_packet == 0) throw ConfigError("symbols_per_packet must be positive");
  return s;
}

// ---- records ----------------------------------------------------------------------

void SymbolRecord::encode(unsigned char* out) const {
  unsigned char* p = out;
  store<std::uint64_t>(p, packet_id);
  store<std::uint32_t>(p, symbol_index);
  store<std::uint8_t>(p, static_cast<std::uint8_t>(model));
  store<std::uint8_t>(p, static_cast<std::uint8_t>(type));
  store<std::int8_t>(p, static_cast<std::int8_t>(mcs));
  store<std::uint8_t>(p, 0);
  store<float>(p, snr_db);
  store<float>(p, noise_var);
  store<float>(p, rx_power);
  store_array(p, rx_lltf);
  store_array(p, rx_heltf);
  store_array(p, rx_pilots);
  store_array(p, tx_pilots);
  store_array(p, rx_data);
  store_array(p, label);
}

SymbolRecord SymbolRecord::decode(const unsigned char* in) {
  const unsigned char* p = in;
  SymbolRecord r;
  r.packet_id = load<std::uint64_t>(p);
  r.symbol_index = load<std::uint32_t>(p);
  r.model = static_cast<char>(load<std::uint8_t>(p));
  const auto t = load<std::uint8_t>(p);
  if (t < 1 || t > 3) throw FormatError("record has invalid impairment type " + std::to_string(t));
  r.type = static_cast<impair::ImpairmentType>(t);
  r.mcs = load<std::int8_t>(p);
  load<std::uint8_t>(p);
  r.snr_db = load<float>(p);
  r.noise_var = load<float>(p);
  r.rx_power = load<float>(p);
  load_array(p, r.rx_lltf);
  load_array(p, r.rx_heltf);
  load_array(p, r.rx_pilots);
  load_array(p, r.tx_pilots);
  load_array(p, r.rx_data);
  load_array(p, r.label);
  return r;
}

std::uint64_t packet_id(int mcs, char model, impair::ImpairmentType type, std::size_t snr_index, std::size_t index) {
  return hash_ids({0x44415441ULL, static_cast<std::uint64_t>(mcs + 16), static_cast<std::uint64_t>(model),
                   static_cast<std::uint64_t>(type), snr_index, index});
}

link::LinkConfig link_config(const DatasetSpec& spec, int mcs, char model, impair::ImpairmentType type,
                             double snr_db) {
  link::LinkConfig cfg;
  cfg.mcs = mcs;
  cfg.n_symbols = spec.symbols_per_packet;
  cfg.model = model;
  cfg.snr_db = snr_db;
  auto imp = spec.impairments;
  imp.type = type;
  cfg.impairments = imp;
  return cfg;
}

std::vector<SymbolRecord> make_records(const link::LinkPacket& pkt, const link::LinkConfig& cfg,
                                       impair::ImpairmentType type) {
  const auto pf = dwphy::extract_packet_features(pkt.rx.samples);
  std::vector<SymbolRecord> out;
  out.reserve(pkt.rx.n_symbols);
  for (std::size_t m = 0; m < pkt.rx.n_symbols; ++m) {
    const auto fv = dwphy::extract_features(pf, pkt.rx.samples, m);
    SymbolRecord r;
    r.packet_id = pkt.packet_id;
    r.symbol_index = static_cast<std::uint32_t>(m);
    r.model = cfg.model;
    r.type = type;
    r.mcs = cfg.mcs;
    r.snr_db = static_cast<float>(cfg.snr_db);
    r.noise_var = static_cast<float>(pkt.genie.noise_variance);
    r.rx_power = static_cast<float>(fv.rx_power);
    copy_to(r.rx_lltf, fv.rx_lltf);
    copy_to(r.rx_heltf, fv.rx_heltf);
    copy_to(r.rx_pilots, fv.rx_pilots);
    copy_to(r.tx_pilots, fv.tx_pilots);
    copy_to(r.rx_data, dwphy::to_real(fv.rx_data));
    copy_to(r.label, dwphy::to_real(pkt.tx.tx_constellation[m]));
    out.push_back(r);
  }
  return out;
}

std::string shard_name(int mcs, char model, impair::ImpairmentType type) {
  return "shard_mcs" + std::to_string(mcs) + "_" + std::string(1, model) + "_" + impair::to_string(type) + ".dwpy";
}

// ---- shard I/O -------------------------------------------------------------------

ShardWriter::ShardWriter(const std::filesystem::path& path, const nlohmann::json& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot create shard " + path.string());
  crc_ = crc32(0L, Z_NULL, 0);
  const std::string h = header.dump();
  unsigned char buf[8];
  unsigned char* p = buf;
  put(kMagic, 4);
  store<std::uint32_t>(p, kVersion);
  store<std::uint32_t>(p, static_cast<std::uint32_t>(h.size()));
  put(buf, 8);
  put(h.data(), h.size());
}

ShardWriter::~ShardWriter() {
  if (!closed_) {
    try {
      close();
    } catch (...) {
    }
  }
}

void ShardWriter::put(const void* p, std::size_t n) {
  out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  crc_ = crc32(crc_, static_cast<const Bytef*>(p), static_cast<uInt>(n));
  if (!out_) throw std::runtime_error("write failed: " + path_.string());
}

void ShardWriter::write(const SymbolRecord& r) {
  unsigned char buf[SymbolRecord::kBytes];
  r.encode(buf);
  put(buf, sizeof buf);
  ++count_;
}

void ShardWriter::close() {
  if (closed_) return;
  unsigned char buf[8];
  unsigned char* p = buf;
  store<std::uint64_t>(p, count_);
  put(buf, 8);
  unsigned char c[4];
  p = c;
  store<std::uint32_t>(p, static_cast<std::uint32_t>(crc_));
  out_.write(reinterpret_cast<const char*>(c), 4);
  out_.close();
  closed_ = true;
  if (!out_) throw std::runtime_error("write failed: " + path_.string());
}

ShardReader::ShardReader(const std::filesystem::path& path, bool verify) : path_(path), in_(path, std::ios::binary) {
  const std::string what = "shard " + path.string();
  if (!in_) throw FormatError(what + ": cannot open");
  const auto size = std::filesystem::file_size(path);
  unsigned char head[12];
  if (size < 12 + kTrailer || !in_.read(reinterpret_cast<char*>(head), 12)) throw FormatError(what + ": truncated");
  if (std::memcmp(head, kMagic, 4) != 0) throw FormatError(what + ": bad magic");
  const unsigned char* p = head + 4;
  const auto version = load<std::uint32_t>(p);
  if (version != kVersion) throw FormatError(what + ": unsupported version " + std::to_string(version));
  const auto hlen = load<std::uint32_t>(p);
  if (12 + hlen + kTrailer > size) throw FormatError(what + ": truncated header");
  std::string h(hlen, '\0');
  in_.read(h.data(), hlen);
  try {
    header_ = nlohmann::json::parse(h);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": header is not valid JSON");
  }
  data_start_ = static_cast<std::streamoff>(12 + hlen);
  const auto body = size - 12 - hlen - kTrailer;
  if (body % SymbolRecord::kBytes != 0) throw FormatError(what + ": record region is not a whole number of records");
  count_ = body / SymbolRecord::kBytes;

  unsigned char tail[kTrailer];
  in_.seekg(static_cast<std::streamoff>(size - kTrailer));
  in_.read(reinterpret_cast<char*>(tail), kTrailer);
  p = tail;
  const auto stored_count = load<std::uint64_t>(p);
  const auto stored_crc = load<std::uint32_t>(p);
  if (stored_count != count_) throw FormatError(what + ": record count mismatch");

  if (verify) {
    in_.seekg(0);
    unsigned long crc = crc32(0L, Z_NULL, 0);
    std::vector<char> buf(1 << 20);
    std::uintmax_t left = size - 4;
    while (left > 0) {
      const auto n = static_cast<std::streamsize>(std::min<std::uintmax_t>(left, buf.size()));
      if (!in_.read(buf.data(), n)) throw FormatError(what + ": read error");
      crc = crc32(crc, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(n));
      left -= static_cast<std::uintmax_t>(n);
    }
    if (static_cast<std::uint32_t>(crc) != stored_crc) throw FormatError(what + ": CRC mismatch");
  }
  in_.clear();
  in_.seekg(data_start_);
}

bool ShardReader::next(SymbolRecord& r) {
  if (read_ >= count_) return false;
  unsigned char buf[SymbolRecord::kBytes];
  if (!in_.read(reinterpret_cast<char*>(buf), sizeof buf)) throw FormatError("shard " + path_.string() + ": truncated");
  r = SymbolRecord::decode(buf);
  ++read_;
  return true;
}

bool RecordFilter::accepts(const SymbolRecord& r) const {
  if (snr_db) {
    const bool both_inf = std::isinf(*snr_db) && std::isinf(r.snr_db);
    if (!both_inf && std::abs(static_cast<double>(r.snr_db) - *snr_db) > 1e-6) return false;
  }
  if (models && models->find(r.model) == std::string::npos) return false;
  if (types && std::find(types->begin(), types->end(), r.type) == types->end()) return false;
  if (mcs && *mcs != r.mcs) return false;
  return true;
}

std::vector<std::filesystem::path> list_shards(const std::filesystem::path& path) {
  std::vector<std::filesystem::path> out;
  if (std::filesystem::is_directory(path)) {
    for (const auto& e : std::filesystem::directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".dwpy") out.push_back(e.path());
    }
  } else if (std::filesystem::exists(path)) {
    out.push_back(path);
  } else {
    throw ConfigError("dataset path not found: " + path.string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t for_each_record(const std::filesystem::path& path, const RecordFilter& filter,
                            const std::function<void(const SymbolRecord&, const ShardReader&)>& fn) {
  std::size_t n = 0;
  for (const auto& shard : list_shards(path)) {
    ShardReader reader(shard);
    SymbolRecord r;
    while (reader.next(r)) {
      if (!filter.accepts(r)) continue;
      fn(r, reader);
      ++n;
    }
  }
  return n;
}

std::vector<SymbolRecord> read_records(const std::filesystem::path& path, const RecordFilter& filter,
                                       std::optional<std::uint64_t> shuffle_seed) {
  std::vector<SymbolRecord> out;
  for_each_record(path, filter, [&](const SymbolRecord& r, const ShardReader&) { out.push_back(r); });
  if (shuffle_seed) {
    SeededRng rng(*shuffle_seed, 0, Stage::shuffle);
    for (std::size_t i = out.size(); i > 1; --i) std::swap(out[i - 1], out[rng.below(i)]);
  }
  return out;
}

dwphy::TrainingSet load_training_set(const std::filesystem::path& path, const RecordFilter& filter, int mcs,
                                     std::size_t max_records) {
  dwphy::TrainingSet set;
  set.mcs = mcs;
  RecordFilter f = filter;
  f.mcs = mcs;
  std::map<std::uint64_t, std::uint32_t> slots;
  for (const auto& shard : list_shards(path)) {
    ShardReader reader(shard);
    SymbolRecord r;
    while (reader.next(r)) {
      if (max_records && set.size() >= max_records) return set;
      if (!f.accepts(r)) continue;
      auto it = slots.find(r.packet_id);
      if (it == slots.end()) it = slots.emplace(r.packet_id, set.add_packet(r.rx_lltf, r.rx_heltf)).first;
      set.add_symbol(it->second, r.tx_pilots, r.rx_pilots, r.rx_data, r.label);
    }
  }
  if (set.size() == 0) {
    throw ConfigError("no MCS " + std::to_string(mcs) + " records in " + path.string() + " match the filter");
  }
  return set;
}

// ---- generation -------------------------------------------------------------------

GenerateSummary generate(const DatasetSpec& spec, const GenerateOptions& opts) {
  std::filesystem::create_directories(opts.out_dir);
  struct Job {
    int mcs;
    char model;
    impair::ImpairmentType type;
  };
  std::vector<Job> jobs;
  for (int mcs : spec.mcs) {
    for (char model : spec.models) {
      for (auto type : spec.types) jobs.push_back({mcs, model, type});
    }
  }
  GenerateSummary summary;
  summary.shards.resize(jobs.size());
  std::vector<std::size_t> counts(jobs.size(), 0);
  std::mutex log_mu;

  auto run = [&](std::size_t j) {
    const auto& job = jobs[j];
    const auto path = opts.out_dir / shard_name(job.mcs, job.model, job.type);
    nlohmann::json header;
    header["spec"] = spec.to_json();
    header["setting"] = {{"mcs", job.mcs}, {"model", std::string(1, job.model)}, {"type", impair::to_string(job.type)}};
    header["channel"] = channel::ChannelModelSpec::tgax(job.model).to_json();
    auto imp = spec.impairments;
    imp.type = job.type;
    header["impairments"] = imp.to_json();
    header["constants"] = phy::constants_fingerprint();
    header["record_bytes"] = SymbolRecord::kBytes;
    header["fields"] = {{"rx_lltf", kLltfLen}, {"rx_heltf", kHeltfLen}, {"rx_pilots", kPilotLen},
                        {"tx_pilots", kPilotLen}, {"rx_data", kDataLen}, {"label", kDataLen}};
    ShardWriter w(path, header);
    const auto& grid = spec.grid(job.mcs);
    for (std::size_t si = 0; si < grid.size(); ++si) {
      const std::size_t n = spec.packets_at(job.mcs, grid[si]);
      const auto cfg = link_config(spec, job.mcs, job.model, job.type, grid[si].snr_db);
      for (std::size_t p = 0; p < n; ++p) {
        const auto pkt = link::simulate_packet(cfg, spec.seed, packet_id(job.mcs, job.model, job.type, si, p));
        for (const auto& r : make_records(pkt, cfg, job.type)) w.write(r);
      }
    }
    w.close();
    counts[j] = w.count();
    summary.shards[j] = path;
    if (opts.log) {
      std::lock_guard<std::mutex> lock(log_mu);
      opts.log(path.filename().string() + ": " + std::to_string(w.count()) + " records");
    }
  };

  const int threads = std::max(1, std::min<int>(opts.threads, static_cast<int>(jobs.size())));
  if (threads == 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run(j);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t j = static_cast<std::size_t>(t); j < jobs.size(); j += static_cast<std::size_t>(threads)) run(j);
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  for (auto c : counts) summary.records += c;
  return summary;
}

// ---- stats, replay, fingerprint ------------------------------------------------

std::vector<StatsRow> dataset_stats(const std::filesystem::path& path) {
  std::map<std::tuple<int, double, char, int>, StatsRow> groups;
  if (std::filesystem::is_directory(path) && list_shards(path).empty()) return {};
  for_each_record(path, {}, [&](const SymbolRecord& r, const ShardReader&) {
    const auto key = std::make_tuple(r.mcs, static_cast<double>(r.snr_db), r.model, static_cast<int>(r.type));
    auto& row = groups[key];
    row.mcs = r.mcs;
    row.snr_db = r.snr_db;
    row.model = r.model;
    row.type = r.type;
    ++row.records;
    row.mean_rx_power += r.rx_power;
    row.mean_noise_var += r.noise_var;
  });
  std::vector<StatsRow> out;
  for (auto& [k, row] : groups) {
    row.mean_rx_power /= static_cast<double>(row.records);
    row.mean_noise_var /= static_cast<double>(row.records);
    out.push_back(row);
  }
  return out;
}

std::string stats_csv(const std::vector<StatsRow>& rows) {
  std::ostringstream os;
  os << "mcs,snr_db,model,type,records,mean_rx_power,mean_noise_var\n";
  for (const auto& r : rows) {
    os << r.mcs << ',' << (std::isinf(r.snr_db) ? std::string("inf") : std::to_string(r.snr_db)) << ',' << r.model
       << ',' << impair::to_string(r.type) << ',' << r.records << ',' << r.mean_rx_power << ',' << r.mean_noise_var
       << '\n';
  }
  return os.str();
}

bool replay_matches(const SymbolRecord& r, const nlohmann::json& shard_header) {
  const auto spec = DatasetSpec::from_json(shard_header.at("spec"));
  const auto cfg = link_config(spec, r.mcs, r.model, r.type, static_cast<double>(r.snr_db));
  const auto pkt = link::simulate_packet(cfg, spec.seed, r.packet_id);
  const auto recs = make_records(pkt, cfg, r.type);
  if (r.symbol_index >= recs.size()) return false;
  unsigned char a[SymbolRecord::kBytes], b[SymbolRecord::kBytes];
  r.encode(a);
  recs[r.symbol_index].encode(b);
  return std::memcmp(a, b, sizeof a) == 0;
}

std::string dataset_fingerprint(const std::filesystem::path& path) {
  unsigned long crc = crc32(0L, Z_NULL, 0);
  for (const auto& shard : list_shards(path)) {
    std::ifstream in(shard, std::ios::binary);
    const auto size = std::filesystem::file_size(shard);
    if (size < 4) throw FormatError("shard " + shard.string() + ": truncated");
    in.seekg(static_cast<std::streamoff>(size - 4));
    unsigned char c[4];
    in.read(reinterpret_cast<char*>(c), 4);
    const std::string name = shard.filename().string();
    crc = crc32(crc, reinterpret_cast<const Bytef*>(name.data()), static_cast<uInt>(name.size()));
    crc = crc32(crc, c, 4);
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", crc & 0xffffffffUL);
  return buf;
}

}  // namespace dwp::data
