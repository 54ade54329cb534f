#include "dwp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "dwp/error.hpp"
#include "dwp/fec.hpp"

namespace dwp::harness {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double parse_num(const std::string& s) {
  if (s == "inf" || s == "+inf") return kInf;
  if (s == "-inf") return -kInf;
  if (s == "nan") return kNaN;
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw FormatError("not a number: '" + s + "'");
  return v;
}

nlohmann::json num_json(double v) { return std::isinf(v) ? nlohmann::json(v > 0 ? "inf" : "-inf") : nlohmann::json(v); }

double num_from(const nlohmann::json& j) { return j.is_string() ? parse_num(j.get<std::string>()) : j.get<double>(); }

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string types_label(const std::vector<TypeSlot>& types) {
  std::string s;
  for (const auto& t : types) {
    if (!s.empty()) s += '+';
    s += type_label(t);
  }
  return s;
}

}  // namespace

std::string type_label(const TypeSlot& t) { return t ? impair::to_string(*t) : "none"; }

TypeSlot parse_type_label(const std::string& s) {
  if (s == "none") return std::nullopt;
  return impair::parse_type(s);
}

nlohmann::json EvalSpec::to_json() const {
  nlohmann::json j;
  j["mcs"] = mcs;
  auto& s = j["snr_db"] = nlohmann::json::array();
  for (double v : snr_db) s.push_back(num_json(v));
  j["models"] = models;
  auto& t = j["types"] = nlohmann::json::array();
  for (const auto& ty : types) t.push_back(type_label(ty));
  j["packets_per_point"] = packets_per_point;
  j["n_symbols"] = n_symbols;
  j["seed"] = seed;
  j["threads"] = threads;
  j["max_iter"] = max_iter;
  j["split_settings"] = split_settings;
  j["impairments"] = impairments.to_json();
  return j;
}

EvalSpec EvalSpec::from_json(const nlohmann::json& j) {
  EvalSpec e;
  try {
    if (j.contains("mcs")) e.mcs = j.at("mcs").get<int>();
    if (j.contains("snr_db")) {
      e.snr_db.clear();
      if (j.at("snr_db").is_array()) {
        for (const auto& v : j.at("snr_db")) e.snr_db.push_back(num_from(v));
      } else {
        e.snr_db.push_back(num_from(j.at("snr_db")));
      }
    }
    if (j.contains("models")) e.models = j.at("models").get<std::string>();
    if (j.contains("types")) {
      e.types.clear();
      for (const auto& t : j.at("types")) e.types.push_back(parse_type_label(t.get<std::string>()));
    }
    if (j.contains("packets_per_point")) e.packets_per_point = j.at("packets_per_point").get<std::size_t>();
    if (j.contains("n_symbols")) e.n_symbols = j.at("n_symbols").get<std::size_t>();
    if (j.contains("seed")) e.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) e.threads = j.at("threads").get<int>();
    if (j.contains("max_iter")) e.max_iter = j.at("max_iter").get<int>();
    if (j.contains("split_settings")) e.split_settings = j.at("split_settings").get<bool>();
    if (j.contains("impairments")) e.impairments = impair::ImpairmentConfig::from_json(j.at("impairments"));
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("eval spec: ") + ex.what());
  } catch (const ArgumentError& ex) {
    throw ConfigError(std::string("eval spec: ") + ex.what());
  }
  try {
    phy::mcs_info(e.mcs);
  } catch (const ArgumentError& ex) {
    throw ConfigError(ex.what());
  }
  for (char m : e.models) {
    if (m != '0') channel::ChannelModelSpec::tgax(m);
  }
  if (e.snr_db.empty() || e.models.empty() || e.types.empty()) throw ConfigError("eval spec: empty grid");
  if (e.n_symbols == 0) throw ConfigError("eval spec: n_symbols must be positive");
  return e;
}

double EvalRow::ber() const { return bits ? static_cast<double>(bit_errors) / static_cast<double>(bits) : 0.0; }
double EvalRow::per() const {
  return packets ? static_cast<double>(packet_errors) / static_cast<double>(packets) : 0.0;
}
double EvalRow::ber_ci() const { return wilson(bit_errors, bits).half_width; }
double EvalRow::per_ci() const { return wilson(packet_errors, packets).half_width; }
double EvalRow::info_ber() const {
  return info_bits ? static_cast<double>(info_bit_errors) / static_cast<double>(info_bits) : 0.0;
}

std::string EvalResult::to_csv() const {
  std::ostringstream os;
  os << "receiver,mcs,snr_db,model,type,ber,ber_ci,per,per_ci,packets,bits\n";
  for (const auto& r : rows) {
    os << r.receiver << ',' << r.mcs << ',' << fmt(r.snr_db) << ',' << r.model << ',' << r.type << ','
       << fmt(r.ber()) << ',' << fmt(r.ber_ci()) << ',' << fmt(r.per()) << ',' << fmt(r.per_ci()) << ','
       << r.packets << ',' << r.bits << '\n';
  }
  return os.str();
}

nlohmann::json EvalResult::to_json() const {
  auto arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"receiver", r.receiver},
                   {"mcs", r.mcs},
                   {"snr_db", num_json(r.snr_db)},
                   {"model", r.model},
                   {"type", r.type},
                   {"ber", r.ber()},
                   {"ber_ci", r.ber_ci()},
                   {"per", r.per()},
                   {"per_ci", r.per_ci()},
                   {"packets", r.packets},
                   {"bits", r.bits},
                   {"bit_errors", r.bit_errors},
                   {"packet_errors", r.packet_errors},
                   {"info_bit_errors", r.info_bit_errors},
                   {"info_bits", r.info_bits}});
  }
  return arr;
}

EvalResult EvalResult::from_csv(const std::string& text) {
  EvalResult res;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("receiver,mcs,snr_db", 0) != 0) {
    throw FormatError("evaluation CSV: missing header");
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 11) throw FormatError("evaluation CSV line " + std::to_string(lineno) + ": expected 11 fields");
    try {
      EvalRow r;
      r.receiver = f[0];
      r.mcs = std::stoi(f[1]);
      r.snr_db = parse_num(f[2]);
      r.model = f[3];
      r.type = f[4];
      r.packets = std::stoull(f[9]);
      r.bits = std::stoull(f[10]);
      r.bit_errors = static_cast<std::uint64_t>(std::llround(parse_num(f[5]) * static_cast<double>(r.bits)));
      r.packet_errors = static_cast<std::uint64_t>(std::llround(parse_num(f[7]) * static_cast<double>(r.packets)));
      res.rows.push_back(r);
    } catch (const std::logic_error&) {
      throw FormatError("evaluation CSV line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return res;
}

WilsonInterval wilson(std::uint64_t k, std::uint64_t n, double z) {
  if (n == 0) return {0.0, 0.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  WilsonInterval w;
  w.centre = (p + z2 / (2.0 * nn)) / denom;
  w.half_width = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  return w;
}

Receiver conventional_receiver(const rx::ReceiverConfig& cfg) {
  Receiver r;
  r.name = cfg.name();
  r.run = [cfg](const link::LinkPacket& pkt, const link::LinkConfig&) { return rx::run_conventional(pkt.rx, cfg); };
  return r;
}

Receiver genie_receiver() {
  Receiver r;
  r.name = "genie";
  r.run = [](const link::LinkPacket& pkt, const link::LinkConfig& cfg) {
    return rx::run_genie(pkt.rx, pkt.genie, cfg);
  };
  return r;
}

Receiver deepwiphy_receiver(std::shared_ptr<const dwphy::DeepWiPhyModel> model, std::string name) {
  Receiver r;
  r.name = std::move(name);
  r.mcs = model->shape().mcs;
  r.run = [model](const link::LinkPacket& pkt, const link::LinkConfig&) {
    return dwphy::run_deepwiphy(pkt.rx, *model);
  };
  return r;
}

PacketOutcome score_packet(const link::LinkPacket& pkt, const rx::RxResult& res, int max_iter) {
  const int order = pkt.tx.order;
  const int bps = phy::Constellation::get(order).bits_per_symbol();
  const std::size_t n_sym = pkt.tx.n_symbols();
  if (res.points.size() != n_sym || res.rho.size() != n_sym) throw ArgumentError("score_packet: symbol count mismatch");

  PacketOutcome out;
  std::vector<double> llrs(pkt.tx.tx_bits.size());
  std::size_t pos = 0;
  for (std::size_t m = 0; m < n_sym; ++m) {
    const auto hard = rx::hard_demap(res.points[m], order);
    for (std::size_t i = 0; i < hard.size(); ++i) out.bit_errors += hard[i] != pkt.tx.tx_bits[pos + i];
    for (std::size_t t = 0; t < res.points[m].size(); ++t) {
      fec::soft_demap(res.points[m][t], res.rho[m][t], order,
                      std::span<double>(llrs.data() + pos + t * static_cast<std::size_t>(bps),
                                        static_cast<std::size_t>(bps)));
    }
    pos += hard.size();
  }
  out.bits = pos;

  if (order == 2) {
    out.info_bits = out.bits;
    out.info_bit_errors = out.bit_errors;
    out.packet_error = out.bit_errors != 0;
    return out;
  }
  const auto pc = fec::PacketCoding::make(pkt.rx.mcs, n_sym);
  const auto dec = fec::decode_packet(llrs, pc, pkt.payload.size(), max_iter);
  out.converged = dec.codewords_converged == pc.n_codewords;
  out.info_bits = pkt.payload.size();
  for (std::size_t i = 0; i < pkt.payload.size(); ++i) out.info_bit_errors += dec.payload[i] != pkt.payload[i];
  out.packet_error = out.info_bit_errors != 0;
  return out;
}

std::uint64_t eval_packet_id(int mcs, char model, const TypeSlot& type, std::size_t index) {
  return hash_ids({0x4556414CULL, static_cast<std::uint64_t>(mcs + 16), static_cast<std::uint64_t>(model),
                   type ? static_cast<std::uint64_t>(*type) : 0ULL, index});
}

link::LinkConfig eval_link_config(const EvalSpec& spec, char model, const TypeSlot& type, double snr_db) {
  link::LinkConfig cfg;
  cfg.mcs = spec.mcs;
  cfg.n_symbols = spec.n_symbols;
  cfg.model = model;
  cfg.snr_db = snr_db;
  if (type) {
    auto imp = spec.impairments;
    imp.type = *type;
    cfg.impairments = imp;
  }
  return cfg;
}

EvalResult evaluate(const std::vector<Receiver>& receivers, const EvalSpec& spec) {
  for (const auto& r : receivers) {
    if (r.mcs && *r.mcs != spec.mcs) {
      throw ConfigError("receiver '" + r.name + "' is built for MCS " + std::to_string(*r.mcs) +
                        " but the evaluation uses MCS " + std::to_string(spec.mcs));
    }
  }
  struct Task {
    std::size_t snr;
    std::size_t model;
    std::size_t type;
    std::size_t index;
  };
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < spec.snr_db.size(); ++s) {
    for (std::size_t mi = 0; mi < spec.models.size(); ++mi) {
      for (std::size_t ti = 0; ti < spec.types.size(); ++ti) {
        for (std::size_t p = 0; p < spec.packets_per_point; ++p) tasks.push_back({s, mi, ti, p});
      }
    }
  }
  const std::size_t nr = receivers.size();
  std::vector<PacketOutcome> outcomes(tasks.size() * nr);

  auto work = [&](std::size_t i) {
    const auto& t = tasks[i];
    const char model = spec.models[t.model];
    const auto& type = spec.types[t.type];
    const auto cfg = eval_link_config(spec, model, type, spec.snr_db[t.snr]);
    const auto pkt = link::simulate_packet(cfg, spec.seed, eval_packet_id(spec.mcs, model, type, t.index));
    for (std::size_t r = 0; r < nr; ++r) {
      outcomes[i * nr + r] = score_packet(pkt, receivers[r].run(pkt, cfg), spec.max_iter);
    }
  };

  const int threads = std::max(1, spec.threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < tasks.size(); i = next++) work(i);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
          next = tasks.size();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  // Reduce in a fixed order so that the table is independent of scheduling.
  EvalResult res;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>, std::size_t> row_of;
  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const auto& t = tasks[i];
      const std::size_t mk = spec.split_settings ? t.model : 0;
      const std::size_t tk = spec.split_settings ? t.type : 0;
      auto key = std::make_tuple(r, t.snr, mk, tk);
      auto it = row_of.find(key);
      if (it == row_of.end()) {
        EvalRow row;
        row.receiver = receivers[r].name;
        row.mcs = spec.mcs;
        row.snr_db = spec.snr_db[t.snr];
        row.model = spec.split_settings ? std::string(1, spec.models[t.model]) : spec.models;
        row.type = spec.split_settings ? type_label(spec.types[t.type]) : types_label(spec.types);
        res.rows.push_back(row);
        it = row_of.emplace(key, res.rows.size() - 1).first;
      }
      auto& row = res.rows[it->second];
      const auto& o = outcomes[i * nr + r];
      row.bit_errors += o.bit_errors;
      row.bits += o.bits;
      row.packet_errors += o.packet_error;
      ++row.packets;
      row.info_bit_errors += o.info_bit_errors;
      row.info_bits += o.info_bits;
    }
  }
  return res;
}

EvalResult evaluate(const Receiver& receiver, const EvalSpec& spec) {
  return evaluate(std::vector<Receiver>{receiver}, spec);
}

// ---- comparison ---------------------------------------------------------------

double snr_at_level(const std::vector<std::pair<double, double>>& curve, double level) {
  if (!(level > 0.0)) throw ArgumentError("snr_at_level: level must be positive");
  constexpr double kFloor = 1e-12;
  auto c = curve;
  std::sort(c.begin(), c.end());
  const double ll = std::log10(level);
  for (std::size_t i = 0; i + 1 < c.size(); ++i) {
    if (!std::isfinite(c[i].first) || !std::isfinite(c[i + 1].first)) continue;
    const double a = std::log10(std::max(c[i].second, kFloor));
    const double b = std::log10(std::max(c[i + 1].second, kFloor));
    if (a == ll) return c[i].first;
    if ((a - ll) * (b - ll) < 0.0) {
      return c[i].first + (ll - a) / (b - a) * (c[i + 1].first - c[i].first);
    }
  }
  if (!c.empty() && std::isfinite(c.back().first) && std::log10(std::max(c.back().second, kFloor)) == ll) {
    return c.back().first;
  }
  return kNaN;
}

std::string GainReport::to_csv() const {
  std::ostringstream os;
  os << "metric,level,mcs,model,type,snr_baseline,snr_candidate,gain_db\n";
  for (const auto& r : rows) {
    os << r.metric << ',' << fmt(r.level) << ',' << r.mcs << ',' << r.model << ',' << r.type << ','
       << fmt(r.snr_baseline) << ',' << fmt(r.snr_candidate) << ',' << fmt(r.gain_db) << '\n';
  }
  return os.str();
}

nlohmann::json GainReport::to_json() const {
  nlohmann::json j;
  j["sign_change"] = sign_change;
  auto& arr = j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    auto nj = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : num_json(v); };
    arr.push_back({{"metric", r.metric},
                   {"level", r.level},
                   {"mcs", r.mcs},
                   {"model", r.model},
                   {"type", r.type},
                   {"snr_baseline", nj(r.snr_baseline)},
                   {"snr_candidate", nj(r.snr_candidate)},
                   {"gain_db", nj(r.gain_db)}});
  }
  return j;
}

GainReport compare(const EvalResult& baseline, const EvalResult& candidate, Metric metric,
                   const std::vector<double>& levels) {
  using Key = std::tuple<int, std::string, std::string>;
  using Curve = std::vector<std::pair<double, double>>;
  auto curves = [&](const EvalResult& r, const char* side) {
    std::map<Key, Curve> out;
    std::map<Key, std::string> owner;
    for (const auto& row : r.rows) {
      const Key k{row.mcs, row.model, row.type};
      auto [it, inserted] = owner.try_emplace(k, row.receiver);
      if (!inserted && it->second != row.receiver) {
        throw ComparisonError(std::string(side) + " holds more than one receiver for the same group");
      }
      out[k].emplace_back(row.snr_db, metric == Metric::ber ? row.ber() : row.per());
    }
    return out;
  };
  const auto a = curves(baseline, "baseline");
  const auto b = curves(candidate, "candidate");

  GainReport rep;
  bool any = false;
  bool pos = false, neg = false;
  for (const auto& [key, ca] : a) {
    auto it = b.find(key);
    if (it == b.end()) continue;
    const auto& cb = it->second;
    auto range = [](const Curve& c) {
      double lo = kInf, hi = -kInf;
      for (const auto& p : c) {
        if (!std::isfinite(p.first)) continue;
        lo = std::min(lo, p.first);
        hi = std::max(hi, p.first);
      }
      return std::make_pair(lo, hi);
    };
    const auto [alo, ahi] = range(ca);
    const auto [blo, bhi] = range(cb);
    if (std::max(alo, blo) > std::min(ahi, bhi)) continue;
    any = true;
    for (double level : levels) {
      GainRow g;
      g.metric = metric == Metric::ber ? "ber" : "per";
      g.level = level;
      g.mcs = std::get<0>(key);
      g.model = std::get<1>(key);
      g.type = std::get<2>(key);
      g.snr_baseline = snr_at_level(ca, level);
      g.snr_candidate = snr_at_level(cb, level);
      g.gain_db = g.snr_baseline - g.snr_candidate;
      if (g.gain_db > 0) pos = true;
      if (g.gain_db < 0) neg = true;
      rep.rows.push_back(g);
    }
  }
  if (!any) throw ComparisonError("results share no group with overlapping SNR ranges");
  rep.sign_change = pos && neg;
  return rep;
}

}  // namespace dwp::harness
