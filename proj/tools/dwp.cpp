// dwp: dataset generation, training, evaluation and comparison front end.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "dwp/dataset.hpp"
#include "dwp/deepwiphy.hpp"
#include "dwp/error.hpp"
#include "dwp/harness.hpp"
#include "dwp/phy_frame.hpp"
#include "dwp/selftest.hpp"

namespace {

using nlohmann::json;

enum Exit { kOk = 0, kConfig = 1, kRuntime = 2, kSelftest = 3 };

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dwp::ConfigError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw dwp::ConfigError(path + ": " + e.what());
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dwp::ConfigError("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

void log_provenance(const std::string& command, const json& details) {
  json p;
  p["command"] = command;
  p["constants"] = dwp::phy::constants_fingerprint();
  p["config"] = details;
  std::cerr << "provenance " << p.dump() << "\n";
}

// Flag overrides are merged into the JSON config before parsing.
template <typename T>
void override_key(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

json snr_list(const std::vector<std::string>& v) {
  json arr = json::array();
  for (const auto& s : v) {
    if (s == "inf") {
      arr.push_back("inf");
    } else {
      try {
        arr.push_back(std::stod(s));
      } catch (const std::exception&) {
        throw dwp::ConfigError("bad SNR value '" + s + "'");
      }
    }
  }
  return arr;
}

// ---- generate --------------------------------------------------------------

struct GenerateArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> packets, symbols;
  std::optional<std::string> models;
  std::vector<std::string> types;
  std::vector<int> mcs;
  bool full_scale = false;
  int threads = 1;
};

int cmd_generate(const GenerateArgs& a) {
  json j = a.config.empty() ? json::object() : read_json(a.config);
  if (a.full_scale) j["full_scale"] = true;
  override_key(j, "seed", a.seed);
  override_key(j, "packets_per_setting", a.packets);
  override_key(j, "symbols_per_packet", a.symbols);
  override_key(j, "models", a.models);
  if (!a.types.empty()) j["types"] = a.types;
  if (!a.mcs.empty()) j["mcs"] = a.mcs;
  const auto spec = dwp::data::DatasetSpec::from_json(j);
  log_provenance("generate", spec.to_json());
  dwp::data::GenerateOptions opts;
  opts.out_dir = a.out;
  opts.threads = a.threads;
  opts.log = [](const std::string& s) { std::cerr << s << "\n"; };
  const auto summary = dwp::data::generate(spec, opts);
  std::cout << summary.records << " records in " << summary.shards.size() << " shards, fingerprint "
            << dwp::data::dataset_fingerprint(a.out) << "\n";
  return kOk;
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
  std::string config, data, out, warm_start, validation;
  std::optional<int> clusters, units, layers, mcs, epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch, max_records;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> models;
  std::vector<std::string> snr;
  int threads = 1;
  bool keep_all = false;
};

int cmd_train(const TrainArgs& a) {
  json j = a.config.empty() ? json::object() : read_json(a.config);
  override_key(j, "clusters", a.clusters);
  override_key(j, "units", a.units);
  override_key(j, "layers", a.layers);
  override_key(j, "mcs", a.mcs);
  override_key(j, "epochs", a.epochs);
  override_key(j, "lr", a.lr);
  override_key(j, "batch", a.batch);
  override_key(j, "seed", a.seed);
  override_key(j, "models", a.models);
  override_key(j, "max_records", a.max_records);
  if (!a.snr.empty()) j["snr_db"] = snr_list(a.snr);

  dwp::dwphy::ModelShape shape;
  dwp::dwphy::TrainConfig tc;
  dwp::data::RecordFilter filter;
  std::size_t max_records = 0;
  std::vector<double> snrs;
  try {
    shape.clusters = j.value("clusters", shape.clusters);
    shape.units = j.value("units", shape.units);
    shape.layers = j.value("layers", shape.layers);
    shape.mcs = j.value("mcs", shape.mcs);
    tc.epochs = j.value("epochs", tc.epochs);
    tc.lr = j.value("lr", tc.lr);
    tc.batch = j.value("batch", tc.batch);
    tc.seed = j.value("seed", tc.seed);
    max_records = j.value("max_records", std::size_t{0});
    if (j.contains("models")) filter.models = j.at("models").get<std::string>();
    if (j.contains("snr_db")) {
      for (const auto& v : j.at("snr_db")) {
        snrs.push_back(v.is_string() ? std::numeric_limits<double>::infinity() : v.get<double>());
      }
    }
  } catch (const json::exception& e) {
    throw dwp::ConfigError(std::string("train config: ") + e.what());
  }
  if (snrs.size() > 1) throw dwp::ConfigError("train: at most one SNR filter value");
  if (!snrs.empty()) filter.snr_db = snrs[0];
  tc.threads = a.threads;
  tc.checkpoint_dir = a.out.empty() ? std::filesystem::path() : std::filesystem::path(a.out) / "checkpoints";
  tc.keep_all_checkpoints = a.keep_all;
  tc.on_epoch = [](int epoch, const std::vector<double>& loss) {
    double mean = 0.0;
    for (double v : loss) mean += v;
    std::cerr << "epoch " << epoch << " mean loss " << mean / static_cast<double>(loss.size()) << " per-cluster";
    for (double v : loss) std::cerr << ' ' << v;
    std::cerr << "\n";
  };

  auto model = a.warm_start.empty() ? dwp::dwphy::DeepWiPhyModel(shape, tc.seed)
                                    : dwp::dwphy::DeepWiPhyModel::load(a.warm_start);
  const auto set = dwp::data::load_training_set(a.data, filter, model.shape().mcs, max_records);
  std::optional<dwp::dwphy::TrainingSet> val;
  if (!a.validation.empty()) val = dwp::data::load_training_set(a.validation, filter, model.shape().mcs, 0);
  json prov = {{"shape", model.shape().to_json()},
               {"train", tc.to_json()},
               {"data", a.data},
               {"dataset_fingerprint", dwp::data::dataset_fingerprint(a.data)},
               {"records", set.size()},
               {"warm_start", a.warm_start}};
  log_provenance("train", prov);
  const auto report = dwp::dwphy::train(model, set, tc, val ? &*val : nullptr);
  json curves;
  curves["epoch_loss"] = report.epoch_loss;
  curves["validation_loss"] = report.validation_loss;
  model.manifest["training"] = prov;
  model.manifest["loss"] = curves;
  model.save(a.out);
  write_text((std::filesystem::path(a.out) / "loss.json").string(), curves.dump(2) + "\n");
  std::cout << "model written to " << a.out << "\n";
  return kOk;
}

// ---- evaluate ------------------------------------------------------------------

struct EvaluateArgs {
  std::string config, out;
  std::vector<std::string> receivers;
  std::optional<int> mcs, packets, symbols, threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> models;
  std::vector<std::string> types, snr;
  bool split = false;
};

int cmd_evaluate(const EvaluateArgs& a) {
  json j = a.config.empty() ? json::object() : read_json(a.config);
  override_key(j, "mcs", a.mcs);
  override_key(j, "packets_per_point", a.packets);
  override_key(j, "n_symbols", a.symbols);
  override_key(j, "threads", a.threads);
  override_key(j, "seed", a.seed);
  override_key(j, "models", a.models);
  if (!a.types.empty()) j["types"] = a.types;
  if (!a.snr.empty()) j["snr_db"] = snr_list(a.snr);
  if (a.split) j["split_settings"] = true;
  std::vector<std::string> names = a.receivers;
  if (names.empty() && j.contains("receivers")) names = j.at("receivers").get<std::vector<std::string>>();
  if (names.empty()) names = {"ls"};
  const auto spec = dwp::harness::EvalSpec::from_json(j);

  std::vector<dwp::harness::Receiver> rxs;
  for (const auto& n : names) {
    if (n == "genie") {
      rxs.push_back(dwp::harness::genie_receiver());
    } else if (n.rfind("deepwiphy:", 0) == 0) {
      const std::string path = n.substr(10);
      auto model = std::make_shared<const dwp::dwphy::DeepWiPhyModel>(dwp::dwphy::DeepWiPhyModel::load(path));
      rxs.push_back(dwp::harness::deepwiphy_receiver(model, "deepwiphy"));
    } else {
      dwp::rx::ReceiverConfig rc;
      try {
        rc = dwp::rx::ReceiverConfig::parse(n);
      } catch (const std::exception&) {
        throw dwp::ConfigError("unknown receiver '" + n + "'");
      }
      rxs.push_back(dwp::harness::conventional_receiver(rc));
    }
  }
  json prov = spec.to_json();
  prov["receivers"] = names;
  log_provenance("evaluate", prov);
  const auto res = dwp::harness::evaluate(rxs, spec);
  const std::string csv = res.to_csv();
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    write_text(a.out, csv);
    json doc = {{"provenance", prov}, {"constants", dwp::phy::constants_fingerprint()}, {"rows", res.to_json()}};
    write_text(a.out + ".json", doc.dump(2) + "\n");
  }
  return kOk;
}

// ---- compare --------------------------------------------------------------------

struct CompareArgs {
  std::string baseline, candidate, out, metric = "ber";
  std::vector<double> levels;
};

int cmd_compare(const CompareArgs& a) {
  const auto base = dwp::harness::EvalResult::from_csv(read_text(a.baseline));
  const auto cand = dwp::harness::EvalResult::from_csv(read_text(a.candidate));
  if (a.metric != "ber" && a.metric != "per") throw dwp::ConfigError("metric must be ber or per");
  const auto metric = a.metric == "ber" ? dwp::harness::Metric::ber : dwp::harness::Metric::per;
  std::vector<double> levels = a.levels;
  if (levels.empty()) levels = metric == dwp::harness::Metric::ber ? std::vector<double>{1e-2, 1e-3}
                                                                   : std::vector<double>{0.1};
  const auto rep = dwp::harness::compare(base, cand, metric, levels);
  if (a.out.empty()) {
    std::cout << rep.to_csv();
  } else {
    write_text(a.out, rep.to_csv());
    write_text(a.out + ".json", rep.to_json().dump(2) + "\n");
  }
  if (rep.sign_change) std::cerr << "note: the curves cross within the compared levels\n";
  return kOk;
}

// ---- stats / selftest -----------------------------------------------------------

int cmd_stats(const std::string& data, const std::string& out) {
  const auto csv = dwp::data::stats_csv(dwp::data::dataset_stats(data));
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_text(out, csv);
  }
  return kOk;
}

int cmd_selftest() {
  const auto results = dwp::selftest::run([](const dwp::selftest::CaseResult& r) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ", " << r.seconds << " s)\n";
  });
  return dwp::selftest::all_passed(results) ? kOk : kSelftest;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DeepWiPHY reproduction toolkit"};
  app.require_subcommand(1);

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  gen->add_option("-c,--config", ga.config, "Dataset spec JSON");
  gen->add_option("-o,--out", ga.out, "Output directory")->required();
  gen->add_option("--seed", ga.seed);
  gen->add_option("--packets", ga.packets, "Packets per setting at the largest finite-SNR quota");
  gen->add_option("--symbols", ga.symbols, "DATA symbols per packet");
  gen->add_option("--models", ga.models, "Channel models, e.g. abcdef");
  gen->add_option("--types", ga.types, "Impairment types (I, II, III)");
  gen->add_option("--mcs", ga.mcs);
  gen->add_flag("--full-scale", ga.full_scale, "Use the full-size composition");
  gen->add_option("-j,--threads", ga.threads);

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a DeepWiPHY model");
  tr->add_option("-c,--config", ta.config, "Training config JSON");
  tr->add_option("-d,--data", ta.data, "Dataset directory or shard")->required();
  tr->add_option("-o,--out", ta.out, "Model bundle directory")->required();
  tr->add_option("--warm-start", ta.warm_start, "Start from an existing bundle");
  tr->add_option("--validation", ta.validation, "Validation dataset");
  tr->add_option("--clusters", ta.clusters);
  tr->add_option("--units", ta.units);
  tr->add_option("--layers", ta.layers);
  tr->add_option("--mcs", ta.mcs);
  tr->add_option("--epochs", ta.epochs);
  tr->add_option("--lr", ta.lr);
  tr->add_option("--batch", ta.batch);
  tr->add_option("--seed", ta.seed);
  tr->add_option("--models", ta.models, "Only use records from these channel models");
  tr->add_option("--snr", ta.snr, "Only use records at this SNR");
  tr->add_option("--max-records", ta.max_records);
  tr->add_option("-j,--threads", ta.threads);
  tr->add_flag("--keep-checkpoints", ta.keep_all, "Keep one checkpoint per epoch");

  EvaluateArgs ea;
  auto* ev = app.add_subcommand("evaluate", "BER/PER sweep");
  ev->add_option("-c,--config", ea.config, "Evaluation spec JSON");
  ev->add_option("-o,--out", ea.out, "CSV output (JSON written alongside)");
  ev->add_option("-r,--receiver", ea.receivers, "ls, ls_smooth<N>, ls_td<N>, genie or deepwiphy:<dir>");
  ev->add_option("--mcs", ea.mcs);
  ev->add_option("--packets", ea.packets, "Packets per (model, type) setting");
  ev->add_option("--symbols", ea.symbols);
  ev->add_option("--seed", ea.seed);
  ev->add_option("--models", ea.models);
  ev->add_option("--types", ea.types, "I, II, III or none");
  ev->add_option("--snr", ea.snr, "SNR grid in dB (inf allowed)");
  ev->add_option("-j,--threads", ea.threads);
  ev->add_flag("--split", ea.split, "One row per (model, type)");

  CompareArgs ca;
  auto* cmp = app.add_subcommand("compare", "SNR gain of a candidate over a baseline");
  cmp->add_option("baseline", ca.baseline)->required();
  cmp->add_option("candidate", ca.candidate)->required();
  cmp->add_option("--metric", ca.metric);
  cmp->add_option("--levels", ca.levels);
  cmp->add_option("-o,--out", ca.out);

  std::string stats_data, stats_out;
  auto* st = app.add_subcommand("stats", "Record counts per (MCS, SNR, model, type)");
  st->add_option("-d,--data", stats_data)->required();
  st->add_option("-o,--out", stats_out);

  auto* self = app.add_subcommand("selftest", "Run the fast invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) return cmd_generate(ga);
    if (*tr) return cmd_train(ta);
    if (*ev) return cmd_evaluate(ea);
    if (*cmp) return cmd_compare(ca);
    if (*st) return cmd_stats(stats_data, stats_out);
    if (*self) return cmd_selftest();
  } catch (const dwp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const dwp::ArgumentError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
