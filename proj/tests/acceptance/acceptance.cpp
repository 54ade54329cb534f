// Acceptance suite: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dwp/dataset.hpp"
#include "dwp/deepwiphy.hpp"
#include "dwp/dsp.hpp"
#include "dwp/error.hpp"
#include "dwp/fec.hpp"
#include "dwp/harness.hpp"
#include "dwp/impairments.hpp"
#include "dwp/link.hpp"
#include "dwp/nn.hpp"
#include "dwp/rng.hpp"
#include "dwp/rx_conventional.hpp"

namespace fs = std::filesystem;
using namespace dwp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path work;
  std::string cli;
  int threads = 1;
  bool reuse = false;  // keep generated datasets between runs
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path fresh(const fs::path& p) {
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const phy::TonePlan& plan() { return phy::TonePlan::he20(); }

cplx backoff(int k) {
  return std::polar(1.0, -2.0 * kPi * k * static_cast<double>(phy::kTimingBackoff) / 256.0);
}

// ---------------------------------------------------------------------------

Outcome loopback(const Context& ctx) {
  std::ostringstream d;
  bool ok = true;
  for (int mcs : {7, 8, 10}) {
    harness::EvalSpec spec;
    spec.mcs = mcs;
    spec.snr_db = {kInf};
    spec.models = "0";
    spec.types = {std::nullopt};
    spec.packets_per_point = 100;
    spec.n_symbols = 16;
    spec.threads = ctx.threads;
    const auto res = harness::evaluate(harness::conventional_receiver(rx::ReceiverConfig{}), spec);
    const auto& r = res.rows.at(0);
    ok &= r.bit_errors == 0 && r.packet_errors == 0 && r.packets == 100;
    d << "MCS" << mcs << " ber=" << r.ber() << " per=" << r.per() << " (" << r.packets << " pkts) ";
  }
  return {ok, d.str()};
}

Outcome estimator_recovery(const Context&) {
  link::LinkConfig cfg;
  cfg.model = '0';
  cfg.n_symbols = 16;
  const auto clean = link::simulate_packet(cfg, 31, 1);
  const auto est = rx::ls_channel_estimate(rx::demodulate_heltf(clean.rx.samples, plan()), plan());

  auto rotated = clean.rx.samples;
  for (std::size_t i = phy::FrameLayout::data_start; i < rotated.size(); ++i) rotated[i] *= std::polar(1.0, -0.10);
  double worst_cpe = 0.0;
  rx::CpeSroEstimate sc;
  for (std::size_t m = 0; m < 16; ++m) {
    rx::estimate_cpe_sro(rx::demodulate_data(rotated, m, plan()), est, phy::pilot_sequence(m), m, sc, plan());
    worst_cpe = std::max(worst_cpe, std::abs(sc.omega_hat - 0.10));
  }

  const auto sro = impair::apply_sro(clean.rx.samples, 20.0).samples;
  const auto est2 = rx::ls_channel_estimate(rx::demodulate_heltf(sro, plan()), plan());
  rx::CpeSroEstimate ss;
  for (std::size_t m = 0; m < 16; ++m) {
    rx::estimate_cpe_sro(rx::demodulate_data(sro, m, plan()), est2, phy::pilot_sequence(m), m, ss, plan());
  }
  const double ppm = ss.clock_ratio * 1e6;
  const double rel = std::abs(ppm - 20.0) / 20.0;
  const bool ok = worst_cpe <= 1e-3 && rel <= 0.01;
  return {ok, "cpe err=" + fmt("%.2e", worst_cpe) + " rad, sro=" + fmt("%.4f", ppm) + " ppm (rel err " +
                  fmt("%.2e", rel) + ")"};
}

Outcome mmse(const Context&) {
  const cplx c = rx::mmse_coefficient(0.5, 0.25);
  double worst = 0.0;
  SeededRng rng(33);
  for (int i = 0; i < 1000; ++i) {
    const cplx h = rng.complex_normal(1.0);
    const cplx zf = 1.0 / h;
    worst = std::max(worst, std::abs(rx::mmse_coefficient(h, 1e-12) - zf) / std::abs(zf));
  }
  const bool ok = c == cplx(1.0, 0.0) && worst <= 1e-9;
  return {ok, "C(0.5, 0.25)=" + fmt("%.17g", c.real()) + "+" + fmt("%.3g", c.imag()) + "j, worst ZF rel err=" +
                  fmt("%.2e", worst)};
}

Outcome ldpc(const Context&) {
  SeededRng rng(44);
  int bad_words = 0, clean_fail = 0, flips_fixed = 0, flips = 0;
  for (auto [num, den] : {std::pair{3, 4}, std::pair{5, 6}}) {
    const auto& code = fec::LdpcCode::get(num, den);
    for (int t = 0; t < 100; ++t) {
      fec::Bits info(static_cast<std::size_t>(code.k()));
      for (auto& b : info) b = rng.bit();
      const auto cw = fec::ldpc_encode(info, code);
      if (!code.is_codeword(cw)) ++bad_words;
      std::vector<double> llr(cw.size());
      for (std::size_t i = 0; i < cw.size(); ++i) llr[i] = cw[i] ? -8.0 : 8.0;
      const auto clean = fec::ldpc_decode_minsum(llr, code, 20);
      if (clean.info != info || !clean.converged) ++clean_fail;
      const auto pos = rng.below(cw.size());
      llr[pos] = -llr[pos];
      const auto fixed = fec::ldpc_decode_minsum(llr, code, 20);
      ++flips;
      if (fixed.codeword == cw && fixed.converged) ++flips_fixed;
    }
  }
  const bool ok = bad_words == 0 && clean_fail == 0 && flips_fixed == flips;
  return {ok, "invalid codewords=" + std::to_string(bad_words) + ", noiseless failures=" + std::to_string(clean_fail) +
                  ", single flips corrected " + std::to_string(flips_fixed) + "/" + std::to_string(flips)};
}

double gradient_check(int in, int layers, int units, int out, std::uint64_t seed, std::size_t spot) {
  SeededRng rng(seed);
  auto net = nn::DenseNet::mlp(in, layers, units, out);
  net.init_glorot(rng);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    for (Eigen::Index i = 0; i < net.layer(l).b.size(); ++i) net.layer(l).b(i) = rng.uniform(-0.5, 0.5);
  }
  nn::Matrix x(in, 3), t(out, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = rng.normal();
  const auto g = nn::backward_mse_batch(net, x, t).grads;
  auto loss = [&](const nn::DenseNet& n) { return nn::backward_mse_batch(n, x, t).loss; };

  double worst = 0.0;
  auto probe = [&](double& p, double analytic) {
    const double keep = p;
    const double h = 1e-5 * std::max(1.0, std::abs(keep));
    p = keep + h;
    const double up = loss(net);
    p = keep - h;
    const double dn = loss(net);
    p = keep;
    const double fd = (up - dn) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-7});
    worst = std::max(worst, std::abs(fd - analytic) / scale);
  };
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    auto& w = net.layer(l).w;
    auto& b = net.layer(l).b;
    const std::size_t nw = static_cast<std::size_t>(w.size());
    if (spot == 0 || nw <= spot) {
      for (Eigen::Index i = 0; i < w.size(); ++i) probe(w.data()[i], g.dw[l].data()[i]);
      for (Eigen::Index i = 0; i < b.size(); ++i) probe(b(i), g.db[l](i));
    } else {
      for (std::size_t s = 0; s < spot; ++s) {
        const auto i = static_cast<Eigen::Index>(rng.below(nw));
        probe(w.data()[i], g.dw[l].data()[i]);
        const auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(b.size())));
        probe(b(j), g.db[l](j));
      }
    }
  }
  return worst;
}

Outcome nn_gradients(const Context&) {
  std::ostringstream d;
  double worst = 0.0;
  for (int layers : {1, 2, 5}) {
    for (int units : {4, 600}) {
      const double e = gradient_check(7, layers, units, 5, 500 + static_cast<std::uint64_t>(layers * 1000 + units),
                                      units == 600 ? 40 : 0);
      worst = std::max(worst, e);
      d << "L" << layers << "/U" << units << "=" << fmt("%.1e", e) << " ";
    }
  }
  return {worst < 1e-4, "max rel err " + fmt("%.2e", worst) + " [" + d.str() + "]"};
}

std::vector<float> to_float(const std::vector<double>& v) { return {v.begin(), v.end()}; }

Outcome overfit(const Context&) {
  link::LinkConfig cfg;
  cfg.model = 'd';
  cfg.n_symbols = 512;
  cfg.impairments = impair::ImpairmentConfig::defaults(impair::ImpairmentType::I);
  const auto pkt = link::simulate_packet(cfg, 61, 1);

  dwphy::TrainingSet set;
  set.mcs = 7;
  const auto pf = dwphy::extract_packet_features(pkt.rx.samples);
  const auto slot = set.add_packet(to_float(pf.rx_lltf), to_float(pf.rx_heltf));
  std::vector<dwphy::FeatureVector> fvs;
  for (std::size_t m = 0; m < cfg.n_symbols; ++m) {
    auto fv = dwphy::extract_features(pf, pkt.rx.samples, m);
    set.add_symbol(slot, to_float(fv.tx_pilots), to_float(fv.rx_pilots), to_float(dwphy::to_real(fv.rx_data)),
                   to_float(dwphy::to_real(pkt.tx.tx_constellation[m])));
    fvs.push_back(set.feature(m));
  }
  std::vector<ComplexBuf> labels;
  for (std::size_t m = 0; m < cfg.n_symbols; ++m) labels.push_back(set.label(m));

  dwphy::ModelShape shape;
  shape.clusters = 13;
  shape.units = 32;
  shape.layers = 2;
  dwphy::DeepWiPhyModel model(shape, 62);

  std::vector<std::size_t> all(set.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto full = dwphy::make_batch(set, all);
  auto mse = [&] {
    const auto l = dwphy::evaluate_loss(model, full);
    double s = 0.0;
    for (double v : l) s += v;
    return s / static_cast<double>(l.size());
  };

  const auto& con = phy::Constellation::get(64);
  const std::size_t total = cfg.n_symbols * 234;
  auto symbol_errors = [&] {
    std::size_t n = 0;
    const auto pred = dwphy::predict_batch(model, fvs);
    for (std::size_t m = 0; m < pred.size(); ++m) {
      for (std::size_t i = 0; i < 234; ++i) n += con.nearest_label(pred[m][i]) != con.nearest_label(labels[m][i]);
    }
    return n;
  };

  SeededRng rng(63, 0, Stage::shuffle);
  const std::size_t batch = 64;
  int step = 0;
  double loss = mse();
  std::size_t sym_err = symbol_errors();
  while (step < 20000 && (loss >= 1e-3 || sym_err > 0)) {
    for (std::size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[rng.below(i)]);
    for (std::size_t s = 0; s + batch <= all.size() && step < 20000; s += batch, ++step) {
      const std::vector<std::size_t> idx(all.begin() + static_cast<std::ptrdiff_t>(s),
                                         all.begin() + static_cast<std::ptrdiff_t>(s + batch));
      dwphy::train_step(model, dwphy::make_batch(set, idx), 1e-3);
    }
    loss = mse();
    sym_err = symbol_errors();
  }
  const bool ok = loss < 1e-3 && sym_err == 0;
  return {ok, "mse=" + fmt("%.3e", loss) + " after " + std::to_string(step) + " steps, SER " + std::to_string(sym_err) +
                  "/" + std::to_string(total)};
}

Outcome smoothing(const Context&) {
  auto run = [](char model, double snr, std::size_t packets) {
    link::LinkConfig cfg;
    cfg.model = model;
    cfg.n_symbols = 1;
    cfg.snr_db = snr;
    double e1 = 0.0, e9 = 0.0;
    for (std::size_t p = 0; p < packets; ++p) {
      const auto pkt = link::simulate_packet(cfg, 71, p);
      const auto g = rx::demodulate_heltf(pkt.rx.samples, plan());
      const auto ls = rx::ls_channel_estimate(g, plan());
      const auto sm = rx::smooth_frequency(ls, 9, plan());
      for (std::size_t i = 0; i < plan().active.size(); ++i) {
        const int k = plan().active[i];
        const cplx h = pkt.genie.channel.at_tone(k) * backoff(k);
        e1 += std::norm(ls.h_hat[i] - h);
        e9 += std::norm(sm.h_hat[i] - h);
      }
    }
    return std::pair{e1, e9};
  };
  const auto [a1, a9] = run('a', 25.0, 1000);
  const auto [f1, f9] = run('f', 50.0, 1000);
  const double ratio = a1 / a9;
  const bool ok = ratio >= 3.0 && f9 > f1;
  return {ok, "model a @25 dB: LS/smooth9 MSE ratio " + fmt("%.2f", ratio) + "; model f @50 dB: smooth9/LS " +
                  fmt("%.2f", f9 / f1)};
}

Outcome baseline(const Context& ctx) {
  harness::EvalSpec spec;
  spec.mcs = 7;
  spec.snr_db = {25.0};
  spec.models = "a";
  spec.types = {impair::ImpairmentType::I};
  spec.packets_per_point = 200;
  spec.n_symbols = 16;
  spec.threads = ctx.threads;
  const auto res = harness::evaluate(harness::conventional_receiver(rx::ReceiverConfig{}), spec);
  const auto& r = res.rows.at(0);
  return {r.per() < 0.15, "PER " + fmt("%.3f", r.per()) + " +- " + fmt("%.3f", r.per_ci()) + ", pre-FEC BER " +
                              fmt("%.3e", r.ber()) + " over " + std::to_string(r.packets) + " packets"};
}

// --- DeepWiPHY runs ---------------------------------------------------------

struct DeskRun {
  std::size_t packets_per_setting = 334;  // ~200k symbols over 2 models x 3 types
  std::size_t symbols = 16;
  int epochs = 40;
  std::size_t batch = 256;
  double lr = 1e-3;
  std::size_t eval_packets = 300;
  double eval_snr = 27.0;
};

fs::path make_dataset(const Context& ctx, const std::string& name, const std::string& models, std::size_t packets,
                      std::size_t symbols) {
  data::DatasetSpec spec;
  spec.mcs = {7};
  spec.models = models;
  spec.packets_per_setting = packets;
  spec.symbols_per_packet = symbols;
  spec.seed = 9001;
  const fs::path dir = ctx.work / name;
  const fs::path marker = dir / "spec.json";
  const std::string want = spec.to_json().dump();
  if (ctx.reuse && fs::exists(marker)) {
    std::ifstream in(marker);
    const std::string have((std::istreambuf_iterator<char>(in)), {});
    if (have == want) return dir;
  }
  fresh(dir);
  data::GenerateOptions opts;
  opts.out_dir = dir;
  opts.threads = ctx.threads;
  const auto sum = data::generate(spec, opts);
  std::ofstream(marker) << want;
  std::cout << "  generated " << name << ": " << sum.records << " records\n" << std::flush;
  return dir;
}

std::shared_ptr<dwphy::DeepWiPhyModel> train_model(const Context& ctx, const dwphy::TrainingSet& set, int clusters,
                                                   std::uint64_t seed, const DeskRun& run, std::string* curve_note) {
  dwphy::ModelShape shape;
  shape.clusters = clusters;
  shape.units = 64;
  shape.layers = 3;
  auto model = std::make_shared<dwphy::DeepWiPhyModel>(shape, seed);
  dwphy::TrainConfig cfg;
  cfg.batch = run.batch;
  cfg.lr = run.lr;
  cfg.epochs = run.epochs;
  cfg.seed = seed;
  cfg.threads = ctx.threads;
  const auto t0 = std::chrono::steady_clock::now();
  cfg.on_epoch = [&](int e, const std::vector<double>& l) {
    double s = 0.0;
    for (double v : l) s += v;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "  M=" << clusters << " seed " << seed << " epoch " << e << " loss " << fmt("%.4e", s / static_cast<double>(l.size()))
              << " (" << fmt("%.0f", secs) << " s)\n"
              << std::flush;
  };
  const auto rep = dwphy::train(*model, set, cfg);
  if (curve_note) {
    std::vector<double> mean;
    for (const auto& e : rep.epoch_loss) {
      double s = 0.0;
      for (double v : e) s += v;
      mean.push_back(s / static_cast<double>(e.size()));
    }
    // Means over consecutive 10-epoch windows.
    std::vector<double> win;
    for (std::size_t i = 0; i + 10 <= mean.size(); i += 10) {
      double s = 0.0;
      for (std::size_t j = i; j < i + 10; ++j) s += mean[j];
      win.push_back(s / 10.0);
    }
    bool mono = true;
    for (std::size_t i = 1; i < win.size(); ++i) mono &= win[i] <= win[i - 1];
    *curve_note = std::string("windowed loss ") + (mono ? "non-increasing" : "NOT monotone");
  }
  return model;
}

double ber_of(const harness::EvalResult& res, const std::string& receiver) {
  for (const auto& r : res.rows) {
    if (r.receiver == receiver) return r.ber();
  }
  throw std::runtime_error("missing receiver " + receiver);
}

Outcome desk_win(const Context& ctx) {
  const DeskRun run;
  const auto dir = make_dataset(ctx, "desk_ab", "ab", run.packets_per_setting, run.symbols);
  const auto set = data::load_training_set(dir, {}, 7);
  std::cout << "  training set: " << set.size() << " symbols, " << set.packets() << " packets\n" << std::flush;

  std::vector<harness::Receiver> rxs = {harness::conventional_receiver(rx::ReceiverConfig{})};
  std::vector<std::string> notes;
  for (std::uint64_t seed : {1, 2, 3}) {
    std::string note;
    auto m = train_model(ctx, set, 13, seed, run, &note);
    m->save(ctx.work / ("desk_model_seed" + std::to_string(seed)));
    notes.push_back(note);
    rxs.push_back(harness::deepwiphy_receiver(m, "dwp_seed" + std::to_string(seed)));
  }
  harness::EvalSpec spec;
  spec.mcs = 7;
  spec.snr_db = {run.eval_snr};
  spec.models = "ab";
  spec.types = {impair::ImpairmentType::I, impair::ImpairmentType::II, impair::ImpairmentType::III};
  spec.packets_per_point = run.eval_packets;
  spec.n_symbols = run.symbols;
  spec.threads = ctx.threads;
  const auto res = harness::evaluate(rxs, spec);
  {
    std::ofstream(ctx.work / "desk_eval.csv") << res.to_csv();
  }
  const double ls = ber_of(res, rxs[0].name);
  std::vector<double> ratios;
  for (int s = 1; s <= 3; ++s) ratios.push_back(ber_of(res, "dwp_seed" + std::to_string(s)) / ls);
  auto sorted = ratios;
  std::sort(sorted.begin(), sorted.end());
  bool ok = sorted[1] <= 1.0;
  for (double r : ratios) ok &= r <= 1.10;
  std::ostringstream d;
  d << "LS BER " << fmt("%.3e", ls) << "; DeepWiPHY/LS ratios";
  for (double r : ratios) d << " " << fmt("%.3f", r);
  d << " (median " << fmt("%.3f", sorted[1]) << "); " << notes[0];
  return {ok, d.str()};
}

Outcome cluster_ordering(const Context& ctx) {
  const DeskRun run;
  // Same symbol budget as the a+b run, spread over all six models.
  const auto dir = make_dataset(ctx, "desk_af", "abcdef", run.packets_per_setting / 3, run.symbols);
  const auto set = data::load_training_set(dir, {}, 7);
  std::cout << "  training set: " << set.size() << " symbols\n" << std::flush;
  auto m13 = train_model(ctx, set, 13, 1, run, nullptr);
  auto m1 = train_model(ctx, set, 1, 1, run, nullptr);
  harness::EvalSpec spec;
  spec.mcs = 7;
  spec.snr_db = {run.eval_snr};
  spec.models = "abcdef";
  spec.types = {impair::ImpairmentType::I, impair::ImpairmentType::II, impair::ImpairmentType::III};
  spec.packets_per_point = run.eval_packets / 3;
  spec.n_symbols = run.symbols;
  spec.threads = ctx.threads;
  const auto res = harness::evaluate({harness::deepwiphy_receiver(m13, "m13"), harness::deepwiphy_receiver(m1, "m1"),
                                      harness::conventional_receiver(rx::ReceiverConfig{})},
                                     spec);
  {
    std::ofstream(ctx.work / "cluster_eval.csv") << res.to_csv();
  }
  const double b13 = ber_of(res, "m13"), b1 = ber_of(res, "m1");
  return {b13 <= b1, "BER M=13 " + fmt("%.3e", b13) + ", M=1 " + fmt("%.3e", b1) + ", LS " +
                         fmt("%.3e", ber_of(res, "ls"))};
}

// --- dataset integrity and determinism --------------------------------------

Outcome integrity(const Context& ctx) {
  data::DatasetSpec spec;
  spec.mcs = {7, 10};
  spec.models = "adf";
  spec.packets_per_setting = 8;
  spec.symbols_per_packet = 8;
  spec.seed = 1101;
  const auto dir = fresh(ctx.work / "integrity");
  data::GenerateOptions opts;
  opts.out_dir = dir;
  opts.threads = ctx.threads;
  data::generate(spec, opts);

  std::size_t replayed = 0, replay_fail = 0, invariant_fail = 0, shards = 0;
  std::string first_problem;
  auto problem = [&](const std::string& s) {
    ++invariant_fail;
    if (first_problem.empty()) first_problem = s;
  };
  for (const auto& shard : data::list_shards(dir)) {
    ++shards;
    data::ShardReader rd(shard);
    std::vector<data::SymbolRecord> recs;
    data::SymbolRecord r;
    while (rd.next(r)) recs.push_back(r);
    SeededRng pick(1102, shards);
    std::set<std::size_t> chosen;
    while (chosen.size() < std::min<std::size_t>(100, recs.size())) chosen.insert(pick.below(recs.size()));
    for (std::size_t i : chosen) {
      ++replayed;
      if (!data::replay_matches(recs[i], rd.header())) ++replay_fail;
    }
    const auto& con = phy::Constellation::get(phy::mcs_info(recs.front().mcs).order);
    for (const auto& rec : recs) {
      double h = 0.0, l = 0.0, d = 0.0;
      for (float v : rec.rx_heltf) h += static_cast<double>(v) * v;
      for (float v : rec.rx_lltf) l += static_cast<double>(v) * v;
      for (float v : rec.rx_data) d += static_cast<double>(v) * v;
      for (float v : rec.rx_pilots) d += static_cast<double>(v) * v;
      if (std::abs(h - 242.0) > 1e-3) problem("HE-LTF norm " + std::to_string(h));
      if (std::abs(l - 52.0) > 1e-3) problem("L-LTF norm " + std::to_string(l));
      if (std::abs(d - 242.0) > 1e-3) problem("DATA norm " + std::to_string(d));
      const auto ps = phy::pilot_sequence(rec.symbol_index);
      for (std::size_t i = 0; i < phy::kNumPilots; ++i) {
        if (rec.tx_pilots[i] != static_cast<float>(ps[i].real()) || rec.tx_pilots[i + 8] != static_cast<float>(ps[i].imag())) {
          problem("tx pilot mismatch");
        }
      }
      for (std::size_t i = 0; i < 234; ++i) {
        const cplx x(rec.label[i], rec.label[i + 234]);
        if (std::abs(x - con.point(con.nearest_label(x))) > 1e-6) problem("label off the constellation");
      }
      if (std::isinf(rec.snr_db) != (rec.noise_var == 0.0f)) problem("noise variance vs SNR");
      if (!(rec.rx_power > 0.0f)) problem("rx power");
    }
  }
  const bool ok = replay_fail == 0 && invariant_fail == 0 && replayed > 0;
  return {ok, std::to_string(replayed) + " records replayed over " + std::to_string(shards) + " shards, " +
                  std::to_string(replay_fail) + " mismatches, " + std::to_string(invariant_fail) +
                  " invariant violations" + (first_problem.empty() ? "" : " (" + first_problem + ")")};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

bool same_tree(const fs::path& a, const fs::path& b, const std::vector<std::string>& skip, std::string& why) {
  std::map<std::string, std::string> fa, fb;
  auto collect = [&](const fs::path& root, std::map<std::string, std::string>& out) {
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (!e.is_regular_file()) continue;
      const auto rel = fs::relative(e.path(), root).string();
      bool skipped = false;
      for (const auto& s : skip) skipped |= rel.find(s) != std::string::npos;
      if (!skipped) out[rel] = slurp(e.path());
    }
  };
  collect(a, fa);
  collect(b, fb);
  if (fa.size() != fb.size()) {
    why = "file count differs";
    return false;
  }
  for (const auto& [k, v] : fa) {
    auto it = fb.find(k);
    if (it == fb.end() || it->second != v) {
      why = k + " differs";
      return false;
    }
  }
  return !fa.empty();
}

int sh(const std::string& cmd) {
  const int rc = std::system((cmd + " 2>/dev/null").c_str());
  return rc;
}

Outcome determinism(const Context& ctx) {
  const auto root = fresh(ctx.work / "determinism");
  const std::string cli = ctx.cli;
  std::vector<std::string> failures;
  for (int run = 0; run < 2; ++run) {
    const auto r = root / ("run" + std::to_string(run));
    fs::create_directories(r);
    const std::string j = run == 0 ? "1" : "2";
    const std::string data = (r / "data").string();
    const std::string model = (r / "model").string();
    if (sh(cli + " generate -o " + data + " --models ab --types I III --packets 3 --symbols 4 --seed 5 -j " + j) != 0) {
      failures.push_back("generate failed");
    }
    if (sh(cli + " train -d " + data + " -o " + model +
           " --clusters 13 --units 8 --layers 1 --epochs 2 --batch 16 --lr 1e-3 --seed 3 -j " + j) != 0) {
      failures.push_back("train failed");
    }
    if (sh(cli + " evaluate -r ls -r genie -r deepwiphy:" + model +
           " --models ab --types I II --snr 25 30 --packets 3 --symbols 4 --seed 9 -j " + j + " -o " +
           (r / "eval.csv").string()) != 0) {
      failures.push_back("evaluate failed");
    }
  }
  std::string why;
  const bool shards = same_tree(root / "run0" / "data", root / "run1" / "data", {}, why);
  if (!shards) failures.push_back("shards: " + why);
  // Manifests record wall-clock timing and paths; weights are compared byte for byte.
  const bool weights = same_tree(root / "run0" / "model", root / "run1" / "model", {"manifest.json", "loss.json"}, why);
  if (!weights) failures.push_back("weights: " + why);
  const bool csv = slurp(root / "run0" / "eval.csv") == slurp(root / "run1" / "eval.csv") &&
                   !slurp(root / "run0" / "eval.csv").empty();
  if (!csv) failures.push_back("evaluation CSV differs");
  std::string d = "shards " + std::string(shards ? "identical" : "DIFFER") + ", weights " +
                  (weights ? "identical" : "DIFFER") + ", CSV " + (csv ? "identical" : "DIFFER") +
                  " across 1 and 2 threads";
  for (const auto& f : failures) d += "; " + f;
  return {failures.empty(), d};
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome(const Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Acceptance criteria");
  std::string only;
  Context ctx;
  std::string work = "acceptance_work";
  ctx.cli = DWP_CLI_PATH;
  app.add_option("--only", only, "Comma-separated criterion numbers");
  app.add_option("--work", work, "Scratch directory");
  app.add_option("-j,--threads", ctx.threads);
  app.add_flag("--reuse", ctx.reuse, "Reuse generated training sets when their spec matches");
  app.add_option("--cli", ctx.cli, "Path to the dwp executable");
  CLI11_PARSE(app, argc, argv);
  ctx.work = fs::absolute(work);
  fs::create_directories(ctx.work);

  const std::vector<Criterion> all = {
      {1, "loopback zero-error", loopback},
      {2, "CPE/SRO estimator recovery", estimator_recovery},
      {3, "MMSE correctness", mmse},
      {4, "LDPC validity", ldpc},
      {5, "NN gradient check", nn_gradients},
      {6, "overfit check", overfit},
      {7, "frequency-smoothing dichotomy", smoothing},
      {8, "conventional baseline sanity", baseline},
      {9, "desk-scale DeepWiPHY vs LS", desk_win},
      {10, "M=13 vs M=1 ordering", cluster_ordering},
      {11, "dataset integrity", integrity},
      {12, "determinism", determinism},
  };
  std::set<int> selected;
  if (!only.empty()) {
    std::stringstream ss(only);
    std::string tok;
    while (std::getline(ss, tok, ',')) selected.insert(std::stoi(tok));
  }

  int failed = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.title << "): " << o.detail << " ["
              << fmt("%.1f", secs) << " s]\n"
              << std::flush;
  }
  return failed == 0 ? 0 : 1;
}
