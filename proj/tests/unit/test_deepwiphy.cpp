#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dwp/deepwiphy.hpp"
#include "dwp/dsp.hpp"
#include "dwp/error.hpp"
#include "dwp/link.hpp"

using namespace dwp;
using namespace dwp::dwphy;

namespace {

link::LinkPacket packet(char model, double snr, std::uint64_t id, std::size_t n_sym = 4) {
  link::LinkConfig cfg;
  cfg.model = model;
  cfg.snr_db = snr;
  cfg.n_symbols = n_sym;
  return link::simulate_packet(cfg, 21, id);
}

std::vector<float> to_float(const std::vector<double>& v) { return {v.begin(), v.end()}; }

TrainingSet small_set(std::size_t packets, std::size_t n_sym) {
  TrainingSet set;
  set.mcs = 7;
  for (std::size_t p = 0; p < packets; ++p) {
    const auto pkt = packet('b', 30.0, p, n_sym);
    const auto pf = extract_packet_features(pkt.rx.samples);
    const auto slot = set.add_packet(to_float(pf.rx_lltf), to_float(pf.rx_heltf));
    for (std::size_t m = 0; m < n_sym; ++m) {
      const auto fv = extract_features(pf, pkt.rx.samples, m);
      set.add_symbol(slot, to_float(fv.tx_pilots), to_float(fv.rx_pilots), to_float(to_real(fv.rx_data)),
                     to_float(to_real(pkt.tx.tx_constellation[m])));
    }
  }
  return set;
}

// Zero weights everywhere; output biases give constant coefficients.
void set_constant(DeepWiPhyModel& model, cplx eq, cplx cs) {
  const int s = model.S();
  for (auto& sm : model.subs()) {
    for (auto* net : {&sm.eq, &sm.cpesro}) {
      for (std::size_t l = 0; l < net->num_layers(); ++l) {
        net->layer(l).w.setZero();
        net->layer(l).b.setZero();
      }
      const cplx v = net == &sm.eq ? eq : cs;
      auto& b = net->layer(net->num_layers() - 1).b;
      b.head(s).setConstant(v.real());
      b.tail(s).setConstant(v.imag());
    }
  }
}

ModelShape tiny_shape(int clusters = 13) {
  ModelShape s;
  s.clusters = clusters;
  s.units = 8;
  s.layers = 1;
  return s;
}

}  // namespace

TEST_CASE("feature extraction") {
  const auto pkt = packet('d', 30.0, 1);
  const auto fv = extract_features(pkt.rx, 2);
  REQUIRE(fv.rx_lltf.size() == 104);
  REQUIRE(fv.rx_heltf.size() == 484);
  REQUIRE(fv.rx_pilots.size() == 16);
  REQUIRE(fv.tx_pilots.size() == 16);
  REQUIRE(fv.rx_data.size() == 234);
  double h = 0.0, l = 0.0;
  for (double v : fv.rx_heltf) h += v * v;
  for (double v : fv.rx_lltf) l += v * v;
  CHECK(h == doctest::Approx(242.0).epsilon(1e-12));
  CHECK(l == doctest::Approx(52.0).epsilon(1e-12));
  double d = dsp::squared_norm(fv.rx_data);
  for (int i = 0; i < 8; ++i) d += fv.rx_pilots[static_cast<std::size_t>(i)] * fv.rx_pilots[static_cast<std::size_t>(i)] +
                                   fv.rx_pilots[static_cast<std::size_t>(i + 8)] * fv.rx_pilots[static_cast<std::size_t>(i + 8)];
  CHECK(d == doctest::Approx(242.0).epsilon(1e-12));

  const auto ps = phy::pilot_sequence(2);
  for (int i = 0; i < 8; ++i) {
    CHECK(fv.tx_pilots[static_cast<std::size_t>(i)] == ps[static_cast<std::size_t>(i)].real());
    CHECK(fv.tx_pilots[static_cast<std::size_t>(i + 8)] == ps[static_cast<std::size_t>(i)].imag());
  }

  auto louder = pkt.rx;
  for (auto& v : louder.samples) v *= 2.0;  // +6 dB
  const auto fl = extract_features(louder, 2);
  for (std::size_t i = 0; i < 484; ++i) CHECK(std::abs(fl.rx_heltf[i] - fv.rx_heltf[i]) < 1e-9);
  for (std::size_t i = 0; i < 104; ++i) CHECK(std::abs(fl.rx_lltf[i] - fv.rx_lltf[i]) < 1e-9);
  for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(fl.rx_pilots[i] - fv.rx_pilots[i]) < 1e-9);
  for (std::size_t i = 0; i < 234; ++i) CHECK(std::abs(fl.rx_data[i] - fv.rx_data[i]) < 1e-9);
  CHECK(fl.sigma2_norm == doctest::Approx(fv.sigma2_norm).epsilon(1e-9));

  CHECK_THROWS_AS(extract_features(pkt.rx, 4), ArgumentError);

  double in[kCpeSroInput];
  fv.cpesro_input(in);
  CHECK(in[0] == fv.rx_lltf[0]);
  CHECK(in[kLltfWidth] == fv.rx_heltf[0]);
  CHECK(in[kEqInput] == fv.tx_pilots[0]);
  CHECK(in[kEqInput + kPilotWidth] == fv.rx_pilots[0]);
}

TEST_CASE("model shapes") {
  DeepWiPhyModel m(ModelShape{}, 1);
  CHECK(m.M() == 13);
  CHECK(m.S() == 18);
  for (const auto& sm : m.subs()) {
    CHECK(sm.eq.input_width() == 588);
    CHECK(sm.cpesro.input_width() == 620);
    CHECK(sm.eq.output_width() == 36);
    CHECK(sm.cpesro.output_width() == 36);
  }
  ModelShape bad;
  bad.clusters = 5;
  CHECK_THROWS_AS(DeepWiPhyModel(bad, 1), ConfigError);
}

TEST_CASE("prediction is the product of both coefficients and the tone") {
  const auto pkt = packet('c', 25.0, 2);
  const auto fv = extract_features(pkt.rx, 1);
  DeepWiPhyModel m(tiny_shape(), 3);
  set_constant(m, 1.0, 1.0);
  const auto same = predict_symbol(m, fv);
  for (std::size_t i = 0; i < 234; ++i) CHECK(std::abs(same[i] - fv.rx_data[i]) < 1e-15);

  set_constant(m, cplx(0.0, 0.0), cplx(0.0, 0.0));
  for (auto v : predict_symbol(m, fv)) CHECK(v == cplx(0.0, 0.0));

  // Genie coefficients on a flat h = 0.5 link.
  FeatureVector g = fv;
  const auto& tx = pkt.tx.tx_constellation[1];
  for (std::size_t i = 0; i < 234; ++i) g.rx_data[i] = 0.5 * tx[i];
  set_constant(m, 2.0, 1.0);
  const auto rec = predict_symbol(m, g);
  for (std::size_t i = 0; i < 234; ++i) CHECK(std::abs(rec[i] - tx[i]) < 1e-9);

  // Random model: prediction equals per-cluster products stitched in tone order.
  DeepWiPhyModel r(tiny_shape(), 4);
  const auto p = predict_symbol(r, fv);
  std::vector<double> e(kEqInput), c(kCpeSroInput);
  fv.eq_input(e.data());
  fv.cpesro_input(c.data());
  const nn::Vector ev = Eigen::Map<nn::Vector>(e.data(), kEqInput);
  const nn::Vector cv = Eigen::Map<nn::Vector>(c.data(), kCpeSroInput);
  for (int cl = 0; cl < r.M(); ++cl) {
    const auto a = r.subs()[static_cast<std::size_t>(cl)].eq.forward(ev);
    const auto b = r.subs()[static_cast<std::size_t>(cl)].cpesro.forward(cv);
    for (int t = 0; t < r.S(); ++t) {
      const cplx ca(a(t), a(t + r.S())), cb(b(t), b(t + r.S()));
      const std::size_t tone = static_cast<std::size_t>(cl * r.S() + t);
      CHECK(std::abs(p[tone] - ca * cb * fv.rx_data[tone]) < 1e-12);
    }
  }

  // Zero hidden weights: output is bias product times y, finite.
  DeepWiPhyModel z(tiny_shape(1), 5);
  for (auto* net : {&z.subs()[0].eq, &z.subs()[0].cpesro}) {
    for (std::size_t l = 0; l < net->num_layers(); ++l) net->layer(l).w.setZero();
  }
  const auto pz = predict_symbol(z, fv);
  const auto& be = z.subs()[0].eq.layer(z.subs()[0].eq.num_layers() - 1).b;
  const auto& bc = z.subs()[0].cpesro.layer(z.subs()[0].cpesro.num_layers() - 1).b;
  for (std::size_t t = 0; t < 234; ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    const cplx k = cplx(be(i), be(i + 234)) * cplx(bc(i), bc(i + 234));
    CHECK(std::isfinite(std::abs(pz[t])));
    CHECK(std::abs(pz[t] - k * fv.rx_data[t]) < 1e-12);
  }
}

TEST_CASE("product-rule gradient for a scalar cluster") {
  // S = 1: each network emits one complex coefficient.
  ModelShape shape;
  shape.clusters = 234;
  shape.units = 2;
  shape.layers = 1;
  DeepWiPhyModel m(shape, 6);
  const auto pkt = packet('b', 20.0, 3);
  const auto fv = extract_features(pkt.rx, 0);
  const auto batch = make_batch(std::vector<FeatureVector>{fv}, std::vector<ComplexBuf>{pkt.tx.tx_constellation[0]});
  const int c = 17;
  const auto& sm = m.subs()[c];
  const auto g = cluster_gradients(sm, batch, c, 1);

  std::vector<double> ein(kEqInput), cin(kCpeSroInput);
  fv.eq_input(ein.data());
  fv.cpesro_input(cin.data());
  const auto ao = sm.eq.forward(Eigen::Map<nn::Vector>(ein.data(), kEqInput));
  const auto bo = sm.cpesro.forward(Eigen::Map<nn::Vector>(cin.data(), kCpeSroInput));
  const cplx a(ao(0), ao(1)), b(bo(0), bo(1));
  const cplx y = fv.rx_data[c];
  const cplx x = pkt.tx.tx_constellation[0][c];
  const cplx e = a * b * y - x;
  CHECK(g.loss == doctest::Approx(std::norm(e)).epsilon(1e-12));
  // L = |a b y - x|^2: dL/da_re = 2 Re(conj(e) b y), dL/da_im = 2 Re(conj(e) j b y).
  const double da_re = 2.0 * (std::conj(e) * b * y).real();
  const double da_im = 2.0 * (std::conj(e) * cplx(0, 1) * b * y).real();
  const double db_re = 2.0 * (std::conj(e) * a * y).real();
  const double db_im = 2.0 * (std::conj(e) * cplx(0, 1) * a * y).real();
  const std::size_t last_e = sm.eq.num_layers() - 1;
  const std::size_t last_c = sm.cpesro.num_layers() - 1;
  CHECK(std::abs(g.eq.db[last_e](0) - da_re) < 1e-6);
  CHECK(std::abs(g.eq.db[last_e](1) - da_im) < 1e-6);
  CHECK(std::abs(g.cpesro.db[last_c](0) - db_re) < 1e-6);
  CHECK(std::abs(g.cpesro.db[last_c](1) - db_im) < 1e-6);

  // Central differences through a hidden weight of each network.
  for (auto which : {0, 1}) {
    SubModel probe = sm;
    auto& net = which == 0 ? probe.eq : probe.cpesro;
    double& p = net.layer(0).w(1, 5);
    const double keep = p, h = 1e-6;
    p = keep + h;
    const double up = cluster_gradients(probe, batch, c, 1).loss;
    p = keep - h;
    const double dn = cluster_gradients(probe, batch, c, 1).loss;
    const double fd = (up - dn) / (2 * h);
    const double an = which == 0 ? g.eq.dw[0](1, 5) : g.cpesro.dw[0](1, 5);
    CHECK(std::abs(fd - an) <= 1e-6 + 1e-5 * std::abs(an));
  }
}

TEST_CASE("train_step keeps clusters independent") {
  DeepWiPhyModel m(tiny_shape(), 7);
  std::vector<FeatureVector> fvs;
  for (std::size_t s = 0; s < 4; ++s) fvs.push_back(extract_features(packet('a', 30.0, 4).rx, s));
  auto labels = predict_batch(m, fvs);
  auto batch = make_batch(fvs, labels);
  std::vector<std::uint64_t> before;
  for (const auto& sm : m.subs()) before.push_back(sm.eq.parameter_hash() ^ (sm.cpesro.parameter_hash() << 1));
  const auto l0 = train_step(m, batch, 1e-3);
  for (double v : l0) CHECK(v < 1e-25);
  for (int c = 0; c < m.M(); ++c) {
    const auto& sm = m.subs()[static_cast<std::size_t>(c)];
    CHECK((sm.eq.parameter_hash() ^ (sm.cpesro.parameter_hash() << 1)) == before[static_cast<std::size_t>(c)]);
  }

  // Perturb only cluster 3's labels.
  for (auto& l : labels) {
    for (int t = 3 * 18; t < 4 * 18; ++t) l[static_cast<std::size_t>(t)] += cplx(0.1, -0.2);
  }
  batch = make_batch(fvs, labels);
  const auto l1 = train_step(m, batch, 1e-3, 4);
  for (int c = 0; c < m.M(); ++c) {
    const auto& sm = m.subs()[static_cast<std::size_t>(c)];
    const bool changed = (sm.eq.parameter_hash() ^ (sm.cpesro.parameter_hash() << 1)) != before[static_cast<std::size_t>(c)];
    CHECK(changed == (c == 3));
    CHECK((l1[static_cast<std::size_t>(c)] > 1e-6) == (c == 3));
  }
}

TEST_CASE("M = 1 runs the same code path with S = 234") {
  DeepWiPhyModel m(tiny_shape(1), 8);
  CHECK(m.S() == 234);
  const auto fv = extract_features(packet('e', 30.0, 5).rx, 0);
  const auto p = predict_symbol(m, fv);
  std::vector<double> e(kEqInput), c(kCpeSroInput);
  fv.eq_input(e.data());
  fv.cpesro_input(c.data());
  const auto a = m.subs()[0].eq.forward(Eigen::Map<nn::Vector>(e.data(), kEqInput));
  const auto b = m.subs()[0].cpesro.forward(Eigen::Map<nn::Vector>(c.data(), kCpeSroInput));
  for (int t = 0; t < 234; ++t) {
    CHECK(std::abs(p[static_cast<std::size_t>(t)] - cplx(a(t), a(t + 234)) * cplx(b(t), b(t + 234)) * fv.rx_data[static_cast<std::size_t>(t)]) < 1e-12);
  }
}

TEST_CASE("training loop") {
  const auto set = small_set(4, 8);
  CHECK(set.size() == 32);
  CHECK(set.packets() == 4);

  DeepWiPhyModel a(tiny_shape(), 9), b(tiny_shape(), 9), untouched(tiny_shape(), 9);
  TrainConfig cfg;
  cfg.batch = 8;
  cfg.lr = 1e-3;
  cfg.epochs = 0;
  train(a, set, cfg);
  for (int c = 0; c < a.M(); ++c) CHECK(a.subs()[static_cast<std::size_t>(c)].eq.parameter_hash() == untouched.subs()[static_cast<std::size_t>(c)].eq.parameter_hash());

  cfg.epochs = 3;
  const auto ra = train(a, set, cfg);
  const auto rb = train(b, set, cfg, &set);
  CHECK(ra.epoch_loss.size() == 3);
  CHECK(rb.validation_loss.size() == 3);
  for (int c = 0; c < a.M(); ++c) {
    CHECK(a.subs()[static_cast<std::size_t>(c)].eq.parameter_hash() == b.subs()[static_cast<std::size_t>(c)].eq.parameter_hash());
    CHECK(a.subs()[static_cast<std::size_t>(c)].cpesro.parameter_hash() == b.subs()[static_cast<std::size_t>(c)].cpesro.parameter_hash());
  }
  double first = 0, last = 0;
  for (double v : ra.epoch_loss.front()) first += v;
  for (double v : ra.epoch_loss.back()) last += v;
  CHECK(last < first);

  ModelShape other = tiny_shape();
  other.mcs = 8;
  DeepWiPhyModel wrong(other, 1);
  CHECK_THROWS_AS(train(wrong, set, cfg), ConfigError);

  // Checkpoints round-trip and allow a warm start with a new learning rate.
  const auto dir = std::filesystem::temp_directory_path() / "dwp_train_test";
  std::filesystem::remove_all(dir);
  cfg.epochs = 1;
  cfg.checkpoint_dir = dir;
  train(a, set, cfg);
  auto warm = DeepWiPhyModel::load(dir / "last");
  for (int c = 0; c < a.M(); ++c) CHECK(warm.subs()[static_cast<std::size_t>(c)].eq.parameter_hash() == a.subs()[static_cast<std::size_t>(c)].eq.parameter_hash());
  CHECK(warm.manifest.contains("epoch"));
  cfg.lr = 1e-6;
  cfg.checkpoint_dir.clear();
  train(warm, set, cfg);
  CHECK(warm.subs()[0].eq.all_finite());
  std::filesystem::remove_all(dir);

  const auto fv = set.feature(5);
  CHECK(fv.rx_data.size() == 234);
  CHECK(set.label(5).size() == 234);
}

TEST_CASE("receiver wrapper") {
  DeepWiPhyModel m(tiny_shape(), 10);
  set_constant(m, 1.0, 1.0);
  const auto pkt = packet('a', 30.0, 6);
  const auto r = run_deepwiphy(pkt.rx, m);
  REQUIRE(r.points.size() == 4);
  CHECK(r.rho[0].size() == 234);
  for (double v : r.rho[0]) CHECK(v > 0.0);
  auto wrong = pkt.rx;
  wrong.mcs = 8;
  CHECK_THROWS_AS(run_deepwiphy(wrong, m), ConfigError);
}
