#include "dwp/deepwiphy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "dwp/error.hpp"

namespace dwp::dwphy {

using phy::TonePlan;

std::vector<double> to_real(std::span<const cplx> z) {
  std::vector<double> out(2 * z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = z[i].real();
    out[i + z.size()] = z[i].imag();
  }
  return out;
}

void FeatureVector::eq_input(double* out) const {
  std::copy(rx_lltf.begin(), rx_lltf.end(), out);
  std::copy(rx_heltf.begin(), rx_heltf.end(), out + kLltfWidth);
}

void FeatureVector::cpesro_input(double* out) const {
  eq_input(out);
  std::copy(tx_pilots.begin(), tx_pilots.end(), out + kEqInput);
  std::copy(rx_pilots.begin(), rx_pilots.end(), out + kEqInput + kPilotWidth);
}

PacketFeatures extract_packet_features(std::span<const cplx> capture) {
  const auto& plan = TonePlan::he20();
  const auto lltf = rx::demodulate_lltf(capture);
  PacketFeatures pf;
  pf.sigma2 = rx::estimate_noise_variance(lltf);
  ComplexBuf avg;
  avg.reserve(phy::kLegacyActive);
  for (int k = -26; k <= 26; ++k) {
    if (k != 0) avg.push_back(0.5 * (lltf.rep1.at(k) + lltf.rep2.at(k)));
  }
  pf.rx_lltf = to_real(dsp::normalize_field(avg));
  const auto heltf = rx::demodulate_heltf(capture, plan).gather(plan.active);
  pf.rx_heltf = to_real(dsp::normalize_field(heltf));
  return pf;
}

FeatureVector extract_features(const PacketFeatures& pf, std::span<const cplx> capture, std::size_t m) {
  const auto& plan = TonePlan::he20();
  const std::size_t n_sym = (capture.size() - phy::FrameLayout::data_start) / phy::kSymbolLen;
  if (capture.size() < phy::FrameLayout::data_start || m >= n_sym) {
    throw ArgumentError("extract_features: symbol index " + std::to_string(m) + " out of range");
  }
  FeatureVector fv;
  fv.symbol_index = m;
  fv.rx_lltf = pf.rx_lltf;
  fv.rx_heltf = pf.rx_heltf;
  const auto grid = rx::demodulate_data(capture, m, plan);
  const ComplexBuf active = grid.gather(plan.active);
  const double energy = dsp::squared_norm(active);
  const ComplexBuf norm = dsp::normalize_field(active);
  ComplexBuf pilots;
  fv.rx_data.reserve(plan.data.size());
  for (std::size_t i = 0; i < plan.active.size(); ++i) {
    if (plan.role(plan.active[i]) == phy::ToneRole::pilot) {
      pilots.push_back(norm[i]);
    } else {
      fv.rx_data.push_back(norm[i]);
    }
  }
  fv.rx_pilots = to_real(pilots);
  const auto tx = phy::pilot_sequence(m);
  fv.tx_pilots = to_real(tx);
  fv.sigma2_norm = pf.sigma2 * static_cast<double>(plan.active.size()) / energy;
  fv.rx_power = energy / static_cast<double>(plan.active.size());
  return fv;
}

FeatureVector extract_features(const link::RxCapture& capture, std::size_t m) {
  if (m >= capture.n_symbols) throw ArgumentError("extract_features: symbol index out of range");
  return extract_features(extract_packet_features(capture.samples), capture.samples, m);
}

// ---- model ------------------------------------------------------------------

nlohmann::json ModelShape::to_json() const {
  return {{"M", clusters}, {"S", tones_per_cluster()}, {"U", units}, {"L", layers}, {"mcs", mcs}};
}

namespace {

void check_shape(const ModelShape& s) {
  if (s.clusters <= 0 || kNumDataTones % s.clusters != 0) {
    throw ConfigError("cluster count M must divide 234, got " + std::to_string(s.clusters));
  }
  if (s.units <= 0 || s.layers < 0) throw ConfigError("units must be positive and layers non-negative");
}

void unit_real_bias(nn::DenseNet& net, int s) {
  auto& out = net.layer(net.num_layers() - 1);
  for (int i = 0; i < s; ++i) out.b(i) = 1.0;
}

}  // namespace

DeepWiPhyModel::DeepWiPhyModel(const ModelShape& shape, std::uint64_t seed) : shape_(shape) {
  check_shape(shape);
  const int s = shape.tones_per_cluster();
  for (int c = 0; c < shape.clusters; ++c) {
    SubModel sm{nn::DenseNet::mlp(kEqInput, shape.layers, shape.units, 2 * s),
                nn::DenseNet::mlp(kCpeSroInput, shape.layers, shape.units, 2 * s)};
    SeededRng re(seed, 2 * static_cast<std::uint64_t>(c), Stage::init);
    SeededRng rc(seed, 2 * static_cast<std::uint64_t>(c) + 1, Stage::init);
    sm.eq.init_glorot(re);
    sm.cpesro.init_glorot(rc);
    unit_real_bias(sm.eq, s);
    unit_real_bias(sm.cpesro, s);
    subs_.push_back(std::move(sm));
  }
}

namespace {
std::string net_file(const char* kind, int c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%02d.dwnn", kind, c);
  return buf;
}
}  // namespace

void DeepWiPhyModel::save(const std::filesystem::path& dir, const nlohmann::json& extra) const {
  std::filesystem::create_directories(dir);
  nlohmann::json m = manifest;
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  m["format"] = "deepwiphy-bundle";
  m["format_version"] = 1;
  m["shape"] = shape_.to_json();
  m["files"] = nlohmann::json::array();
  for (int c = 0; c < shape_.clusters; ++c) {
    const nlohmann::json meta = {{"cluster", c}, {"shape", shape_.to_json()}};
    auto eq_meta = meta;
    eq_meta["role"] = "equalizer";
    auto cs_meta = meta;
    cs_meta["role"] = "cpesro";
    nn::save_with_sidecar(subs_[static_cast<std::size_t>(c)].eq, dir / net_file("eq", c), eq_meta);
    nn::save_with_sidecar(subs_[static_cast<std::size_t>(c)].cpesro, dir / net_file("cpesro", c), cs_meta);
    m["files"].push_back({net_file("eq", c), net_file("cpesro", c)});
  }
  std::ofstream out(dir / "manifest.json");
  out << m.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
}

DeepWiPhyModel DeepWiPhyModel::load(const std::filesystem::path& dir) {
  const auto mpath = dir / "manifest.json";
  std::ifstream in(mpath);
  if (!in) throw ConfigError("model bundle not found: " + mpath.string());
  nlohmann::json m;
  try {
    in >> m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(mpath.string() + ": " + e.what());
  }
  DeepWiPhyModel model;
  try {
    const auto& s = m.at("shape");
    model.shape_.clusters = s.at("M").get<int>();
    model.shape_.units = s.at("U").get<int>();
    model.shape_.layers = s.at("L").get<int>();
    model.shape_.mcs = s.at("mcs").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(mpath.string() + ": " + e.what());
  }
  check_shape(model.shape_);
  const int s2 = 2 * model.S();
  for (int c = 0; c < model.M(); ++c) {
    SubModel sm{nn::DenseNet::load(dir / net_file("eq", c)), nn::DenseNet::load(dir / net_file("cpesro", c))};
    if (sm.eq.input_width() != kEqInput || sm.eq.output_width() != s2 || sm.cpesro.input_width() != kCpeSroInput ||
        sm.cpesro.output_width() != s2) {
      throw FormatError(dir.string() + ": network widths do not match the manifest");
    }
    model.subs_.push_back(std::move(sm));
  }
  m.erase("files");
  m.erase("shape");
  model.manifest = std::move(m);
  return model;
}

// ---- batches ----------------------------------------------------------------

std::uint32_t TrainingSet::add_packet(std::span<const float> lltf, std::span<const float> heltf) {
  if (lltf.size() != kLltfWidth || heltf.size() != kHeltfWidth) throw ArgumentError("add_packet: width mismatch");
  const auto slot = static_cast<std::uint32_t>(packets());
  packet_inputs.insert(packet_inputs.end(), lltf.begin(), lltf.end());
  packet_inputs.insert(packet_inputs.end(), heltf.begin(), heltf.end());
  return slot;
}

void TrainingSet::add_symbol(std::uint32_t packet, std::span<const float> tx_pilots, std::span<const float> rx_pilots,
                             std::span<const float> data, std::span<const float> label) {
  if (packet >= packets() || tx_pilots.size() != kPilotWidth || rx_pilots.size() != kPilotWidth ||
      data.size() != kDataWidth || label.size() != kDataWidth) {
    throw ArgumentError("add_symbol: width mismatch");
  }
  packet_of.push_back(packet);
  pilot_inputs.insert(pilot_inputs.end(), tx_pilots.begin(), tx_pilots.end());
  pilot_inputs.insert(pilot_inputs.end(), rx_pilots.begin(), rx_pilots.end());
  rx_data.insert(rx_data.end(), data.begin(), data.end());
  labels.insert(labels.end(), label.begin(), label.end());
}

namespace {
ComplexBuf complex_from(const float* p, std::size_t n) {
  ComplexBuf z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = cplx(p[i], p[i + n]);
  return z;
}
}  // namespace

FeatureVector TrainingSet::feature(std::size_t i) const {
  FeatureVector fv;
  const float* pk = &packet_inputs[static_cast<std::size_t>(packet_of[i]) * kEqInput];
  fv.rx_lltf.assign(pk, pk + kLltfWidth);
  fv.rx_heltf.assign(pk + kLltfWidth, pk + kEqInput);
  const float* pi = &pilot_inputs[i * 2 * kPilotWidth];
  fv.tx_pilots.assign(pi, pi + kPilotWidth);
  fv.rx_pilots.assign(pi + kPilotWidth, pi + 2 * kPilotWidth);
  fv.rx_data = complex_from(&rx_data[i * kDataWidth], kNumDataTones);
  return fv;
}

ComplexBuf TrainingSet::label(std::size_t i) const { return complex_from(&labels[i * kDataWidth], kNumDataTones); }

Batch make_batch(const TrainingSet& set, std::span<const std::size_t> idx) {
  const Eigen::Index b = static_cast<Eigen::Index>(idx.size());
  Batch out;
  out.eq_in.resize(kEqInput, b);
  out.cpesro_in.resize(kCpeSroInput, b);
  out.y.resize(kNumDataTones, b);
  out.x.resize(kNumDataTones, b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const std::size_t i = idx[static_cast<std::size_t>(c)];
    const float* pk = &set.packet_inputs[static_cast<std::size_t>(set.packet_of[i]) * kEqInput];
    const float* pi = &set.pilot_inputs[i * 2 * kPilotWidth];
    double* e = out.eq_in.col(c).data();
    double* s = out.cpesro_in.col(c).data();
    for (int r = 0; r < kEqInput; ++r) e[r] = s[r] = pk[r];
    for (int r = 0; r < 2 * kPilotWidth; ++r) s[kEqInput + r] = pi[r];
    const float* y = &set.rx_data[i * kDataWidth];
    const float* x = &set.labels[i * kDataWidth];
    for (int t = 0; t < kNumDataTones; ++t) {
      out.y(t, c) = cplx(y[t], y[t + kNumDataTones]);
      out.x(t, c) = cplx(x[t], x[t + kNumDataTones]);
    }
  }
  return out;
}

Batch make_batch(const std::vector<FeatureVector>& fvs, const std::vector<ComplexBuf>& labels) {
  const Eigen::Index b = static_cast<Eigen::Index>(fvs.size());
  Batch out;
  out.eq_in.resize(kEqInput, b);
  out.cpesro_in.resize(kCpeSroInput, b);
  out.y.resize(kNumDataTones, b);
  out.x = Eigen::MatrixXcd::Zero(kNumDataTones, b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const auto& fv = fvs[static_cast<std::size_t>(c)];
    if (fv.rx_data.size() != kNumDataTones) throw ArgumentError("make_batch: feature has wrong data width");
    fv.eq_input(out.eq_in.col(c).data());
    fv.cpesro_input(out.cpesro_in.col(c).data());
    for (int t = 0; t < kNumDataTones; ++t) out.y(t, c) = fv.rx_data[static_cast<std::size_t>(t)];
    if (!labels.empty()) {
      for (int t = 0; t < kNumDataTones; ++t) out.x(t, c) = labels[static_cast<std::size_t>(c)][static_cast<std::size_t>(t)];
    }
  }
  return out;
}

// ---- prediction and training --------------------------------------------------

namespace {

Eigen::MatrixXcd to_complex(const nn::Matrix& m, int s) {
  Eigen::MatrixXcd z(s, m.cols());
  z.real() = m.topRows(s);
  z.imag() = m.bottomRows(s);
  return z;
}

nn::Matrix to_real(const Eigen::MatrixXcd& z) {
  nn::Matrix m(2 * z.rows(), z.cols());
  m.topRows(z.rows()) = z.real();
  m.bottomRows(z.rows()) = z.imag();
  return m;
}

// Shared by prediction and training so both round identically.
[[gnu::noinline]] Eigen::MatrixXcd apply_products(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b,
                                                  const Eigen::MatrixXcd& y) {
  Eigen::MatrixXcd out(a.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) out(i, j) = (a(i, j) * b(i, j)) * y(i, j);
  }
  return out;
}

double cluster_loss(const SubModel& sm, const Batch& batch, int c, int s) {
  const auto a = to_complex(sm.eq.forward_batch(batch.eq_in), s);
  const auto b = to_complex(sm.cpesro.forward_batch(batch.cpesro_in), s);
  const Eigen::MatrixXcd e = apply_products(a, b, batch.y.middleRows(c * s, s)) - batch.x.middleRows(c * s, s);
  return e.squaredNorm() / (static_cast<double>(s) * static_cast<double>(batch.y.cols()));
}

template <typename Fn>
void for_clusters(int m, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, m));
  if (threads == 1) {
    for (int c = 0; c < m; ++c) fn(c);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int c = t; c < m; c += threads) fn(c);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

ClusterGradients cluster_gradients(const SubModel& sm, const Batch& batch, int c, int s) {
  nn::ForwardCache ce, cc;
  const auto a = to_complex(sm.eq.forward_batch(batch.eq_in, &ce), s);
  const auto b = to_complex(sm.cpesro.forward_batch(batch.cpesro_in, &cc), s);
  const auto y = batch.y.middleRows(c * s, s);
  const auto x = batch.x.middleRows(c * s, s);
  const Eigen::MatrixXcd by = b.cwiseProduct(y);
  const Eigen::MatrixXcd ay = a.cwiseProduct(y);
  const Eigen::MatrixXcd e = apply_products(a, b, y) - x;
  const double denom = static_cast<double>(s) * static_cast<double>(batch.y.cols());
  ClusterGradients g;
  g.loss = e.squaredNorm() / denom;
  // d|e|^2 / d(re, im) of each factor, packed as complex numbers.
  const double k = 2.0 / denom;
  const Eigen::MatrixXcd ga = k * by.conjugate().cwiseProduct(e);
  const Eigen::MatrixXcd gb = k * ay.conjugate().cwiseProduct(e);
  g.eq = sm.eq.backward(ce, to_real(ga));
  g.cpesro = sm.cpesro.backward(cc, to_real(gb));
  return g;
}

std::vector<double> train_step(DeepWiPhyModel& model, const Batch& batch, double lr, int threads) {
  if (batch.y.cols() == 0) throw ArgumentError("train_step: empty batch");
  std::vector<double> losses(static_cast<std::size_t>(model.M()));
  const int s = model.S();
  for_clusters(model.M(), threads, [&](int c) {
    auto& sm = model.subs()[static_cast<std::size_t>(c)];
    const auto g = cluster_gradients(sm, batch, c, s);
    sm.eq.adam_step(g.eq, lr);
    sm.cpesro.adam_step(g.cpesro, lr);
    losses[static_cast<std::size_t>(c)] = g.loss;
  });
  return losses;
}

std::vector<double> evaluate_loss(const DeepWiPhyModel& model, const Batch& batch) {
  std::vector<double> losses(static_cast<std::size_t>(model.M()));
  const int s = model.S();
  for (int c = 0; c < model.M(); ++c) {
    losses[static_cast<std::size_t>(c)] = cluster_loss(model.subs()[static_cast<std::size_t>(c)], batch, c, s);
  }
  return losses;
}

std::vector<ComplexBuf> predict_batch(const DeepWiPhyModel& model, const std::vector<FeatureVector>& fvs,
                                      std::vector<std::vector<double>>* gain2) {
  std::vector<ComplexBuf> out(fvs.size(), ComplexBuf(kNumDataTones));
  if (gain2) gain2->assign(fvs.size(), std::vector<double>(kNumDataTones));
  if (fvs.empty()) return out;
  const Batch batch = make_batch(fvs, {});
  const int s = model.S();
  for (int c = 0; c < model.M(); ++c) {
    const auto& sm = model.subs()[static_cast<std::size_t>(c)];
    const auto a = to_complex(sm.eq.forward_batch(batch.eq_in), s);
    const auto b = to_complex(sm.cpesro.forward_batch(batch.cpesro_in), s);
    const Eigen::MatrixXcd p = apply_products(a, b, batch.y.middleRows(c * s, s));
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      for (int t = 0; t < s; ++t) {
        const std::size_t tone = static_cast<std::size_t>(c * s + t);
        out[static_cast<std::size_t>(j)][tone] = p(t, j);
        if (gain2) (*gain2)[static_cast<std::size_t>(j)][tone] = std::norm(a(t, j) * b(t, j));
      }
    }
  }
  return out;
}

ComplexBuf predict_symbol(const DeepWiPhyModel& model, const FeatureVector& fv) {
  return predict_batch(model, {fv}).front();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch", batch}, {"lr", lr}, {"epochs", epochs}, {"seed", seed}, {"threads", threads}};
}

TrainReport train(DeepWiPhyModel& model, const TrainingSet& data, const TrainConfig& cfg,
                  const TrainingSet* validation) {
  if (data.mcs != model.shape().mcs) {
    throw ConfigError("dataset MCS " + std::to_string(data.mcs) + " does not match model MCS " +
                      std::to_string(model.shape().mcs));
  }
  if (cfg.epochs > 0 && data.size() == 0) throw ConfigError("training set is empty");
  if (cfg.batch == 0) throw ConfigError("batch size must be positive");
  TrainReport report;
  std::vector<std::size_t> order(data.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    SeededRng rng(cfg.seed, static_cast<std::uint64_t>(epoch), Stage::shuffle);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    std::vector<double> acc(static_cast<std::size_t>(model.M()), 0.0);
    double weight = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t n = std::min(cfg.batch, order.size() - start);
      const Batch batch = make_batch(data, std::span(order).subspan(start, n));
      const auto losses = train_step(model, batch, cfg.lr, cfg.threads);
      for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += losses[c] * static_cast<double>(n);
      weight += static_cast<double>(n);
    }
    for (auto& v : acc) v /= weight;
    report.epoch_loss.push_back(acc);

    if (validation && validation->size() > 0) {
      double total = 0.0;
      std::vector<std::size_t> idx;
      for (std::size_t start = 0; start < validation->size(); start += 4096) {
        const std::size_t n = std::min<std::size_t>(4096, validation->size() - start);
        idx.resize(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = start + i;
        const auto l = evaluate_loss(model, make_batch(*validation, idx));
        double mean = 0.0;
        for (double v : l) mean += v;
        total += mean / static_cast<double>(l.size()) * static_cast<double>(n);
      }
      report.validation_loss.push_back(total / static_cast<double>(validation->size()));
    }
    for (const auto& sm : model.subs()) {
      if (!sm.eq.all_finite() || !sm.cpesro.all_finite()) {
        throw NumericalError("training diverged: non-finite weights after epoch " + std::to_string(epoch + 1));
      }
    }
    if (!cfg.checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04d", epoch + 1);
      const auto dir = cfg.checkpoint_dir / (cfg.keep_all_checkpoints ? std::string(name) : std::string("last"));
      model.save(dir, {{"epoch", epoch + 1}, {"train_config", cfg.to_json()}});
    }
    if (cfg.on_epoch) cfg.on_epoch(epoch + 1, acc);
  }
  return report;
}

rx::RxResult run_deepwiphy(const link::RxCapture& capture, const DeepWiPhyModel& model) {
  if (capture.mcs != model.shape().mcs) {
    throw ConfigError("capture MCS " + std::to_string(capture.mcs) + " does not match model MCS " +
                      std::to_string(model.shape().mcs));
  }
  const auto pf = extract_packet_features(capture.samples);
  std::vector<FeatureVector> fvs;
  fvs.reserve(capture.n_symbols);
  for (std::size_t m = 0; m < capture.n_symbols; ++m) fvs.push_back(extract_features(pf, capture.samples, m));
  std::vector<std::vector<double>> g2;
  rx::RxResult res;
  res.sigma2 = pf.sigma2;
  res.points = predict_batch(model, fvs, &g2);
  res.rho.resize(fvs.size());
  for (std::size_t m = 0; m < fvs.size(); ++m) {
    const double s2 = std::max(fvs[m].sigma2_norm, rx::kSigma2Floor);
    res.rho[m].resize(kNumDataTones);
    for (std::size_t t = 0; t < kNumDataTones; ++t) res.rho[m][t] = 1.0 / (s2 * std::max(g2[m][t], 1e-12));
  }
  return res;
}

}  // namespace dwp::dwphy
