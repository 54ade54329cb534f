#include "dwp/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "dwp/error.hpp"

namespace dwp::nn {
namespace {

constexpr char kMagic[4] = {'D', 'W', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::string& what) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw FormatError(what + ": truncated weight file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void Gradients::set_zero() {
  for (auto& m : dw) m.setZero();
  for (auto& v : db) v.setZero();
}

Gradients& Gradients::operator+=(const Gradients& o) {
  for (std::size_t i = 0; i < dw.size(); ++i) {
    dw[i] += o.dw[i];
    db[i] += o.db[i];
  }
  return *this;
}

Gradients& Gradients::operator*=(double s) {
  for (auto& m : dw) m *= s;
  for (auto& v : db) v *= s;
  return *this;
}

double Gradients::max_abs() const {
  double m = 0.0;
  for (const auto& x : dw) m = std::max(m, x.cwiseAbs().maxCoeff());
  for (const auto& x : db) m = std::max(m, x.cwiseAbs().maxCoeff());
  return m;
}

DenseNet::DenseNet(std::vector<int> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw ArgumentError("DenseNet: need at least input and output widths");
  for (int w : widths_) {
    if (w <= 0) throw ArgumentError("DenseNet: widths must be positive");
  }
  for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
    layers_.push_back({Matrix::Zero(widths_[i + 1], widths_[i]), Vector::Zero(widths_[i + 1])});
  }
  reset_adam();
}

DenseNet DenseNet::mlp(int in, int hidden_layers, int units, int out) {
  std::vector<int> w{in};
  for (int i = 0; i < hidden_layers; ++i) w.push_back(units);
  w.push_back(out);
  return DenseNet(w);
}

std::size_t DenseNet::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.w.size() + l.b.size());
  return n;
}

void DenseNet::reset_adam() {
  adam_ = AdamState{};
  for (const auto& l : layers_) {
    adam_.mw.push_back(Matrix::Zero(l.w.rows(), l.w.cols()));
    adam_.vw.push_back(Matrix::Zero(l.w.rows(), l.w.cols()));
    adam_.mb.push_back(Vector::Zero(l.b.size()));
    adam_.vb.push_back(Vector::Zero(l.b.size()));
  }
}

Vector DenseNet::forward(const Vector& x) const {
  if (x.size() != input_width()) {
    throw ArgumentError("DenseNet::forward: input width " + std::to_string(x.size()) + " != " +
                        std::to_string(input_width()));
  }
  Vector a = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Vector z = layers_[i].w * a + layers_[i].b;
    a = (i + 1 < layers_.size()) ? Vector(z.array().tanh()) : z;
  }
  return a;
}

Matrix DenseNet::forward_batch(const Matrix& x, ForwardCache* cache) const {
  if (x.rows() != input_width()) throw ArgumentError("DenseNet::forward_batch: input width mismatch");
  if (cache) cache->inputs.clear();
  Matrix a = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (cache) cache->inputs.push_back(a);
    Matrix z = layers_[i].w * a;
    z.colwise() += layers_[i].b;
    if (i + 1 < layers_.size()) {
      a = z.array().tanh().matrix();
    } else {
      a = std::move(z);
    }
  }
  if (cache) cache->output = a;
  return a;
}

Gradients DenseNet::zero_gradients() const {
  Gradients g;
  for (const auto& l : layers_) {
    g.dw.push_back(Matrix::Zero(l.w.rows(), l.w.cols()));
    g.db.push_back(Vector::Zero(l.b.size()));
  }
  return g;
}

Gradients DenseNet::backward(const ForwardCache& cache, const Matrix& grad_output) const {
  if (grad_output.rows() != output_width() || grad_output.cols() != cache.output.cols()) {
    throw ArgumentError("DenseNet::backward: gradient shape mismatch");
  }
  Gradients g;
  g.dw.resize(layers_.size());
  g.db.resize(layers_.size());
  Matrix delta = grad_output;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Matrix& a = cache.inputs[i];
    g.dw[i].noalias() = delta * a.transpose();
    g.db[i] = delta.rowwise().sum();
    if (i > 0) {
      Matrix back = layers_[i].w.transpose() * delta;
      // a = tanh(z) for every layer input after the first.
      delta = back.array() * (1.0 - a.array().square());
    }
  }
  return g;
}

Matrix init_glorot(int out, int in, SeededRng& rng) {
  if (out <= 0 || in <= 0) throw ArgumentError("init_glorot: dimensions must be positive");
  const double bound = std::sqrt(6.0 / (in + out));
  Matrix w(out, in);
  // Row-major draw order keeps the stream independent of Eigen's storage order.
  for (int r = 0; r < out; ++r) {
    for (int c = 0; c < in; ++c) w(r, c) = rng.uniform(-bound, bound);
  }
  return w;
}

void DenseNet::init_glorot(SeededRng& rng) {
  for (auto& l : layers_) {
    l.w = nn::init_glorot(static_cast<int>(l.w.rows()), static_cast<int>(l.w.cols()), rng);
    l.b.setZero();
  }
  reset_adam();
}

void DenseNet::adam_step(const Gradients& g, double lr, const AdamConfig& cfg) {
  if (!(lr > 0.0)) throw ArgumentError("adam_step: learning rate must be positive");
  if (g.dw.size() != layers_.size()) throw ArgumentError("adam_step: gradient layout mismatch");
  ++adam_.step;
  const double t = static_cast<double>(adam_.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const double step = lr * std::sqrt(c2) / c1;
  const double eps = cfg.eps * std::sqrt(c2);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    adam_.mw[i] = cfg.beta1 * adam_.mw[i] + (1.0 - cfg.beta1) * g.dw[i];
    adam_.vw[i] = cfg.beta2 * adam_.vw[i] + (1.0 - cfg.beta2) * g.dw[i].cwiseAbs2();
    adam_.mb[i] = cfg.beta1 * adam_.mb[i] + (1.0 - cfg.beta1) * g.db[i];
    adam_.vb[i] = cfg.beta2 * adam_.vb[i] + (1.0 - cfg.beta2) * g.db[i].cwiseAbs2();
    // lr * mhat / (sqrt(vhat) + eps), folded into one expression.
    layers_[i].w.array() -= step * adam_.mw[i].array() / (adam_.vw[i].array().sqrt() + eps);
    layers_[i].b.array() -= step * adam_.mb[i].array() / (adam_.vb[i].array().sqrt() + eps);
  }
}

bool DenseNet::all_finite() const {
  for (const auto& l : layers_) {
    if (!l.w.allFinite() || !l.b.allFinite()) return false;
  }
  return true;
}

std::uint64_t DenseNet::parameter_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const double* p, Eigen::Index n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& l : layers_) {
    feed(l.w.data(), l.w.size());
    feed(l.b.data(), l.b.size());
  }
  return h;
}

void DenseNet::write(std::ostream& out) const {
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layers_.size()));
  for (int w : widths_) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.w.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) put_le<double>(out, l.w(r, c));
    }
    for (Eigen::Index r = 0; r < l.b.size(); ++r) put_le<double>(out, l.b(r));
  }
}

DenseNet DenseNet::read(std::istream& in, const std::string& what) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw FormatError(what + ": bad magic");
  const auto version = get_le<std::uint32_t>(in, what);
  if (version != kVersion) throw FormatError(what + ": unsupported weight version " + std::to_string(version));
  const auto n_layers = get_le<std::uint32_t>(in, what);
  if (n_layers == 0 || n_layers > 1024) throw FormatError(what + ": implausible layer count");
  std::vector<int> widths;
  for (std::uint32_t i = 0; i <= n_layers; ++i) {
    const auto w = get_le<std::uint32_t>(in, what);
    if (w == 0 || w > (1U << 24)) throw FormatError(what + ": implausible layer width");
    widths.push_back(static_cast<int>(w));
  }
  DenseNet net(widths);
  for (auto& l : net.layers_) {
    for (Eigen::Index r = 0; r < l.w.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) l.w(r, c) = get_le<double>(in, what);
    }
    for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = get_le<double>(in, what);
  }
  return net;
}

void DenseNet::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write(out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

DenseNet DenseNet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open weight file " + path.string());
  return read(in, path.string());
}

MseResult backward_mse_batch(const DenseNet& net, const Matrix& inputs, const Matrix& targets) {
  ForwardCache cache;
  const Matrix y = net.forward_batch(inputs, &cache);
  if (targets.rows() != y.rows() || targets.cols() != y.cols()) {
    throw ArgumentError("backward_mse: target shape mismatch");
  }
  const Matrix diff = y - targets;
  const double count = static_cast<double>(diff.size());
  MseResult r;
  r.loss = diff.squaredNorm() / count;
  r.grads = net.backward(cache, (2.0 / count) * diff);
  return r;
}

MseResult backward_mse(const DenseNet& net, const Vector& input, const Vector& target) {
  return backward_mse_batch(net, input, target);
}

void save_with_sidecar(const DenseNet& net, const std::filesystem::path& path, const nlohmann::json& meta) {
  net.save(path);
  nlohmann::json j = meta;
  j["format"] = "DWNN";
  j["format_version"] = kVersion;
  j["widths"] = net.widths();
  j["activation"] = "tanh hidden, linear output";
  std::ofstream out(path.string() + ".json");
  out << j.dump(2) << "\n";
}

}  // namespace dwp::nn
