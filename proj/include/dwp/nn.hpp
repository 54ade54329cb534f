#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dwp/rng.hpp"

namespace dwp::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Layer {
  Matrix w;  // out x in
  Vector b;  // out
};

struct Gradients {
  std::vector<Matrix> dw;
  std::vector<Vector> db;

  void set_zero();
  Gradients& operator+=(const Gradients& o);
  Gradients& operator*=(double s);
  double max_abs() const;
};

struct AdamState {
  std::vector<Matrix> mw, vw;
  std::vector<Vector> mb, vb;
  std::uint64_t step = 0;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Activations saved by a batched forward pass, one column per example.
struct ForwardCache {
  std::vector<Matrix> inputs;  // input to each layer
  Matrix output;
};

/// Fully connected network: tanh on hidden layers, linear output layer.
class DenseNet {
 public:
  DenseNet() = default;
  /// widths = {in, h1, ..., out}; parameters start at zero.
  explicit DenseNet(std::vector<int> widths);
  /// Hidden-layer count L and width U between `in` and `out`.
  static DenseNet mlp(int in, int hidden_layers, int units, int out);

  int input_width() const { return widths_.front(); }
  int output_width() const { return widths_.back(); }
  std::size_t num_layers() const { return layers_.size(); }
  const std::vector<int>& widths() const { return widths_; }
  std::size_t num_parameters() const;

  Layer& layer(std::size_t i) { return layers_[i]; }
  const Layer& layer(std::size_t i) const { return layers_[i]; }
  Vector forward(const Vector& x) const;
  /// Columns of `x` are independent examples.
  Matrix forward_batch(const Matrix& x, ForwardCache* cache = nullptr) const;
  /// Back-propagates dLoss/dOutput (same shape as cache.output) into parameter gradients.
  Gradients backward(const ForwardCache& cache, const Matrix& grad_output) const;
  Gradients zero_gradients() const;

  void init_glorot(SeededRng& rng);
  void adam_step(const Gradients& g, double lr, const AdamConfig& cfg = {});
  const AdamState& adam() const { return adam_; }
  void reset_adam();

  bool all_finite() const;
  /// FNV-1a over the raw parameter bytes; used to detect cross-talk in tests.
  std::uint64_t parameter_hash() const;

  void save(const std::filesystem::path& path) const;
  static DenseNet load(const std::filesystem::path& path);
  void write(std::ostream& out) const;
  static DenseNet read(std::istream& in, const std::string& what = "stream");

 private:
  std::vector<int> widths_;
  std::vector<Layer> layers_;
  AdamState adam_;
};

struct MseResult {
  double loss = 0.0;
  Gradients grads;
};

/// loss = mean over every output component of (y - t)^2.
MseResult backward_mse(const DenseNet& net, const Vector& input, const Vector& target);
MseResult backward_mse_batch(const DenseNet& net, const Matrix& inputs, const Matrix& targets);

/// Glorot-uniform out x in matrix, bound sqrt(6 / (in + out)).
Matrix init_glorot(int out, int in, SeededRng& rng);

/// Writes `net` plus a JSON sidecar (`<path>.json`) with `meta`.
void save_with_sidecar(const DenseNet& net, const std::filesystem::path& path, const nlohmann::json& meta);

}  // namespace dwp::nn
