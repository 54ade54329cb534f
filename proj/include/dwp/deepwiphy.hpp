#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dwp/link.hpp"
#include "dwp/nn.hpp"
#include "dwp/rx_conventional.hpp"

namespace dwp::dwphy {

inline constexpr int kLltfWidth = 104;
inline constexpr int kHeltfWidth = 484;
inline constexpr int kPilotWidth = 16;
inline constexpr int kDataWidth = 468;
inline constexpr int kEqInput = kLltfWidth + kHeltfWidth;            // 588
inline constexpr int kCpeSroInput = kEqInput + 2 * kPilotWidth;      // 620
inline constexpr int kNumDataTones = 234;

/// Inputs of one DATA symbol. Real vectors hold all real parts first, then
/// all imaginary parts.
struct FeatureVector {
  std::vector<double> rx_lltf;    // 104
  std::vector<double> rx_heltf;   // 484
  std::vector<double> rx_pilots;  // 16
  std::vector<double> tx_pilots;  // 16
  ComplexBuf rx_data;             // 234 normalized data tones
  std::size_t symbol_index = 0;
  /// Noise variance after the DATA normalization (sigma2 * 242 / ||y||^2).
  double sigma2_norm = 0.0;
  /// Mean power of the 242 active DATA tones before normalization.
  double rx_power = 0.0;

  /// eq_net input: rx_lltf | rx_heltf.
  void eq_input(double* out) const;
  /// cpesro_net input: rx_lltf | rx_heltf | tx_pilots | rx_pilots.
  void cpesro_input(double* out) const;
};

/// Splits complex values into [re..., im...].
std::vector<double> to_real(std::span<const cplx> z);

/// Preamble features shared by every symbol of a capture.
struct PacketFeatures {
  std::vector<double> rx_lltf;
  std::vector<double> rx_heltf;
  double sigma2 = 0.0;  // L-LTF repetition estimate, unnormalized
};

PacketFeatures extract_packet_features(std::span<const cplx> capture);
FeatureVector extract_features(const PacketFeatures& pf, std::span<const cplx> capture, std::size_t m);
FeatureVector extract_features(const link::RxCapture& capture, std::size_t m);

struct SubModel {
  nn::DenseNet eq;
  nn::DenseNet cpesro;
};

struct ModelShape {
  int clusters = 13;  // M
  int units = 64;     // U
  int layers = 3;     // L
  int mcs = 7;

  int tones_per_cluster() const { return kNumDataTones / clusters; }
  nlohmann::json to_json() const;
};

class DeepWiPhyModel {
 public:
  DeepWiPhyModel() = default;
  /// Glorot weights; output-layer real-part biases start at one so a fresh
  /// model passes the received tone through.
  DeepWiPhyModel(const ModelShape& shape, std::uint64_t seed);

  const ModelShape& shape() const { return shape_; }
  int M() const { return shape_.clusters; }
  int S() const { return shape_.tones_per_cluster(); }
  std::vector<SubModel>& subs() { return subs_; }
  const std::vector<SubModel>& subs() const { return subs_; }

  void save(const std::filesystem::path& dir, const nlohmann::json& extra = {}) const;
  static DeepWiPhyModel load(const std::filesystem::path& dir);
  nlohmann::json manifest;  // training provenance, filled by train()

 private:
  ModelShape shape_;
  std::vector<SubModel> subs_;
};


/// x~[k] = C_eq[k] C_CpeSro[k] y[k] over all 234 data tones.
ComplexBuf predict_symbol(const DeepWiPhyModel& model, const FeatureVector& fv);
/// Same for many symbols; also returns |C_eq C_CpeSro|^2 per tone when `gain2` is set.
std::vector<ComplexBuf> predict_batch(const DeepWiPhyModel& model, const std::vector<FeatureVector>& fvs,
                                      std::vector<std::vector<double>>* gain2 = nullptr);

/// Dense training data. Preamble features are stored once per packet.
struct TrainingSet {
  int mcs = 7;
  std::vector<float> packet_inputs;  // P x 588
  std::vector<std::uint32_t> packet_of;  // N
  std::vector<float> pilot_inputs;   // N x 32 (tx_pilots | rx_pilots)
  std::vector<float> rx_data;        // N x 468
  std::vector<float> labels;         // N x 468

  std::size_t size() const { return packet_of.size(); }
  std::size_t packets() const { return packet_inputs.size() / kEqInput; }
  /// Returns the packet slot for new preamble features.
  std::uint32_t add_packet(std::span<const float> lltf, std::span<const float> heltf);
  void add_symbol(std::uint32_t packet, std::span<const float> tx_pilots, std::span<const float> rx_pilots,
                  std::span<const float> data, std::span<const float> label);
  /// Loads one stored symbol back into double-precision feature form.
  FeatureVector feature(std::size_t i) const;
  ComplexBuf label(std::size_t i) const;
};

/// A batch laid out for the networks: one column per example.
struct Batch {
  nn::Matrix eq_in;      // 588 x B
  nn::Matrix cpesro_in;  // 620 x B
  Eigen::MatrixXcd y;    // 234 x B
  Eigen::MatrixXcd x;    // 234 x B labels
};

Batch make_batch(const TrainingSet& set, std::span<const std::size_t> idx);
Batch make_batch(const std::vector<FeatureVector>& fvs, const std::vector<ComplexBuf>& labels);

/// Loss of cluster c and the gradients of both of its networks.
struct ClusterGradients {
  double loss = 0.0;
  nn::Gradients eq;
  nn::Gradients cpesro;
};
ClusterGradients cluster_gradients(const SubModel& sm, const Batch& batch, int c, int s);

/// One Adam step per cluster on its squared-error loss; returns L_1..L_M.
std::vector<double> train_step(DeepWiPhyModel& model, const Batch& batch, double lr, int threads = 1);
/// Loss per cluster without updating anything.
std::vector<double> evaluate_loss(const DeepWiPhyModel& model, const Batch& batch);

struct TrainConfig {
  std::size_t batch = 5120;
  double lr = 1e-5;
  int epochs = 1;
  std::uint64_t seed = 1;
  int threads = 1;
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  bool keep_all_checkpoints = false;
  /// Called after every epoch with the mean training loss per cluster.
  std::function<void(int, const std::vector<double>&)> on_epoch;

  nlohmann::json to_json() const;
};

struct TrainReport {
  std::vector<std::vector<double>> epoch_loss;  // [epoch][cluster]
  std::vector<double> validation_loss;          // mean over clusters, when a validation set is given
};

TrainReport train(DeepWiPhyModel& model, const TrainingSet& data, const TrainConfig& cfg,
                  const TrainingSet* validation = nullptr);

/// Receiver wrapper: equalized points and LLR reliabilities per data symbol.
rx::RxResult run_deepwiphy(const link::RxCapture& capture, const DeepWiPhyModel& model);

}  // namespace dwp::dwphy
