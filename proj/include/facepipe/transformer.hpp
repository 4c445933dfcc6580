#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "facepipe/core.hpp"

namespace facepipe {

inline constexpr int kTransformerInputDim = 2 * kNumLandmarks + 3;  // 199
inline constexpr int kTransformerOutputDim = 2 * kNumLandmarks;     // 196
inline constexpr int kTransformerLayers = 12;
inline constexpr int kTransformerHidden = 256;
inline constexpr double kAngleScale = 90.0;

/// Dense layer, optionally followed by batch normalization and ReLU.
struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
  bool batch_norm = false;
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }
};

struct InitOptions {
  std::uint64_t seed = 0;
  bool zero_final_layer = true;
};

/// Landmark transformer: every layer but the last is Linear -> BatchNorm -> ReLU.
/// Inputs are column vectors [x0, y0, ..., x97, y97, yaw, pitch, roll] with
/// landmarks normalized to [-1,1] by the image extent and angles divided by 90;
/// outputs are normalized landmarks.
class MlpTransformer {
 public:
  static constexpr double kBnEps = 1e-5;
  static constexpr double kBnMomentum = 0.1;

  MlpTransformer() = default;
  /// dims = {input, hidden..., output}; layers = dims.size() - 1.
  /// Weights ~ N(0, 2/fan_in); the final layer starts at zero unless disabled.
  static MlpTransformer create(const std::vector<int>& dims, const InitOptions& init = {});
  /// 199 -> 256 x 11 -> 196.
  static MlpTransformer create_default(std::uint64_t seed = 0);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  int input_dim() const { return layers_.front().in_dim(); }
  int output_dim() const { return layers_.back().out_dim(); }

  /// Inference: batch norm uses running statistics. Columns are samples.
  Eigen::MatrixXd infer(const Eigen::MatrixXd& inputs) const;

  /// Throws unless parameters are finite and running variances positive.
  void validate() const;

  friend bool operator==(const MlpTransformer& a, const MlpTransformer& b);

 private:
  std::vector<DenseLayer> layers_;
};

/// Per-parameter gradients, same layout as the model's layers.
struct LayerGradients {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
};

struct BatchStats {
  std::vector<Eigen::VectorXd> mean;
  std::vector<Eigen::VectorXd> var;  // biased
};

/// Training-mode forward and exact backward pass for
/// L = (1/B) * sum_i |f(x_i) - y_i|^2. Returns the loss; batch statistics of
/// every normalized layer are written to `stats` when given.
double loss_and_gradients(const MlpTransformer& model, const Eigen::MatrixXd& inputs,
                          const Eigen::MatrixXd& targets, std::vector<LayerGradients>& grads,
                          BatchStats* stats = nullptr);

/// Training-mode loss only (batch statistics, no side effects).
double training_loss(const MlpTransformer& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);
/// Inference-mode loss with the same normalization as training.
double inference_loss(const MlpTransformer& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);

/// Landmark normalization over a width x height frame.
LandmarkSet normalize_landmarks(const LandmarkSet& p, int width, int height);
LandmarkSet denormalize_landmarks(const LandmarkSet& p, int width, int height);

/// T(p_s, theta_t) on pre-normalized landmarks. Throws on non-finite input.
LandmarkSet forward(const MlpTransformer& model, const LandmarkSet& source, const PoseAngles& target_pose);

struct TransformerSample {
  LandmarkSet source;  // normalized
  PoseAngles target_pose;
  LandmarkSet target;  // normalized
};

Eigen::VectorXd encode_input(const LandmarkSet& source, const PoseAngles& pose);
Eigen::VectorXd encode_output(const LandmarkSet& landmarks);
LandmarkSet decode_output(const Eigen::Ref<const Eigen::VectorXd>& v);

struct TrainConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 32;
  int iterations = 2000;
  /// Halve the learning rate every this many steps; 0 keeps it constant.
  int lr_halving_steps = 0;
  std::uint64_t seed = 0;
  /// Set the final bias to the mean target before training while the final
  /// layer is still all-zero, so the untrained net predicts the output mean.
  bool init_output_bias_to_mean = true;

  void validate() const;
};

struct TrainResult {
  MlpTransformer model;
  std::vector<double> loss_curve;  // training-mode batch loss per step
};

/// Adam on the mean-squared landmark error. Batches are drawn by walking a
/// seeded per-epoch shuffle, so results are bit-reproducible for a seed.
TrainResult train(const std::vector<TransformerSample>& dataset, const TrainConfig& config,
                  MlpTransformer model);
TrainResult train(const std::vector<TransformerSample>& dataset, const TrainConfig& config);

/// Angles (1 - i/n) theta_s + (i/n) theta_t for i = 1..n.
std::vector<PoseAngles> intermediate_poses(const PoseAngles& source, const PoseAngles& target, int n);

/// p_i = T(p_s, pose_i) for i = 1..n-1; p_n is `target` when given, otherwise
/// T(p_s, theta_t). Landmarks are normalized.
std::vector<LandmarkSet> intermediate_landmarks(const MlpTransformer& model, const LandmarkSet& source,
                                                const PoseAngles& source_pose, const PoseAngles& target_pose,
                                                int n, const LandmarkSet* target = nullptr);

/// Target landmarks with the mouth points (76-95) replaced by the source
/// mouth, scaled by the ratio of mouth-corner distances and moved onto the
/// target's mouth centroid.
LandmarkSet swap_mouth_landmarks(const LandmarkSet& target, const LandmarkSet& source);

/// Checkpoint: "FPT1", u32 layer count, then per layer u32 rows, u32 cols and
/// little-endian float32 weights (row-major), biases and, for every layer but
/// the last, gamma, beta, running mean and running variance.
void save_checkpoint(const MlpTransformer& model, const std::filesystem::path& path);
MlpTransformer load_checkpoint(const std::filesystem::path& path);
std::vector<std::uint8_t> checkpoint_bytes(const MlpTransformer& model);
MlpTransformer checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes);

void write_loss_csv(const std::vector<double>& curve, const std::filesystem::path& path);

}  // namespace facepipe
