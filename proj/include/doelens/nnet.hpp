#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "doelens/synthgen.hpp"

namespace doelens {

/// Two images whose settings differ only at `varied_factor`.
struct CounterfactualPair {
  LabeledImage a;
  LabeledImage b;
  std::size_t varied_factor = 0;
};

namespace nnet {

/// Conv(3x3, stride 2, pad 1) blocks with optional per-channel batch
/// normalization and ReLU, global average pooling, hidden Linear+ReLU layers,
/// and a final Linear to the class logits.
///
/// The feature tap used by the invariance loss is the pre-activation output of
/// the last hidden layer, or the pooled vector when there are no hidden layers.
/// Convolutions carry a bias only when batch normalization is off.
struct Architecture {
  int input_channels = 1;
  int input_size = 64;
  std::vector<int> conv_channels{32, 64, 128, 256};
  bool batch_norm = true;
  std::vector<int> hidden{128};
  int classes = 3;

  /// 1->32->64->128->256 conv with BN, Linear(256,128), Linear(128,3).
  /// `width` multiplies every conv and hidden width.
  static Architecture dsprites_cnn(double width = 1.0);
  /// 3->16->32->64 conv without BN, Linear(64,3).
  static Architecture tiny_cnn();

  int feature_dim() const;
  std::size_t parameter_count() const;
  void validate() const;

  bool operator==(const Architecture&) const = default;
};

nlohmann::json to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);

template <typename T>
struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<T> values;

  std::size_t size() const { return values.size(); }
};

template <typename T>
struct BasicParams {
  Architecture arch;
  std::vector<Tensor<T>> weights;  // trainable, in layer order
  std::vector<Tensor<T>> buffers;  // running mean / variance per normalized layer

  template <typename U>
  BasicParams<U> cast() const {
    BasicParams<U> out;
    out.arch = arch;
    auto conv = [](const std::vector<Tensor<T>>& in) {
      std::vector<Tensor<U>> res;
      for (const auto& t : in) res.push_back({t.name, t.shape, std::vector<U>(t.values.begin(), t.values.end())});
      return res;
    };
    out.weights = conv(weights);
    out.buffers = conv(buffers);
    return out;
  }
};

using ModelParams = BasicParams<float>;

/// Fan-in scaled uniform weights (bound sqrt(6 / fan_in)), zero biases,
/// unit scale and zero shift for normalization, running stats (0, 1).
template <typename T>
BasicParams<T> init_params(const Architecture& arch, std::uint64_t seed);

enum class Mode { train, eval };

/// Images in channel-major layout [c][n][h][w], intensities scaled to [0, 1].
template <typename T>
struct ImageBatch {
  int n = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;
};

template <typename T>
ImageBatch<T> make_batch(std::span<const LabeledImage* const> images);
template <typename T>
ImageBatch<T> make_batch(const Dataset& data, std::span<const std::size_t> indices);

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct ForwardResult {
  Matrix<T> logits;    // B x classes
  Matrix<T> features;  // B x feature_dim
};

/// Eval mode normalizes with running statistics; train mode with batch
/// statistics (running statistics are not modified here).
template <typename T>
ForwardResult<T> forward(const BasicParams<T>& params, const ImageBatch<T>& batch, Mode mode);

struct TaskLoss {
  double mean = 0.0;
  std::vector<double> per_sample;  // -log softmax at the true class
};

template <typename T>
TaskLoss loss_task(const Matrix<T>& logits, std::span<const int> labels);

/// Mean over rows of the squared L2 distance between paired feature rows,
/// divided by the feature dimension.
template <typename T>
double loss_inv(const Matrix<T>& features_a, const Matrix<T>& features_b);

double loss_total(double task_loss, double inv_loss, double lambda);

struct TrainConfig {
  double learning_rate = 3e-4;
  int batch_size = 256;
  int epochs = 15;
  double lambda = 0.5;
  int inv_pairs_per_batch = 32;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double bn_momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& defaults = {});

template <typename T>
struct PairBatch {
  ImageBatch<T> a;
  ImageBatch<T> b;
};

template <typename T>
struct Gradients {
  std::vector<std::vector<T>> weights;  // aligned with BasicParams::weights
  double task_loss = 0.0;
  double inv_loss = 0.0;
  double total_loss = 0.0;
  // Task-batch mean and unbiased variance per normalized layer, for running averages.
  std::vector<std::vector<double>> batch_mean;
  std::vector<std::vector<double>> batch_var;
  bool finite = true;
};

/// Exact reverse-mode gradient of task + lambda * inv on one step. The pair
/// batch is forwarded as one train-mode batch (a then b) with its own
/// normalization statistics; it is skipped entirely when lambda == 0.
template <typename T>
Gradients<T> backward(const BasicParams<T>& params, const ImageBatch<T>& batch, std::span<const int> labels,
                      const PairBatch<T>* pairs, const TrainConfig& cfg);

/// Cosine annealing from lr0 at step 0 towards 0 at step total_steps.
double cosine_lr(double lr0, std::size_t step, std::size_t total_steps);

struct TrainLog {
  std::vector<double> step_loss;
  std::vector<double> step_task_loss;
  std::vector<double> step_inv_loss;
  std::vector<double> step_lr;
};

/// Adam over shuffled mini-batches for cfg.epochs. When pairs are supplied and
/// lambda > 0, each step also consumes inv_pairs_per_batch pairs (cycling
/// through a reshuffled order). Trailing batches smaller than 2 are dropped.
ModelParams train(ModelParams params, const Dataset& data, std::span<const CounterfactualPair> pairs,
                  const TrainConfig& cfg, TrainLog* log = nullptr);

struct Evaluation {
  std::vector<double> loss;
  std::vector<int> predicted;
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

/// Eval-mode losses and predictions, samples in dataset order.
Evaluation evaluate(const ModelParams& params, const Dataset& data, int batch_size = 256);

/// Throws std::invalid_argument when the dataset images do not match the input layer.
void check_compatible(const Architecture& arch, const Dataset& data);

}  // namespace nnet
}  // namespace doelens
