#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace flydraw {

inline constexpr int kHiddenLayers = 4;
inline constexpr int kHiddenWidth = 128;
inline constexpr int kModelFormatVersion = 1;

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// Fully connected ReLU network with one linear output unit.
class Network {
public:
  Network() = default;
  // Throws ShapeError unless the layer shapes chain and end in one output.
  explicit Network(std::vector<DenseLayer> layers);

  static Network zeros(int input_dim, int hidden_layers = kHiddenLayers,
                       int width = kHiddenWidth);
  // He initialization (variance 2 / fan_in), zero biases.
  static Network he_init(int input_dim, std::uint64_t seed,
                         int hidden_layers = kHiddenLayers,
                         int width = kHiddenWidth);

  int input_dim() const;
  int hidden_layers() const { return static_cast<int>(layers_.size()) - 1; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  bool finite() const;
  bool operator==(const Network& o) const;

private:
  std::vector<DenseLayer> layers_;
};

// Samples stored column-wise: x is input_dim x n, y has n entries.
struct RegressionData {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;

  Eigen::Index size() const { return y.size(); }
};

// Inference, never applies dropout. Throws ShapeError on a length mismatch.
double forward(const Network& net, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd forward_batch(const Network& net, const Eigen::MatrixXd& x);

// Mean squared error over the batch.
double loss(const Network& net, const RegressionData& batch);

// One mask per hidden layer (width x batch), entries 0 or 1/keep. An empty
// vector means no dropout.
using DropoutMasks = std::vector<Eigen::MatrixXd>;

// Only the last `layers` hidden layers drop units (-1: all of them); the rest
// get all-ones masks.
DropoutMasks sample_masks(const Network& net, Eigen::Index batch, double keep,
                          std::mt19937_64& rng, int layers = -1);

// MSE of the masked network (the training-time objective).
double masked_loss(const Network& net, const RegressionData& batch,
                   const DropoutMasks& masks);

using Gradients = std::vector<DenseLayer>;

// Exact gradients of masked_loss with respect to every parameter.
Gradients backward(const Network& net, const RegressionData& batch,
                   const DropoutMasks& masks);

struct AdamState {
  explicit AdamState(const Network& net);

  std::vector<DenseLayer> m, v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_step(Network& net, const Gradients& grads, AdamState& state,
               double learning_rate);

struct TrainConfig {
  double learning_rate = 3e-4;
  double dropout_keep = 0.5;
  int dropout_layers = 1;  // trailing hidden layers with dropout, -1 = all
  int batch_size = 30;
  int iterations = 2000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  Network net;
  double train_loss = 0.0;       // full training set, no dropout
  double validation_loss = 0.0;  // NaN when no validation data
  std::vector<double> loss_history;  // minibatch loss per iteration
};

// Minibatches drawn uniformly (with replacement) from `train`; fixed
// iteration count, no early stopping. Same seed -> bit-identical network.
// Throws TrainingDiverged on a non-finite loss.
TrainResult train(const RegressionData& train, const RegressionData& validation,
                  const TrainConfig& cfg);

// Text model container. `norm_ref` names the normalization statistics the
// network expects (may be empty).
std::string format_model(const Network& net, const std::string& norm_ref = "");
Network parse_model(const std::string& text, std::string* norm_ref = nullptr);
void save_model(const Network& net, const std::string& path,
                const std::string& norm_ref = "");
Network load_model(const std::string& path, std::string* norm_ref = nullptr);

}  // namespace flydraw
