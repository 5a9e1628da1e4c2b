#ifndef UAPMIMO_NNET_HPP
#define UAPMIMO_NNET_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uapmimo/scenario.hpp"
#include "uapmimo/types.hpp"

namespace uapmimo {

struct Dataset;

enum class Activation : std::uint8_t { kLinear = 0, kElu = 1 };

// ELU with alpha = 1. The derivative at 0 takes the right limit, 1.
double elu(double z);
double elu_prime(double z);

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::kLinear;
};

/// Fully connected feedforward regressor: ELU hidden layers, linear head.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  /// Uniform init in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  /// dims = {input, hidden..., output}.
  static Mlp glorot(std::span<const int> dims, std::uint64_t seed);

  int input_dim() const;
  int output_dim() const;
  std::vector<int> layer_dims() const;
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  /// Throws DimensionMismatch on inconsistent shapes and DataError if the
  /// activations are not ELU...ELU, linear.
  void validate() const;

  Vector forward(const Vector& x) const;
  /// Batched forward on columns of X (input_dim x n).
  Matrix forward_batch(const Matrix& x) const;

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  std::vector<DenseLayer> layers_;
};

/// Layer sizes of the two reference architectures for inputs of size
/// input_dim and a (K+1)-dimensional per-cell output.
std::vector<int> architecture_m1(int input_dim, int n_ues_per_cell);
std::vector<int> architecture_m2(int input_dim, int n_ues_per_cell);
std::vector<int> architecture(const std::string& name, int input_dim, int n_ues_per_cell);

struct ParamGradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

/// Gradient of out_weights . forward(x) with respect to x.
Vector grad_input(const Mlp& model, const Vector& x, const Vector& out_weights);

/// Gradient of out_weights . forward(x) with respect to every weight and bias.
ParamGradients grad_params(const Mlp& model, const Vector& x, const Vector& out_weights);

struct TrainSettings {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 128;
  int epochs = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  std::vector<double> loss_history;  // mean batch MSE per epoch
};

/// Minibatch Adam on mean squared error. Throws NonFiniteLoss if the loss
/// stops being finite.
TrainResult train(Mlp& model, const RowMatrix& inputs, const RowMatrix& targets,
                  const TrainSettings& settings);

/// Trains on the (K+1)-dimensional targets of one cell. Rejects datasets whose
/// last target column is not the sum of the first K.
TrainResult train(Mlp& model, const Dataset& data, int cell, const TrainSettings& settings);

/// Maps network outputs to mW.
struct OutputScaler {
  double scale = 1.0;
  double offset = 0.0;

  double denormalize(double y) const { return offset + scale * y; }
};

/// Parameters stored next to a weights file.
struct ModelSidecar {
  std::string architecture;
  int cell = 0;
  int n_ues_per_cell = 0;
  double p_max = 0.0;
  OutputScaler output;
  PositionScaler positions;
};

/// Binary weights file: "UAPMLP", version byte, u32 layer count, then per
/// layer u32 rows, u32 cols, u8 activation tag, rows*cols row-major f64
/// weights and rows f64 biases. Little-endian throughout.
std::string serialize_model(const Mlp& model);
Mlp deserialize_model(const std::string& bytes);
void save_model(const std::filesystem::path& path, const Mlp& model);
Mlp load_model(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& weights);
std::string serialize_sidecar(const ModelSidecar& meta);
ModelSidecar parse_sidecar(const std::string& text);
void save_sidecar(const std::filesystem::path& weights, const ModelSidecar& meta);
ModelSidecar load_sidecar(const std::filesystem::path& weights);

}  // namespace uapmimo

#endif  // UAPMIMO_NNET_HPP
