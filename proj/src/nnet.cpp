#include "uapmimo/nnet.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "uapmimo/binary_io.hpp"
#include "uapmimo/dataset.hpp"
#include "uapmimo/error.hpp"
#include "uapmimo/random.hpp"

namespace uapmimo {

double elu(double z) { return z >= 0 ? z : std::expm1(z); }

double elu_prime(double z) { return z >= 0 ? 1.0 : std::exp(z); }

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { validate(); }

Mlp Mlp::glorot(std::span<const int> dims, std::uint64_t seed) {
  if (dims.size() < 2) throw DimensionMismatch("an MLP needs at least input and output sizes");
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    if (in < 1 || out < 1) throw DimensionMismatch("layer sizes must be positive");
    const double limit = std::sqrt(6.0 / (in + out));
    DenseLayer layer;
    layer.weights.resize(out, in);
    // Row-major fill order so the draw sequence does not depend on storage order.
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) layer.weights(r, c) = rng.uniform(-limit, limit);
    }
    layer.bias = Vector::Zero(out);
    layer.activation = (l + 2 == dims.size()) ? Activation::kLinear : Activation::kElu;
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

int Mlp::input_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().weights.cols()); }

int Mlp::output_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().weights.rows()); }

std::vector<int> Mlp::layer_dims() const {
  std::vector<int> dims;
  if (layers_.empty()) return dims;
  dims.push_back(input_dim());
  for (const auto& layer : layers_) dims.push_back(static_cast<int>(layer.weights.rows()));
  return dims;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  return n;
}

void Mlp::validate() const {
  if (layers_.empty()) throw DimensionMismatch("MLP has no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weights.rows()) throw DimensionMismatch("bias length != weight rows");
    if (l > 0 && layer.weights.cols() != layers_[l - 1].weights.rows()) {
      throw DimensionMismatch("consecutive layer shapes do not chain");
    }
    const bool last = (l + 1 == layers_.size());
    const Activation expected = last ? Activation::kLinear : Activation::kElu;
    if (layer.activation != expected) throw DataError("MLP activations must be elu on hidden layers, linear on output");
  }
}

namespace {

void apply_activation(Activation act, Matrix& z) {
  if (act == Activation::kElu) z = z.unaryExpr([](double v) { return elu(v); });
}

struct ForwardCache {
  std::vector<Matrix> pre;   // pre-activations per layer
  std::vector<Matrix> post;  // post[0] is the input, post[l+1] the output of layer l
};

void forward_cached(const Mlp& model, const Matrix& x, ForwardCache& cache) {
  const auto& layers = model.layers();
  cache.pre.resize(layers.size());
  cache.post.resize(layers.size() + 1);
  cache.post[0] = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    cache.pre[l].noalias() = layers[l].weights * cache.post[l];
    cache.pre[l].colwise() += layers[l].bias;
    cache.post[l + 1] = cache.pre[l];
    apply_activation(layers[l].activation, cache.post[l + 1]);
  }
}

// Back-propagates dY (output_dim x n). Fills parameter gradients summed over
// the batch when grads is non-null; returns the gradient with respect to the input.
Matrix backward(const Mlp& model, const ForwardCache& cache, Matrix delta, ParamGradients* grads) {
  const auto& layers = model.layers();
  if (grads) {
    grads->weights.resize(layers.size());
    grads->biases.resize(layers.size());
  }
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (layers[l].activation == Activation::kElu) {
      delta.array() *= cache.pre[l].unaryExpr([](double v) { return elu_prime(v); }).array();
    }
    if (grads) {
      grads->weights[l].noalias() = delta * cache.post[l].transpose();
      grads->biases[l] = delta.rowwise().sum();
    }
    Matrix prev = layers[l].weights.transpose() * delta;
    delta = std::move(prev);
  }
  return delta;
}

void check_input(const Mlp& model, Eigen::Index rows) {
  if (rows != model.input_dim()) throw DimensionMismatch("input length does not match model input size");
}

}  // namespace

Vector Mlp::forward(const Vector& x) const {
  check_input(*this, x.size());
  Vector h = x;
  for (const auto& layer : layers_) {
    Vector z = layer.weights * h + layer.bias;
    if (layer.activation == Activation::kElu) z = z.unaryExpr([](double v) { return elu(v); });
    h = std::move(z);
  }
  return h;
}

Matrix Mlp::forward_batch(const Matrix& x) const {
  check_input(*this, x.rows());
  Matrix h = x;
  for (const auto& layer : layers_) {
    Matrix z = layer.weights * h;
    z.colwise() += layer.bias;
    apply_activation(layer.activation, z);
    h = std::move(z);
  }
  return h;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    const auto& x = a.layers_[l];
    const auto& y = b.layers_[l];
    if (x.activation != y.activation || x.weights.rows() != y.weights.rows() ||
        x.weights.cols() != y.weights.cols() || x.weights != y.weights || x.bias != y.bias) {
      return false;
    }
  }
  return true;
}

std::vector<int> architecture_m1(int input_dim, int n_ues_per_cell) {
  return {input_dim, 64, 32, 32, 32, n_ues_per_cell, n_ues_per_cell + 1};
}

std::vector<int> architecture_m2(int input_dim, int n_ues_per_cell) {
  return {input_dim, 512, 256, 128, 128, n_ues_per_cell, n_ues_per_cell + 1};
}

std::vector<int> architecture(const std::string& name, int input_dim, int n_ues_per_cell) {
  if (name == "m1") return architecture_m1(input_dim, n_ues_per_cell);
  if (name == "m2") return architecture_m2(input_dim, n_ues_per_cell);
  throw ConfigError("unknown architecture '" + name + "' (expected m1 or m2)");
}

Vector grad_input(const Mlp& model, const Vector& x, const Vector& out_weights) {
  check_input(model, x.size());
  if (out_weights.size() != model.output_dim()) throw DimensionMismatch("out_weights length != output size");
  ForwardCache cache;
  forward_cached(model, x, cache);
  return backward(model, cache, out_weights, nullptr);
}

ParamGradients grad_params(const Mlp& model, const Vector& x, const Vector& out_weights) {
  check_input(model, x.size());
  if (out_weights.size() != model.output_dim()) throw DimensionMismatch("out_weights length != output size");
  ForwardCache cache;
  forward_cached(model, x, cache);
  ParamGradients grads;
  backward(model, cache, out_weights, &grads);
  return grads;
}

void TrainSettings::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (!(adam_beta1 > 0 && adam_beta1 < 1) || !(adam_beta2 > 0 && adam_beta2 < 1)) {
    throw ConfigError("adam betas must lie in (0, 1)");
  }
  if (!(adam_eps > 0)) throw ConfigError("adam_eps must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
}

TrainResult train(Mlp& model, const RowMatrix& inputs, const RowMatrix& targets, const TrainSettings& settings) {
  settings.validate();
  model.validate();
  const Eigen::Index n = inputs.rows();
  if (n == 0) throw DataError("cannot train on an empty dataset");
  if (targets.rows() != n) throw DimensionMismatch("inputs and targets have different row counts");
  if (inputs.cols() != model.input_dim() || targets.cols() != model.output_dim()) {
    throw DimensionMismatch("dataset columns do not match the model");
  }

  auto& layers = model.layers();
  const std::size_t n_layers = layers.size();
  std::vector<Matrix> mw(n_layers), vw(n_layers);
  std::vector<Vector> mb(n_layers), vb(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    mw[l] = Matrix::Zero(layers[l].weights.rows(), layers[l].weights.cols());
    vw[l] = mw[l];
    mb[l] = Vector::Zero(layers[l].bias.size());
    vb[l] = mb[l];
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(settings.seed);

  const Eigen::Index out_dim = model.output_dim();
  const Eigen::Index batch = settings.batch_size;
  TrainResult result;
  ForwardCache cache;
  ParamGradients grads;
  Matrix xb, tb;
  long step = 0;

  for (int epoch = 0; epoch < settings.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

    double loss_sum = 0.0;
    long batches = 0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index m = std::min(batch, n - start);
      xb.resize(inputs.cols(), m);
      tb.resize(out_dim, m);
      for (Eigen::Index c = 0; c < m; ++c) {
        const Eigen::Index row = order[static_cast<std::size_t>(start + c)];
        xb.col(c) = inputs.row(row).transpose();
        tb.col(c) = targets.row(row).transpose();
      }
      forward_cached(model, xb, cache);
      const Matrix err = cache.post.back() - tb;
      const double denom = static_cast<double>(m * out_dim);
      const double loss = err.squaredNorm() / denom;
      if (!std::isfinite(loss)) {
        throw NonFiniteLoss("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches) + " (learning_rate " + format_double(settings.learning_rate) +
                            ")");
      }
      loss_sum += loss;
      ++batches;
      backward(model, cache, (2.0 / denom) * err, &grads);

      ++step;
      const double c1 = 1.0 - std::pow(settings.adam_beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(settings.adam_beta2, static_cast<double>(step));
      const double b1 = settings.adam_beta1;
      const double b2 = settings.adam_beta2;
      const double lr = settings.learning_rate;
      const double eps = settings.adam_eps;
      for (std::size_t l = 0; l < n_layers; ++l) {
        mw[l] = b1 * mw[l] + (1 - b1) * grads.weights[l];
        vw[l] = b2 * vw[l] + (1 - b2) * grads.weights[l].cwiseAbs2();
        layers[l].weights.array() -= lr * (mw[l].array() / c1) / ((vw[l].array() / c2).sqrt() + eps);
        mb[l] = b1 * mb[l] + (1 - b1) * grads.biases[l];
        vb[l] = b2 * vb[l] + (1 - b2) * grads.biases[l].cwiseAbs2();
        layers[l].bias.array() -= lr * (mb[l].array() / c1) / ((vb[l].array() / c2).sqrt() + eps);
      }
    }
    result.loss_history.push_back(loss_sum / static_cast<double>(batches));
  }
  return result;
}

TrainResult train(Mlp& model, const Dataset& data, int cell, const TrainSettings& settings) {
  data.validate();
  return train(model, data.inputs, data.cell_targets(cell), settings);
}

namespace {
constexpr std::string_view kModelMagic = "UAPMLP";
constexpr std::uint8_t kModelVersion = 1;
}  // namespace

std::string serialize_model(const Mlp& model) {
  model.validate();
  ByteWriter w;
  w.raw(kModelMagic);
  w.u8(kModelVersion);
  w.u32(static_cast<std::uint32_t>(model.layers().size()));
  for (const auto& layer : model.layers()) {
    w.u32(static_cast<std::uint32_t>(layer.weights.rows()));
    w.u32(static_cast<std::uint32_t>(layer.weights.cols()));
    w.u8(static_cast<std::uint8_t>(layer.activation));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.f64(layer.weights(r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) w.f64(layer.bias[r]);
  }
  return w.bytes();
}

Mlp deserialize_model(const std::string& bytes) {
  ByteReader r(bytes);
  if (r.raw(kModelMagic.size()) != kModelMagic) throw DataError("not a model file (bad magic)");
  if (r.u8() != kModelVersion) throw DataError("unsupported model file version");
  const auto count = r.u32();
  std::vector<DenseLayer> layers(count);
  for (auto& layer : layers) {
    const auto rows = static_cast<Eigen::Index>(r.u32());
    const auto cols = static_cast<Eigen::Index>(r.u32());
    const auto tag = r.u8();
    if (tag > 1) throw DataError("unknown activation tag in model file");
    layer.activation = static_cast<Activation>(tag);
    layer.weights.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) layer.weights(i, j) = r.f64();
    }
    layer.bias.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) layer.bias[i] = r.f64();
  }
  if (!r.at_end()) throw DataError("trailing bytes in model file");
  return Mlp(std::move(layers));
}

void save_model(const std::filesystem::path& path, const Mlp& model) {
  write_file_atomic(path, serialize_model(model));
}

Mlp load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

std::filesystem::path sidecar_path(const std::filesystem::path& weights) {
  std::filesystem::path p = weights;
  p += ".scaler";
  return p;
}

std::string serialize_sidecar(const ModelSidecar& meta) {
  std::ostringstream os;
  os << "architecture=" << meta.architecture << '\n'
     << "cell=" << meta.cell << '\n'
     << "n_ues_per_cell=" << meta.n_ues_per_cell << '\n'
     << "p_max=" << format_double(meta.p_max) << '\n'
     << "output_scale=" << format_double(meta.output.scale) << '\n'
     << "output_offset=" << format_double(meta.output.offset) << '\n'
     << "position_min=" << format_double(meta.positions.min_coord) << '\n'
     << "position_max=" << format_double(meta.positions.max_coord) << '\n';
  return os.str();
}

ModelSidecar parse_sidecar(const std::string& text) {
  ModelSidecar meta;
  std::istringstream is(text);
  std::string line;
  int seen = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("malformed scaler sidecar line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    ++seen;
    if (key == "architecture") {
      meta.architecture = value;
    } else if (key == "cell") {
      meta.cell = static_cast<int>(parse_double(value));
    } else if (key == "n_ues_per_cell") {
      meta.n_ues_per_cell = static_cast<int>(parse_double(value));
    } else if (key == "p_max") {
      meta.p_max = parse_double(value);
    } else if (key == "output_scale") {
      meta.output.scale = parse_double(value);
    } else if (key == "output_offset") {
      meta.output.offset = parse_double(value);
    } else if (key == "position_min") {
      meta.positions.min_coord = parse_double(value);
    } else if (key == "position_max") {
      meta.positions.max_coord = parse_double(value);
    } else {
      throw DataError("unknown scaler sidecar key '" + key + "'");
    }
  }
  if (seen != 8) throw DataError("scaler sidecar is incomplete");
  if (!(meta.output.scale > 0)) throw DataError("scaler sidecar: output_scale must be > 0");
  if (!(meta.positions.max_coord > meta.positions.min_coord)) {
    throw DataError("scaler sidecar: position_max must exceed position_min");
  }
  return meta;
}

void save_sidecar(const std::filesystem::path& weights, const ModelSidecar& meta) {
  write_file_atomic(sidecar_path(weights), serialize_sidecar(meta));
}

ModelSidecar load_sidecar(const std::filesystem::path& weights) {
  return parse_sidecar(read_file(sidecar_path(weights)));
}

}  // namespace uapmimo
