#include "flydraw/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "flydraw/errors.hpp"
#include "flydraw/io.hpp"

namespace flydraw {

namespace {

void check_input(const Network& net, Eigen::Index rows) {
  if (net.layers().empty()) throw ShapeError("network has no layers");
  if (rows != net.input_dim())
    throw ShapeError("input has " + std::to_string(rows) + " features, network expects " +
                     std::to_string(net.input_dim()));
}

// Post-activation (masked) outputs of every layer, last one linear.
std::vector<Eigen::MatrixXd> activations(const Network& net, const Eigen::MatrixXd& x,
                                         const DropoutMasks& masks) {
  check_input(net, x.rows());
  const auto& layers = net.layers();
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(layers.size());
  const Eigen::MatrixXd* in = &x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = layers[l].weight * *in;
    z.colwise() += layers[l].bias;
    if (l + 1 < layers.size()) {
      z = z.cwiseMax(0.0);
      if (!masks.empty()) z.array() *= masks[l].array();
    }
    acts.push_back(std::move(z));
    in = &acts.back();
  }
  return acts;
}

}  // namespace

Network::Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("network has no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& d = layers_[l];
    if (d.bias.size() != d.weight.rows())
      throw ShapeError("layer " + std::to_string(l) + ": bias length does not match weight rows");
    if (l > 0 && d.weight.cols() != layers_[l - 1].weight.rows())
      throw ShapeError("layer " + std::to_string(l) + ": input width does not chain");
  }
  if (layers_.back().weight.rows() != 1) throw ShapeError("network must have one output");
}

Network Network::zeros(int input_dim, int hidden_layers, int width) {
  std::vector<DenseLayer> layers;
  int in = input_dim;
  for (int l = 0; l < hidden_layers; ++l) {
    layers.push_back({Eigen::MatrixXd::Zero(width, in), Eigen::VectorXd::Zero(width)});
    in = width;
  }
  layers.push_back({Eigen::MatrixXd::Zero(1, in), Eigen::VectorXd::Zero(1)});
  return Network(std::move(layers));
}

Network Network::he_init(int input_dim, std::uint64_t seed, int hidden_layers, int width) {
  Network net = zeros(input_dim, hidden_layers, width);
  std::mt19937_64 rng(seed);
  for (DenseLayer& d : net.layers_) {
    std::normal_distribution<double> n(0.0, std::sqrt(2.0 / static_cast<double>(d.weight.cols())));
    for (Eigen::Index j = 0; j < d.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < d.weight.rows(); ++i) d.weight(i, j) = n(rng);
  }
  return net;
}

int Network::input_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols());
}

bool Network::finite() const {
  for (const DenseLayer& d : layers_)
    if (!d.weight.allFinite() || !d.bias.allFinite()) return false;
  return true;
}

bool Network::operator==(const Network& o) const {
  if (layers_.size() != o.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer &a = layers_[l], &b = o.layers_[l];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols()) return false;
    if (a.weight != b.weight || a.bias != b.bias) return false;
  }
  return true;
}

double forward(const Network& net, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return forward_batch(net, Eigen::MatrixXd(x))(0);
}

Eigen::VectorXd forward_batch(const Network& net, const Eigen::MatrixXd& x) {
  return activations(net, x, {}).back().row(0).transpose();
}

double loss(const Network& net, const RegressionData& batch) {
  return masked_loss(net, batch, {});
}

DropoutMasks sample_masks(const Network& net, Eigen::Index batch, double keep,
                          std::mt19937_64& rng, int layers) {
  DropoutMasks masks;
  std::bernoulli_distribution coin(keep);
  const double scale = 1.0 / keep;
  const int hidden = net.hidden_layers();
  const int first = layers < 0 ? 0 : std::max(0, hidden - layers);
  for (int l = 0; l < hidden; ++l) {
    Eigen::MatrixXd m(net.layers()[l].weight.rows(), batch);
    if (l < first) {
      masks.push_back(Eigen::MatrixXd::Ones(m.rows(), m.cols()));
      continue;
    }
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = coin(rng) ? scale : 0.0;
    masks.push_back(std::move(m));
  }
  return masks;
}

double masked_loss(const Network& net, const RegressionData& batch,
                   const DropoutMasks& masks) {
  if (batch.size() == 0) throw InvalidInput("loss of an empty batch");
  const Eigen::VectorXd pred = activations(net, batch.x, masks).back().row(0).transpose();
  return (pred - batch.y).squaredNorm() / static_cast<double>(batch.size());
}

Gradients backward(const Network& net, const RegressionData& batch,
                   const DropoutMasks& masks) {
  const auto& layers = net.layers();
  const std::vector<Eigen::MatrixXd> acts = activations(net, batch.x, masks);
  const double n = static_cast<double>(batch.size());

  Gradients grads(layers.size());
  // dL/d(output pre-activation), 1 x batch.
  Eigen::MatrixXd delta = (2.0 / n) * (acts.back().row(0) - batch.y.transpose());
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Eigen::MatrixXd& input = l == 0 ? batch.x : acts[l - 1];
    grads[l].weight = delta * input.transpose();
    grads[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = layers[l].weight.transpose() * delta;
    // acts[l-1] = mask * relu(z): its derivative w.r.t. z is mask where z > 0,
    // which is exactly mask where the (masked) activation is non-zero, or
    // zero where the unit was dropped.
    const Eigen::MatrixXd& a = acts[l - 1];
    if (masks.empty()) {
      back.array() *= (a.array() > 0.0).cast<double>();
    } else {
      back.array() *= (a.array() > 0.0).cast<double>() * masks[l - 1].array();
    }
    delta = std::move(back);
  }
  return grads;
}

AdamState::AdamState(const Network& net) {
  for (const DenseLayer& d : net.layers()) {
    m.push_back({Eigen::MatrixXd::Zero(d.weight.rows(), d.weight.cols()),
                 Eigen::VectorXd::Zero(d.bias.size())});
  }
  v = m;
}

void adam_step(Network& net, const Gradients& grads, AdamState& st, double lr) {
  auto& layers = net.layers();
  if (grads.size() != layers.size() || st.m.size() != layers.size())
    throw ShapeError("adam_step: gradient/state shape mismatch");
  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    if (param.size() != g.size()) throw ShapeError("adam_step: parameter shape mismatch");
    m = st.beta1 * m + (1.0 - st.beta1) * g;
    v = st.beta2 * v + (1.0 - st.beta2) * g.cwiseAbs2();
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + st.eps);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, grads[l].weight, st.m[l].weight, st.v[l].weight);
    update(layers[l].bias, grads[l].bias, st.m[l].bias, st.v[l].bias);
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidInput("learning_rate must be > 0");
  if (!(dropout_keep > 0.0 && dropout_keep <= 1.0))
    throw InvalidInput("dropout_keep must be in (0, 1]");
  if (batch_size < 1) throw InvalidInput("batch_size must be >= 1");
  if (iterations < 0) throw InvalidInput("iterations must be >= 0");
}

TrainResult train(const RegressionData& train_set, const RegressionData& validation,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.size() == 0) throw InvalidInput("training set is empty");
  if (train_set.x.cols() != train_set.size())
    throw ShapeError("training inputs and targets disagree in count");

  const int dim = static_cast<int>(train_set.x.rows());
  TrainResult out;
  out.net = Network::he_init(dim, cfg.seed);
  AdamState adam(out.net);
  // Separate stream so batch choice does not depend on the init draw count.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<Eigen::Index> pick(0, train_set.size() - 1);
  const bool dropout = cfg.dropout_keep < 1.0;

  RegressionData batch{Eigen::MatrixXd(dim, cfg.batch_size), Eigen::VectorXd(cfg.batch_size)};
  out.loss_history.reserve(cfg.iterations);
  for (int it = 0; it < cfg.iterations; ++it) {
    for (int b = 0; b < cfg.batch_size; ++b) {
      const Eigen::Index k = pick(rng);
      batch.x.col(b) = train_set.x.col(k);
      batch.y(b) = train_set.y(k);
    }
    const DropoutMasks masks =
        dropout ? sample_masks(out.net, cfg.batch_size, cfg.dropout_keep, rng, cfg.dropout_layers) : DropoutMasks{};
    const double l = masked_loss(out.net, batch, masks);
    if (!std::isfinite(l))
      throw TrainingDiverged("non-finite training loss at iteration " + std::to_string(it), it);
    out.loss_history.push_back(l);
    adam_step(out.net, backward(out.net, batch, masks), adam, cfg.learning_rate);
  }

  out.train_loss = loss(out.net, train_set);
  if (!std::isfinite(out.train_loss))
    throw TrainingDiverged("non-finite training loss after the final iteration", cfg.iterations);
  out.validation_loss = validation.size() > 0 ? loss(out.net, validation)
                                              : std::numeric_limits<double>::quiet_NaN();
  return out;
}

std::string format_model(const Network& net, const std::string& norm_ref) {
  std::ostringstream out;
  out << "flydraw-mlp " << kModelFormatVersion << "\n";
  out << "input_dim " << net.input_dim() << "\n";
  out << "layers " << net.layers().size() << "\n";
  out << "norm " << (norm_ref.empty() ? "-" : norm_ref) << "\n";
  for (const DenseLayer& d : net.layers()) {
    out << "layer " << d.weight.rows() << ' ' << d.weight.cols() << "\n";
    for (Eigen::Index i = 0; i < d.weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < d.weight.cols(); ++j)
        out << (j ? " " : "") << io::format_double(d.weight(i, j));
      out << "\n";
    }
    for (Eigen::Index i = 0; i < d.bias.size(); ++i)
      out << (i ? " " : "") << io::format_double(d.bias(i));
    out << "\n";
  }
  out << "end\n";
  return out.str();
}

namespace {

class LineReader {
public:
  explicit LineReader(const std::string& text) : in_(text) {}

  std::vector<std::string_view> next(const char* what) {
    if (!std::getline(in_, line_))
      throw FormatError(std::string("model file truncated: expected ") + what);
    return io::split_ws(line_);
  }

  std::vector<std::string_view> keyed(const char* key, std::size_t fields) {
    auto tok = next(key);
    if (tok.size() != fields + 1 || tok[0] != key)
      throw FormatError(std::string("model file: malformed '") + key + "' line");
    return tok;
  }

private:
  std::istringstream in_;
  std::string line_;
};

}  // namespace

Network parse_model(const std::string& text, std::string* norm_ref) {
  LineReader r(text);
  auto magic = r.next("header");
  if (magic.size() != 2 || magic[0] != "flydraw-mlp") throw FormatError("not a flydraw model file");
  const long version = io::parse_long(magic[1]);
  if (version != kModelFormatVersion)
    throw FormatError("model file version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kModelFormatVersion) + ")");
  const long input_dim = io::parse_long(r.keyed("input_dim", 1)[1]);
  const long count = io::parse_long(r.keyed("layers", 1)[1]);
  if (count < 1 || count > 64) throw FormatError("model file: implausible layer count");
  const std::string norm(r.keyed("norm", 1)[1]);
  if (norm_ref) *norm_ref = norm == "-" ? "" : norm;

  std::vector<DenseLayer> layers;
  for (long l = 0; l < count; ++l) {
    const auto shape = r.keyed("layer", 2);
    const long rows = io::parse_long(shape[1]), cols = io::parse_long(shape[2]);
    if (rows < 1 || cols < 1 || rows > 1 << 16 || cols > 1 << 16)
      throw FormatError("model file: implausible layer shape");
    DenseLayer d{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
    for (long i = 0; i < rows; ++i) {
      const auto tok = r.next("weight row");
      if (static_cast<long>(tok.size()) != cols) throw FormatError("model file: weight row has wrong length");
      for (long j = 0; j < cols; ++j) d.weight(i, j) = io::parse_double(tok[j]);
    }
    const auto tok = r.next("bias");
    if (static_cast<long>(tok.size()) != rows) throw FormatError("model file: bias has wrong length");
    for (long i = 0; i < rows; ++i) d.bias(i) = io::parse_double(tok[i]);
    layers.push_back(std::move(d));
  }
  auto end = r.next("end marker");
  if (end.size() != 1 || end[0] != "end") throw FormatError("model file: missing end marker");

  Network net;
  try {
    net = Network(std::move(layers));
  } catch (const ShapeError& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
  if (net.input_dim() != input_dim) throw FormatError("model file: input_dim does not match the first layer");
  return net;
}

void save_model(const Network& net, const std::string& path, const std::string& norm_ref) {
  io::write_file(path, format_model(net, norm_ref));
}

Network load_model(const std::string& path, std::string* norm_ref) {
  return parse_model(io::read_file(path), norm_ref);
}

}  // namespace flydraw
