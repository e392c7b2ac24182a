#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "flydraw/errors.hpp"
#include "flydraw/io.hpp"
#include "flydraw/mlp.hpp"

using namespace flydraw;

namespace {

// Plain loops, no Eigen expressions: the reference for forward().
double naive_forward(const Network& net, const std::vector<double>& x) {
  std::vector<double> a = x;
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& d = layers[l];
    std::vector<double> z(static_cast<std::size_t>(d.weight.rows()));
    for (Eigen::Index i = 0; i < d.weight.rows(); ++i) {
      long double acc = d.bias(i);
      for (Eigen::Index j = 0; j < d.weight.cols(); ++j)
        acc += static_cast<long double>(d.weight(i, j)) * a[static_cast<std::size_t>(j)];
      double v = static_cast<double>(acc);
      if (l + 1 < layers.size() && v < 0.0) v = 0.0;
      z[static_cast<std::size_t>(i)] = v;
    }
    a = std::move(z);
  }
  return a[0];
}

RegressionData gaussian_data(int dim, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  RegressionData d{Eigen::MatrixXd(dim, n), Eigen::VectorXd(n)};
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < dim; ++i) d.x(i, j) = g(rng);
    d.y(j) = g(rng);
  }
  return d;
}

struct LinearTask {
  RegressionData train, val;
  double noise_var;
};

LinearTask linear_task(std::uint64_t seed) {
  const int dim = 3;
  const double sigma = 0.5;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd w(dim);
  for (int i = 0; i < dim; ++i) w(i) = g(rng);
  w.normalize();
  auto make = [&](int n) {
    RegressionData d{Eigen::MatrixXd(dim, n), Eigen::VectorXd(n)};
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < dim; ++i) d.x(i, j) = g(rng);
      d.y(j) = w.dot(d.x.col(j)) + sigma * g(rng);
    }
    return d;
  };
  LinearTask t{make(60000), make(5000), sigma * sigma};
  return t;
}

double& param(Network& net, std::size_t l, bool bias, Eigen::Index i, Eigen::Index j) {
  return bias ? net.layers()[l].bias(i) : net.layers()[l].weight(i, j);
}

double max_fd_relative_error(int depth, std::uint64_t seed, bool with_dropout) {
  Network net = Network::he_init(3, seed, depth, 4);
  for (auto& d : net.layers()) d.bias.setConstant(0.05);
  const RegressionData batch = gaussian_data(3, 5, seed + 100);
  std::mt19937_64 rng(seed + 200);
  const DropoutMasks masks =
      with_dropout ? sample_masks(net, batch.size(), 0.5, rng) : DropoutMasks{};
  const Gradients grads = backward(net, batch, masks);

  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    for (int b = 0; b < 2; ++b) {
      const bool bias = b == 1;
      const Eigen::Index rows = net.layers()[l].weight.rows();
      const Eigen::Index cols = bias ? 1 : net.layers()[l].weight.cols();
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
          double& p = param(net, l, bias, i, j);
          const double keep = p;
          p = keep + h;
          const double up = masked_loss(net, batch, masks);
          p = keep - h;
          const double down = masked_loss(net, batch, masks);
          p = keep;
          const double fd = (up - down) / (2.0 * h);
          const double an = bias ? grads[l].bias(i) : grads[l].weight(i, j);
          const double scale = std::max({std::abs(fd), std::abs(an), 1e-6});
          worst = std::max(worst, std::abs(fd - an) / scale);
        }
      }
    }
  }
  return worst;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("zero network outputs zero") {
  const Network net = Network::zeros(7);
  CHECK(net.hidden_layers() == 4);
  CHECK(net.layers()[0].weight.rows() == 128);
  CHECK(forward(net, Eigen::VectorXd::Constant(7, 3.5)) == 0.0);
  CHECK(forward(net, Eigen::VectorXd::LinSpaced(7, -10, 10)) == 0.0);
}

TEST_CASE("hidden units are rectified") {
  // One hidden unit whose pre-activation equals the input, output copies it.
  std::vector<DenseLayer> layers{
      {Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)},
      {Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)},
  };
  const Network net(layers);
  CHECK(forward(net, Eigen::VectorXd::Constant(1, -1.0)) == 0.0);
  CHECK(forward(net, Eigen::VectorXd::Constant(1, 2.0)) == 2.0);
}

TEST_CASE("forward matches a plain-loop implementation") {
  const Network net = Network::he_init(36, 17);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(36);
    for (double& v : x) v = g(rng);
    const double a = forward(net, Eigen::Map<Eigen::VectorXd>(x.data(), 36));
    const double b = naive_forward(net, x);
    CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)));
  }
}

TEST_CASE("batched forward agrees with single-sample forward") {
  const Network net = Network::he_init(5, 4);
  const RegressionData d = gaussian_data(5, 9, 1);
  const Eigen::VectorXd out = forward_batch(net, d.x);
  for (int j = 0; j < 9; ++j) CHECK(out(j) == doctest::Approx(forward(net, d.x.col(j))).epsilon(1e-12));
}

TEST_CASE("forward rejects the wrong input length") {
  const Network net = Network::zeros(4);
  CHECK_THROWS_AS(forward(net, Eigen::VectorXd::Zero(5)), ShapeError);
}

TEST_CASE("network constructor checks shape chaining") {
  std::vector<DenseLayer> bad{
      {Eigen::MatrixXd::Ones(3, 2), Eigen::VectorXd::Zero(3)},
      {Eigen::MatrixXd::Ones(1, 4), Eigen::VectorXd::Zero(1)},
  };
  CHECK_THROWS_AS(Network{bad}, ShapeError);
  std::vector<DenseLayer> two_out{{Eigen::MatrixXd::Ones(2, 2), Eigen::VectorXd::Zero(2)}};
  CHECK_THROWS_AS(Network{two_out}, ShapeError);
}

TEST_CASE("mean squared error loss") {
  // Single linear layer y = x.
  const Network id(std::vector<DenseLayer>{{Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)}});
  RegressionData same{Eigen::MatrixXd(1, 2), Eigen::VectorXd(2)};
  same.x << 0.5, -2.0;
  same.y << 0.5, -2.0;
  CHECK(loss(id, same) == 0.0);

  RegressionData unit{Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)};
  CHECK(loss(id, unit) == 1.0);

  RegressionData three{Eigen::MatrixXd(1, 3), Eigen::VectorXd::Zero(3)};
  three.x << 1.0, 2.0, -2.0;
  CHECK(loss(id, three) == doctest::Approx(3.0).epsilon(1e-15));

  RegressionData empty{Eigen::MatrixXd(1, 0), Eigen::VectorXd(0)};
  CHECK_THROWS_AS(loss(id, empty), InvalidInput);
}

TEST_CASE("zero residuals give zero gradients") {
  const Network net = Network::he_init(3, 5, 2, 4);
  RegressionData d = gaussian_data(3, 6, 2);
  d.y = forward_batch(net, d.x);
  for (const DenseLayer& g : backward(net, d, {})) {
    CHECK(g.weight.cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.bias.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("gradients match central finite differences at every depth") {
  for (int depth = 1; depth <= 4; ++depth) {
    CAPTURE(depth);
    CHECK(max_fd_relative_error(depth, 10 + depth, false) < 1e-5);
    CHECK(max_fd_relative_error(depth, 20 + depth, true) < 1e-5);
  }
}

TEST_CASE("a dead unit receives no incoming-weight gradient") {
  Network net = Network::he_init(3, 8, 2, 4);
  // Unit 2 of the first hidden layer: pre-activation always negative.
  net.layers()[0].weight.row(2).setZero();
  net.layers()[0].bias(2) = -1.0;
  const RegressionData d = gaussian_data(3, 10, 9);
  const Gradients g = backward(net, d, {});
  CHECK(g[0].weight.row(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g[0].bias(2) == 0.0);
  CHECK(g[0].weight.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("dropout masks use inverted scaling") {
  const Network net = Network::zeros(3);
  std::mt19937_64 rng(1);
  const DropoutMasks masks = sample_masks(net, 200, 0.5, rng);
  REQUIRE(masks.size() == 4);
  long kept = 0, total = 0;
  for (const auto& m : masks) {
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      const double v = m.data()[k];
      CHECK((v == 0.0 || v == 2.0));
      kept += v > 0.0;
      ++total;
    }
  }
  CHECK(double(kept) / double(total) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("adam leaves parameters alone for a zero gradient") {
  Network net = Network::he_init(3, 2, 1, 4);
  const Network before = net;
  AdamState st(net);
  Gradients zero = AdamState(net).m;
  adam_step(net, zero, st, 0.01);
  CHECK(net == before);
  CHECK(st.step == 1);
}

TEST_CASE("first adam step moves each parameter by lr against the gradient sign") {
  Network net = Network::he_init(2, 6, 1, 3);
  const Network before = net;
  AdamState st(net);
  const RegressionData d = gaussian_data(2, 4, 7);
  const Gradients g = backward(net, d, {});
  const double lr = 1e-3;
  adam_step(net, g, st, lr);
  for (std::size_t l = 0; l < g.size(); ++l) {
    for (Eigen::Index k = 0; k < g[l].weight.size(); ++k) {
      const double gk = g[l].weight.data()[k];
      const double step = net.layers()[l].weight.data()[k] - before.layers()[l].weight.data()[k];
      if (std::abs(gk) > 1e-4) CHECK(step == doctest::Approx(-lr * (gk > 0 ? 1 : -1)).epsilon(1e-4));
    }
  }
}

TEST_CASE("adam minimizes a scalar quadratic") {
  // f(w) = (w - 3)^2 as a 1x1 linear network with bias only acting.
  Network net(std::vector<DenseLayer>{{Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1)}});
  AdamState st(net);
  for (int i = 0; i < 100; ++i) {
    Gradients g(1);
    g[0].weight = Eigen::MatrixXd::Zero(1, 1);
    g[0].bias = Eigen::VectorXd::Constant(1, 2.0 * (net.layers()[0].bias(0) - 3.0));
    adam_step(net, g, st, 0.1);
  }
  CHECK(std::abs(net.layers()[0].bias(0) - 3.0) < 0.5);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.dropout_keep = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = {};
  cfg.dropout_keep = 1.5;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

TEST_CASE("constant target is learned") {
  // Standardized units, so the target variance scale is 1.
  RegressionData d = gaussian_data(4, 5000, 11);
  d.y.setConstant(0.7);
  RegressionData v = gaussian_data(4, 1000, 12);
  v.y.setConstant(0.7);
  TrainConfig cfg;
  cfg.seed = 5;
  cfg.iterations = 6000;
  const TrainResult r = train(d, v, cfg);
  CHECK(r.validation_loss < 1e-3);
}

const TrainResult& linear_run() {
  static const TrainResult r = [] {
    const LinearTask t = linear_task(21);
    TrainConfig cfg;
    cfg.seed = 1;
    return train(t.train, t.val, cfg);
  }();
  return r;
}

TEST_CASE("linear target reaches the noise floor") {
  const LinearTask t = linear_task(21);
  const TrainResult& r = linear_run();
  MESSAGE("linear task validation MSE " << r.validation_loss << ", noise floor " << t.noise_var);
  CHECK(r.validation_loss <= 1.05 * t.noise_var);
}

TEST_CASE("smoothed training loss does not increase on the linear task") {
  const TrainResult& r = linear_run();
  REQUIRE(r.loss_history.size() == 2000);
  // Window means of the minibatch loss; a rise must stay within three
  // standard errors of the difference, i.e. be indistinguishable from noise.
  const std::size_t w = 100;
  double prev_mean = INFINITY, prev_se = 0.0;
  for (std::size_t b = 0; b + w <= r.loss_history.size(); b += w) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t k = b; k < b + w; ++k) mean += r.loss_history[k];
    mean /= double(w);
    for (std::size_t k = b; k < b + w; ++k) sq += std::pow(r.loss_history[k] - mean, 2);
    const double se = std::sqrt(sq / double(w - 1) / double(w));
    CAPTURE(b);
    if (std::isfinite(prev_mean)) CHECK(mean <= prev_mean + 3.0 * std::hypot(se, prev_se));
    prev_mean = mean;
    prev_se = se;
  }
  CHECK(prev_mean < 0.5 * std::accumulate(r.loss_history.begin(), r.loss_history.begin() + w, 0.0) / double(w));
}

TEST_CASE("training is reproducible from the seed") {
  const RegressionData d = gaussian_data(5, 200, 31);
  TrainConfig cfg;
  cfg.iterations = 200;
  cfg.seed = 9;
  const TrainResult a = train(d, {}, cfg);
  const TrainResult b = train(d, {}, cfg);
  CHECK(a.net == b.net);
  CHECK(std::isnan(a.validation_loss));
  cfg.seed = 10;
  CHECK_FALSE(train(d, {}, cfg).net == a.net);
}

TEST_CASE("non-finite data makes training diverge with an iteration index") {
  RegressionData d = gaussian_data(3, 20, 1);
  d.y(4) = INFINITY;
  TrainConfig cfg;
  cfg.batch_size = 20;
  try {
    train(d, {}, cfg);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(e.iteration() == 0);
  }
}

TEST_CASE("model files round trip bit-exactly") {
  const Network net = Network::he_init(36, 77);
  const auto path = temp_file("flydraw_test_model.txt").string();
  save_model(net, path, "norm.txt");
  std::string ref;
  const Network back = load_model(path, &ref);
  CHECK(back == net);
  CHECK(ref == "norm.txt");
  const RegressionData d = gaussian_data(36, 8, 3);
  CHECK(forward_batch(back, d.x) == forward_batch(net, d.x));
  std::filesystem::remove(path);
}

TEST_CASE("corrupt model files are rejected") {
  const Network net = Network::he_init(4, 1, 2, 3);
  const std::string text = format_model(net);
  CHECK_THROWS_AS(parse_model(text.substr(0, text.size() / 2)), FormatError);
  CHECK_THROWS_AS(parse_model(text.substr(0, text.size() - 4)), FormatError);

  std::string other = text;
  other.replace(other.find("flydraw-mlp 1"), 13, "flydraw-mlp 2");
  try {
    parse_model(other);
    FAIL("expected a version error");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find('2') != std::string::npos);
    CHECK(msg.find('1') != std::string::npos);
  }

  std::string shape = text;
  shape.replace(shape.find("input_dim 4"), 11, "input_dim 5");
  CHECK_THROWS_AS(parse_model(shape), FormatError);
  CHECK_THROWS_AS(load_model(temp_file("flydraw_no_such_model.txt").string()), NotFound);
}
