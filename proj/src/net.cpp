#include "ctdl/net.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace ctdl {

using nlohmann::json;

Network net_init(const std::vector<int>& layer_sizes, RngStream& rng) {
  if (layer_sizes.size() < 2)
    throw ConfigError("network needs at least an input and an output layer");
  for (int s : layer_sizes)
    if (s <= 0) throw ConfigError("network layer sizes must be positive");

  Network net;
  net.sizes = layer_sizes;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix W(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) W(r, c) = rng.uniform(-scale, scale);
    net.W.push_back(std::move(W));
    net.b.push_back(Vector::Zero(fan_out));
  }
  return net;
}

Vector forward(const Network& net, const Vector& x) {
  ForwardCache cache;
  return forward(net, x, cache);
}

Vector forward(const Network& net, const Vector& x, ForwardCache& cache) {
  if (x.size() != net.input_dim())
    throw std::invalid_argument("forward: input dimension mismatch");
  const std::size_t layers = net.W.size();
  cache.act.assign(layers + 1, Vector());
  cache.pre.assign(layers > 0 ? layers - 1 : 0, Vector());
  cache.act[0] = x;
  for (std::size_t l = 0; l < layers; ++l) {
    Vector z = net.W[l] * cache.act[l] + net.b[l];
    if (l + 1 < layers) {
      cache.pre[l] = z;
      cache.act[l + 1] = z.cwiseMax(0.0);  // rectifier on hidden layers
    } else {
      cache.act[l + 1] = std::move(z);  // identity output
    }
  }
  return cache.act.back();
}

Gradients backward(const Network& net, const ForwardCache& cache, Vector d_out) {
  const std::size_t layers = net.W.size();
  Gradients g;
  g.dW.resize(layers);
  g.db.resize(layers);
  Vector delta = std::move(d_out);
  for (std::size_t l = layers; l-- > 0;) {
    g.dW[l] = delta * cache.act[l].transpose();
    g.db[l] = delta;
    if (l > 0) {
      Vector back = net.W[l].transpose() * delta;
      const Vector& z = cache.pre[l - 1];
      for (Eigen::Index i = 0; i < back.size(); ++i)
        if (z(i) <= 0.0) back(i) = 0.0;
      delta = std::move(back);
    }
  }
  return g;
}

Optimizer::Optimizer(OptimizerConfig cfg, const Network& net) : cfg_(cfg) {
  if (cfg_.learning_rate <= 0.0)
    throw ConfigError("optimizer learning rate must be positive");
  if (cfg_.algorithm == OptimizerKind::adam) {
    for (std::size_t l = 0; l < net.W.size(); ++l) {
      mW_.push_back(Matrix::Zero(net.W[l].rows(), net.W[l].cols()));
      vW_.push_back(Matrix::Zero(net.W[l].rows(), net.W[l].cols()));
      mb_.push_back(Vector::Zero(net.b[l].size()));
      vb_.push_back(Vector::Zero(net.b[l].size()));
    }
  }
}

void Optimizer::apply(Network& net, const Gradients& g) {
  if (cfg_.algorithm == OptimizerKind::sgd) {
    for (std::size_t l = 0; l < net.W.size(); ++l) {
      net.W[l] -= cfg_.learning_rate * g.dW[l];
      net.b[l] -= cfg_.learning_rate * g.db[l];
    }
    ++t_;
    return;
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    mW_[l] = cfg_.beta1 * mW_[l] + (1.0 - cfg_.beta1) * g.dW[l];
    vW_[l] = cfg_.beta2 * vW_[l] + (1.0 - cfg_.beta2) * g.dW[l].cwiseProduct(g.dW[l]);
    mb_[l] = cfg_.beta1 * mb_[l] + (1.0 - cfg_.beta1) * g.db[l];
    vb_[l] = cfg_.beta2 * vb_[l] + (1.0 - cfg_.beta2) * g.db[l].cwiseProduct(g.db[l]);
    net.W[l] -= cfg_.learning_rate *
                ((mW_[l] / bc1).array() / ((vW_[l] / bc2).array().sqrt() + cfg_.epsilon))
                    .matrix();
    net.b[l] -= cfg_.learning_rate *
                ((mb_[l] / bc1).array() / ((vb_[l] / bc2).array().sqrt() + cfg_.epsilon))
                    .matrix();
  }
}

void td_step(Network& net, Optimizer& opt, const Vector& x, int output_index,
             double td_error) {
  if (output_index < 0 || output_index >= net.output_dim())
    throw std::invalid_argument("td_step: output index out of range");
  if (!std::isfinite(td_error))
    throw NumericalError("td_step: non-finite TD error");
  if (td_error == 0.0) return;  // zero-error fixed point, nothing to do

  ForwardCache cache;
  forward(net, x, cache);
  Vector d_out = Vector::Zero(net.output_dim());
  d_out(output_index) = -td_error;  // d(0.5 * delta^2)/d(out_k)
  opt.apply(net, backward(net, cache, std::move(d_out)));
}

GaussianPolicy policy_eval(const Network& net, const Vector& x,
                           double log_std_min, double log_std_max) {
  const Vector out = forward(net, x);
  const int dim = net.output_dim() / 2;
  GaussianPolicy p;
  p.mean = out.head(dim);
  p.stddev = Vector(dim);
  for (int i = 0; i < dim; ++i)
    p.stddev(i) = std::exp(std::clamp(out(dim + i), log_std_min, log_std_max));
  return p;
}

void policy_step(Network& net, Optimizer& opt, const Vector& x,
                 const Vector& action, double advantage, double log_std_min,
                 double log_std_max) {
  if (net.output_dim() % 2 != 0)
    throw ConfigError("policy network must output (mean, log_std) per action dim");
  const int dim = net.output_dim() / 2;
  if (action.size() != dim)
    throw std::invalid_argument("policy_step: action dimension mismatch");
  if (!std::isfinite(advantage) || !action.allFinite())
    throw NumericalError("policy_step: non-finite advantage or action");
  if (advantage == 0.0) return;

  ForwardCache cache;
  const Vector out = forward(net, x, cache);
  Vector d_out = Vector::Zero(net.output_dim());
  for (int i = 0; i < dim; ++i) {
    const double ls_raw = out(dim + i);
    const double ls = std::clamp(ls_raw, log_std_min, log_std_max);
    const double sigma = std::exp(ls);
    const double z = (action(i) - out(i)) / sigma;
    d_out(i) = -advantage * z / sigma;
    // log-density derivative wrt log_std is z^2 - 1; zero where the clamp is active
    if (ls_raw > log_std_min && ls_raw < log_std_max)
      d_out(dim + i) = -advantage * (z * z - 1.0);
  }
  opt.apply(net, backward(net, cache, std::move(d_out)));
}

void to_json(json& j, const Network& net) {
  j = json{{"layer_sizes", net.sizes}, {"activation", "relu"}};
  json weights = json::array();
  json biases = json::array();
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(net.W[l].size()));
    for (Eigen::Index r = 0; r < net.W[l].rows(); ++r)
      for (Eigen::Index c = 0; c < net.W[l].cols(); ++c) w.push_back(net.W[l](r, c));
    weights.push_back(w);
    biases.push_back(std::vector<double>(net.b[l].data(), net.b[l].data() + net.b[l].size()));
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
}

void from_json(const json& j, Network& net) {
  net = Network{};
  j.at("layer_sizes").get_to(net.sizes);
  if (net.sizes.size() < 2) throw ParseError("network checkpoint: bad layer_sizes");
  const json& weights = j.at("weights");
  const json& biases = j.at("biases");
  if (weights.size() != net.sizes.size() - 1 || biases.size() != weights.size())
    throw ParseError("network checkpoint: layer count mismatch");
  for (std::size_t l = 0; l + 1 < net.sizes.size(); ++l) {
    const int rows = net.sizes[l + 1];
    const int cols = net.sizes[l];
    auto w = weights.at(l).get<std::vector<double>>();
    if (static_cast<int>(w.size()) != rows * cols)
      throw ParseError("network checkpoint: weight matrix size mismatch");
    Matrix W(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) W(r, c) = w[static_cast<std::size_t>(r) * cols + c];
    auto b = biases.at(l).get<std::vector<double>>();
    if (static_cast<int>(b.size()) != rows)
      throw ParseError("network checkpoint: bias size mismatch");
    net.W.push_back(std::move(W));
    net.b.push_back(Eigen::Map<Vector>(b.data(), rows));
  }
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer: " + s);
}

std::string to_string(OptimizerKind k) {
  return k == OptimizerKind::sgd ? "sgd" : "adam";
}

}  // namespace ctdl
