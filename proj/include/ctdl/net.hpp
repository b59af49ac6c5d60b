#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ctdl/rng.hpp"
#include "ctdl/types.hpp"

namespace ctdl {

// Dense feedforward value network: rectified hidden layers, identity output.
// W[l] is sizes[l+1] x sizes[l]; out = W x + b per layer.
struct Network {
  std::vector<int> sizes;
  std::vector<Matrix> W;
  std::vector<Vector> b;

  int input_dim() const { return sizes.front(); }
  int output_dim() const { return sizes.back(); }
};

struct ForwardCache {
  std::vector<Vector> act;  // act[0] = input, act[l+1] = layer l output
  std::vector<Vector> pre;  // pre-activations of the hidden layers
};

struct Gradients {
  std::vector<Matrix> dW;
  std::vector<Vector> db;
};

// Weights uniform in +-1/sqrt(fan_in), biases zero.
Network net_init(const std::vector<int>& layer_sizes, RngStream& rng);

Vector forward(const Network& net, const Vector& x);
Vector forward(const Network& net, const Vector& x, ForwardCache& cache);

// Backpropagate d(loss)/d(output) through the cached forward pass.
Gradients backward(const Network& net, const ForwardCache& cache, Vector d_out);

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind algorithm = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerConfig cfg, const Network& net);

  void apply(Network& net, const Gradients& g);

  const OptimizerConfig& config() const { return cfg_; }
  long step_count() const { return t_; }

 private:
  OptimizerConfig cfg_;
  std::vector<Matrix> mW_, vW_;
  std::vector<Vector> mb_, vb_;
  long t_ = 0;
};

// ---------------------------------------------------------------------------
// Training steps
// ---------------------------------------------------------------------------

// Semi-gradient TD step on 0.5 * delta^2 for one output head; the target is
// treated as a constant, so the parameter gradient is -delta * d(out_k)/d(theta).
void td_step(Network& net, Optimizer& opt, const Vector& x, int output_index,
             double td_error);

struct GaussianPolicy {
  Vector mean;
  Vector stddev;
};

// Read the actor head: first half of the outputs are means, second half
// log-stddevs (clamped to [log_std_min, log_std_max]).
GaussianPolicy policy_eval(const Network& net, const Vector& x,
                           double log_std_min, double log_std_max);

// Score-function step on -advantage * log pi(action | mean, std). Clamped
// log-std components receive no gradient.
void policy_step(Network& net, Optimizer& opt, const Vector& x,
                 const Vector& action, double advantage, double log_std_min,
                 double log_std_max);

void to_json(nlohmann::json& j, const Network& net);
void from_json(const nlohmann::json& j, Network& net);

OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string to_string(OptimizerKind k);

}  // namespace ctdl
