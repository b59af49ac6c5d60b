#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ctdl/env.hpp"
#include "ctdl/explain.hpp"
#include "ctdl/net.hpp"
#include "ctdl/som.hpp"

namespace ctdl {

enum class Variant { ctdl_discrete, ctdl_continuous, a2c_baseline };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.1;
  int anneal_episodes = 200;

  // Linear anneal over the first anneal_episodes episodes, flat after.
  double at(int episode) const {
    const double f = std::min(1.0, static_cast<double>(episode) / anneal_episodes);
    return start + (end - start) * f;
  }
};

struct NetConfig {
  std::vector<int> hidden{128, 128};
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double log_std_min = -4.0;  // policy stddev clamp (continuous actors)
  double log_std_max = 1.0;
};

struct AgentConfig {
  Variant variant = Variant::ctdl_discrete;
  double gamma = 0.99;
  EpsilonSchedule epsilon;
  double guidance_threshold = 0.5;
  bool stochastic_test = false;
  NetConfig net;
  SomParams som;
  std::optional<Explanation> guidance;

  void validate() const;
};

// Blended value prediction: beta * SOM value of the BMU + (1 - beta) * network
// output, elementwise over actions.
struct CombinedEstimate {
  double beta = 0.0;
  Vector per_action;
  int bmu = -1;
  double bmu_distance = 0.0;
};

struct ActionChoice {
  EnvAction action;
  bool guided = false;  // true when a guidance entry overrode the policy
};

struct TransitionSample {
  Observation state;
  EnvAction action;
  double reward = 0.0;
  Observation next;
  bool done = false;
  bool guided = false;
};

struct TraceStep {
  int t = 0;
  Observation state;
  EnvAction action;
  double reward = 0.0;
  int bmu = -1;
  double value = 0.0;  // SOM value of the BMU for the action taken
  double beta = 0.0;
};

struct TestTrial {
  std::vector<TraceStep> steps;
  std::vector<TraceRow> rows;  // same steps viewed as explanation input
  double total_reward = 0.0;
  bool reached_goal = false;
};

struct EpisodeStats {
  double total_reward = 0.0;
  int length = 0;
  bool reached_goal = false;
};

// A CTDL agent: a gradient-trained value network plus a TD-gated episodic map,
// blended through the proximity kernel. The a2c_baseline variant drops the map
// and shows that provided explanations transfer across algorithms.
class Agent {
 public:
  Agent(AgentConfig cfg, const Environment& env, RngStream& net_rng,
        RngStream& som_rng);

  CombinedEstimate combined_estimate(const Observation& s) const;
  ActionChoice choose_action(const Observation& s, int episode, RngStream& rng) const;
  EnvAction act(const Observation& s, int episode, RngStream& rng) const {
    return choose_action(s, episode, rng).action;
  }

  void learn(const TransitionSample& tr);

  EpisodeStats train_episode(Environment& env, int episode, RngStream& rng);

  // Learning-frozen episode under the greedy policy (or the stochastic policy
  // when configured); records which memories were used and how much.
  TestTrial run_test_trial(Environment& env, RngStream& rng) const;

  // Single-pass explanation generation during a test trial; produces exactly
  // what prune(run_test_trial(...).rows, threshold) would under the same seed.
  Explanation generate_online(Environment& env, double threshold, RngStream& rng,
                              Provenance provenance = {}) const;

  // Adopt an explanation: install it as guidance and, for CTDL variants,
  // transplant it into the map as frozen entries.
  void provide_explanation(const Explanation& explanation, RngStream& rng);

  const AgentConfig& config() const { return cfg_; }
  const Som* som() const { return som_ ? &*som_ : nullptr; }
  const Network& value_net() const { return value_net_; }
  const Network& actor_net() const { return actor_net_; }
  bool has_som() const { return som_.has_value(); }
  int numerical_errors() const { return numerical_errors_; }

  friend void to_json(nlohmann::json& j, const Agent& agent);
  static Agent from_json(const nlohmann::json& j, const Environment& env);

 private:
  Agent() = default;
  Vector norm(const Observation& s) const { return normalize(bounds_, s); }
  std::optional<GuidanceHit> guidance_hit(const Vector& s_norm) const;
  double bootstrap_value(const Observation& next, bool done) const;
  void learn_discrete(const TransitionSample& tr);
  void learn_continuous(const TransitionSample& tr);
  TraceStep record_step(int t, const Observation& s, const EnvAction& action) const;

  AgentConfig cfg_;
  StateBounds bounds_;
  bool discrete_ = true;
  int action_count_ = 0;  // discrete
  int action_dim_ = 0;    // continuous
  std::string env_kind_;

  Network value_net_;  // Q-network (discrete) or critic (continuous)
  Optimizer value_opt_;
  Network actor_net_;  // continuous variants only
  Optimizer actor_opt_;
  std::optional<Som> som_;

  int numerical_errors_ = 0;
};

}  // namespace ctdl
