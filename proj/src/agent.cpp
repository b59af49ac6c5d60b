#include "ctdl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <nlohmann/json.hpp>

namespace ctdl {

using nlohmann::json;

Variant variant_from_string(const std::string& s) {
  if (s == "ctdl-discrete") return Variant::ctdl_discrete;
  if (s == "ctdl-continuous") return Variant::ctdl_continuous;
  if (s == "a2c-baseline") return Variant::a2c_baseline;
  throw ConfigError("unknown agent variant: " + s);
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::ctdl_discrete: return "ctdl-discrete";
    case Variant::ctdl_continuous: return "ctdl-continuous";
    case Variant::a2c_baseline: return "a2c-baseline";
  }
  return "?";
}

void AgentConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("agent: gamma must be in (0, 1]");
  if (!(epsilon.end >= 0.0 && epsilon.end <= epsilon.start && epsilon.start <= 1.0))
    throw ConfigError("agent: need 0 <= epsilon end <= epsilon start <= 1");
  if (epsilon.anneal_episodes < 1)
    throw ConfigError("agent: epsilon anneal_episodes must be >= 1");
  if (!(guidance_threshold > 0.0 && guidance_threshold < 1.0))
    throw ConfigError("agent: guidance_threshold must be in (0, 1)");
  if (net.learning_rate <= 0.0) throw ConfigError("agent: learning rate must be positive");
  if (net.log_std_min > net.log_std_max)
    throw ConfigError("agent: log_std bounds inverted");
  som.validate();
}

namespace {

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes;
  sizes.push_back(in);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

int argmax_lowest(const Vector& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = static_cast<int>(i);
  return best;
}

}  // namespace

Agent::Agent(AgentConfig cfg, const Environment& env, RngStream& net_rng,
             RngStream& som_rng)
    : cfg_(std::move(cfg)),
      bounds_(env.bounds()),
      discrete_(env.discrete_actions()),
      action_count_(env.action_count()),
      action_dim_(env.action_dim()),
      env_kind_(env.kind()) {
  cfg_.validate();
  const int obs = env.obs_dim();
  switch (cfg_.variant) {
    case Variant::ctdl_discrete: {
      if (!discrete_) throw ConfigError("ctdl-discrete requires a discrete action space");
      value_net_ = net_init(layer_sizes(obs, cfg_.net.hidden, action_count_), net_rng);
      value_opt_ = Optimizer({cfg_.net.optimizer, cfg_.net.learning_rate}, value_net_);
      som_.emplace(cfg_.som, obs, action_count_, som_rng);
      break;
    }
    case Variant::ctdl_continuous:
    case Variant::a2c_baseline: {
      if (discrete_)
        throw ConfigError(to_string(cfg_.variant) + " requires a continuous action space");
      value_net_ = net_init(layer_sizes(obs, cfg_.net.hidden, 1), net_rng);
      value_opt_ = Optimizer({cfg_.net.optimizer, cfg_.net.learning_rate}, value_net_);
      actor_net_ = net_init(layer_sizes(obs, cfg_.net.hidden, 2 * action_dim_), net_rng);
      actor_opt_ = Optimizer({cfg_.net.optimizer, cfg_.net.learning_rate}, actor_net_);
      if (cfg_.variant == Variant::ctdl_continuous)
        som_.emplace(cfg_.som, obs, 1, som_rng);
      break;
    }
  }
}

CombinedEstimate Agent::combined_estimate(const Observation& s) const {
  const Vector s_norm = norm(s);
  CombinedEstimate ce;
  const Vector dnn = forward(value_net_, s_norm);
  if (!som_) {
    ce.per_action = dnn;
    return ce;
  }
  const auto [b, dist] = som_->bmu(s_norm);
  ce.bmu = b;
  ce.bmu_distance = dist;
  ce.beta = beta_kernel(dist, cfg_.som.tau);
  ce.per_action = ce.beta * som_->unit(b).values + (1.0 - ce.beta) * dnn;
  return ce;
}

std::optional<GuidanceHit> Agent::guidance_hit(const Vector& s_norm) const {
  if (!cfg_.guidance) return std::nullopt;
  return guidance_lookup(*cfg_.guidance, s_norm, cfg_.som.tau, cfg_.guidance_threshold);
}

ActionChoice Agent::choose_action(const Observation& s, int episode,
                                  RngStream& rng) const {
  if (auto hit = guidance_hit(norm(s))) return {hit->action, true};

  if (discrete_) {
    const double eps = cfg_.epsilon.at(episode);
    if (rng.uniform() < eps)
      return {EnvAction::make_discrete(rng.uniform_int(action_count_)), false};
    return {EnvAction::make_discrete(argmax_lowest(combined_estimate(s).per_action)),
            false};
  }

  const GaussianPolicy pi =
      policy_eval(actor_net_, norm(s), cfg_.net.log_std_min, cfg_.net.log_std_max);
  Vector a(action_dim_);
  for (int i = 0; i < action_dim_; ++i)
    a(i) = std::clamp(pi.mean(i) + pi.stddev(i) * rng.normal(), -1.0, 1.0);
  return {EnvAction::make_continuous(std::move(a)), false};
}

double Agent::bootstrap_value(const Observation& next, bool /*done*/) const {
  if (auto hit = guidance_hit(norm(next))) return hit->value;
  const CombinedEstimate ce = combined_estimate(next);
  return discrete_ ? ce.per_action.maxCoeff() : ce.per_action(0);
}

void Agent::learn(const TransitionSample& tr) {
  if (discrete_)
    learn_discrete(tr);
  else
    learn_continuous(tr);
}

void Agent::learn_discrete(const TransitionSample& tr) {
  const Vector s = norm(tr.state);
  const int a = tr.action.index;
  const Vector q_dnn = forward(value_net_, s);
  const auto [b, dist] = som_->bmu(s);

  const double boot = tr.done ? 0.0 : bootstrap_value(tr.next, tr.done);
  const double target = tr.reward + cfg_.gamma * (tr.done ? 0.0 : boot);
  const double delta_dnn = target - q_dnn(a);
  const double delta_som = target - som_->unit(b).values(a);
  if (!std::isfinite(delta_dnn) || !std::isfinite(delta_som)) {
    ++numerical_errors_;  // skip the transition, keep the run alive
    return;
  }

  // Network step, then map weights, then map values, all from the
  // pre-update predictions of this transition.
  td_step(value_net_, value_opt_, s, a, delta_dnn);
  som_->update_weights(s, delta_dnn);
  som_->update_value(b, a, delta_som);
}

void Agent::learn_continuous(const TransitionSample& tr) {
  const Vector s = norm(tr.state);
  const double v_dnn = forward(value_net_, s)(0);

  int b = -1;
  double v_blend = v_dnn;
  double v_som = 0.0;
  if (som_) {
    const CombinedEstimate ce = combined_estimate(tr.state);
    b = ce.bmu;
    v_blend = ce.per_action(0);
    v_som = som_->unit(b).values(0);
  }

  const double boot = tr.done ? 0.0 : bootstrap_value(tr.next, tr.done);
  const double target = tr.reward + cfg_.gamma * (tr.done ? 0.0 : boot);
  const double advantage = target - v_blend;
  const double delta_critic = target - v_dnn;
  const double delta_som = target - v_som;
  if (!std::isfinite(delta_critic) || !std::isfinite(advantage) ||
      !std::isfinite(delta_som)) {
    ++numerical_errors_;
    return;
  }

  td_step(value_net_, value_opt_, s, 0, delta_critic);
  if (som_) {
    som_->update_weights(s, delta_critic);
    som_->update_value(b, 0, delta_som);
  }
  // Overridden actions were not sampled from the policy, so the score-function
  // estimator does not apply; the critic still learns from them.
  if (!tr.guided)
    policy_step(actor_net_, actor_opt_, s, tr.action.force, advantage,
                cfg_.net.log_std_min, cfg_.net.log_std_max);
}

EpisodeStats Agent::train_episode(Environment& env, int episode, RngStream& rng) {
  EpisodeStats st;
  Observation obs = env.reset(rng);
  while (true) {
    const ActionChoice choice = choose_action(obs, episode, rng);
    const StepResult sr = env.step(choice.action);
    learn({obs, choice.action, sr.reward, sr.next_obs, sr.done, choice.guided});
    st.total_reward += sr.reward;
    ++st.length;
    if (sr.done) {
      st.reached_goal = true;
      break;
    }
    if (sr.truncated) break;
    obs = sr.next_obs;
  }
  return st;
}

TraceStep Agent::record_step(int t, const Observation& s, const EnvAction& action) const {
  TraceStep step;
  step.t = t;
  step.state = s;
  step.action = action;
  if (som_) {
    const Vector s_norm = norm(s);
    const auto [b, dist] = som_->bmu(s_norm);
    step.bmu = b;
    step.beta = beta_kernel(dist, cfg_.som.tau);
    const int vi = discrete_ ? action.index : 0;
    step.value = som_->unit(b).values(vi);
  }
  return step;
}

namespace {

// Test trials use the greedy policy: no exploration draws for discrete agents,
// the policy mean for continuous ones (unless stochastic testing is on).
struct TestPolicy {
  const Agent& agent;
};

}  // namespace

TestTrial Agent::run_test_trial(Environment& env, RngStream& rng) const {
  TestTrial trial;
  Observation obs = env.reset(rng);
  for (int t = 0;; ++t) {
    ActionChoice choice{{}, false};
    const Vector s_norm = norm(obs);
    if (auto hit = guidance_hit(s_norm)) {
      choice = {hit->action, true};
    } else if (discrete_) {
      choice.action =
          EnvAction::make_discrete(argmax_lowest(combined_estimate(obs).per_action));
    } else {
      const GaussianPolicy pi =
          policy_eval(actor_net_, s_norm, cfg_.net.log_std_min, cfg_.net.log_std_max);
      Vector a(action_dim_);
      for (int i = 0; i < action_dim_; ++i) {
        a(i) = cfg_.stochastic_test
                   ? std::clamp(pi.mean(i) + pi.stddev(i) * rng.normal(), -1.0, 1.0)
                   : std::clamp(pi.mean(i), -1.0, 1.0);
      }
      choice.action = EnvAction::make_continuous(std::move(a));
    }

    TraceStep step = record_step(t, obs, choice.action);
    const StepResult sr = env.step(choice.action);
    step.reward = sr.reward;
    trial.steps.push_back(step);
    if (som_) {
      TraceRow row;
      row.t = t;
      row.unit = step.bmu;
      row.memory = som_->unit(step.bmu).weights;
      row.memory_raw = denormalize(bounds_, row.memory);
      row.value = step.value;
      row.beta = step.beta;
      row.action = choice.action;
      trial.rows.push_back(std::move(row));
    }
    trial.total_reward += sr.reward;
    if (sr.done) {
      trial.reached_goal = true;
      break;
    }
    if (sr.truncated) break;
    obs = sr.next_obs;
  }
  return trial;
}

Explanation Agent::generate_online(Environment& env, double threshold, RngStream& rng,
                                   Provenance provenance) const {
  OnlineExplanationBuilder builder(threshold);
  const TestTrial trial = run_test_trial(env, rng);
  for (const TraceRow& row : trial.rows) builder.add(row);
  return std::move(builder).finish(std::move(provenance));
}

void Agent::provide_explanation(const Explanation& explanation, RngStream& rng) {
  cfg_.guidance = explanation;
  if (som_) som_->seed(explanation, rng);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

json net_config_to_json(const NetConfig& n) {
  return json{{"hidden", n.hidden},
              {"optimizer", to_string(n.optimizer)},
              {"learning_rate", n.learning_rate},
              {"log_std_min", n.log_std_min},
              {"log_std_max", n.log_std_max}};
}

NetConfig net_config_from_json(const json& j) {
  NetConfig n;
  if (j.contains("hidden")) j.at("hidden").get_to(n.hidden);
  if (j.contains("optimizer"))
    n.optimizer = optimizer_kind_from_string(j.at("optimizer").get<std::string>());
  if (j.contains("learning_rate")) j.at("learning_rate").get_to(n.learning_rate);
  if (j.contains("log_std_min")) j.at("log_std_min").get_to(n.log_std_min);
  if (j.contains("log_std_max")) j.at("log_std_max").get_to(n.log_std_max);
  return n;
}

json som_params_to_json(const SomParams& p) {
  return json{{"width", p.width},         {"height", p.height},
              {"alpha_max", p.alpha_max}, {"sigma_max", p.sigma_max},
              {"sigma_min", p.sigma_min}, {"tau", p.tau},
              {"value_lr", p.value_lr},   {"delta_norm", p.delta_norm}};
}

SomParams som_params_from_json(const json& j) {
  SomParams p;
  if (j.contains("width")) j.at("width").get_to(p.width);
  if (j.contains("height")) j.at("height").get_to(p.height);
  if (j.contains("alpha_max")) j.at("alpha_max").get_to(p.alpha_max);
  if (j.contains("sigma_max")) j.at("sigma_max").get_to(p.sigma_max);
  if (j.contains("sigma_min")) j.at("sigma_min").get_to(p.sigma_min);
  if (j.contains("tau")) j.at("tau").get_to(p.tau);
  if (j.contains("value_lr")) j.at("value_lr").get_to(p.value_lr);
  if (j.contains("delta_norm")) j.at("delta_norm").get_to(p.delta_norm);
  return p;
}

}  // namespace

json agent_config_to_json(const AgentConfig& c) {
  json j{{"variant", to_string(c.variant)},
         {"gamma", c.gamma},
         {"epsilon",
          {{"start", c.epsilon.start},
           {"end", c.epsilon.end},
           {"anneal_episodes", c.epsilon.anneal_episodes}}},
         {"guidance_threshold", c.guidance_threshold},
         {"stochastic_test", c.stochastic_test},
         {"network", net_config_to_json(c.net)},
         {"som", som_params_to_json(c.som)}};
  if (c.guidance) j["guidance"] = *c.guidance;
  return j;
}

AgentConfig agent_config_from_json(const json& j) {
  AgentConfig c;
  if (j.contains("variant"))
    c.variant = variant_from_string(j.at("variant").get<std::string>());
  if (j.contains("gamma")) j.at("gamma").get_to(c.gamma);
  if (j.contains("epsilon")) {
    const json& e = j.at("epsilon");
    if (e.contains("start")) e.at("start").get_to(c.epsilon.start);
    if (e.contains("end")) e.at("end").get_to(c.epsilon.end);
    if (e.contains("anneal_episodes"))
      e.at("anneal_episodes").get_to(c.epsilon.anneal_episodes);
  }
  if (j.contains("guidance_threshold"))
    j.at("guidance_threshold").get_to(c.guidance_threshold);
  if (j.contains("stochastic_test")) j.at("stochastic_test").get_to(c.stochastic_test);
  if (j.contains("network")) c.net = net_config_from_json(j.at("network"));
  if (j.contains("som")) c.som = som_params_from_json(j.at("som"));
  if (j.contains("guidance")) c.guidance = j.at("guidance").get<Explanation>();
  return c;
}

void to_json(json& j, const Agent& agent) {
  j = json{{"config", agent_config_to_json(agent.cfg_)},
           {"value_net", agent.value_net_}};
  if (!agent.discrete_) j["actor_net"] = agent.actor_net_;
  if (agent.som_) j["som"] = *agent.som_;
}

Agent Agent::from_json(const json& j, const Environment& env) {
  AgentConfig cfg = agent_config_from_json(j.at("config"));
  cfg.validate();
  Agent agent;
  agent.cfg_ = std::move(cfg);
  agent.bounds_ = env.bounds();
  agent.discrete_ = env.discrete_actions();
  agent.action_count_ = env.action_count();
  agent.action_dim_ = env.action_dim();
  agent.env_kind_ = env.kind();
  j.at("value_net").get_to(agent.value_net_);
  agent.value_opt_ =
      Optimizer({agent.cfg_.net.optimizer, agent.cfg_.net.learning_rate}, agent.value_net_);
  if (!agent.discrete_) {
    j.at("actor_net").get_to(agent.actor_net_);
    agent.actor_opt_ = Optimizer({agent.cfg_.net.optimizer, agent.cfg_.net.learning_rate},
                                 agent.actor_net_);
  }
  if (j.contains("som")) agent.som_ = Som::from_json(j.at("som"));
  if (agent.value_net_.input_dim() != env.obs_dim())
    throw ParseError("agent checkpoint: network input does not match the environment");
  return agent;
}

}  // namespace ctdl
