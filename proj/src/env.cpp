#include "ctdl/env.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace ctdl {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Spec validation
// ---------------------------------------------------------------------------

bool GridWorldSpec::is_penalty(const Cell& c) const {
  return std::find(penalties.begin(), penalties.end(), c) != penalties.end();
}

void GridWorldSpec::validate() const {
  if (width <= 0 || height <= 0)
    throw ConfigError("grid world: width and height must be positive");
  if (!in_bounds(start)) throw ConfigError("grid world: start out of bounds");
  if (!in_bounds(goal)) throw ConfigError("grid world: goal out of bounds");
  if (start == goal) throw ConfigError("grid world: start equals goal");
  for (const Cell& c : penalties) {
    if (!in_bounds(c)) throw ConfigError("grid world: penalty cell out of bounds");
  }
  if (is_penalty(goal)) throw ConfigError("grid world: goal on a penalty cell");
  if (is_penalty(start)) throw ConfigError("grid world: start on a penalty cell");
  if (max_steps <= 0) throw ConfigError("grid world: max_steps must be positive");
}

void MountainCarSpec::validate() const {
  if (power <= 0 || gravity <= 0 || action_cost <= 0)
    throw ConfigError("mountain car: power, gravity and action_cost must be positive");
  if (min_position >= max_position || max_speed <= 0)
    throw ConfigError("mountain car: degenerate state bounds");
  if (goal_position < min_position || goal_position > max_position)
    throw ConfigError("mountain car: goal_position outside position bounds");
  if (start_min > start_max || start_min < min_position || start_max > max_position)
    throw ConfigError("mountain car: invalid start position range");
  if (max_steps <= 0) throw ConfigError("mountain car: max_steps must be positive");
}

// ---------------------------------------------------------------------------
// Pure dynamics
// ---------------------------------------------------------------------------

Transition grid_transition(const GridWorldSpec& spec, const Observation& state,
                           const EnvAction& action) {
  if (action.kind != EnvAction::Kind::discrete)
    throw std::invalid_argument("grid world expects a discrete action");
  if (action.index < 0 || action.index >= 4)
    throw std::invalid_argument("grid world action index out of range");

  Cell c{static_cast<int>(state(0)), static_cast<int>(state(1))};
  Cell n = c;
  switch (action.index) {
    case 0: n.y -= 1; break;  // up
    case 1: n.y += 1; break;  // down
    case 2: n.x -= 1; break;  // left
    case 3: n.x += 1; break;  // right
  }
  if (!spec.in_bounds(n)) n = c;  // moving off the grid leaves the agent in place

  Transition t;
  t.next = Vector(2);
  t.next << static_cast<double>(n.x), static_cast<double>(n.y);
  t.done = (n == spec.goal);
  double cell_reward = 0.0;
  if (t.done)
    cell_reward = spec.goal_reward;
  else if (spec.is_penalty(n))
    cell_reward = spec.penalty_reward;  // penalty cells do not terminate
  t.reward = spec.step_reward + cell_reward;
  return t;
}

Transition mc_transition(const MountainCarSpec& spec, const Observation& state,
                         const EnvAction& action) {
  if (action.kind != EnvAction::Kind::continuous || action.force.size() != 1)
    throw std::invalid_argument("mountain car expects a 1-d continuous action");

  const double a = std::clamp(action.force(0), -1.0, 1.0);
  const double p = state(0);
  double v = state(1) + a * spec.power - spec.gravity * std::cos(3.0 * p);
  v = std::clamp(v, -spec.max_speed, spec.max_speed);
  double np = std::clamp(p + v, spec.min_position, spec.max_position);
  if (np == spec.min_position) v = 0.0;  // pinned against the left wall

  Transition t;
  t.next = Vector(2);
  t.next << np, v;
  t.done = (np >= spec.goal_position);
  t.reward = (t.done ? spec.goal_reward : 0.0) - spec.action_cost * a * a;
  return t;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

Vector normalize(const StateBounds& b, const Vector& obs) {
  if (obs.size() != b.lo.size())
    throw std::invalid_argument("normalize: dimension mismatch");
  Vector out(obs.size());
  for (Eigen::Index i = 0; i < obs.size(); ++i) {
    const double span = b.hi(i) - b.lo(i);
    if (span <= 0.0) throw ConfigError("normalize: zero-width bound");
    out(i) = (obs(i) - b.lo(i)) / span;
  }
  return out;
}

Vector denormalize(const StateBounds& b, const Vector& s) {
  if (s.size() != b.lo.size())
    throw std::invalid_argument("denormalize: dimension mismatch");
  Vector out(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double span = b.hi(i) - b.lo(i);
    if (span <= 0.0) throw ConfigError("denormalize: zero-width bound");
    out(i) = b.lo(i) + s(i) * span;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Episodic wrappers
// ---------------------------------------------------------------------------

GridWorld::GridWorld(GridWorldSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  bounds_.lo = Vector(2);
  bounds_.hi = Vector(2);
  bounds_.lo << 0.0, 0.0;
  bounds_.hi << static_cast<double>(spec_.width - 1),
      static_cast<double>(spec_.height - 1);
  state_ = Vector::Zero(2);
}

Observation GridWorld::reset(RngStream&) {
  state_ = Vector(2);
  state_ << static_cast<double>(spec_.start.x), static_cast<double>(spec_.start.y);
  steps_ = 0;
  return state_;
}

StepResult GridWorld::step(const EnvAction& action) {
  Transition t = grid_transition(spec_, state_, action);
  state_ = t.next;
  ++steps_;
  StepResult r;
  r.next_obs = t.next;
  r.reward = t.reward;
  r.done = t.done;
  r.truncated = !t.done && steps_ >= spec_.max_steps;
  return r;
}

MountainCar::MountainCar(MountainCarSpec spec) : spec_(spec) {
  spec_.validate();
  bounds_.lo = Vector(2);
  bounds_.hi = Vector(2);
  bounds_.lo << spec_.min_position, -spec_.max_speed;
  bounds_.hi << spec_.max_position, spec_.max_speed;
  state_ = Vector::Zero(2);
}

Observation MountainCar::reset(RngStream& rng) {
  state_ = Vector(2);
  state_ << rng.uniform(spec_.start_min, spec_.start_max), 0.0;
  steps_ = 0;
  return state_;
}

StepResult MountainCar::step(const EnvAction& action) {
  Transition t = mc_transition(spec_, state_, action);
  state_ = t.next;
  ++steps_;
  StepResult r;
  r.next_obs = t.next;
  r.reward = t.reward;
  r.done = t.done;
  r.truncated = !t.done && steps_ >= spec_.max_steps;
  return r;
}

// ---------------------------------------------------------------------------
// Config + JSON
// ---------------------------------------------------------------------------

void EnvConfig::validate() const {
  if (env_kind == "grid_world")
    grid.validate();
  else if (env_kind == "mountain_car")
    mountain_car.validate();
  else
    throw ConfigError("unknown environment kind: " + env_kind);
}

std::unique_ptr<Environment> make_env(const EnvConfig& cfg) {
  cfg.validate();
  if (cfg.env_kind == "grid_world") return std::make_unique<GridWorld>(cfg.grid);
  return std::make_unique<MountainCar>(cfg.mountain_car);
}

void to_json(json& j, const Cell& c) { j = json::array({c.x, c.y}); }

void from_json(const json& j, Cell& c) {
  if (!j.is_array() || j.size() != 2)
    throw ParseError("cell must be a [x, y] pair");
  c.x = j.at(0).get<int>();
  c.y = j.at(1).get<int>();
}

void to_json(json& j, const GridWorldSpec& s) {
  j = json{{"width", s.width},
           {"height", s.height},
           {"start", s.start},
           {"goal", s.goal},
           {"penalties", s.penalties},
           {"rewards",
            {{"step", s.step_reward}, {"goal", s.goal_reward}, {"penalty", s.penalty_reward}}},
           {"max_steps", s.max_steps}};
}

void from_json(const json& j, GridWorldSpec& s) {
  s = GridWorldSpec{};
  j.at("width").get_to(s.width);
  j.at("height").get_to(s.height);
  j.at("start").get_to(s.start);
  j.at("goal").get_to(s.goal);
  if (j.contains("penalties")) j.at("penalties").get_to(s.penalties);
  if (j.contains("rewards")) {
    const json& r = j.at("rewards");
    if (r.contains("step")) r.at("step").get_to(s.step_reward);
    if (r.contains("goal")) r.at("goal").get_to(s.goal_reward);
    if (r.contains("penalty")) r.at("penalty").get_to(s.penalty_reward);
  }
  if (j.contains("max_steps")) j.at("max_steps").get_to(s.max_steps);
}

void to_json(json& j, const MountainCarSpec& s) {
  j = json{{"power", s.power},
           {"gravity", s.gravity},
           {"goal_position", s.goal_position},
           {"goal_reward", s.goal_reward},
           {"action_cost", s.action_cost},
           {"min_position", s.min_position},
           {"max_position", s.max_position},
           {"max_speed", s.max_speed},
           {"start_position_range", json::array({s.start_min, s.start_max})},
           {"max_steps", s.max_steps}};
}

void from_json(const json& j, MountainCarSpec& s) {
  s = MountainCarSpec{};
  if (j.contains("power")) j.at("power").get_to(s.power);
  if (j.contains("gravity")) j.at("gravity").get_to(s.gravity);
  if (j.contains("goal_position")) j.at("goal_position").get_to(s.goal_position);
  if (j.contains("goal_reward")) j.at("goal_reward").get_to(s.goal_reward);
  if (j.contains("action_cost")) j.at("action_cost").get_to(s.action_cost);
  if (j.contains("min_position")) j.at("min_position").get_to(s.min_position);
  if (j.contains("max_position")) j.at("max_position").get_to(s.max_position);
  if (j.contains("max_speed")) j.at("max_speed").get_to(s.max_speed);
  if (j.contains("start_position_range")) {
    const json& r = j.at("start_position_range");
    if (!r.is_array() || r.size() != 2)
      throw ParseError("start_position_range must be a [lo, hi] pair");
    s.start_min = r.at(0).get<double>();
    s.start_max = r.at(1).get<double>();
  }
  if (j.contains("max_steps")) j.at("max_steps").get_to(s.max_steps);
}

void to_json(json& j, const EnvConfig& c) {
  j = json{{"kind", c.env_kind}};
  if (c.env_kind == "grid_world")
    j["grid_world"] = c.grid;
  else
    j["mountain_car"] = c.mountain_car;
}

void from_json(const json& j, EnvConfig& c) {
  c = EnvConfig{};
  j.at("kind").get_to(c.env_kind);
  if (j.contains("grid_world")) j.at("grid_world").get_to(c.grid);
  if (j.contains("mountain_car")) j.at("mountain_car").get_to(c.mountain_car);
}

void to_json(json& j, const EnvAction& a) {
  if (a.kind == EnvAction::Kind::discrete) {
    j = json{{"type", "discrete"}, {"index", a.index}};
  } else {
    std::vector<double> f(a.force.data(), a.force.data() + a.force.size());
    j = json{{"type", "continuous"}, {"force", f}};
  }
}

void from_json(const json& j, EnvAction& a) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "discrete") {
    a = EnvAction::make_discrete(j.at("index").get<int>());
  } else if (type == "continuous") {
    auto f = j.at("force").get<std::vector<double>>();
    a = EnvAction::make_continuous(Eigen::Map<Vector>(f.data(), f.size()));
  } else {
    throw ParseError("unknown action type: " + type);
  }
}

}  // namespace ctdl
