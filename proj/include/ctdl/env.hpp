#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ctdl/rng.hpp"
#include "ctdl/types.hpp"

namespace ctdl {

// ---------------------------------------------------------------------------
// Actions and step results
// ---------------------------------------------------------------------------

struct EnvAction {
  enum class Kind { discrete, continuous };

  Kind kind = Kind::discrete;
  int index = -1;  // discrete: 0=up, 1=down, 2=left, 3=right
  Vector force;    // continuous: each component in [-1, 1]

  static EnvAction make_discrete(int i) {
    EnvAction a;
    a.kind = Kind::discrete;
    a.index = i;
    return a;
  }

  static EnvAction make_continuous(Vector f) {
    EnvAction a;
    a.kind = Kind::continuous;
    a.force = std::move(f);
    return a;
  }

  static EnvAction make_continuous(double f) {
    return make_continuous(Vector::Constant(1, f));
  }

  bool operator==(const EnvAction& o) const {
    if (kind != o.kind) return false;
    if (kind == Kind::discrete) return index == o.index;
    return force.size() == o.force.size() && force == o.force;
  }
};

struct StepResult {
  Observation next_obs;
  double reward = 0.0;
  bool done = false;       // goal reached
  bool truncated = false;  // episode step cap hit
};

// ---------------------------------------------------------------------------
// Specs
// ---------------------------------------------------------------------------

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell& o) const { return x == o.x && y == o.y; }
};

struct GridWorldSpec {
  int width = 10;
  int height = 10;
  Cell start{0, 0};
  Cell goal{9, 9};
  std::vector<Cell> penalties;
  double step_reward = -0.05;
  double goal_reward = 1.0;
  double penalty_reward = -1.0;
  int max_steps = 1000;

  bool in_bounds(const Cell& c) const {
    return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height;
  }
  bool is_penalty(const Cell& c) const;
  void validate() const;  // throws ConfigError
};

struct MountainCarSpec {
  double power = 0.0015;
  double gravity = 0.0025;
  double goal_position = 0.45;
  double goal_reward = 100.0;
  double action_cost = 0.1;  // lambda multiplying a^2
  double min_position = -1.2;
  double max_position = 0.6;
  double max_speed = 0.07;
  double start_min = -0.6;
  double start_max = -0.4;
  int max_steps = 1000;

  void validate() const;  // throws ConfigError
};

// ---------------------------------------------------------------------------
// Pure dynamics
// ---------------------------------------------------------------------------

struct Transition {
  Observation next;
  double reward = 0.0;
  bool done = false;
};

// One grid move; clamps at the edges, reward = step_reward + cell reward of
// the landing cell (goal and penalty rewards are additive with the step cost).
Transition grid_transition(const GridWorldSpec& spec, const Observation& state,
                           const EnvAction& action);

// Closed-form mountain-car update: clamp the force, integrate velocity before
// position, zero the velocity when pinned against the left wall.
Transition mc_transition(const MountainCarSpec& spec, const Observation& state,
                         const EnvAction& action);

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

struct StateBounds {
  Vector lo;
  Vector hi;
};

// Linear map of each component onto [0, 1]; memory distances are computed in
// this space so both state dimensions weigh comparably.
Vector normalize(const StateBounds& b, const Vector& obs);
Vector denormalize(const StateBounds& b, const Vector& s);

// ---------------------------------------------------------------------------
// Episodic interface
// ---------------------------------------------------------------------------

class Environment {
 public:
  virtual ~Environment() = default;

  virtual Observation reset(RngStream& rng) = 0;
  virtual StepResult step(const EnvAction& action) = 0;

  virtual int obs_dim() const = 0;
  virtual bool discrete_actions() const = 0;
  virtual int action_count() const = 0;  // discrete variants, else 0
  virtual int action_dim() const = 0;    // continuous variants, else 0
  virtual int max_steps() const = 0;
  virtual const StateBounds& bounds() const = 0;
  virtual std::string kind() const = 0;

  Vector normalize(const Observation& obs) const {
    return ctdl::normalize(bounds(), obs);
  }
  Vector denormalize(const Vector& s) const {
    return ctdl::denormalize(bounds(), s);
  }
};

class GridWorld : public Environment {
 public:
  explicit GridWorld(GridWorldSpec spec);

  Observation reset(RngStream& rng) override;
  StepResult step(const EnvAction& action) override;

  int obs_dim() const override { return 2; }
  bool discrete_actions() const override { return true; }
  int action_count() const override { return 4; }
  int action_dim() const override { return 0; }
  int max_steps() const override { return spec_.max_steps; }
  const StateBounds& bounds() const override { return bounds_; }
  std::string kind() const override { return "grid_world"; }

  const GridWorldSpec& spec() const { return spec_; }

 private:
  GridWorldSpec spec_;
  StateBounds bounds_;
  Observation state_;
  int steps_ = 0;
};

class MountainCar : public Environment {
 public:
  explicit MountainCar(MountainCarSpec spec);

  Observation reset(RngStream& rng) override;
  StepResult step(const EnvAction& action) override;

  int obs_dim() const override { return 2; }
  bool discrete_actions() const override { return false; }
  int action_count() const override { return 0; }
  int action_dim() const override { return 1; }
  int max_steps() const override { return spec_.max_steps; }
  const StateBounds& bounds() const override { return bounds_; }
  std::string kind() const override { return "mountain_car"; }

  const MountainCarSpec& spec() const { return spec_; }

 private:
  MountainCarSpec spec_;
  StateBounds bounds_;
  Observation state_;
  int steps_ = 0;
};

// ---------------------------------------------------------------------------
// Environment config (JSON contract documented in the README)
// ---------------------------------------------------------------------------

struct EnvConfig {
  std::string env_kind = "grid_world";  // "grid_world" | "mountain_car"
  GridWorldSpec grid;
  MountainCarSpec mountain_car;

  void validate() const;
};

std::unique_ptr<Environment> make_env(const EnvConfig& cfg);

void to_json(nlohmann::json& j, const Cell& c);
void from_json(const nlohmann::json& j, Cell& c);
void to_json(nlohmann::json& j, const GridWorldSpec& s);
void from_json(const nlohmann::json& j, GridWorldSpec& s);
void to_json(nlohmann::json& j, const MountainCarSpec& s);
void from_json(const nlohmann::json& j, MountainCarSpec& s);
void to_json(nlohmann::json& j, const EnvConfig& c);
void from_json(const nlohmann::json& j, EnvConfig& c);

void to_json(nlohmann::json& j, const EnvAction& a);
void from_json(const nlohmann::json& j, EnvAction& a);

}  // namespace ctdl
