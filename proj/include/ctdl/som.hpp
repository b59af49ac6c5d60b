#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ctdl/env.hpp"
#include "ctdl/explain.hpp"
#include "ctdl/rng.hpp"
#include "ctdl/types.hpp"

namespace ctdl {

// Proximity kernel between a state and a memory: exp(-d^2 / tau). Decides how
// much the episodic value overrides the network's value, and doubles as the
// pruning score for explanations.
inline double beta_kernel(double distance, double tau) {
  return std::exp(-distance * distance / tau);
}

// One episodic memory slot. Frozen units come from a provided explanation and
// never change.
struct SomUnit {
  Vector weights;  // normalized state space
  Vector values;   // per action for discrete agents, length 1 otherwise
  bool frozen = false;
  std::optional<EnvAction> stored_action;
};

struct SomParams {
  int width = 6;
  int height = 6;
  double alpha_max = 0.3;   // weight learning rate cap
  double sigma_max = 1.5;   // neighborhood width cap, lattice units
  double sigma_min = 0.1;
  double tau = 0.05;        // beta kernel temperature
  double value_lr = 0.2;    // tabular value learning rate, deliberately high
  double delta_norm = 1.0;  // TD magnitude that saturates the plasticity gate

  void validate() const;
};

// Fixed-size self-organizing map whose plasticity is gated by the value
// network's TD error: both the learning rate and the neighborhood width are
// scaled by min(1, |td| / delta_norm), so the map drifts toward states the
// network predicts poorly and stops moving as predictions improve.
class Som {
 public:
  Som(SomParams params, int obs_dim, int value_dim, RngStream& rng);

  // Best matching unit: index minimizing Euclidean distance, lowest index on
  // ties. Returns (index, distance).
  std::pair<int, double> bmu(const Vector& s_norm) const;

  void update_weights(const Vector& s_norm, double td_dnn);
  void update_value(int unit_index, int action_index, double td_som);

  // Transplant explanation entries into randomly chosen units and freeze them.
  void seed(const Explanation& explanation, RngStream& rng);

  int size() const { return static_cast<int>(units_.size()); }
  int value_dim() const { return value_dim_; }
  const SomUnit& unit(int i) const { return units_.at(static_cast<std::size_t>(i)); }
  const SomParams& params() const { return params_; }
  int frozen_count() const;

  // Order-independent digest of the frozen units' weights, values and actions.
  std::uint64_t frozen_hash() const;

  friend void to_json(nlohmann::json& j, const Som& som);
  static Som from_json(const nlohmann::json& j);

 private:
  Som() = default;
  double lattice_dist2(int a, int b) const;

  SomParams params_;
  int obs_dim_ = 0;
  int value_dim_ = 0;
  std::vector<SomUnit> units_;
};

}  // namespace ctdl
