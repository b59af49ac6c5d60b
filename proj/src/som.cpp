#include "ctdl/som.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include <nlohmann/json.hpp>

namespace ctdl {

using nlohmann::json;

void SomParams::validate() const {
  if (width <= 0 || height <= 0)
    throw ConfigError("som: lattice dimensions must be positive");
  if (alpha_max <= 0.0 || alpha_max > 1.0)
    throw ConfigError("som: alpha_max must be in (0, 1]");
  if (sigma_min <= 0.0 || sigma_max < sigma_min)
    throw ConfigError("som: need 0 < sigma_min <= sigma_max");
  if (tau <= 0.0) throw ConfigError("som: tau must be positive");
  if (value_lr <= 0.0) throw ConfigError("som: value_lr must be positive");
  if (delta_norm <= 0.0) throw ConfigError("som: delta_norm must be positive");
}

Som::Som(SomParams params, int obs_dim, int value_dim, RngStream& rng)
    : params_(params), obs_dim_(obs_dim), value_dim_(value_dim) {
  params_.validate();
  if (obs_dim <= 0 || value_dim <= 0)
    throw ConfigError("som: observation and value dimensions must be positive");
  units_.resize(static_cast<std::size_t>(params_.width) * params_.height);
  for (SomUnit& u : units_) {
    u.weights = Vector(obs_dim);
    for (int d = 0; d < obs_dim; ++d) u.weights(d) = rng.uniform();
    u.values = Vector::Zero(value_dim);
  }
}

std::pair<int, double> Som::bmu(const Vector& s_norm) const {
  if (units_.empty()) throw ConfigError("som: empty map");
  if (s_norm.size() != obs_dim_)
    throw std::invalid_argument("som: state dimension mismatch");
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < units_.size(); ++i) {
    const double d2 = (s_norm - units_[i].weights).squaredNorm();
    if (d2 < best_d2) {  // strict: ties keep the lowest index
      best_d2 = d2;
      best = static_cast<int>(i);
    }
  }
  return {best, std::sqrt(best_d2)};
}

double Som::lattice_dist2(int a, int b) const {
  const double dx = static_cast<double>(a % params_.width - b % params_.width);
  const double dy = static_cast<double>(a / params_.width - b / params_.width);
  return dx * dx + dy * dy;
}

void Som::update_weights(const Vector& s_norm, double td_dnn) {
  if (!std::isfinite(td_dnn))
    throw NumericalError("som: non-finite TD error in weight update");
  const double rho = std::min(1.0, std::abs(td_dnn) / params_.delta_norm);
  if (rho == 0.0) return;  // gate closed, nothing moves

  const double alpha = params_.alpha_max * rho;
  const double sigma = std::max(params_.sigma_min, params_.sigma_max * rho);
  const int b = bmu(s_norm).first;
  for (int j = 0; j < size(); ++j) {
    SomUnit& u = units_[static_cast<std::size_t>(j)];
    if (u.frozen) continue;
    const double h = std::exp(-lattice_dist2(j, b) / (2.0 * sigma * sigma));
    u.weights += alpha * h * (s_norm - u.weights);
  }
}

void Som::update_value(int unit_index, int action_index, double td_som) {
  if (unit_index < 0 || unit_index >= size())
    throw std::out_of_range("som: unit index out of range");
  if (action_index < 0 || action_index >= value_dim_)
    throw std::out_of_range("som: action index out of range");
  if (!std::isfinite(td_som))
    throw NumericalError("som: non-finite TD error in value update");
  SomUnit& u = units_[static_cast<std::size_t>(unit_index)];
  if (u.frozen) return;
  u.values(action_index) += params_.value_lr * td_som;
}

void Som::seed(const Explanation& explanation, RngStream& rng) {
  if (explanation.size() > static_cast<std::size_t>(size()))
    throw ConfigError("som: explanation longer than the map");
  const std::vector<int> slots =
      sample_without_replacement(size(), static_cast<int>(explanation.size()), rng);
  for (std::size_t k = 0; k < explanation.size(); ++k) {
    const ExplanationEntry& entry = explanation.entries[k];
    if (entry.state_norm.size() != obs_dim_)
      throw ConfigError("som: explanation state dimension mismatch");
    SomUnit& u = units_[static_cast<std::size_t>(slots[k])];
    u.weights = entry.state_norm;
    u.values = Vector::Constant(value_dim_, entry.value);
    u.frozen = true;
    u.stored_action = entry.action;
  }
}

int Som::frozen_count() const {
  int n = 0;
  for (const SomUnit& u : units_)
    if (u.frozen) ++n;
  return n;
}

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t hash_vector(std::uint64_t h, const Vector& v) {
  return fnv1a(h, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

}  // namespace

std::uint64_t Som::frozen_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < units_.size(); ++i) {
    const SomUnit& u = units_[i];
    if (!u.frozen) continue;
    h = fnv1a(h, &i, sizeof(i));
    h = hash_vector(h, u.weights);
    h = hash_vector(h, u.values);
    if (u.stored_action) {
      const int kind = static_cast<int>(u.stored_action->kind);
      h = fnv1a(h, &kind, sizeof(kind));
      h = fnv1a(h, &u.stored_action->index, sizeof(int));
      h = hash_vector(h, u.stored_action->force);
    }
  }
  return h;
}

void to_json(json& j, const Som& som) {
  json units = json::array();
  for (const SomUnit& u : som.units_) {
    json ju{{"weights", std::vector<double>(u.weights.data(),
                                            u.weights.data() + u.weights.size())},
            {"values", std::vector<double>(u.values.data(),
                                           u.values.data() + u.values.size())},
            {"frozen", u.frozen}};
    if (u.stored_action)
      ju["action"] = *u.stored_action;
    else
      ju["action"] = nullptr;
    units.push_back(std::move(ju));
  }
  j = json{{"width", som.params_.width},
           {"height", som.params_.height},
           {"alpha_max", som.params_.alpha_max},
           {"sigma_max", som.params_.sigma_max},
           {"sigma_min", som.params_.sigma_min},
           {"tau", som.params_.tau},
           {"value_lr", som.params_.value_lr},
           {"delta_norm", som.params_.delta_norm},
           {"obs_dim", som.obs_dim_},
           {"value_dim", som.value_dim_},
           {"units", std::move(units)}};
}

Som Som::from_json(const json& j) {
  Som som;
  j.at("width").get_to(som.params_.width);
  j.at("height").get_to(som.params_.height);
  j.at("alpha_max").get_to(som.params_.alpha_max);
  j.at("sigma_max").get_to(som.params_.sigma_max);
  j.at("sigma_min").get_to(som.params_.sigma_min);
  j.at("tau").get_to(som.params_.tau);
  j.at("value_lr").get_to(som.params_.value_lr);
  j.at("delta_norm").get_to(som.params_.delta_norm);
  j.at("obs_dim").get_to(som.obs_dim_);
  j.at("value_dim").get_to(som.value_dim_);
  som.params_.validate();
  const json& units = j.at("units");
  if (static_cast<int>(units.size()) != som.params_.width * som.params_.height)
    throw ParseError("som checkpoint: unit count mismatch");
  for (const json& ju : units) {
    SomUnit u;
    auto w = ju.at("weights").get<std::vector<double>>();
    auto v = ju.at("values").get<std::vector<double>>();
    if (static_cast<int>(w.size()) != som.obs_dim_ ||
        static_cast<int>(v.size()) != som.value_dim_)
      throw ParseError("som checkpoint: unit dimension mismatch");
    u.weights = Eigen::Map<Vector>(w.data(), w.size());
    u.values = Eigen::Map<Vector>(v.data(), v.size());
    ju.at("frozen").get_to(u.frozen);
    if (!ju.at("action").is_null()) u.stored_action = ju.at("action").get<EnvAction>();
    if (u.frozen && !u.stored_action)
      throw ParseError("som checkpoint: frozen unit without a stored action");
    som.units_.push_back(std::move(u));
  }
  return som;
}

}  // namespace ctdl
