#include "ctdl/explain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

namespace ctdl {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

ExplanationEntry entry_from_row(const TraceRow& row) {
  ExplanationEntry e;
  e.t = row.t;
  e.state_norm = row.memory;
  e.state_raw = row.memory_raw;
  e.value = row.value;
  e.action = row.action;
  e.beta = row.beta;
  return e;
}

// Per-memory best row: highest beta, earliest timestep on ties. Rows are
// assumed time-ordered, which every trace producer guarantees.
std::map<int, TraceRow> best_rows_by_memory(const std::vector<TraceRow>& trace) {
  std::map<int, TraceRow> best;
  for (const TraceRow& row : trace) {
    auto it = best.find(row.unit);
    if (it == best.end())
      best.emplace(row.unit, row);
    else if (row.beta > it->second.beta)
      it->second = row;
  }
  return best;
}

}  // namespace

bool operator==(const ExplanationEntry& a, const ExplanationEntry& b) {
  return a.t == b.t && a.state_norm == b.state_norm && a.state_raw == b.state_raw &&
         a.value == b.value && a.action == b.action && a.beta == b.beta;
}

bool operator==(const Explanation& a, const Explanation& b) {
  return a.entries == b.entries && a.threshold == b.threshold;
}

Explanation prune(const std::vector<TraceRow>& trace, double threshold) {
  std::vector<TraceRow> kept;
  for (const auto& [unit, row] : best_rows_by_memory(trace))
    if (row.beta > threshold) kept.push_back(row);
  std::sort(kept.begin(), kept.end(),
            [](const TraceRow& a, const TraceRow& b) { return a.t < b.t; });

  Explanation e;
  e.threshold = threshold;
  e.entries.reserve(kept.size());
  for (const TraceRow& row : kept) e.entries.push_back(entry_from_row(row));
  return e;
}

OnlineExplanationBuilder::OnlineExplanationBuilder(double threshold)
    : threshold_(threshold) {}

void OnlineExplanationBuilder::add(const TraceRow& row) {
  if (!(row.beta > threshold_)) return;
  auto it = position_.find(row.unit);
  if (it != position_.end()) {
    if (!(row.beta > list_[it->second].second.beta)) return;
    // a strictly better use of this memory: drop the old entry, append anew
    const std::size_t pos = it->second;
    list_.erase(list_.begin() + static_cast<std::ptrdiff_t>(pos));
    for (auto& [unit, p] : position_)
      if (p > pos) --p;
    position_.erase(it);
  }
  position_.emplace(row.unit, list_.size());
  list_.emplace_back(row.unit, entry_from_row(row));
}

Explanation OnlineExplanationBuilder::finish(Provenance provenance) && {
  Explanation e;
  e.threshold = threshold_;
  e.provenance = std::move(provenance);
  e.entries.reserve(list_.size());
  for (auto& [unit, entry] : list_) e.entries.push_back(std::move(entry));
  return e;
}

Explanation shuffle_baseline(const std::vector<TraceRow>& trace, int target_size,
                             RngStream& rng) {
  std::map<int, TraceRow> best = best_rows_by_memory(trace);
  if (target_size < 0 || static_cast<std::size_t>(target_size) > best.size())
    throw ConfigError("shuffle_baseline: sample size exceeds unique memory count");

  std::vector<TraceRow> rows;
  rows.reserve(best.size());
  for (const auto& [unit, row] : best) rows.push_back(row);

  std::vector<TraceRow> sampled;
  for (int i : sample_without_replacement(static_cast<int>(rows.size()), target_size, rng))
    sampled.push_back(rows[static_cast<std::size_t>(i)]);
  std::sort(sampled.begin(), sampled.end(),
            [](const TraceRow& a, const TraceRow& b) { return a.t < b.t; });

  Explanation e;
  e.threshold = 0.0;
  e.provenance.shuffled = true;
  for (const TraceRow& row : sampled) e.entries.push_back(entry_from_row(row));
  return e;
}

std::optional<GuidanceHit> guidance_lookup(const Explanation& explanation,
                                           const Vector& s_norm, double tau,
                                           double threshold) {
  std::optional<GuidanceHit> hit;
  for (std::size_t i = 0; i < explanation.entries.size(); ++i) {
    const ExplanationEntry& e = explanation.entries[i];
    const double d = (s_norm - e.state_norm).norm();
    const double b = std::exp(-d * d / tau);
    if (b <= threshold) continue;
    if (!hit || e.value > hit->value) {  // strict: value ties keep the earliest
      hit = GuidanceHit{e.value, e.action, b, static_cast<int>(i)};
    }
  }
  return hit;
}

// ---------------------------------------------------------------------------
// File interchange
// ---------------------------------------------------------------------------

void to_json(json& j, const Explanation& e) {
  json entries = json::array();
  for (const ExplanationEntry& entry : e.entries) {
    entries.push_back(
        {{"t", entry.t},
         {"state_raw", std::vector<double>(entry.state_raw.data(),
                                           entry.state_raw.data() + entry.state_raw.size())},
         {"state_norm", std::vector<double>(entry.state_norm.data(),
                                            entry.state_norm.data() + entry.state_norm.size())},
         {"value", entry.value},
         {"action", entry.action},
         {"beta", entry.beta}});
  }
  j = json{{"version", kSchemaVersion},
           {"provenance",
            {{"agent_id", e.provenance.agent_id},
             {"episodes_trained", e.provenance.episodes_trained},
             {"environment", e.provenance.environment},
             {"test_episode", e.provenance.test_episode},
             {"shuffled", e.provenance.shuffled}}},
           {"threshold", e.threshold},
           {"entries", std::move(entries)}};
}

void from_json(const json& j, Explanation& e) {
  e = Explanation{};
  const int version = j.at("version").get<int>();
  if (version != kSchemaVersion)
    throw ParseError("unsupported explanation schema version " + std::to_string(version));
  if (j.contains("provenance")) {
    const json& p = j.at("provenance");
    if (p.contains("agent_id")) p.at("agent_id").get_to(e.provenance.agent_id);
    if (p.contains("episodes_trained"))
      p.at("episodes_trained").get_to(e.provenance.episodes_trained);
    if (p.contains("environment")) p.at("environment").get_to(e.provenance.environment);
    if (p.contains("test_episode")) p.at("test_episode").get_to(e.provenance.test_episode);
    if (p.contains("shuffled")) p.at("shuffled").get_to(e.provenance.shuffled);
  }
  j.at("threshold").get_to(e.threshold);
  int last_t = -1;
  for (std::size_t i = 0; i < j.at("entries").size(); ++i) {
    const json& je = j.at("entries").at(i);
    const std::string where = "entries[" + std::to_string(i) + "]";
    ExplanationEntry entry;
    je.at("t").get_to(entry.t);
    auto raw = je.at("state_raw").get<std::vector<double>>();
    auto norm = je.at("state_norm").get<std::vector<double>>();
    entry.state_raw = Eigen::Map<Vector>(raw.data(), raw.size());
    entry.state_norm = Eigen::Map<Vector>(norm.data(), norm.size());
    je.at("value").get_to(entry.value);
    je.at("action").get_to(entry.action);
    je.at("beta").get_to(entry.beta);
    if (entry.beta < 0.0 || entry.beta > 1.0)
      throw ParseError(where + ".beta out of range [0, 1]");
    if (entry.beta < e.threshold)
      throw ParseError(where + ".beta below the pruning threshold");
    if (entry.t < 0) throw ParseError(where + ".t must be non-negative");
    if (entry.t <= last_t) throw ParseError(where + ": entries must be ordered by t");
    last_t = entry.t;
    for (const ExplanationEntry& seen : e.entries)
      if (seen.state_norm == entry.state_norm)
        throw ParseError(where + ": duplicate memory state");
    e.entries.push_back(std::move(entry));
  }
}

void save_explanation(const Explanation& e, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << json(e).dump(2) << "\n";
}

Explanation load_explanation(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open explanation file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw ParseError(path + ": " + ex.what());
  }
  try {
    return j.get<Explanation>();
  } catch (const json::exception& ex) {
    throw ParseError(path + ": " + ex.what());
  }
}

}  // namespace ctdl
