#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ctdl/env.hpp"
#include "ctdl/rng.hpp"
#include "ctdl/types.hpp"

namespace ctdl {

// One test-trial timestep before pruning: which memory was closest, its
// tabular value for the action taken, and how much it was relied upon.
struct TraceRow {
  int t = 0;
  int unit = -1;       // memory identity (BMU index; weights are frozen in test)
  Vector memory;       // BMU weights at time of use, normalized space
  Vector memory_raw;   // same point in raw environment coordinates
  double value = 0.0;
  double beta = 0.0;
  EnvAction action;
};

struct ExplanationEntry {
  int t = 0;  // timestep of the kept row
  Vector state_norm;
  Vector state_raw;
  double value = 0.0;
  EnvAction action;
  double beta = 0.0;
};

struct Provenance {
  int agent_id = -1;
  int episodes_trained = 0;
  std::string environment;
  int test_episode = 0;
  bool shuffled = false;
};

// Temporally ordered, duplicate-free list of key decisions; every entry's
// beta is strictly above the threshold used during pruning.
struct Explanation {
  std::vector<ExplanationEntry> entries;
  double threshold = 0.0;
  Provenance provenance;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
};

bool operator==(const ExplanationEntry& a, const ExplanationEntry& b);
bool operator==(const Explanation& a, const Explanation& b);

// Keep, per unique memory, the row it was relied upon the most (beta ties go
// to the earliest timestep), drop rows with beta <= threshold, order by time.
Explanation prune(const std::vector<TraceRow>& trace, double threshold);

// Streaming equivalent of prune: rows arrive one at a time and only the
// per-memory best rows are retained, O(unique memories) working memory.
class OnlineExplanationBuilder {
 public:
  explicit OnlineExplanationBuilder(double threshold);

  void add(const TraceRow& row);
  Explanation finish(Provenance provenance) &&;

 private:
  double threshold_;
  std::vector<std::pair<int, ExplanationEntry>> list_;  // (unit, entry), append order
  std::unordered_map<int, std::size_t> position_;
};

// Size-matched control: a uniform random subset of the trace's unique
// memories, each with its best row, in temporal order.
Explanation shuffle_baseline(const std::vector<TraceRow>& trace, int target_size,
                             RngStream& rng);

// ---------------------------------------------------------------------------
// Guidance: using a provided explanation at run time
// ---------------------------------------------------------------------------

struct GuidanceHit {
  double value = 0.0;
  EnvAction action;
  double beta = 0.0;
  int entry_index = -1;
};

// Among entries whose kernel weight against s_norm exceeds the threshold,
// return the one with the highest stored value (ties: earliest entry).
std::optional<GuidanceHit> guidance_lookup(const Explanation& explanation,
                                           const Vector& s_norm, double tau,
                                           double threshold);

// ---------------------------------------------------------------------------
// File interchange (schema documented in the README)
// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const Explanation& e);
void from_json(const nlohmann::json& j, Explanation& e);

void save_explanation(const Explanation& e, const std::string& path);
Explanation load_explanation(const std::string& path);

}  // namespace ctdl
